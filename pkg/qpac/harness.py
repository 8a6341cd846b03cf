"""Experiment runner: random ground truth, sampled training data, fit with the
family learner, held-out generalization, CSV/JSON reports."""

import csv
import io
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Final

import dacite
import numpy as np
from tqdm import tqdm

from . import core, eom, mps, pac, stabilizer, types, util
from .core import (
    Measurement,
    MeasurementDistribution,
    Provenance,
    TrainingExample,
    TrainingSet,
)
from .types import DistributionKind, Family

LOG = logging.getLogger(__name__)

REPORT_COLUMNS: Final[tuple[str, ...]] = (
    "trial",
    "m_train",
    "fit_status",
    "max_train_residual",
    "heldout_failure_rate",
    "wall_time_ms",
)
STATUS_OK: Final[str] = "OK"
REPORT_FORMAT: Final[str] = "report/1"


@dataclass
class ShotNoise:
    shots: int


@dataclass
class ExperimentConfig:
    """One batch of trials. n is the qubit count; the eom family also needs
    lambda_size and draws its measurements from a pool of pool_size entries."""

    family: Family
    n: int
    m_train: int
    lambda_size: int | None = None
    distribution: MeasurementDistribution = field(default_factory=MeasurementDistribution)
    m_heldout: int = types.DEFAULT_HELDOUT
    eta: float = 0.0
    epsilon: float = 0.1
    delta: float = 0.05
    gamma: float = 0.1
    trials: int = 1
    master_seed: int = 0
    shot_noise: ShotNoise | None = None
    # Stabilizer family
    max_backtracks: int | None = None  # None means 2n
    # Chain family
    bond_cap: int = 2
    truth_gate_count: int | None = None  # None means 2n
    truth_d_budget: int = 1
    restarts: int = 8
    max_iters: int = 500
    # Eom family
    pool_size: int | None = None  # None means m_train + m_heldout
    inject_contradiction: bool = False
    record_timing: bool = False

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        try:
            cfg = dacite.from_dict(
                data_class=cls,
                data=data,
                config=dacite.Config(strict=True, cast=[Family, DistributionKind, float]),
            )
        except (dacite.DaciteError, ValueError) as e:
            raise types.FormatError(f"Bad experiment config: {e}") from e
        cfg.validate()
        return cfg

    def occam_params(self, settings_c: float = types.DEFAULT_OCCAM_C) -> pac.OccamParams:
        return pac.OccamParams(
            n=self.n,
            epsilon=self.epsilon,
            delta=self.delta,
            gamma=self.gamma,
            eta=self.eta,
            c=settings_c,
        )

    def validate(self, *, oracle_cap: int = types.DEFAULT_ORACLE_CAP) -> None:
        for name in ("n", "m_train", "m_heldout", "trials", "bond_cap", "restarts", "max_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        self.occam_params()
        self.distribution.validate(self.n)
        if self.shot_noise is not None and self.shot_noise.shots < 1:
            raise ValueError(f"shots must be >= 1, got {self.shot_noise.shots}")
        if self.family in (Family.STABILIZER, Family.CHAIN) and self.n > oracle_cap:
            raise types.CapExceeded(f"{self.family} ground truth limited to n <= {oracle_cap}")
        if (
            self.family == Family.STABILIZER
            and self.distribution.kind == DistributionKind.CIRCUIT_FAMILY
            and not self.distribution.clifford
        ):
            raise ValueError("The stabilizer family needs Clifford circuit measurements")
        if self.family == Family.CHAIN and self.eta <= 0:
            raise ValueError("The chain learner needs eta > 0")
        if self.family == Family.EOM:
            if self.lambda_size is None or self.lambda_size < 1:
                raise ValueError("The eom family needs lambda_size >= 1")
            if self.pool_size is not None and self.pool_size < 1:
                raise ValueError(f"pool_size must be >= 1, got {self.pool_size}")


@dataclass(frozen=True)
class TrialRow:
    trial: int
    m_train: int
    fit_status: str
    max_train_residual: float | None
    heldout_failure_rate: float | None
    wall_time_ms: int = 0


@dataclass(frozen=True)
class Aggregate:
    mean_failure_rate: float | None
    failure_rate_stderr: float | None
    fit_success_rate: float
    occam_m: int
    meets_occam: bool
    passed: bool | None  # mean failure rate <= delta, None when no trial fit


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    rows: tuple[TrialRow, ...]
    aggregate: Aggregate


##
# Ground truth


@dataclass
class _Truth:
    """Exact simulator of the trial's true state, the learner, and the trial's
    measurement stream"""

    oracle: Callable[[Measurement], float]
    learner: core.Learner[Any]
    measurements: list[Measurement]
    descriptor: str
    exact_values: bool = False  # Values already lie on {0, 1/2, 1}


def _stabilizer_truth(
    cfg: ExperimentConfig, seeds: list[int], value_tolerance: float
) -> _Truth:
    n = cfg.n
    circuit = core.random_clifford_circuit(n, 5 * n, np.random.default_rng(seeds[0]))
    tableau = stabilizer.tableau_from_circuit(circuit)
    meas = core.sample_measurements(cfg.distribution, n, cfg.m_train + cfg.m_heldout, seeds[1])
    return _Truth(
        oracle=lambda m: stabilizer.stabilizer_value(tableau, m),
        learner=stabilizer.StabilizerLearner(
            tolerance=value_tolerance, max_backtracks=cfg.max_backtracks
        ),
        measurements=meas,
        descriptor=f"clifford({5 * n} gates)",
        exact_values=True,
    )


def _chain_truth(cfg: ExperimentConfig, seeds: list[int]) -> _Truth:
    n = cfg.n
    rng = np.random.default_rng(seeds[0])
    gate_count = 2 * n if cfg.truth_gate_count is None else cfg.truth_gate_count
    circuit = core.random_circuit(n, gate_count, rng, d_budget=cfg.truth_d_budget)
    inputs = [core.random_unitary(2, rng)[:, 0] for _ in range(n)]
    d = core.circuit_schmidt_bound(circuit)
    exact_bond = 2 ** (n // 2)
    truth = mps.chain_from_circuit(circuit, inputs, bond_cap=min(4**d, exact_bond))
    meas = core.sample_measurements(cfg.distribution, n, cfg.m_train + cfg.m_heldout, seeds[1])
    learner = mps.ChainLearner(
        cfg.bond_cap,
        budget=mps.ChainBudget(restarts=cfg.restarts, max_iters=cfg.max_iters),
        seed=seeds[3],
        max_bond=exact_bond,
    )
    return _Truth(
        oracle=lambda m: mps.chain_expectation(truth, m, max_bond=exact_bond),
        learner=learner,
        measurements=meas,
        descriptor=f"chain(D={d}, ranks={list(truth.ranks)})",
    )


def _eom_pool(cfg: ExperimentConfig, rng: np.random.Generator) -> list[Measurement]:
    size = cfg.pool_size or cfg.m_train + cfg.m_heldout
    pool: dict[str, Measurement] = {}
    for _ in range(8):
        for m in core.sample_measurements(cfg.distribution, cfg.n, size, rng):
            pool.setdefault(core.measurement_key(m), m)
            if len(pool) == size:
                return list(pool.values())
    LOG.debug(f"Measurement pool holds {len(pool)} distinct entries, {size} requested")
    return list(pool.values())


def _eom_truth(cfg: ExperimentConfig, seeds: list[int], lambda_budget_factor: int) -> _Truth:
    assert cfg.lambda_size is not None
    rng = np.random.default_rng(seeds[0])
    pool = _eom_pool(cfg, rng)
    model = eom.random_model(cfg.lambda_size, pool, rng, budget_factor=lambda_budget_factor)
    q_true = eom.random_preparation(cfg.lambda_size, rng)
    picks = np.random.default_rng(seeds[1]).integers(len(pool), size=cfg.m_train + cfg.m_heldout)
    return _Truth(
        oracle=lambda m: eom.eom_expectation(q_true, model, m),
        learner=eom.PreparationLearner(model),
        measurements=[pool[int(i)] for i in picks],
        descriptor=f"eom(l={cfg.lambda_size}, pool={len(pool)})",
    )


def _contradict(training: TrainingSet) -> TrainingSet:
    """Repeat the first measurement with a value no hypothesis can match
    alongside the original"""
    first = training.examples[0]
    clash = TrainingExample(first.measurement, 0.0 if first.value >= 0.5 else 1.0)
    return replace(training, examples=training.examples + (clash,))


##
# Running


def _truth(
    cfg: ExperimentConfig, seeds: list[int], value_tolerance: float, lambda_budget_factor: int
) -> _Truth:
    match cfg.family:
        case Family.STABILIZER:
            return _stabilizer_truth(cfg, seeds, value_tolerance)
        case Family.CHAIN:
            return _chain_truth(cfg, seeds)
        case Family.EOM:
            return _eom_truth(cfg, seeds, lambda_budget_factor)
    raise ValueError(f"Unknown family {cfg.family}")


def _run_trial(
    cfg: ExperimentConfig,
    trial: int,
    trial_seed: int,
    *,
    value_tolerance: float,
    shot_snap_threshold: float,
    lambda_budget_factor: int,
) -> TrialRow:
    """One trial. Any qpac error, from ground truth, learner or scoring, becomes
    the row's fit_status."""
    seeds = util.derive_seeds(trial_seed, 4)  # truth, measurements, noise, learner
    start = time.perf_counter()
    try:
        truth = _truth(cfg, seeds, value_tolerance, lambda_budget_factor)
        train_meas = truth.measurements[: cfg.m_train]
        heldout = truth.measurements[cfg.m_train :]
        provenance = Provenance(truth.descriptor, cfg.distribution, trial_seed)
        training = core.make_training_set(truth.oracle, train_meas, provenance, n=cfg.n)
        if cfg.shot_noise is not None:
            training = core.add_shot_noise(training, cfg.shot_noise.shots, seeds[2])
            if truth.exact_values:
                training = stabilizer.snap_training_set(training, shot_snap_threshold)
        if cfg.inject_contradiction:
            training = _contradict(training)

        start = time.perf_counter()
        hypothesis = truth.learner.fit(training, cfg.eta)
        wall = _elapsed(cfg, start)

        train_res = truth.learner.max_residual(hypothesis, training)
        failures = sum(
            abs(truth.learner.predict(hypothesis, m) - truth.oracle(m)) > cfg.epsilon
            for m in heldout
        )
    except types.QpacError as e:
        status = types.status_name(e)
        LOG.warning(f"Trial {trial}: {type(e).__name__}: {e}")
        best = e.best_residual if isinstance(e, types.BudgetExhausted) else None
        return TrialRow(trial, cfg.m_train, status, best, None, _elapsed(cfg, start))
    return TrialRow(trial, cfg.m_train, STATUS_OK, train_res, failures / len(heldout), wall)


def _elapsed(cfg: ExperimentConfig, start: float) -> int:
    if not cfg.record_timing:
        return 0
    return int(round((time.perf_counter() - start) * 1000))


def _aggregate(cfg: ExperimentConfig, rows: list[TrialRow], occam_c: float) -> Aggregate:
    rates = [r.heldout_failure_rate for r in rows if r.heldout_failure_rate is not None]
    occam_m = pac.occam_sample_bound(cfg.occam_params(occam_c))
    if rates:
        mean = float(np.mean(rates))
        total = len(rates) * cfg.m_heldout
        stderr = math.sqrt(mean * (1 - mean) / total)
    else:
        mean, stderr = None, None
    return Aggregate(
        mean_failure_rate=mean,
        failure_rate_stderr=stderr,
        fit_success_rate=len(rates) / len(rows),
        occam_m=occam_m,
        meets_occam=cfg.m_train >= occam_m,
        passed=None if mean is None else mean <= cfg.delta,
    )


def run_experiment(
    cfg: ExperimentConfig,
    *,
    oracle_cap: int = types.DEFAULT_ORACLE_CAP,
    value_tolerance: float = types.DEFAULT_VALUE_TOLERANCE,
    shot_snap_threshold: float = types.DEFAULT_SHOT_SNAP_THRESHOLD,
    lambda_budget_factor: int = types.DEFAULT_LAMBDA_BUDGET_FACTOR,
    occam_c: float = types.DEFAULT_OCCAM_C,
    progress: bool = False,
) -> ExperimentReport:
    """Deterministic given cfg.master_seed. Learner failures become the trial's
    fit_status and never stop the batch."""
    cfg.validate(oracle_cap=oracle_cap)
    LOG.info(
        f"Experiment: {cfg.family} n={cfg.n} m_train={cfg.m_train} trials={cfg.trials} "
        f"seed={cfg.master_seed}"
    )
    rows = []
    trial_seeds = util.derive_seeds(cfg.master_seed, cfg.trials)
    for trial, seed in enumerate(
        tqdm(trial_seeds, desc="trials", file=sys.stderr, disable=not progress)
    ):
        rows.append(
            _run_trial(
                cfg,
                trial,
                seed,
                value_tolerance=value_tolerance,
                shot_snap_threshold=shot_snap_threshold,
                lambda_budget_factor=lambda_budget_factor,
            )
        )
    rows.sort(key=lambda r: r.trial)
    agg = _aggregate(cfg, rows, occam_c)
    LOG.info(
        f"Experiment done: {agg.fit_success_rate:.0%} fit, mean held-out failure "
        f"{agg.mean_failure_rate}, occam m={agg.occam_m}"
    )
    return ExperimentReport(cfg, tuple(rows), agg)


##
# Reports


def _cell(v: Any) -> str:
    if v is None:
        return ""
    return repr(float(v)) if isinstance(v, float) else str(v)


def report_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in report.rows:
        writer.writerow([_cell(getattr(row, c)) for c in REPORT_COLUMNS])
    return buf.getvalue()


def report_json(report: ExperimentReport) -> str:
    obj = {
        "format": REPORT_FORMAT,
        "config": asdict(report.config),
        "rows": [asdict(r) for r in report.rows],
        "aggregate": asdict(report.aggregate),
    }
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


##
# Calibration


@dataclass(frozen=True)
class Calibration:
    c: float
    m_train: int
    passed: bool
    iterations: int
    method: str = "log-bisection"


def calibrate_occam_constant(
    cfg: ExperimentConfig,
    *,
    c_low: float = 1e-12,
    c_high: float = 1.0,
    max_m: int = 2000,
    iterations: int = 12,
    **run_kwargs: Any,
) -> Calibration:
    """Smallest Occam constant C (to the bisection resolution) for which training
    on occam_sample_bound examples keeps the mean held-out failure rate <= delta.
    C is bisected in log space; candidates whose bound exceeds max_m are capped
    there. The result is reported and never written back into settings."""
    if not 0 < c_low < c_high:
        raise ValueError(f"Need 0 < c_low < c_high, got {c_low}, {c_high}")

    def attempt(c: float) -> tuple[bool, int]:
        m = min(pac.occam_sample_bound(cfg.occam_params(c)), max_m)
        report = run_experiment(replace(cfg, m_train=max(m, 1)), occam_c=c, **run_kwargs)
        return bool(report.aggregate.passed), max(m, 1)

    ok_high, m_high = attempt(c_high)
    if not ok_high:
        LOG.warning(f"Calibration failed even at C={c_high} (m={m_high})")
        return Calibration(c_high, m_high, False, 1)
    lo, hi = math.log(c_low), math.log(c_high)
    best_m = m_high
    for _ in range(iterations):
        mid = (lo + hi) / 2
        ok, m = attempt(math.exp(mid))
        if ok:
            hi, best_m = mid, m
        else:
            lo = mid
    c = math.exp(hi)
    LOG.info(f"Calibrated Occam constant C={c:.3g} (m={best_m})")
    return Calibration(c, best_m, True, iterations + 1)

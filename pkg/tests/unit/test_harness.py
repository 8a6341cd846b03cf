import json

import pytest
from pytest_mock import MockerFixture

from qpac import core, harness, pac, stabilizer, types
from qpac.harness import ExperimentConfig, ShotNoise
from qpac.types import Family

HEADER = "trial,m_train,fit_status,max_train_residual,heldout_failure_rate,wall_time_ms"


def _stabilizer_cfg(**kwargs: object) -> ExperimentConfig:
    base: dict[str, object] = dict(family=Family.STABILIZER, n=2, m_train=8, m_heldout=50, master_seed=3)
    base.update(kwargs)
    return ExperimentConfig(**base)  # type: ignore[arg-type]


def test_stabilizer_report_is_reproducible() -> None:
    cfg = _stabilizer_cfg(trials=3)
    a = harness.report_csv(harness.run_experiment(cfg))
    b = harness.report_csv(harness.run_experiment(cfg))
    assert a == b
    lines = a.splitlines()
    assert lines[0] == HEADER
    assert len(lines) == 4
    assert [line.split(",")[0] for line in lines[1:]] == ["0", "1", "2"]


def test_csv_floats_round_trip() -> None:
    report = harness.run_experiment(_stabilizer_cfg(m_train=2, m_heldout=30, trials=4))
    for row, line in zip(report.rows, harness.report_csv(report).splitlines()[1:]):
        cell = line.split(",")[4]
        if row.heldout_failure_rate is None:
            assert cell == ""
        else:
            assert cell == repr(row.heldout_failure_rate)
            assert float(cell) == row.heldout_failure_rate


def test_seed_changes_data() -> None:
    a = harness.run_experiment(_stabilizer_cfg(m_train=2, trials=4, master_seed=1))
    b = harness.run_experiment(_stabilizer_cfg(m_train=2, trials=4, master_seed=2))
    assert a.rows != b.rows


def test_stabilizer_rows() -> None:
    report = harness.run_experiment(_stabilizer_cfg(m_train=16, trials=2))
    for row in report.rows:
        assert row.fit_status == harness.STATUS_OK
        assert row.max_train_residual == 0.0
        assert 0.0 <= row.heldout_failure_rate <= 1.0
        assert row.wall_time_ms == 0
    agg = report.aggregate
    assert agg.fit_success_rate == 1.0
    assert agg.occam_m == pac.occam_sample_bound(report.config.occam_params())
    assert not agg.meets_occam


def test_stabilizer_shot_noise_is_snapped() -> None:
    report = harness.run_experiment(_stabilizer_cfg(shot_noise=ShotNoise(2000), trials=2))
    assert all(r.fit_status == harness.STATUS_OK for r in report.rows)


def test_stabilizer_contradiction() -> None:
    report = harness.run_experiment(_stabilizer_cfg(inject_contradiction=True))
    (row,) = report.rows
    assert row.fit_status == "INCONSISTENT_DATA"
    assert row.heldout_failure_rate is None
    assert report.aggregate.mean_failure_rate is None
    assert report.aggregate.passed is None
    line = harness.report_csv(report).splitlines()[1]
    assert line == "0,8,INCONSISTENT_DATA,,,0"


def test_eom_exact_identification() -> None:
    cfg = ExperimentConfig(
        family=Family.EOM,
        n=3,
        m_train=40,
        lambda_size=8,
        pool_size=20,
        m_heldout=100,
        trials=3,
        master_seed=5,
    )
    report = harness.run_experiment(cfg)
    for row in report.rows:
        assert row.fit_status == harness.STATUS_OK
        assert row.max_train_residual <= 1e-9
        assert row.heldout_failure_rate == 0.0
    assert report.aggregate.passed


def test_chain_contradiction_exhausts_budget() -> None:
    cfg = ExperimentConfig(
        family=Family.CHAIN,
        n=2,
        m_train=4,
        m_heldout=10,
        eta=0.05,
        restarts=1,
        max_iters=20,
        inject_contradiction=True,
    )
    report = harness.run_experiment(cfg)
    (row,) = report.rows
    assert row.fit_status == "BUDGET_EXHAUSTED"
    assert row.max_train_residual >= 0.25
    assert row.heldout_failure_rate is None


def test_timing_recorded_only_on_request() -> None:
    report = harness.run_experiment(_stabilizer_cfg(record_timing=True))
    assert report.rows[0].wall_time_ms >= 0


def test_report_json() -> None:
    report = harness.run_experiment(_stabilizer_cfg(trials=2))
    obj = json.loads(harness.report_json(report))
    assert obj["format"] == harness.REPORT_FORMAT
    assert obj["config"]["family"] == "stabilizer"
    assert [r["trial"] for r in obj["rows"]] == [0, 1]
    assert set(obj["aggregate"]) >= {"mean_failure_rate", "occam_m", "passed"}


##
# Config


def test_config_from_dict() -> None:
    cfg = ExperimentConfig.from_dict(
        {
            "family": "chain",
            "n": 4,
            "m_train": 10,
            "eta": 0.05,
            "epsilon": 0.2,
            "distribution": {"kind": "circuit_family", "gate_count": 4, "d_budget": 1},
            "shot_noise": {"shots": 100},
        }
    )
    assert cfg.family == Family.CHAIN
    assert cfg.distribution.kind == types.DistributionKind.CIRCUIT_FAMILY
    assert cfg.shot_noise == ShotNoise(100)


def test_config_accepts_integer_floats() -> None:
    cfg = ExperimentConfig.from_dict({"family": "eom", "n": 2, "m_train": 3, "lambda_size": 2, "eta": 0})
    assert cfg.eta == 0.0


@pytest.mark.parametrize(
    "data",
    [
        {"family": "stabilizer", "n": 2},
        {"family": "stabilizer", "n": 2, "m_train": 3, "colour": "red"},
        {"family": "clifford", "n": 2, "m_train": 3},
        {"family": "stabilizer", "n": "two", "m_train": 3},
    ],
)
def test_config_format_errors(data: dict[str, object]) -> None:
    with pytest.raises(types.FormatError):
        ExperimentConfig.from_dict(data)


def test_scoring_error_becomes_row_status(mocker: MockerFixture) -> None:
    mocker.patch.object(
        stabilizer.StabilizerLearner, "predict", side_effect=types.CapExceeded("too wide")
    )
    report = harness.run_experiment(_stabilizer_cfg(trials=3))
    assert len(report.rows) == 3
    for row in report.rows:
        assert row.fit_status == "CAP_EXCEEDED"
        assert row.heldout_failure_rate is None
    assert report.aggregate.fit_success_rate == 0.0


def test_ground_truth_error_becomes_row_status(mocker: MockerFixture) -> None:
    mocker.patch.object(stabilizer, "stabilizer_value", side_effect=types.CapExceeded("too wide"))
    report = harness.run_experiment(_stabilizer_cfg(trials=2))
    assert [row.fit_status for row in report.rows] == ["CAP_EXCEEDED", "CAP_EXCEEDED"]


def test_config_validation() -> None:
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"family": "chain", "n": 2, "m_train": 3})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"family": "eom", "n": 2, "m_train": 3})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"family": "stabilizer", "n": 2, "m_train": 0})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"family": "stabilizer", "n": 2, "m_train": 3, "eta": 0.2})
    with pytest.raises(types.CapExceeded):
        ExperimentConfig.from_dict({"family": "stabilizer", "n": 13, "m_train": 3})
    with pytest.raises(ValueError, match="Clifford"):
        ExperimentConfig(
            family=Family.STABILIZER,
            n=4,
            m_train=3,
            distribution=core.MeasurementDistribution.circuit_family(4, 1),
        ).validate()


##
# Calibration


def test_calibration_reports_constant() -> None:
    cfg = _stabilizer_cfg(m_heldout=50)
    cal = harness.calibrate_occam_constant(cfg, max_m=40, iterations=2)
    assert cal.passed
    assert cal.iterations == 3
    assert 1e-12 <= cal.c <= 1.0
    assert 1 <= cal.m_train <= 40
    with pytest.raises(ValueError):
        harness.calibrate_occam_constant(cfg, c_low=1.0, c_high=0.5)


@pytest.mark.slow
def test_stabilizer_acceptance() -> None:
    n = 8
    rates: dict[int, float | None] = {}
    for m in (n, 2 * n, 4 * n, 6 * n, 8 * n):
        cfg = ExperimentConfig(
            family=Family.STABILIZER,
            n=n,
            m_train=m,
            m_heldout=500,
            trials=50,
            master_seed=17,
            max_backtracks=1000,
        )
        report = harness.run_experiment(cfg)
        if m >= 6 * n:
            assert report.aggregate.fit_success_rate >= 0.95
        rates[m] = report.aggregate.mean_failure_rate
    curve = [rates[n], rates[2 * n], rates[4 * n], rates[8 * n]]
    assert all(r is not None for r in curve)
    # 0.01 covers held-out sampling noise between neighbouring sizes
    for a, b in zip(curve, curve[1:]):
        assert b <= a + 0.01
    assert curve[-1] < curve[0]


@pytest.mark.slow
def test_chain_acceptance() -> None:
    cfg = ExperimentConfig(
        family=Family.CHAIN,
        n=6,
        m_train=200,
        m_heldout=200,
        eta=0.02,
        epsilon=0.1,
        bond_cap=2,
        restarts=32,
        trials=25,
        master_seed=9,
        distribution=core.MeasurementDistribution.uniform_pauli(),
    )
    report = harness.run_experiment(cfg)
    assert report.aggregate.fit_success_rate >= 0.8
    # Successful fits are within epsilon on at least 90% of held-out measurements
    for row in report.rows:
        if row.fit_status == harness.STATUS_OK:
            assert row.heldout_failure_rate is not None
            assert row.heldout_failure_rate <= 0.1

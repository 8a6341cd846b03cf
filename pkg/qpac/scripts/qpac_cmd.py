import argparse
import logging
import sys
import textwrap
from pathlib import Path
from typing import Any, Callable, Final, Protocol

import numpy as np

from qpac import (
    codec,
    config,
    core,
    eom,
    harness,
    mps,
    oracle,
    pac,
    stabilizer,
    types,
    util,
)
from qpac.types import Family

LOG = logging.getLogger(__name__)

EXIT_OK: Final[int] = 0
EXIT_DATA: Final[int] = 2
EXIT_FORMAT: Final[int] = 3
EXIT_CAP: Final[int] = 4


def _read_file(path: str, expect: str | tuple[str, ...]) -> Any:
    try:
        text = Path(path).expanduser().read_text()
    except OSError as e:
        raise types.FormatError(f"Cannot read {path}: {e}") from e
    return codec.loads(text, expect)


def _seed(args: argparse.Namespace) -> int:
    return 0 if args.seed is None else int(args.seed)


def _emit(text: str, out: str | None) -> None:
    """Primary output goes to --out, or stdout. Written only once complete."""
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).expanduser().write_text(text)


def _add_distribution_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--distribution",
        choices=[k.value for k in types.DistributionKind],
        default=types.DistributionKind.UNIFORM_PAULI.value,
        help="Measurement distribution (default: %(default)s)",
    )
    parser.add_argument("--max-weight", type=int, default=None, help="Largest Pauli weight")
    parser.add_argument("--signed", action="store_true", help="Draw Pauli signs at random")
    parser.add_argument("--gate-count", type=int, default=4, help="Gates per circuit measurement")
    parser.add_argument("--d-budget", type=int, default=1, help="Max gates across any cut")
    parser.add_argument("--clifford", action="store_true", help="Clifford gates only")
    parser.add_argument("--max-range", type=int, default=1, help="Max distance of 2 qubit gates")


def _distribution(args: argparse.Namespace) -> core.MeasurementDistribution:
    if args.distribution == types.DistributionKind.UNIFORM_PAULI:
        return core.MeasurementDistribution.uniform_pauli(args.max_weight, args.signed)
    return core.MeasurementDistribution.circuit_family(
        args.gate_count, args.d_budget, args.clifford, args.max_range
    )


class Cmd(Protocol):
    CMD: str

    def cmd(self) -> str:
        return self.CMD

    def run(self, args: argparse.Namespace, settings: config.Settings) -> None: ...
    def add(self, parent_subparsers: "argparse._SubParsersAction[Any]") -> None: ...


class GenCircuitCmd(Cmd):
    CMD = "gen-circuit"

    def add(self, parent_subparsers: "argparse._SubParsersAction[Any]") -> None:
        parser = parent_subparsers.add_parser(self.CMD, help="Generate a random circuit file")
        parser.add_argument("--n", type=int, required=True, help="Number of qubits")
        parser.add_argument("--gates", type=int, required=True, help="Number of gates")
        parser.add_argument("--d-budget", type=int, default=None, help="Max gates across any cut")
        parser.add_argument("--clifford", action="store_true", help="Clifford gates only")
        parser.add_argument("--max-range", type=int, default=1, help="Max distance of 2 qubit gates")

    def run(self, args: argparse.Namespace, settings: config.Settings) -> None:
        rng = np.random.default_rng(_seed(args))
        if args.clifford and args.d_budget is None:
            circuit = core.random_clifford_circuit(args.n, args.gates, rng)
        else:
            circuit = core.random_circuit(
                args.n,
                args.gates,
                rng,
                d_budget=args.d_budget,
                clifford=args.clifford,
                max_range=args.max_range,
            )
        _emit(codec.dumps(circuit), args.out)


class GenTrainingCmd(Cmd):
    CMD = "gen-training"

    def add(self, parent_subparsers: "argparse._SubParsersAction[Any]") -> None:
        parser = parent_subparsers.add_parser(
            self.CMD,
            help="Sample a training set from a known state",
            description=textwrap.dedent(
                """
                The true state is either a circuit file applied to |0...0> (--circuit),
                simulated with --simulator, or a named preparation of an eom model file
                (--model and --state). Eom measurements are drawn from the model's pool.
                """
            ),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument("--circuit", type=str, help="circuit/1 file preparing the state")
        source.add_argument("--model", type=str, help="eom/1 model file")
        parser.add_argument("--state", type=str, help="Named preparation in the model file")
        parser.add_argument(
            "--simulator",
            choices=["dense", "stabilizer", "chain"],
            default="dense",
            help="Exact simulator for circuit states (default: %(default)s)",
        )
        parser.add_argument("--m", type=int, required=True, help="Number of examples")
        parser.add_argument("--shots", type=int, default=None, help="Binomial shot noise")
        _add_distribution_args(parser)

    def _circuit_oracle(
        self, args: argparse.Namespace, settings: config.Settings
    ) -> tuple[int, Callable[[core.Measurement], float]]:
        circuit = _read_file(args.circuit, codec.CIRCUIT)
        n = circuit.n
        if args.simulator == "stabilizer":
            tableau = stabilizer.tableau_from_circuit(circuit)
            return n, lambda m: stabilizer.stabilizer_value(tableau, m)
        if args.simulator == "chain":
            exact = 2 ** (n // 2)
            chain = mps.chain_from_circuit(
                circuit, bond_cap=exact, cutoff=settings.schmidt_cutoff
            )
            return n, lambda m: mps.chain_expectation(chain, m, max_bond=exact)
        state = oracle.dense_from_circuit(circuit, cap=settings.oracle_cap)
        return n, oracle.dense_oracle(state)

    def run(self, args: argparse.Namespace, settings: config.Settings) -> None:
        seeds = util.derive_seeds(_seed(args), 2)
        dist = _distribution(args)
        if args.circuit is not None:
            n, state_oracle = self._circuit_oracle(args, settings)
            measurements = core.sample_measurements(dist, n, args.m, seeds[0])
            descriptor = f"circuit:{Path(args.circuit).name}"
        else:
            model = _read_file(args.model, codec.EOM)
            if args.state not in model.states:
                raise types.FormatError(f"Model has no state named {args.state!r}")
            if model.n is None:
                raise types.FormatError("Model file does not declare n")
            fitted = eom.FittedPreparation(model, eom.Preparation(model.states[args.state]))
            picks = np.random.default_rng(seeds[0]).integers(len(model.pool), size=args.m)
            n = model.n
            measurements = [_pool_measurement(model.pool[int(i)]) for i in picks]
            state_oracle = fitted.expectation
            descriptor = f"eom:{args.state}"
        provenance = core.Provenance(descriptor, dist, _seed(args))
        training = core.make_training_set(state_oracle, measurements, provenance, n=n)
        if args.shots is not None:
            training = core.add_shot_noise(training, args.shots, seeds[1])
        _emit(codec.dumps(training), args.out)


def _pool_measurement(key: str) -> core.Measurement:
    """Eom pools written by this tool hold Pauli labels"""
    try:
        return core.pauli_measurement(key)
    except ValueError as e:
        raise types.FormatError(f"Pool entry {key!r} is not a Pauli label") from e


class LearnCmd(Cmd):
    CMD = "learn"

    def add(self, parent_subparsers: "argparse._SubParsersAction[Any]") -> None:
        parser = parent_subparsers.add_parser(self.CMD, help="Fit a hypothesis to a training set")
        parser.add_argument(
            "--family", choices=[f.value for f in Family], required=True, help="Hypothesis family"
        )
        parser.add_argument("--eta", type=float, default=0.0, help="Consistency tolerance")
        parser.add_argument("--in", dest="infile", type=str, required=True, help="train/1 file")
        parser.add_argument("--model", type=str, default=None, help="eom/1 model (eom family)")
        parser.add_argument("--bond-cap", "-L", type=int, default=2, help="Chain bond cap")
        parser.add_argument("--restarts", type=int, default=8, help="Chain learner restarts")
        parser.add_argument("--max-iters", type=int, default=500, help="Chain descent iterations")
        parser.add_argument(
            "--snap",
            action="store_true",
            help="Stabilizer: snap shot-noise values onto {0, 1/2, 1} first (see shot_snap_threshold)",
        )

    def run(self, args: argparse.Namespace, settings: config.Settings) -> None:
        training = _read_file(args.infile, codec.TRAIN)
        hypothesis: Any
        match Family(args.family):
            case Family.STABILIZER:
                learner = stabilizer.StabilizerLearner(tolerance=settings.value_tolerance)
                if args.snap or args.eta >= settings.shot_snap_threshold:
                    training = stabilizer.snap_training_set(
                        training, settings.shot_snap_threshold
                    )
                hypothesis = learner.fit(training, args.eta)
            case Family.CHAIN:
                budget = mps.ChainBudget(restarts=args.restarts, max_iters=args.max_iters)
                chain_learner = mps.ChainLearner(
                    args.bond_cap,
                    budget=budget,
                    seed=_seed(args),
                    max_bond=2 ** (training.n // 2),
                )
                hypothesis = chain_learner.fit(training, args.eta)
            case Family.EOM:
                if args.model is None:
                    raise types.FormatError("The eom family needs --model")
                model = _read_file(args.model, codec.EOM)
                model.check_budget(settings.lambda_budget_factor)
                prep_learner = eom.PreparationLearner(
                    model,
                    feasibility_tolerance=settings.feasibility_tolerance,
                    pivot_tolerance=settings.pivot_tolerance,
                )
                hypothesis = eom.FittedPreparation(model, prep_learner.fit(training, args.eta))
        _emit(codec.dumps(hypothesis), args.out)


def predict_value(hypothesis: Any, m: core.Measurement) -> float:
    match hypothesis:
        case stabilizer.StabilizerTableau():
            return stabilizer.stabilizer_value(hypothesis, m)
        case mps.ChainState():
            return mps.chain_expectation(hypothesis, m, max_bond=2 ** (hypothesis.n // 2))
        case eom.FittedPreparation():
            return hypothesis.expectation(m)
    raise types.FormatError(f"Not a hypothesis: {type(hypothesis).__name__}")


class PredictCmd(Cmd):
    CMD = "predict"

    def add(self, parent_subparsers: "argparse._SubParsersAction[Any]") -> None:
        parser = parent_subparsers.add_parser(self.CMD, help="Evaluate a hypothesis on a measurement")
        parser.add_argument("--hyp", type=str, required=True, help="tableau/1, chain/1 or prep/1")
        parser.add_argument("--meas", type=str, required=True, help="meas/1 file")

    def run(self, args: argparse.Namespace, settings: config.Settings) -> None:
        hypothesis = _read_file(args.hyp, (codec.TABLEAU, codec.CHAIN, codec.PREP))
        m = _read_file(args.meas, codec.MEAS)
        _emit(f"{predict_value(hypothesis, m):#.15g}\n", args.out)


class ExperimentCmd(Cmd):
    CMD = "experiment"

    def add(self, parent_subparsers: "argparse._SubParsersAction[Any]") -> None:
        parser = parent_subparsers.add_parser(self.CMD, help="Run a batch of learning trials")
        parser.add_argument("--config", type=str, required=True, help="Experiment config, JSON or YAML")
        parser.add_argument("--progress", action="store_true", help="Show a progress bar on stderr")

    def run(self, args: argparse.Namespace, settings: config.Settings) -> None:
        data = util.load_structured(args.config)
        if args.seed is not None:
            data["master_seed"] = args.seed
        cfg = harness.ExperimentConfig.from_dict(data)
        report = harness.run_experiment(
            cfg,
            oracle_cap=settings.oracle_cap,
            value_tolerance=settings.value_tolerance,
            shot_snap_threshold=settings.shot_snap_threshold,
            lambda_budget_factor=settings.lambda_budget_factor,
            occam_c=settings.occam_c,
            progress=args.progress,
        )
        text = harness.report_json(report) if args.format == "json" else harness.report_csv(report)
        _emit(text, args.out)


class BoundsCmd(Cmd):
    CMD = "bounds"

    def add(self, parent_subparsers: "argparse._SubParsersAction[Any]") -> None:
        parser = parent_subparsers.add_parser(
            self.CMD,
            help="Sample complexity bounds",
            description=textwrap.dedent(
                f"""
                The params file holds n, epsilon, delta, gamma and optionally eta, c, k,
                reading and fat. fat is an integer or "{pac.FAT_N_OVER_GAMMA_SQUARED}"; without it
                only the Occam bound is computed. c and k default to the settings file.
                """
            ),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        parser.add_argument("--params", type=str, required=True, help="Parameter file, JSON or YAML")

    def run(self, args: argparse.Namespace, settings: config.Settings) -> None:
        data = util.load_structured(args.params)
        fat = data.pop("fat", None)
        data.setdefault("c", settings.occam_c)
        data.setdefault("k", settings.anthony_k)
        if "reading" in data:
            data["reading"] = types.DatasizeReading(data["reading"])
        try:
            params = pac.OccamParams(**data)
        except TypeError as e:
            raise types.FormatError(f"Bad bounds parameters: {e}") from e
        _emit(codec.dumps(pac.bounds_report(params, fat)), args.out)


class FatdimCmd(Cmd):
    CMD = "fatdim"

    def add(self, parent_subparsers: "argparse._SubParsersAction[Any]") -> None:
        parser = parent_subparsers.add_parser(
            self.CMD, help="Exhaustive fat-shattering dimension of a small class"
        )
        parser.add_argument(
            "--family", choices=[f.value for f in Family], required=True, help="Hypothesis family"
        )
        parser.add_argument("--gamma", type=float, required=True, help="Margin")
        parser.add_argument("--max-k", type=int, default=None, help="Largest k tried (default: pool)")
        parser.add_argument("--n", type=int, default=1, help="Qubits (stabilizer, chain)")
        parser.add_argument("--pool-size", type=int, default=4, help="Random Pauli pool size")
        parser.add_argument("--model", type=str, default=None, help="eom/1 model (eom family)")
        parser.add_argument("--mesh", type=int, default=16, help="Simplex grid mesh (eom family)")
        parser.add_argument("--bond-cap", "-L", type=int, default=2, help="Chain bond cap")

    def run(self, args: argparse.Namespace, settings: config.Settings) -> None:
        pool: list[Any]
        v: pac.FunctionClassEvaluator[Any]
        if Family(args.family) == Family.EOM:
            if args.model is None:
                raise types.FormatError("The eom family needs --model")
            model = _read_file(args.model, codec.EOM)
            pool = list(model.pool)
            v = pac.eom_preparation_class(model, mesh=args.mesh)
        else:
            dist = core.MeasurementDistribution.uniform_pauli()
            drawn = core.sample_measurements(dist, args.n, args.pool_size, _seed(args))
            pool = list({core.measurement_key(m): m for m in drawn}.values())
            if Family(args.family) == Family.STABILIZER:
                v = pac.stabilizer_class(args.n)
            else:
                v = pac.chain_class(args.n, bond_cap=args.bond_cap)
        max_k = len(pool) if args.max_k is None else args.max_k
        fat = pac.fat_shattering_estimate(v, pool, args.gamma, max_k, cap=settings.exhaustive_cap)
        _emit(f"{fat}\n", args.out)


def base_parse_args(argv: list[str] | None = None) -> tuple[argparse.Namespace, list[Any]]:
    parser = argparse.ArgumentParser(description="PAC learning of quantum states")
    util.logging_add_arg(parser)
    parser.add_argument("--seed", type=int, default=None, help="Master seed (default: 0)")
    parser.add_argument(
        "--format", choices=["json", "csv"], default="csv", help="Report format for experiment"
    )
    parser.add_argument("--out", type=str, default=None, help="Output file (default: stdout)")
    parser.add_argument(
        "--qpac-dir",
        "-d",
        type=str,
        default=config.DEFAULT_QPAC_DIR,
        help=f"Settings directory (default: {config.DEFAULT_QPAC_DIR})",
    )

    subparsers = parser.add_subparsers(dest="command", metavar="command", required=True)

    cmd_objects: list[Any] = [
        GenCircuitCmd(),
        GenTrainingCmd(),
        LearnCmd(),
        PredictCmd(),
        ExperimentCmd(),
        BoundsCmd(),
        FatdimCmd(),
    ]

    for cmd in cmd_objects:
        cmd.add(subparsers)

    args = parser.parse_args(argv)
    util.logging_init(args=args)
    return args, cmd_objects


def base_run(args: argparse.Namespace, cmd_objects: list[Any]) -> int:
    """Run the selected command and map qpac errors to exit codes"""
    with config.ConfigManager(args.qpac_dir) as cm:
        settings = cm.settings
    for cmd in cmd_objects:
        if args.command == cmd.cmd():
            try:
                cmd.run(args, settings)
            except types.DataError as e:
                LOG.error(f"{type(e).__name__}: {e}")
                return EXIT_DATA
            except (types.FormatError, ValueError) as e:
                LOG.error(f"{type(e).__name__}: {e}")
                return EXIT_FORMAT
            except types.CapExceeded as e:
                LOG.error(f"{type(e).__name__}: {e}")
                return EXIT_CAP
            return EXIT_OK
    print(f"Unknown command: {args.command}")
    return EXIT_FORMAT


def main() -> None:
    args, cmd_objects = base_parse_args()
    sys.exit(base_run(args, cmd_objects))


if __name__ == "__main__":
    main()

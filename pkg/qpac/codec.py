"""Versioned JSON file formats.

Every top level object carries a "format" tag (circuit/1, meas/1, train/1,
tableau/1, chain/1, eom/1, prep/1, bounds/1). Output is indented by 2 with a
trailing newline and keys in a fixed order. Floats use the shortest round trip
repr, so values survive a dump/load cycle exactly. Complex numbers are [re, im].
"""

import json
import logging
from dataclasses import asdict
from typing import Any, Callable, Final

import dacite
import numpy as np
from numpy.typing import NDArray

from . import eom, mps, pac, stabilizer, types
from .core import (
    Circuit,
    CircuitMeasurement,
    Gate,
    Measurement,
    MeasurementDistribution,
    PauliMeasurement,
    PauliString,
    Provenance,
    TrainingExample,
    TrainingSet,
)
from .types import DatasizeReading, DistributionKind, FormatError, GateKind

LOG = logging.getLogger(__name__)

CIRCUIT: Final[str] = "circuit/1"
MEAS: Final[str] = "meas/1"
TRAIN: Final[str] = "train/1"
TABLEAU: Final[str] = "tableau/1"
CHAIN: Final[str] = "chain/1"
EOM: Final[str] = "eom/1"
PREP: Final[str] = "prep/1"
BOUNDS: Final[str] = "bounds/1"

_DACITE_CONFIG = dacite.Config(strict=True, cast=[DistributionKind, DatasizeReading, float])

Obj = dict[str, Any]


def _complex_array(data: Any) -> NDArray[np.complex128]:
    arr = np.array(data, dtype=float)
    if arr.ndim < 1 or arr.shape[-1] != 2:
        raise FormatError(f"Complex entries must be [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def _complex_list(arr: NDArray[np.complex128]) -> list[Any]:
    out: list[Any] = np.stack([arr.real, arr.imag], axis=-1).tolist()
    return out


##
# Encoders


def _gate_obj(g: Gate) -> Obj:
    obj: Obj = {"kind": str(g.kind), "targets": [int(t) for t in g.targets]}
    if g.unitary is not None:
        obj["matrix"] = _complex_list(g.matrix())
    return obj


def _circuit_obj(c: Circuit) -> Obj:
    return {"n": c.n, "gates": [_gate_obj(g) for g in c.gates]}


def _meas_obj(m: Measurement) -> Obj:
    match m:
        case PauliMeasurement(pauli=p):
            return {"variant": "pauli", "n": p.n, "pauli": p.label}
        case CircuitMeasurement(circuit=c, line=line):
            return {"variant": "circuit", "n": c.n, "line": line, "circuit": _circuit_obj(c)}
    raise TypeError(f"Not a measurement: {m!r}")


def _train_obj(t: TrainingSet) -> Obj:
    prov = t.provenance
    return {
        "n": t.n,
        "examples": [
            {"measurement": _meas_obj(ex.measurement), "value": float(ex.value)}
            for ex in t.examples
        ],
        "provenance": {
            "true_state": prov.true_state,
            "distribution": asdict(prov.distribution) if prov.distribution else None,
            "seed": prov.seed,
        },
    }


def _tableau_obj(t: stabilizer.StabilizerTableau) -> Obj:
    return {
        "n": t.n,
        "generators": [
            {"x_bits": list(g.x_bits), "z_bits": list(g.z_bits), "sign": g.sign}
            for g in t.generators
        ],
    }


def _chain_obj(s: mps.ChainState) -> Obj:
    return {
        "n": s.n,
        "L": s.bond_cap,
        "ranks": list(s.ranks),
        "sites": [_complex_list(a) for a in s.sites],
    }


def _eom_obj(model: eom.OntModel) -> Obj:
    obj: Obj = {
        "format": EOM,
        "lambda_size": model.lambda_size,
        "pool": list(model.pool),
        "response": model.response.tolist(),
        "states": {name: p.tolist() for name, p in sorted(model.states.items())},
    }
    if model.n is not None:
        obj["n"] = model.n
    return obj


def _prep_obj(fp: eom.FittedPreparation) -> Obj:
    return {"probs": fp.preparation.probs.tolist(), "model": _eom_obj(fp.model)}


def _bounds_obj(r: pac.BoundsReport) -> Obj:
    return {
        "params": asdict(r.params),
        "fat": r.fat,
        "m_occam": r.m_occam,
        "m_anthony": r.m_anthony,
        "calibration": {"C": float(r.calibration_c), "method": r.calibration_method},
    }


_ENCODERS: Final[list[tuple[type, str, Callable[[Any], Obj]]]] = [
    (Circuit, CIRCUIT, _circuit_obj),
    (PauliMeasurement, MEAS, _meas_obj),
    (CircuitMeasurement, MEAS, _meas_obj),
    (TrainingSet, TRAIN, _train_obj),
    (stabilizer.StabilizerTableau, TABLEAU, _tableau_obj),
    (mps.ChainState, CHAIN, _chain_obj),
    (eom.OntModel, EOM, _eom_obj),
    (eom.FittedPreparation, PREP, _prep_obj),
    (pac.BoundsReport, BOUNDS, _bounds_obj),
]


def to_obj(obj: Any) -> Obj:
    for cls, fmt, encode in _ENCODERS:
        if isinstance(obj, cls):
            return {"format": fmt, **{k: v for k, v in encode(obj).items() if k != "format"}}
    raise TypeError(f"No file format for {type(obj).__name__}")


def dumps(obj: Any) -> str:
    return json.dumps(to_obj(obj), indent=2, allow_nan=False) + "\n"


##
# Decoders


def _field(obj: Obj, key: str, kind: type | tuple[type, ...]) -> Any:
    if not isinstance(obj, dict):
        raise FormatError(f"Expected an object, got {type(obj).__name__}")
    if key not in obj:
        raise FormatError(f"Missing field {key!r}")
    value = obj[key]
    if isinstance(value, bool) and bool not in (kind if isinstance(kind, tuple) else (kind,)):
        raise FormatError(f"Field {key!r} has the wrong type: bool")
    if not isinstance(value, kind):
        raise FormatError(f"Field {key!r} has the wrong type: {type(value).__name__}")
    return value


def _gate(obj: Obj) -> Gate:
    kind = GateKind(_field(obj, "kind", str).upper())
    targets = tuple(int(t) for t in _field(obj, "targets", list))
    if kind in (GateKind.U1, GateKind.U2):
        matrix = _complex_array(_field(obj, "matrix", list))
        return Gate(kind, targets, tuple(complex(v) for v in matrix.ravel()))
    if "matrix" in obj:
        raise FormatError(f"{kind} has a fixed matrix, found an explicit one")
    return Gate(kind, targets)


def _circuit(obj: Obj) -> Circuit:
    return Circuit(_field(obj, "n", int), tuple(_gate(g) for g in _field(obj, "gates", list)))


def _meas(obj: Obj) -> Measurement:
    variant = _field(obj, "variant", str)
    n = _field(obj, "n", int)
    m: Measurement
    if variant == "pauli":
        m = PauliMeasurement(PauliString.from_label(_field(obj, "pauli", str)))
    elif variant == "circuit":
        m = CircuitMeasurement(_circuit(_field(obj, "circuit", dict)), _field(obj, "line", int))
    else:
        raise FormatError(f"Unknown measurement variant {variant!r}")
    if m.n != n:
        raise FormatError(f"Measurement declares n={n} but acts on {m.n} qubits")
    return m


def _train(obj: Obj) -> TrainingSet:
    examples = tuple(
        TrainingExample(
            _meas(_field(ex, "measurement", dict)), float(_field(ex, "value", (int, float)))
        )
        for ex in _field(obj, "examples", list)
    )
    prov = obj.get("provenance") or {}
    dist = prov.get("distribution")
    provenance = Provenance(
        true_state=str(prov.get("true_state", "")),
        distribution=(
            dacite.from_dict(MeasurementDistribution, dist, config=_DACITE_CONFIG) if dist else None
        ),
        seed=prov.get("seed"),
    )
    return TrainingSet(_field(obj, "n", int), examples, provenance)


def _tableau(obj: Obj) -> stabilizer.StabilizerTableau:
    n = _field(obj, "n", int)
    gens = [
        PauliString(
            n,
            tuple(int(b) for b in _field(g, "x_bits", list)),
            tuple(int(b) for b in _field(g, "z_bits", list)),
            _field(g, "sign", int),
        )
        for g in _field(obj, "generators", list)
    ]
    if len(gens) != n:
        raise FormatError(f"Tableau on n={n} needs {n} generators, got {len(gens)}")
    return stabilizer.StabilizerTableau.from_generators(gens)


def _chain(obj: Obj) -> mps.ChainState:
    sites = tuple(_complex_array(a) for a in _field(obj, "sites", list))
    s = mps.ChainState(_field(obj, "n", int), _field(obj, "L", int), sites)
    ranks = [int(r) for r in _field(obj, "ranks", list)]
    if list(s.ranks) != ranks:
        raise FormatError(f"Declared ranks {ranks} do not match site shapes {list(s.ranks)}")
    return s


def _eom(obj: Obj) -> eom.OntModel:
    return eom.OntModel(
        _field(obj, "lambda_size", int),
        tuple(str(k) for k in _field(obj, "pool", list)),
        np.array(_field(obj, "response", list), dtype=float),
        {str(k): np.array(v, dtype=float) for k, v in (obj.get("states") or {}).items()},
        obj.get("n"),
    )


def _prep(obj: Obj) -> eom.FittedPreparation:
    model = _field(obj, "model", dict)
    if model.get("format", EOM) != EOM:
        raise FormatError(f"Preparation model must be {EOM}, got {model.get('format')!r}")
    return eom.FittedPreparation(
        _eom(model), eom.Preparation(np.array(_field(obj, "probs", list), dtype=float))
    )


def _bounds(obj: Obj) -> pac.BoundsReport:
    cal = obj.get("calibration") or {}
    anthony = obj.get("m_anthony")
    return pac.BoundsReport(
        params=dacite.from_dict(pac.OccamParams, _field(obj, "params", dict), config=_DACITE_CONFIG),
        m_occam=_field(obj, "m_occam", int),
        m_anthony=None if anthony is None else int(anthony),
        fat=obj.get("fat"),
        calibration_c=float(cal.get("C", types.DEFAULT_OCCAM_C)),
        calibration_method=str(cal.get("method", "configured")),
    )


_DECODERS: Final[dict[str, Callable[[Obj], Any]]] = {
    CIRCUIT: _circuit,
    MEAS: _meas,
    TRAIN: _train,
    TABLEAU: _tableau,
    CHAIN: _chain,
    EOM: _eom,
    PREP: _prep,
    BOUNDS: _bounds,
}


def from_obj(obj: Any, expect: str | tuple[str, ...] | None = None) -> Any:
    if not isinstance(obj, dict):
        raise FormatError(f"Expected a JSON object, got {type(obj).__name__}")
    fmt = obj.get("format")
    decode = _DECODERS.get(fmt) if isinstance(fmt, str) else None
    if decode is None:
        raise FormatError(f"Unknown or missing format tag {fmt!r}")
    if expect is not None and fmt not in ((expect,) if isinstance(expect, str) else expect):
        raise FormatError(f"Expected {expect}, got {fmt}")
    try:
        return decode(obj)
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError, dacite.DaciteError) as e:
        # Invariant violations from the domain constructors land here
        raise FormatError(f"Invalid {fmt} object: {e}") from e


def loads(text: str, expect: str | tuple[str, ...] | None = None) -> Any:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"Not valid JSON: {e}") from e
    return from_obj(obj, expect)

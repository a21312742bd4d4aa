"""One JSON schema for states, operators, circuits and plans.

Every top-level document carries ``"schema": 1``. Complex numbers are written
as ``[re, im]`` pairs; gate lists use the shared gate dictionaries of
:mod:`weaksim.gates`. See ``docs/schema.md`` for the field reference.
"""
from __future__ import annotations

import json
from contextlib import contextmanager
from pathlib import Path
from typing import Any

import numpy as np

from . import gates as G
from .core import SchemaError, WeaksimError, as_index
from .ct_states import (
    BasisPreservedState,
    CtState,
    MpsState,
    PhaseState,
    ProductState,
    QftProductState,
    StabilizerState,
    TensorState,
)
from .ecs_ops import (
    AdjointOp,
    BasisPreservingCircuit,
    ComposedOp,
    EcsOperator,
    LocalGateOp,
    PauliSum,
    PauliSumOp,
    ScaledOp,
    basis_preserving_op,
    compose,
)
from .matchgate import MatchgateCircuit, MatchgateState

SCHEMA_VERSION = 1


@contextmanager
def malformed_fields(where: str, what: str):
    """Report field-level type and value errors as schema errors."""
    try:
        yield
    except WeaksimError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError, IndexError, OverflowError) as exc:
        raise SchemaError(f"{where}: malformed {what} ({exc})") from exc


# --------------------------------------------------------------------------
# json helpers


def to_jsonable(obj: Any) -> Any:
    """Replace numpy values and complex numbers by plain JSON types (complex -> [re, im])."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(doc: dict) -> str:
    """Canonical text form: sorted keys, compact separators."""
    return json.dumps(to_jsonable(doc), sort_keys=True, separators=(",", ":"))


def load_json(path) -> dict:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: top level must be an object")
    check_version(doc, str(path))
    return doc


def check_version(doc: dict, where: str = "document") -> None:
    v = doc.get("schema", SCHEMA_VERSION)
    if v != SCHEMA_VERSION:
        raise SchemaError(f"{where}: unsupported schema version {v!r} (expected {SCHEMA_VERSION})")


def _integer(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise SchemaError(f"{where}: expected an integer, got {v!r}")
    return int(v)


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise SchemaError(f"{where}: missing field {key!r}")
    return d[key]


def _complex(v, where: str) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise SchemaError(f"{where}: complex numbers are [re, im] pairs")
        return complex(float(v[0]), float(v[1]))
    try:
        return complex(v)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: not a number: {v!r}") from exc


def _factor_rows(rows, where: str) -> np.ndarray:
    try:
        out = np.array([[_complex(z, where) for z in row] for row in rows], dtype=complex)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: factors must be a list of [a0, a1] pairs") from exc
    if out.ndim != 2 or out.shape[1] != 2:
        raise SchemaError(f"{where}: factors must be a list of [a0, a1] pairs")
    return out


def _gates(d: dict, where: str, n: int | None = None) -> list[dict]:
    out = []
    for i, g in enumerate(d.get("gates", [])):
        try:
            g = G.canonical(g)
            if n is not None:
                G.check_targets(g, n)
        except SchemaError as exc:
            raise SchemaError(f"{where}.gates[{i}]: {exc}") from exc
        out.append(g)
    return out


def _matrix(data, where: str) -> np.ndarray:
    m = G.parse_complex_matrix(data)
    if m.ndim != 2:
        raise SchemaError(f"{where}: expected a matrix")
    return m


# --------------------------------------------------------------------------
# states


def state_from_dict(d: dict, where: str = "state") -> CtState:
    """Build a tractable state from its description."""
    with malformed_fields(where, "state"):
        return _state_from_dict(d, where)


def _state_from_dict(d: dict, where: str) -> CtState:
    if not isinstance(d, dict):
        raise SchemaError(f"{where}: expected an object")
    kind = _need(d, "kind", where)
    try:
        if kind == "product":
            if "bits" in d:
                return ProductState.basis(str(d["bits"]))
            return ProductState(_factor_rows(_need(d, "factors", where), where + ".factors"))
        if kind == "qft_product":
            return QftProductState(_factor_rows(_need(d, "factors", where), where + ".factors"))
        if kind == "phase":
            n = int(_need(d, "n", where))
            terms = [(t["qubits"], float(t["angle"])) for t in d.get("terms", [])]
            return PhaseState.from_terms(n, terms)
        if kind == "stabilizer":
            n = int(_need(d, "n", where))
            return StabilizerState(n, _gates(d, where, n), as_index(d.get("input", 0), n))
        if kind == "mps":
            ts = [_mps_tensor(t, f"{where}.tensors[{i}]") for i, t in enumerate(_need(d, "tensors", where))]
            return MpsState(ts)
        if kind == "matchgate":
            n = int(_need(d, "n", where))
            circ = MatchgateCircuit(n, _gates(d, where, n))
            return MatchgateState(circ, as_index(d.get("input", 0), n))
        if kind == "basis_preserved":
            inner = state_from_dict(_need(d, "state", where), where + ".state")
            return BasisPreservedState(basis_preserving_op(_gates(d, where, inner.n), inner.n), inner)
        if kind == "tensor":
            parts = [state_from_dict(p, f"{where}.parts[{i}]") for i, p in enumerate(_need(d, "parts", where))]
            if len(parts) < 1:
                raise SchemaError(f"{where}: tensor needs parts")
            out = parts[0]
            for p in parts[1:]:
                out = TensorState(out, p)
            return out
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{where}: malformed {kind!r} state ({exc})") from exc
    raise SchemaError(f"{where}: unknown state kind {kind!r}")


def _mps_tensor(t, where: str) -> np.ndarray:
    a = np.asarray(t, dtype=float)
    if a.ndim != 4 or a.shape[-1] != 2:
        raise SchemaError(f"{where}: MPS tensors are [2][Dl][Dr][re, im] arrays")
    return a[..., 0] + 1j * a[..., 1]


def state_to_dict(psi: CtState) -> dict:
    d = to_jsonable(psi.to_dict())
    return d


# --------------------------------------------------------------------------
# operators


def operator_from_dict(d: dict, where: str = "operator") -> EcsOperator:
    """Build a sparse operator from its description.

    Kinds: ``pauli_sum``, ``basis_preserving``, ``local_gate``,
    ``composition`` (first listed acts last, as in a matrix product),
    ``adjoint``, ``scaled`` and ``identity``.
    """
    with malformed_fields(where, "operator"):
        return _operator_from_dict(d, where)


def _operator_from_dict(d: dict, where: str) -> EcsOperator:
    if not isinstance(d, dict):
        raise SchemaError(f"{where}: expected an object")
    kind = _need(d, "kind", where)
    try:
        if kind == "pauli_sum":
            terms = [(_complex(t.get("coeff", 1.0), where), str(t["pauli"])) for t in _need(d, "terms", where)]
            ps = PauliSum.from_labels(terms) if terms else PauliSum(int(_need(d, "n", where)), [], [], [])
            if "n" in d and ps.n != int(d["n"]):
                raise SchemaError(f"{where}: Pauli labels have {ps.n} letters, n = {d['n']}")
            return PauliSumOp(ps, norm_bound=d.get("norm_bound"), entry_accuracy=float(d.get("entry_accuracy", 0.0)))
        if kind == "basis_preserving":
            n = int(_need(d, "n", where))
            return basis_preserving_op(_gates(d, where, n), n)
        if kind == "local_gate":
            n = int(_need(d, "n", where))
            return LocalGateOp(_matrix(_need(d, "matrix", where), where + ".matrix"), [int(t) for t in d["targets"]],
                               n, require_unitary=bool(d.get("unitary", True)))
        if kind == "composition":
            ops = [operator_from_dict(o, f"{where}.ops[{i}]") for i, o in enumerate(_need(d, "ops", where))]
            if not ops:
                raise SchemaError(f"{where}: composition needs at least one operator")
            return compose(*ops)
        if kind == "adjoint":
            return operator_from_dict(_need(d, "op", where), where + ".op").adjoint()
        if kind == "scaled":
            return ScaledOp(_complex(_need(d, "scale", where), where), operator_from_dict(d["op"], where + ".op"))
        if kind == "identity":
            return basis_preserving_op([], int(_need(d, "n", where)))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{where}: malformed {kind!r} operator ({exc})") from exc
    raise SchemaError(f"{where}: unknown operator kind {kind!r}")


def _unchain(op: EcsOperator) -> list[EcsOperator]:
    if isinstance(op, ComposedOp):
        return _unchain(op.A) + _unchain(op.B)
    return [op]


def operator_to_dict(op: EcsOperator) -> dict:
    if isinstance(op, PauliSumOp):
        d = {"kind": "pauli_sum", "n": op.n,
             "terms": [{"coeff": [float(c.real), float(c.imag)], "pauli": lab} for c, lab in op.terms.labels()]}
        if op.entry_accuracy:
            d["entry_accuracy"] = op.entry_accuracy
        return d
    if isinstance(op, BasisPreservingCircuit):
        if not op.gate_list:
            return {"kind": "identity", "n": op.n}
        return {"kind": "basis_preserving", "n": op.n, "gates": to_jsonable(op.gate_list)}
    if isinstance(op, LocalGateOp):
        return {"kind": "local_gate", "n": op.n, "targets": list(op.targets), "matrix": to_jsonable(op.matrix),
                "unitary": bool(op.unitary)}
    if isinstance(op, ComposedOp):
        return {"kind": "composition", "ops": [operator_to_dict(o) for o in _unchain(op)]}
    if isinstance(op, AdjointOp):
        return {"kind": "adjoint", "op": operator_to_dict(op.op)}
    if isinstance(op, ScaledOp):
        return {"kind": "scaled", "scale": to_jsonable(complex(op.scale)), "op": operator_to_dict(op.op)}
    raise SchemaError(f"{type(op).__name__} has no file description")


# --------------------------------------------------------------------------
# documents

DOCUMENT_KINDS = ("state", "operator", "circuit", "plan", "fourier_table")
STATE_KINDS = ("product", "phase", "stabilizer", "mps", "qft_product", "basis_preserved", "tensor", "matchgate")
OPERATOR_KINDS = ("pauli_sum", "basis_preserving", "local_gate", "composition", "adjoint", "scaled", "identity")
DRIVERS = ("conjugated", "sparse", "composed", "cnot-expx", "dj", "five-round")
DRIVER_FIELDS = {"conjugated": (), "sparse": (), "composed": (), "cnot-expx": (), "dj": ("v2", "k"),
                 "five-round": ("n", "S", "oracle")}
# older names accepted on input
DRIVER_ALIASES = {"theorem1": "conjugated"}


def document_kind(doc: dict) -> str:
    kind = doc.get("kind")
    if kind in STATE_KINDS:
        return "state"
    if kind in OPERATOR_KINDS:
        return "operator"
    if kind in ("circuit", "plan", "fourier_table"):
        return kind
    raise SchemaError(f"unknown document kind {kind!r}")


def load_state(path) -> CtState:
    return state_from_dict(load_json(path), str(path))


def load_operator(path) -> EcsOperator:
    return operator_from_dict(load_json(path), str(path))


def parse_plan(doc: dict, where: str = "plan") -> dict:
    """Validate a plan document and return it in normalised form.

    A plan names a ``driver`` and carries the driver's fields (see the schema
    reference). Normalisation fills defaults and canonicalises gates, so
    ``parse_plan(parse_plan(d)) == parse_plan(d)``.
    """
    with malformed_fields(where, "plan"):
        return _parse_plan(doc, where)


def _parse_plan(doc: dict, where: str) -> dict:
    if doc.get("kind") not in ("plan", "circuit"):
        raise SchemaError(f"{where}: expected kind 'plan' or 'circuit'")
    check_version(doc, where)
    out = {"schema": SCHEMA_VERSION, "kind": doc["kind"]}
    driver = doc.get("driver", "cnot-expx" if doc["kind"] == "circuit" else "composed")
    driver = DRIVER_ALIASES.get(driver, driver)
    if driver not in DRIVERS:
        raise SchemaError(f"{where}: unknown driver {driver!r}")
    out["driver"] = driver
    missing = [k for k in DRIVER_FIELDS[driver] if k not in doc]
    if missing:
        raise SchemaError(f"{where}: driver {driver!r} needs {', '.join(map(repr, missing))}")
    n = doc.get("n")
    if n is not None:
        out["n"] = int(n)
    for key in ("input", "observable", "operator", "v2"):
        if key in doc and isinstance(doc[key], dict):
            sub = doc[key]
            # recipes are validated by building them once
            (state_from_dict if key == "input" else operator_from_dict)(sub, f"{where}.{key}")
            out[key] = to_jsonable(sub)
        elif key in doc:
            out[key] = to_jsonable(doc[key])
    if "gates" in doc:
        out["gates"] = to_jsonable(_gates(doc, where, out.get("n")))
    if "stages" in doc:
        stages = []
        for i, s in enumerate(doc["stages"]):
            if not isinstance(s, dict) or "kind" not in s:
                raise SchemaError(f"{where}.stages[{i}]: stages need a 'kind'")
            s = dict(s)
            if "gates" in s:
                s["gates"] = _gates(s, f"{where}.stages[{i}]", out.get("n"))
            if isinstance(s.get("operator"), dict):
                operator_from_dict(s["operator"], f"{where}.stages[{i}].operator")
            stages.append(to_jsonable(s))
        out["stages"] = stages
    if "ops" in doc:
        for i, o in enumerate(doc["ops"]):
            operator_from_dict(o, f"{where}.ops[{i}]")
        out["ops"] = to_jsonable(doc["ops"])
    for key in ("frame", "v1", "v3", "V", "oracle", "note"):
        if key in doc:
            out[key] = to_jsonable(doc[key])
    for key in ("split", "qubit", "k", "sparseness", "sparseness_budget"):
        if key in doc and doc[key] is not None:
            out[key] = _integer(doc[key], f"{where}.{key}")
    for key in ("S1", "S2", "S"):
        if key in doc:
            if not isinstance(doc[key], list):
                raise SchemaError(f"{where}.{key}: expected a list of qubit indices")
            out[key] = [_integer(q, f"{where}.{key}") for q in doc[key]]
    if "oracle" in out and not isinstance(out["oracle"], str):
        raise SchemaError(f"{where}.oracle: expected an oracle string")
    if "V" in out:
        out["V"] = to_jsonable([G.canonical(g) for g in out["V"]])
    out.setdefault("frame", "computational")
    if out["frame"] not in ("computational", "pm"):
        raise SchemaError(f"{where}: frame must be 'computational' or 'pm'")
    return out


def load_plan(path) -> dict:
    return parse_plan(load_json(path), str(path))


def normalise(doc: dict, where: str = "document") -> dict:
    """Parse a document of any kind and serialise it back."""
    with malformed_fields(where, "document"):
        return _normalise(doc, where)


def _normalise(doc: dict, where: str) -> dict:
    if not isinstance(doc, dict):
        raise SchemaError(f"{where}: expected an object")
    check_version(doc, where)
    kind = document_kind(doc)
    if kind == "state":
        out = state_to_dict(state_from_dict(doc, where))
    elif kind == "operator":
        out = operator_to_dict(operator_from_dict(doc, where))
    elif kind == "fourier_table":
        from .boolean_fourier import FourierTable

        out = FourierTable.from_dict(doc).to_dict()
    else:
        out = parse_plan(doc, where)
    out = to_jsonable(out)
    out["schema"] = SCHEMA_VERSION
    return out


__all__ = [
    "SCHEMA_VERSION", "to_jsonable", "dumps", "load_json", "check_version", "state_from_dict", "state_to_dict",
    "operator_from_dict", "operator_to_dict", "document_kind", "load_state", "load_operator", "parse_plan",
    "load_plan", "normalise", "DRIVERS", "DRIVER_ALIASES", "malformed_fields",
]

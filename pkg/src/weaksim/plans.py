"""Run plan documents through their driver, and compute dense reference values for them."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .boolean_fourier import BooleanOracle, resolve_oracle, simulate_five_round
from .core import BitString, Estimate, SchemaError
from .ct_states import CtState, ProductState
from .ecs_ops import EcsOperator
from .oracle import DEFAULT_CAP, apply_gate, as_dense_vector, assemble, dense_matrix_element
from .schema import malformed_fields, operator_from_dict, parse_plan, state_from_dict
from .simulators import (
    local_unitaries,
    observable_terms,
    product_input,
    simulate_cnot_expx,
    simulate_composed,
    simulate_dj_class,
    simulate_sparse_circuit,
    simulate_conjugated,
    CircuitPlan,
)


def _input(doc: dict):
    spec = doc.get("input")
    n = doc.get("n")
    if isinstance(spec, dict):
        return state_from_dict(spec, "input")
    if spec is None:
        if n is None:
            raise SchemaError("plan needs 'n' or an 'input'")
        return ProductState.basis(BitString(int(n), 0))
    return product_input(spec, n)


def _width(doc: dict, psi: CtState | None = None) -> int:
    if psi is not None:
        if doc.get("n") is not None and int(doc["n"]) != psi.n:
            raise SchemaError(f"plan says n = {doc['n']} but the input has {psi.n} qubits")
        return psi.n
    if doc.get("n") is None:
        raise SchemaError("plan needs 'n'")
    return int(doc["n"])


def _observable(doc: dict, n: int):
    obs = doc.get("observable")
    if isinstance(obs, dict):
        return observable_terms(operator_from_dict(obs, "observable"), n)
    return observable_terms(obs, n) if obs is not None else observable_terms(None, n)


def _op(doc: dict, key: str) -> EcsOperator:
    if key not in doc:
        raise SchemaError(f"plan needs {key!r}")
    return operator_from_dict(doc[key], key)


def _oracle(doc: dict) -> BooleanOracle:
    if "oracle" not in doc:
        raise SchemaError("five-round plans need an 'oracle'")
    return resolve_oracle(doc["oracle"], len(doc["S"]))


def run_plan(doc: dict, budget, stream, *, workers: int = 1) -> Estimate:
    """Estimate the plan's value with its driver.

    Plan fields are interpreted by the drivers, so type errors they raise on
    malformed fields are reported as schema errors.
    """
    doc = parse_plan(doc)
    with malformed_fields("plan", f"{doc['driver']!r} plan"):
        return _run(doc, budget, stream, workers)


def _run(doc: dict, budget, stream, workers: int) -> Estimate:
    driver = doc["driver"]
    if driver == "conjugated":
        psi = _input(doc)
        A = _op(doc, "operator") if "operator" in doc else None
        if A is None:
            from .ecs_ops import PauliSumOp

            A = PauliSumOp(_observable(doc, psi.n))
        return simulate_conjugated(CircuitPlan(psi, A, A.frame), budget, stream, workers=workers)
    if driver == "sparse":
        psi = _input(doc)
        ops = [operator_from_dict(o, f"ops[{i}]") for i, o in enumerate(doc.get("ops", []))]
        return simulate_sparse_circuit(ops, psi, budget, stream, observable=_observable(doc, psi.n),
                                       sparseness_budget=int(doc.get("sparseness_budget", 4096)), workers=workers)
    if driver == "composed":
        psi = _input(doc)
        return simulate_composed(doc.get("stages", []), psi, _observable(doc, psi.n), budget, stream,
                                 split=doc.get("split"), workers=workers)
    if driver == "cnot-expx":
        psi = _input(doc)
        return simulate_cnot_expx(doc.get("gates", []), psi, budget, stream, qubit=int(doc.get("qubit", 0)),
                                  workers=workers)
    if driver == "dj":
        v2 = _op(doc, "v2")
        psi = _input(doc) if doc.get("input") is not None else None
        return simulate_dj_class(doc.get("v1"), v2, doc.get("v3"), int(doc["k"]), budget, stream, input=psi,
                                 workers=workers)
    if driver == "five-round":
        n = _width(doc)
        return simulate_five_round(doc.get("S1", []), doc.get("V", []), doc.get("S2", []), doc["S"], _oracle(doc),
                                   int(doc.get("sparseness", 1)), budget, stream, n=n, input=doc.get("input"),
                                   workers=workers)
    raise SchemaError(f"unknown driver {driver!r}")


# --------------------------------------------------------------------------
# dense references


def _apply_gates(vec: np.ndarray, n: int, gate_list: Sequence[dict]) -> np.ndarray:
    for g in gate_list:
        vec = apply_gate(vec, n, g)
    return vec


def _stage_vector(vec, n, stage: dict, cap: int):
    kind = stage["kind"]
    if kind == "hadamard":
        return _apply_gates(vec, n, [{"gate": "h", "targets": [int(q)]} for q in stage.get("qubits", range(n))])
    if kind == "qft":
        return apply_gate(vec, n, {"gate": "qft", "targets": list(stage.get("targets", range(n))),
                                   "inverse": bool(stage.get("inverse", False))})
    if kind == "ecs_unitary":
        U = stage["operator"]
        U = operator_from_dict(U) if isinstance(U, dict) else U
        return assemble(U, cap) @ vec
    return _apply_gates(vec, n, stage.get("gates", []))


def dense_reference(doc: dict, cap: int = DEFAULT_CAP) -> complex:
    """The exact value the plan's driver estimates (small registers only)."""
    doc = parse_plan(doc)
    driver = doc["driver"]
    if driver == "conjugated":
        psi = _input(doc)
        A = _op(doc, "operator") if "operator" in doc else _observable(doc, psi.n).dense()
        return dense_matrix_element(psi, A, psi, cap)
    if driver == "five-round":
        n = _width(doc)
        g = _oracle(doc)
        x0 = 0 if doc.get("input") is None else int(BitString.from_str(doc["input"]).value)
        circ = ([{"gate": "h", "targets": [q]} for q in doc.get("S1", [])] + list(doc.get("V", []))
                + [{"gate": "h", "targets": [q]} for q in doc.get("S2", [])])
        vec = np.zeros(2**n, dtype=complex)
        vec[x0] = 1
        p = np.abs(_apply_gates(vec, n, circ)) ** 2
        xs = np.arange(2**n, dtype=np.int64)
        u = np.zeros_like(xs)
        for q in doc["S"]:
            u = (u << 1) | ((xs >> (n - 1 - q)) & 1)
        return complex(np.sum(p * g.signs(u)))
    if driver == "dj":
        v2 = _op(doc, "v2")
        n = v2.n
        psi = _input(doc) if doc.get("input") is not None else ProductState.basis(BitString(n, 0))
        vec = as_dense_vector(psi, cap)
        u1 = local_unitaries(doc.get("v1"), n)
        u3 = local_unitaries(doc.get("v3"), n)
        for q in range(n):
            vec = apply_gate(vec, n, {"gate": "unitary", "targets": [q], "matrix": u1[q]})
        vec = assemble(v2, cap) @ vec
        for q in range(n):
            vec = apply_gate(vec, n, {"gate": "unitary", "targets": [q], "matrix": u3[q]})
        k = int(doc["k"])
        p = np.abs(vec.reshape(2**k, -1)[0]) ** 2
        return complex(p.sum())
    psi = _input(doc)
    n = psi.n
    vec = as_dense_vector(psi, cap)
    if driver == "sparse":
        for i, o in enumerate(doc.get("ops", [])):
            vec = assemble(operator_from_dict(o, f"ops[{i}]"), cap) @ vec
        O = _observable(doc, n)
    elif driver == "composed":
        for s in doc.get("stages", []):
            vec = _stage_vector(vec, n, s, cap)
        O = _observable(doc, n)
    elif driver == "cnot-expx":
        vec = _apply_gates(vec, n, doc.get("gates", []))
        from .ecs_ops import PauliSum

        O = PauliSum.single(n, {int(doc.get("qubit", 0)): "Z"})
    else:
        raise SchemaError(f"unknown driver {driver!r}")
    return complex(np.vdot(vec, O.dense() @ vec))


__all__ = ["run_plan", "dense_reference"]

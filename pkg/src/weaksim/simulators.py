"""Circuit-level drivers: reduce ``<Z_1>`` after a circuit to one matrix element.

The expectation ``<psi_in|U^dag O U|psi_in>`` is estimated by splitting
``U = U_2 U_1`` so that ``U_1|psi_in>`` is a tractable state and
``U_2^dag O U_2`` is a sparse operator, then calling the matrix-element
estimator. The split rules live in two registries (state-side and
observable-side) so new circuit families can be added alongside an oracle test.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import gates as G
from .core import (
    BitString,
    BudgetExceeded,
    Estimate,
    OutOfClass,
    PreconditionError,
    SchemaError,
)
from .ct_states import (
    CtState,
    ProductState,
    QftProductState,
    StabilizerState,
    apply_basis_preserving,
    rotate_to_pm_basis,
)
from .ecs_ops import (
    DEFAULT_COMPOSE_BUDGET,
    EcsOperator,
    PauliSum,
    PauliSumOp,
    basis_preserving_op,
    compose,
    conjugate,
    hadamard_conjugate_gate,
    hadamard_frame,
    log_locality_bound,
    pauli_decompose,
)
from .estimators import estimate_matrix_element, estimate_partial_projected
from .matchgate import MatchgateCircuit, MatchgateState, conjugate_z1


@dataclass
class CircuitPlan:
    """A tractable state, the back-propagated observable, and why the pair is valid."""

    state: CtState
    observable: EcsOperator
    frame: str = "computational"
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.state.n != self.observable.n:
            raise PreconditionError(f"state has {self.state.n} qubits, observable {self.observable.n}")
        if self.observable.frame != self.frame:
            raise PreconditionError(f"observable frame {self.observable.frame!r} differs from plan {self.frame!r}")


def simulate_conjugated(plan: CircuitPlan, budget=None, stream=None, **kw) -> Estimate:
    """``<psi|O'|psi>`` for the plan's state and back-propagated observable."""
    kw.setdefault("real", plan.observable.hermitian)
    est = estimate_matrix_element(plan.state, plan.observable, plan.state, budget, stream, **kw)
    est.details["notes"] = list(plan.notes)
    est.details["frame"] = plan.frame
    return est


# --------------------------------------------------------------------------
# input and observable recipes


def product_input(spec, n: int | None = None) -> ProductState:
    """A product state from a ProductState, a BitString/int (with ``n``), a bit string or factor rows."""
    if isinstance(spec, ProductState):
        return spec
    if spec is None:
        if n is None:
            raise PreconditionError("n is required for the default input")
        return ProductState.basis(BitString(n, 0))
    if isinstance(spec, BitString):
        return ProductState.basis(spec)
    if isinstance(spec, str):
        return ProductState.basis(BitString.from_str(spec))
    if isinstance(spec, (int, np.integer)):
        if n is None:
            raise PreconditionError("n is required for integer inputs")
        return ProductState.basis(BitString(n, int(spec)))
    return ProductState(spec)


def _basis_of(state: CtState) -> int | None:
    """Index of a computational basis state (up to phase), else None."""
    if isinstance(state, ProductState):
        f = state.factors
        nz = np.abs(f) > 1e-12
        if np.all(nz.sum(axis=1) == 1):
            bits = nz[:, 1].astype(int)
            return int("".join(map(str, bits)), 2)
    return None


def observable_terms(spec, n: int) -> PauliSum:
    if spec is None:
        return PauliSum.single(n, {0: "Z"})
    if isinstance(spec, PauliSumOp):
        return spec.terms
    if isinstance(spec, PauliSum):
        return spec
    if isinstance(spec, dict) and "pauli" in spec:
        spec = spec["pauli"]
    if isinstance(spec, str):
        return PauliSum.from_labels([(1.0, spec)])
    return PauliSum.from_labels([(complex(c), str(lab)) for c, lab in spec])


# --------------------------------------------------------------------------
# Pauli propagation helpers


def _clifford_table(gate: dict):
    """Conjugation ``g^dag P g`` of every local Pauli ``X^x Z^z`` as (x', z', phase)."""
    m = G.gate_matrix(gate)
    k = len(gate["targets"])
    d = 2**k
    out_x = np.zeros(d * d, dtype=np.int64)
    out_z = np.zeros(d * d, dtype=np.int64)
    out_c = np.zeros(d * d, dtype=np.complex128)
    for x in range(d):
        for z in range(d):
            P = PauliSum(k, [x], [z], [1.0]).dense()
            dec = pauli_decompose(m.conj().T @ P @ m)
            if len(dec) != 1:
                raise OutOfClass(f"gate {gate['gate']!r} is not Clifford")
            out_x[x * d + z], out_z[x * d + z], out_c[x * d + z] = dec.xmasks[0], dec.zmasks[0], dec.coeffs[0]
    return out_x, out_z, out_c


def conjugate_pauli_clifford(terms: PauliSum, gate_list: Sequence[dict]) -> PauliSum:
    """``C^dag P C`` for a Clifford gate list ``C`` (applied first to last)."""
    from .ecs_ops import _gather, _scatter

    n = terms.n
    x, z, c = terms.xmasks.copy(), terms.zmasks.copy(), terms.coeffs.copy()
    for g in reversed([G.canonical(g) for g in gate_list]):
        G.check_targets(g, n)
        if g["gate"] not in G.CLIFFORD and not (g["gate"] == "cz" and abs(g["param"] - math.pi) < 1e-12):
            raise OutOfClass(f"gate {g['gate']!r} is not in the Clifford set")
        tx, tz, tc = _clifford_table(g)
        t = g["targets"]
        d = 2 ** len(t)
        idx = _gather(x, t, n) * d + _gather(z, t, n)
        x = _scatter(x, t, tx[idx], n)
        z = _scatter(z, t, tz[idx], n)
        c = c * tc[idx]
    return PauliSum(n, x, z, c)


def lightcone_conjugate(terms: PauliSum, gate_list: Sequence[dict], max_width: int | None = None) -> PauliSum:
    """``V^dag P V`` for a shallow circuit by exact conjugation on the backward lightcone."""
    n = terms.n
    gl = [G.canonical(g) for g in gate_list]
    support = set(terms.support())
    used = []
    for g in reversed(gl):
        G.check_targets(g, n)
        if support.intersection(g["targets"]):
            support.update(g["targets"])
            used.append(g)
    bound = log_locality_bound(n) if max_width is None else max_width
    if len(support) > bound:
        raise BudgetExceeded(f"lightcone of {len(support)} qubits exceeds the locality bound {bound}")
    if not used:
        return terms
    qs = sorted(support)
    pos = {q: i for i, q in enumerate(qs)}
    k = len(qs)
    V = np.eye(2**k, dtype=np.complex128)
    for g in reversed(used):
        V = G.apply_local(V, k, G.gate_matrix(g), [pos[q] for q in g["targets"]])
    O = terms.restricted(qs).dense()
    return pauli_decompose(V.conj().T @ O @ V).embedded(qs, n)


# --------------------------------------------------------------------------
# stage catalog


@dataclass
class _StateSide:
    state: CtState
    basis: int | None
    rules: list[str]


@dataclass
class _ObsSide:
    n: int
    terms: PauliSum | None
    op: EcsOperator | None
    norm: float
    fresh: bool
    rules: list[str]
    budget: int

    def as_op(self) -> EcsOperator:
        if self.op is not None:
            return self.op
        op = PauliSumOp(self.terms, norm_bound=self.norm)
        op.hermitian = self.terms.is_hermitian()
        return op


def _stage_gates(stage: dict, n: int) -> list[dict]:
    gl = []
    if stage.get("kind") == "hadamard":
        return [{"gate": "h", "targets": [int(q)]} for q in stage.get("qubits", range(n))]
    if stage.get("kind") == "qft":
        return [{"gate": "qft", "targets": list(stage.get("targets", range(n)))}]
    for g in stage.get("gates", []):
        g = G.canonical(g)
        G.check_targets(g, n)
        gl.append(g)
    return gl


def _single_qubit(gl) -> bool:
    return all(len(g["targets"]) == 1 and g["gate"] not in ("qft", "oracle") for g in gl)


def _ct_local(stage, side: _StateSide, n):
    gl = _stage_gates(stage, n)
    if not _single_qubit(gl):
        raise OutOfClass("local stage must contain single-qubit gates only")
    st = side.state
    if isinstance(st, ProductState):
        f = st
        for g in gl:
            f = f.apply_local({g["targets"][0]: G.gate_matrix(g)})
        return _StateSide(f, _basis_of(f), side.rules + ["state: local gates on a product state"])
    if isinstance(st, StabilizerState) and all(g["gate"] in G.CLIFFORD for g in gl):
        return _StateSide(StabilizerState(n, list(st.gate_list) + gl, st.input_bits), None,
                          side.rules + ["state: Clifford gates on a stabilizer state"])
    raise OutOfClass(f"local gates on a {type(st).__name__} are not covered")


def _ct_qft(stage, side: _StateSide, n):
    t = list(stage.get("targets", range(n)))
    if t != list(range(n)) or stage.get("inverse"):
        raise OutOfClass("only the forward QFT on the whole register is covered")
    if not isinstance(side.state, ProductState):
        raise OutOfClass("QFT is covered on product inputs only")
    return _StateSide(QftProductState(side.state.factors), None, side.rules + ["state: QFT of a product state"])


def _ct_clifford(stage, side: _StateSide, n):
    gl = _stage_gates(stage, n)
    if any(g["gate"] not in G.CLIFFORD for g in gl):
        raise OutOfClass("Clifford stage contains non-Clifford gates")
    st = side.state
    if side.basis is not None:
        return _StateSide(StabilizerState(n, gl, side.basis), None, side.rules + ["state: Clifford on a basis state"])
    if isinstance(st, StabilizerState):
        return _StateSide(StabilizerState(n, list(st.gate_list) + gl, st.input_bits), None,
                          side.rules + ["state: Clifford on a stabilizer state"])
    if _single_qubit(gl):
        return _ct_local(stage, side, n)
    raise OutOfClass(f"Clifford circuit on a {type(st).__name__} is not covered")


def _ct_matchgate(stage, side: _StateSide, n):
    if side.basis is None:
        raise OutOfClass("matchgate circuits are covered on computational basis inputs only")
    circ = MatchgateCircuit(n, stage.get("gates", []))
    return _StateSide(MatchgateState(circ, side.basis), None, side.rules + ["state: matchgate circuit on a basis state"])


def _ct_basis_preserving(stage, side: _StateSide, n):
    M = basis_preserving_op(_stage_gates(stage, n), n)
    if side.basis is not None:
        # a global phase does not change expectation values
        y = int(M.pi(np.array([side.basis]))[0])
        return _StateSide(ProductState.basis(BitString(n, y)), y,
                          side.rules + ["state: basis-preserving map of a basis state"])
    return _StateSide(apply_basis_preserving(M, side.state), None,
                      side.rules + ["state: basis-preserving image of a tractable state"])


def _obs_need_terms(side: _ObsSide, what: str) -> PauliSum:
    if side.terms is None:
        raise OutOfClass(f"{what} conjugation needs the observable as a Pauli sum")
    return side.terms


def _obs_clifford(stage, side: _ObsSide, n):
    terms = _obs_need_terms(side, "Clifford")
    gl = _stage_gates(stage, n)
    return _ObsSide(n, conjugate_pauli_clifford(terms, gl), None, side.norm, False,
                    side.rules + ["observable: Clifford conjugation of a Pauli sum"], side.budget)


def _obs_local(stage, side: _ObsSide, n):
    terms = _obs_need_terms(side, "lightcone")
    gl = _stage_gates(stage, n)
    for g in gl:
        t = g["targets"]
        if g["gate"] in ("qft", "oracle") or len(t) > 2 or (len(t) == 2 and abs(t[0] - t[1]) != 1):
            raise OutOfClass("shallow stages take one- and two-qubit nearest-neighbour gates only")
    depth = G.circuit_depth(gl)
    limit = math.ceil(2 * math.log2(max(n, 2)))
    if depth > limit:
        raise OutOfClass(f"depth {depth} exceeds the shallow-circuit bound {limit}")
    return _ObsSide(n, lightcone_conjugate(terms, gl), None, side.norm, False,
                    side.rules + [f"observable: depth-{depth} nearest-neighbour circuit (lightcone)"], side.budget)


def _obs_matchgate(stage, side: _ObsSide, n):
    terms = _obs_need_terms(side, "matchgate")
    if not side.fresh or len(terms) != 1 or terms.xmasks[0] != 0 or bin(int(terms.zmasks[0])).count("1") != 1:
        raise OutOfClass("matchgate conjugation is covered for a single-qubit Z observable only")
    z = int(terms.zmasks[0])
    q = n - 1 - (z.bit_length() - 1)
    c = terms.coeffs[0]
    P = conjugate_z1(MatchgateCircuit(n, stage.get("gates", [])), q).terms.scaled(c)
    return _ObsSide(n, P, None, side.norm, False, side.rules + ["observable: matchgate conjugation of Z"],
                    side.budget)


def _obs_basis_preserving(stage, side: _ObsSide, n):
    M = basis_preserving_op(_stage_gates(stage, n), n)
    op = conjugate(M, side.as_op(), budget=side.budget)
    return _ObsSide(n, None, op, side.norm, False, side.rules + ["observable: basis-preserving conjugation"],
                    side.budget)


def _obs_ecs_unitary(stage, side: _ObsSide, n):
    U = stage.get("operator")
    if isinstance(U, dict):
        from .schema import operator_from_dict

        U = operator_from_dict(U)
    if not isinstance(U, EcsOperator) or U.n != n:
        raise SchemaError("ecs_unitary stages need an operator on the full register")
    if not U.unitary:
        raise PreconditionError("ecs_unitary stage operator is not declared unitary")
    op = conjugate(U, side.as_op(), budget=side.budget)
    return _ObsSide(n, None, op, side.norm, False, side.rules + [f"observable: sparse unitary conjugation (s={U.s})"],
                    side.budget)


STATE_RULES: dict[str, Callable] = {
    "local": _ct_local,
    "hadamard": _ct_local,
    "qft": _ct_qft,
    "clifford": _ct_clifford,
    "matchgate": _ct_matchgate,
    "basis_preserving": _ct_basis_preserving,
    "toffoli": _ct_basis_preserving,
}

OBSERVABLE_RULES: dict[str, Callable] = {
    "local": _obs_local,
    "nn_circuit": _obs_local,
    "hadamard": _obs_clifford,
    "clifford": _obs_clifford,
    "matchgate": _obs_matchgate,
    "basis_preserving": _obs_basis_preserving,
    "toffoli": _obs_basis_preserving,
    "ecs_unitary": _obs_ecs_unitary,
}


def register_rule(side: str, kind: str, fn: Callable) -> None:
    """Add a catalog rule. Every new rule needs its own dense-reference test."""
    table = {"state": STATE_RULES, "observable": OBSERVABLE_RULES}[side]
    table[kind] = fn


def _state_from_recipe(spec, n):
    if spec is None or isinstance(spec, (BitString, str, int, np.integer)):
        return product_input(spec, n)
    if isinstance(spec, CtState):
        return spec
    if isinstance(spec, dict):
        from .schema import state_from_dict

        return state_from_dict(spec)
    return product_input(spec, n)


def build_plan(stages: Sequence[dict], input=None, observable=None, n: int | None = None, split: int | None = None,
               compose_budget: int = DEFAULT_COMPOSE_BUDGET) -> tuple[CircuitPlan, int]:
    """Find a split ``U_1 = stages[:j]`` / ``U_2 = stages[j:]`` covered by the catalog.

    Splits are tried in stage order (``j = 0, 1, ...``) unless ``split`` fixes
    one. Raises :class:`OutOfClass` listing why each split failed.
    """
    if n is None:
        n = input.n if isinstance(input, CtState) else None
    state0 = _state_from_recipe(input, n)
    n = state0.n
    terms0 = observable_terms(observable, n)
    if terms0.n != n:
        raise PreconditionError("observable width differs from the input")
    norm0 = terms0.one_norm()
    stages = [dict(s) for s in stages]
    for s in stages:
        if "kind" not in s:
            raise SchemaError(f"stage without 'kind': {s!r}")
    failures = []
    budget_hit = None
    choices = [split] if split is not None else range(len(stages) + 1)
    for j in choices:
        try:
            side = _StateSide(state0, _basis_of(state0), [])
            for s in stages[:j]:
                rule = STATE_RULES.get(s["kind"])
                if rule is None:
                    raise OutOfClass(f"no state-side rule for {s['kind']!r}")
                side = rule(s, side, n)
            obs = _ObsSide(n, terms0, None, norm0, True, [], compose_budget)
            for s in reversed(stages[j:]):
                rule = OBSERVABLE_RULES.get(s["kind"])
                if rule is None:
                    raise OutOfClass(f"no observable-side rule for {s['kind']!r}")
                obs = rule(s, obs, n)
        except OutOfClass as exc:
            failures.append(f"split {j}: {exc}")
            continue
        except BudgetExceeded as exc:
            failures.append(f"split {j}: {exc}")
            budget_hit = exc
            continue
        op = obs.as_op()
        notes = side.rules + obs.rules + [f"split after stage {j}"]
        return CircuitPlan(side.state, op, "computational", notes), j
    msg = "no catalog rule covers this circuit; " + "; ".join(failures)
    if budget_hit is not None and all("exceed" in f for f in failures):
        raise BudgetExceeded(msg)
    raise OutOfClass(msg)


def simulate_composed(stages: Sequence[dict], input=None, observable=None, budget=None, stream=None, *,
                      n: int | None = None, split: int | None = None,
                      compose_budget: int = DEFAULT_COMPOSE_BUDGET, **kw) -> Estimate:
    """Estimate ``<O>`` after a staged circuit using the composability catalog.

    ``stages`` are dicts with a ``kind`` (``local``, ``hadamard``, ``qft``,
    ``clifford``, ``matchgate``, ``basis_preserving``/``toffoli``,
    ``nn_circuit``, ``ecs_unitary``) and ``gates`` or ``operator``. The fired
    rules are reported in ``details["notes"]``.
    """
    plan, j = build_plan(stages, input, observable, n, split, compose_budget)
    est = simulate_conjugated(plan, budget, stream, **kw)
    est.details["split"] = j
    return est


# --------------------------------------------------------------------------
# sparse circuits


def simulate_sparse_circuit(ops: Sequence[EcsOperator], input=None, budget=None, stream=None, *,
                            observable=None, sparseness_budget: int = 4096, n: int | None = None, **kw) -> Estimate:
    """``<O>`` after sparse unitaries ``ops`` (first applied first) on a product input.

    The product of the sparsenesses must stay within ``sparseness_budget``;
    the conjugated observable then has sparseness at most
    ``s_O * (prod s_i)^2``.
    """
    if n is None:
        n = ops[0].n if ops else (input.n if isinstance(input, CtState) else None)
    psi = product_input(input, n)
    n = psi.n
    total = 1
    for U in ops:
        if U.n != n:
            raise PreconditionError("operator width differs from the input")
        if not U.unitary:
            raise PreconditionError(f"{U.label} is not declared unitary")
        total *= max(U.s, 1)
    if total > sparseness_budget:
        sizes = "*".join(str(U.s) for U in ops)
        raise BudgetExceeded(f"sparseness product {sizes} = {total} exceeds the budget {sparseness_budget}")
    terms = observable_terms(observable, n)
    O = PauliSumOp(terms)
    cap = max(O.s, 1) * total * total
    if ops:
        U = compose(*reversed(list(ops)), budget=cap)
        O2 = conjugate(U, O, budget=cap)
    else:
        O2 = O
    plan = CircuitPlan(psi, O2, notes=[f"sparse circuit with sparseness product {total}"])
    return simulate_conjugated(plan, budget, stream, **kw)


# --------------------------------------------------------------------------
# CNOT / e^{i theta X} circuits in the +/- frame


def cnot_expx_plan(circuit: Sequence[dict], input=None, n: int | None = None, qubit: int = 0) -> CircuitPlan:
    gl = [G.canonical(g) for g in circuit]
    for g in gl:
        if g["gate"] not in ("cnot", "expx"):
            raise OutOfClass(f"gate {g['gate']!r} is outside the CNOT / e^(i theta X) family")
    psi = product_input(input, n)
    n = psi.n
    for g in gl:
        G.check_targets(g, n)
    # H^n U H^n is a CNOT / e^{i theta Z} circuit M, and H Z_1 H = X_1
    M = basis_preserving_op([hadamard_conjugate_gate(g) for g in gl], n)
    X1 = PauliSumOp(PauliSum.single(n, {qubit: "X"}))
    O = conjugate(M, X1)
    plan = CircuitPlan(rotate_to_pm_basis(psi), hadamard_frame(O), "pm",
                       ["state: product input rotated to the +/- basis",
                        "observable: Hadamard-conjugated circuit is basis-preserving"])
    return plan


def simulate_cnot_expx(circuit: Sequence[dict], input=None, budget=None, stream=None, *, n: int | None = None,
                       qubit: int = 0, **kw) -> Estimate:
    """``<Z_q>`` after a CNOT / e^{i theta X} circuit on a product input, in the +/- frame."""
    return simulate_conjugated(cnot_expx_plan(circuit, input, n, qubit), budget, stream, **kw)


# --------------------------------------------------------------------------
# four-round structure: local, sparse, local, projective measurement


def local_unitaries(spec, n: int) -> list[np.ndarray]:
    """Per-qubit 2x2 unitaries from a list of matrices, a ``{qubit: matrix}`` dict or single-qubit gates."""
    if spec is None:
        return [G.I2] * n
    if isinstance(spec, dict):
        out = [G.I2] * n
        for q, m in spec.items():
            out[int(q)] = np.asarray(m, dtype=complex)
        return out
    spec = list(spec)
    if spec and isinstance(spec[0], dict):
        out = [G.I2.copy() for _ in range(n)]
        for g in spec:
            g = G.canonical(g)
            G.check_targets(g, n)
            if len(g["targets"]) != 1:
                raise OutOfClass("local rounds take single-qubit gates only")
            q = g["targets"][0]
            out[q] = G.gate_matrix(g) @ out[q]
        return out
    if len(spec) != n:
        raise SchemaError(f"need {n} single-qubit unitaries")
    out = [np.asarray(m, dtype=complex) for m in spec]
    for m in out:
        if not G.is_unitary(m):
            raise PreconditionError("local round contains a non-unitary matrix")
    return out


def simulate_dj_class(v1, v2: EcsOperator, v3, k: int, budget=None, stream=None, *, input=None,
                      **kw) -> Estimate:
    """Probability of ``0^k`` on the first ``k`` qubits after ``V_3 V_2 V_1``.

    ``V_1`` and ``V_3`` are layers of single-qubit unitaries and ``V_2`` is a
    sparse unitary. ``V_3^dag (|0><0|^k (x) I) V_3 = |g><g| (x) I`` with the
    product state ``|g> = (x)_j u_j^dag|0>``, so the value is a projected
    partial overlap.
    """
    n = v2.n
    if not 0 < k <= n:
        raise PreconditionError("need 0 < k <= n")
    psi = product_input(input, n).apply_local(dict(enumerate(local_unitaries(v1, n))))
    u3 = local_unitaries(v3, n)
    gamma = ProductState([np.conj(u3[j][0, :]) for j in range(k)])
    kw.setdefault("real", True)
    est = estimate_partial_projected(psi, v2.adjoint(), gamma, gamma, v2, psi, budget, stream, **kw)
    est.details["notes"] = ["observable: V3-rotated projector is a product-state projector",
                            "value: projected partial overlap through the swap identity"]
    return est


__all__ = [
    "CircuitPlan", "simulate_conjugated", "simulate_sparse_circuit", "simulate_composed", "simulate_cnot_expx",
    "simulate_dj_class", "build_plan", "cnot_expx_plan", "conjugate_pauli_clifford", "lightcone_conjugate",
    "register_rule", "STATE_RULES", "OBSERVABLE_RULES", "product_input", "observable_terms", "local_unitaries",
]

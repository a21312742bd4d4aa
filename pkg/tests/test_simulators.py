import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _support import pauli_dense
from weaksim import instances as I
from weaksim.core import BudgetExceeded, OutOfClass, PreconditionError, RandomStream
from weaksim.ct_states import ProductState
from weaksim.ecs_ops import PauliSum, local_gate_op
from weaksim.oracle import circuit_unitary
from weaksim.plans import dense_reference, run_plan
from weaksim.simulators import (
    build_plan,
    conjugate_pauli_clifford,
    lightcone_conjugate,
    local_unitaries,
    simulate_cnot_expx,
    simulate_composed,
    simulate_sparse_circuit,
)

EPS, DELTA = 0.05, 1e-3


def _check(plan, seed=0):
    est = run_plan(plan, (EPS, DELTA), RandomStream(seed))
    ref = dense_reference(plan)
    assert abs(est.value - ref) <= est.epsilon
    return est


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 6), st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_clifford_pauli_conjugation_matches_dense(n, count, seed):
    rng = np.random.default_rng(seed)
    gl = I.random_clifford(n, count, rng)
    lab = "".join(rng.choice(list("IXYZ"), n))
    out = conjugate_pauli_clifford(PauliSum.from_labels([(1.0, lab)]), gl)
    U = circuit_unitary(gl, n)
    assert len(out) == 1
    assert np.allclose(out.dense(), U.conj().T @ pauli_dense(lab) @ U, atol=1e-10)


def test_clifford_conjugation_rejects_t_gate():
    with pytest.raises(OutOfClass):
        conjugate_pauli_clifford(PauliSum.single(2, {0: "Z"}), [{"gate": "t", "targets": [0]}])


def test_lightcone_conjugation_matches_dense():
    rng = np.random.default_rng(1)
    gl = I.random_nn_circuit(6, 2, rng)
    out = lightcone_conjugate(PauliSum.single(6, {0: "Z"}), gl)
    U = circuit_unitary(gl, 6)
    assert np.allclose(out.dense(), U.conj().T @ pauli_dense("ZIIIII") @ U, atol=1e-10)
    with pytest.raises(BudgetExceeded):
        lightcone_conjugate(PauliSum.single(6, {0: "Z"}), I.random_nn_circuit(6, 6, rng), max_width=3)


@pytest.mark.parametrize("builder", [I.local_qft_sparse_matchgate_plan, I.matchgate_toffoli_clifford_nn_plan,
                                     I.hadamard_sandwich_matchgate_plan])
def test_composed_patterns(builder):
    rng = np.random.default_rng(2)
    for i in range(3):
        est = _check(builder(6, rng), i)
        assert est.details["notes"]


def test_composed_split_choice_is_reported():
    rng = np.random.default_rng(3)
    plan = I.local_qft_sparse_matchgate_plan(6, rng)
    est = run_plan(plan, (0.1, 0.01), 0)
    assert est.details["split"] == 2
    plan = I.hadamard_sandwich_matchgate_plan(6, rng)
    assert run_plan(plan, (0.1, 0.01), 0).details["split"] == 1


def test_out_of_class_circuit():
    with pytest.raises(OutOfClass):
        simulate_composed([{"kind": "qft"}, {"kind": "clifford", "gates": [{"gate": "t", "targets": [0]}]}],
                          "000", None)


def test_deep_nearest_neighbour_stage_is_rejected():
    rng = np.random.default_rng(4)
    stages = [{"kind": "nn_circuit", "gates": I.random_nn_circuit(4, 12, rng)}]
    with pytest.raises(OutOfClass):
        build_plan(stages, "0000", None, split=0)


def test_matchgate_observable_side_needs_single_z():
    rng = np.random.default_rng(5)
    stages = [{"kind": "hadamard", "qubits": [0, 1, 2, 3]},
              {"kind": "matchgate", "gates": I.MatchgateCircuit.random(4, 5, rng).gate_dicts()}]
    plan, j = build_plan(stages, "0000", [(1.0, "ZIII")], split=1)
    assert j == 1 and any("matchgate" in note for note in plan.notes)
    with pytest.raises(OutOfClass):
        build_plan(stages, "0000", [(1.0, "ZZII")], split=1)


def test_sparse_circuit_cluster_state():
    est = _check(I.cluster_plan(6))
    assert abs(est.value) <= EPS


def test_sparse_circuit_budget_guard():
    H2 = np.kron([[1, 1], [1, -1]], [[1, 1], [1, -1]]) / 2
    ops = [local_gate_op(H2, [q, q + 1], 8) for q in range(7)]
    with pytest.raises(BudgetExceeded):
        simulate_sparse_circuit(ops, "00000000", (EPS, DELTA), 0)
    # the conjugated observable has sparseness s^2, so keep the in-budget case small
    est = simulate_sparse_circuit(ops[:2], "00000000", (0.1, 0.01), 0)
    assert est.value == pytest.approx(0.0, abs=0.1)


def test_sparse_circuit_rejects_non_unitary():
    op = local_gate_op(np.diag([1.0, 0.5]), [0], 3, require_unitary=False)
    with pytest.raises(PreconditionError):
        simulate_sparse_circuit([op], "000")


def test_cnot_expx_matches_dense():
    rng = np.random.default_rng(6)
    for i in range(5):
        _check(I.cnot_expx_plan_doc(6, 30, rng), i)


def test_cnot_expx_frame_and_family():
    est = simulate_cnot_expx([{"gate": "cnot", "targets": [0, 1]}], ProductState.basis("10"), (EPS, DELTA), 0)
    assert est.details["frame"] == "pm"
    assert est.value == pytest.approx(-1.0, abs=EPS)
    with pytest.raises(OutOfClass):
        simulate_cnot_expx([{"gate": "h", "targets": [0]}], "00")


@pytest.mark.parametrize("label,table,expected", [
    ("constant", np.ones(16, dtype=int), 1.0),
    ("balanced", np.array([0, 1] * 8), 0.0),
])
def test_deutsch_jozsa_class(label, table, expected):
    plan = I.dj_plan(4, table)
    est = _check(plan)
    assert dense_reference(plan) == pytest.approx(expected, abs=1e-12)
    assert abs(est.value - expected) <= EPS


def test_local_unitaries_forms():
    n = 3
    out = local_unitaries([{"gate": "h", "targets": [1]}, {"gate": "x", "targets": [1]}], n)
    H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    assert np.allclose(out[1], np.array([[0, 1], [1, 0]]) @ H)
    assert np.allclose(out[0], np.eye(2))
    with pytest.raises(OutOfClass):
        local_unitaries([{"gate": "cnot", "targets": [0, 1]}], n)

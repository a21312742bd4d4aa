import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _support import OPERATOR_KINDS, kron_all, pauli_dense, random_operator
from weaksim import gates as G
from weaksim.core import BudgetExceeded, PreconditionError
from weaksim.ecs_ops import (
    DenseOp,
    PauliSum,
    PauliSumOp,
    SparsenessViolation,
    compose,
    conjugate,
    diagonal_sign_op,
    hadamard_conjugate_gate,
    local_gate_op,
    merge_entries,
    pauli_decompose,
    swap_block_op,
)
from weaksim.oracle import assemble, audit_duality, circuit_unitary


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(OPERATOR_KINDS), st.integers(3, 6), st.integers(0, 2**32 - 1))
def test_rows_and_columns_describe_the_same_matrix(kind, n, seed):
    A, a = random_operator(kind, n, np.random.default_rng(seed))
    assert np.allclose(assemble(A), a, atol=1e-12)
    assert np.allclose(assemble(A, from_rows=True), a, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(OPERATOR_KINDS), st.integers(3, 6), st.integers(0, 2**32 - 1))
def test_declared_bounds_are_honest(kind, n, seed):
    A, a = random_operator(kind, n, np.random.default_rng(seed))
    nz = np.abs(a) > 1e-12
    assert nz.sum(axis=0).max() <= A.s
    assert nz.sum(axis=1).max() <= A.s
    tol = 1e-9
    assert np.linalg.norm(a, 2) <= A.norm_bound + tol
    assert np.abs(a).sum(axis=0).max() <= A.col_norm_bound + tol
    assert np.abs(a).sum(axis=1).max() <= A.row_norm_bound + tol
    assert np.abs(a).max() <= A.entry_bound + tol
    if A.hermitian:
        assert np.allclose(a, a.conj().T)
    if A.unitary:
        assert np.allclose(a.conj().T @ a, np.eye(2**n), atol=1e-10)


def test_composition_sparseness_multiplies_and_respects_budget():
    rng = np.random.default_rng(0)
    A, _ = random_operator("local_gate", 5, rng)
    B, _ = random_operator("local_gate", 5, rng)
    C = compose(A, B)
    assert C.s == A.s * B.s
    with pytest.raises(BudgetExceeded):
        compose(A, B, budget=A.s * B.s - 1)


def test_conjugation_keeps_hermiticity():
    rng = np.random.default_rng(1)
    U, u = random_operator("local_gate", 4, rng)
    O = PauliSumOp(PauliSum.from_labels([(1.0, "ZIII")]))
    C = conjugate(U, O)
    assert C.hermitian
    assert np.allclose(assemble(C), u.conj().T @ pauli_dense("ZIII") @ u)


def test_merge_entries_sums_duplicates_and_drops_zeros():
    idx = np.array([[3, 1, 3, -1], [2, 2, 0, 5]])
    c = np.array([[1, 2, -1, 9], [0.5, -0.5, 1, 1]], dtype=complex)
    out_i, out_c = merge_entries(idx, c)
    assert out_i.tolist() == [[1, -1], [0, 5]]
    assert out_c.tolist() == [[2, 0], [1, 1]]
    with pytest.raises(SparsenessViolation):
        merge_entries(idx, c, width=1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-1, 1), st.text("IXYZ", min_size=4, max_size=4)), min_size=1, max_size=6))
def test_pauli_sum_matches_kronecker_products(terms):
    P = PauliSum.from_labels(terms)
    ref = sum((c * pauli_dense(lab) for c, lab in terms), np.zeros((16, 16), dtype=complex))
    assert np.allclose(P.dense(), ref)
    assert np.allclose(assemble(PauliSumOp(P)), ref)
    assert P.is_hermitian()
    if len(P):
        col, row = P.line_norms()
        assert col == pytest.approx(np.abs(ref).sum(axis=0).max())
        assert row == pytest.approx(np.abs(ref).sum(axis=1).max())


def test_pauli_labels_round_trip():
    terms = [(0.5, "XYZI"), (0.25j, "IYYX"), (-1.0, "ZZZZ")]
    P = PauliSum.from_labels(terms)
    again = PauliSum.from_labels(P.labels())
    assert np.allclose(P.dense(), again.dense())
    assert sorted(lab for _, lab in P.labels()) == sorted(lab for _, lab in terms)


def test_pauli_decompose_reconstructs():
    rng = np.random.default_rng(2)
    m = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    assert np.allclose(pauli_decompose(m).dense(), m)


def test_embedded_pauli_sum():
    P = PauliSum.from_labels([(1.0, "XZ")]).embedded([3, 1], 4)
    assert np.allclose(P.dense(), pauli_dense("IZIX"))


def test_swap_block():
    S = swap_block_op(2, 3)
    x = 0b10_01_1
    assert int(S.apply(np.array([x]))[0][0]) == 0b01_10_1
    m = assemble(S)
    assert np.allclose(m @ m, np.eye(32))


def test_diagonal_sign():
    D = diagonal_sign_op(lambda xs: xs & 1, 3)
    assert np.allclose(np.diag(assemble(D)), [1, -1] * 4)


@pytest.mark.parametrize("gate", [{"gate": "cnot", "targets": [0, 2]}, {"gate": "expx", "targets": [1], "param": 0.7},
                                  {"gate": "expz", "targets": [2], "param": 1.1}, {"gate": "x", "targets": [0]}])
def test_hadamard_conjugation_rules(gate):
    Hn = kron_all([G.H] * 3)
    lhs = Hn @ circuit_unitary([gate], 3) @ Hn
    assert np.allclose(lhs, circuit_unitary([hadamard_conjugate_gate(gate)], 3))


def test_local_gate_width_is_bounded():
    with pytest.raises(BudgetExceeded):
        local_gate_op(np.eye(2**5), list(range(5)), 5, max_width=4)
    with pytest.raises(PreconditionError):
        local_gate_op(np.ones((2, 2)), [0], 3)


def test_dense_op_audit():
    rng = np.random.default_rng(3)
    m = np.where(rng.random((16, 16)) < 0.2, rng.normal(size=(16, 16)), 0)
    D = DenseOp(m)
    assert audit_duality(D)
    assert np.allclose(assemble(D), m)


def test_adjoint_of_adjoint():
    rng = np.random.default_rng(4)
    A, a = random_operator("basis_preserving", 4, rng)
    assert np.allclose(assemble(A.adjoint().adjoint()), a)
    assert np.allclose(assemble(A.adjoint()), a.conj().T)

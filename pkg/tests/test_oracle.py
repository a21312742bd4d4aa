import numpy as np
import pytest

from _support import kron_all, random_operator
from weaksim import gates as G
from weaksim.core import BudgetExceeded, PreconditionError
from weaksim.ct_states import ProductState
from weaksim.oracle import (
    DenseCtState,
    DenseState,
    apply_matrix,
    assemble,
    circuit_unitary,
    dense_evolve,
    dense_matrix_element,
    dense_spectral_norm,
    tv_distance,
)


def test_single_gates_follow_the_bit_order():
    # qubit 0 is the most significant bit
    assert np.allclose(dense_evolve([{"gate": "x", "targets": [0]}], 0, 3).vector, np.eye(8)[0b100])
    assert np.allclose(dense_evolve([{"gate": "x", "targets": [2]}], 0, 3).vector, np.eye(8)[0b001])
    out = dense_evolve([{"gate": "cnot", "targets": [0, 2]}], 0b100, 3).vector
    assert np.allclose(out, np.eye(8)[0b101])


def test_apply_matrix_matches_kronecker_product():
    rng = np.random.default_rng(0)
    v = rng.normal(size=16) + 1j * rng.normal(size=16)
    m = rng.normal(size=(2, 2))
    assert np.allclose(apply_matrix(v, 4, m, [1]), kron_all([np.eye(2), m, np.eye(2), np.eye(2)]) @ v)
    m2 = rng.normal(size=(4, 4))
    # targets [2, 0]: the first target is the high bit of the 4x4 block
    assert np.allclose(apply_matrix(v[:8], 3, m2, [2, 0]), _on_q2_q0(m2) @ v[:8])


def _on_q2_q0(m2):
    # matrix of m2 acting on (q2, q0) of a 3-qubit register, built entry by entry
    out = np.zeros((8, 8), dtype=complex)
    for x in range(8):
        q0, q1, q2 = (x >> 2) & 1, (x >> 1) & 1, x & 1
        col = 2 * q2 + q0
        for row in range(4):
            r2, r0 = row >> 1, row & 1
            out[(r0 << 2) | (q1 << 1) | r2, x] += m2[row, col]
    return out


def test_qft_sign_convention():
    k = 3
    out = dense_evolve([{"gate": "qft", "targets": [0, 1, 2]}], 0b011, k).vector
    assert np.allclose(out, np.exp(2j * np.pi * 3 * np.arange(8) / 8) / np.sqrt(8))
    back = dense_evolve([{"gate": "qft", "targets": [0, 1, 2], "inverse": True}], DenseState(3, out))
    assert np.allclose(back.vector, np.eye(8)[3])


def test_circuit_unitary_is_unitary():
    U = circuit_unitary([{"gate": "h", "targets": [0]}, {"gate": "cnot", "targets": [0, 1]},
                         {"gate": "t", "targets": [1]}], 2)
    assert np.allclose(U.conj().T @ U, np.eye(4))
    assert np.allclose(U[:, 0], np.array([1, 0, 0, np.exp(1j * np.pi / 4)]) / np.sqrt(2))


@pytest.mark.parametrize("kind", ["pauli_sum", "local_gate", "composition", "combination"])
def test_spectral_norm_matches_numpy(kind):
    A, a = random_operator(kind, 5, np.random.default_rng(1))
    rep = dense_spectral_norm(A)
    assert rep.spectral == pytest.approx(np.linalg.norm(a, 2), rel=1e-6)
    assert rep.max_col_sum == pytest.approx(np.abs(a).sum(axis=0).max())
    assert rep.max_row_sum == pytest.approx(np.abs(a).sum(axis=1).max())
    assert dense_spectral_norm(np.zeros((4, 4))).spectral == 0.0


def test_assemble_cap():
    A, _ = random_operator("pauli_sum", 5, np.random.default_rng(2))
    with pytest.raises(BudgetExceeded):
        assemble(A, cap=4)
    with pytest.raises(BudgetExceeded):
        dense_evolve([], 0, 14)


def test_dense_matrix_element_identity_and_states():
    psi = ProductState.plus(3)
    assert dense_matrix_element(psi, None, psi) == pytest.approx(1.0)
    Z0 = kron_all([G.Z, np.eye(2), np.eye(2)])
    assert dense_matrix_element(psi, Z0, psi) == pytest.approx(0.0)


def test_tv_distance():
    assert tv_distance(np.array([0, 0, 1, 1]), np.array([0.5, 0.5])) == 0.0
    assert tv_distance(np.array([0, 0, 0, 0]), np.array([0.5, 0.5])) == pytest.approx(0.5)
    assert tv_distance(np.array([2]), np.array([0.0, 0.0, 1.0, 0.0])) == 0.0


def test_dense_ct_state_samples_its_distribution():
    v = np.array([0.6, 0, 0, 0.8j])
    psi = DenseCtState(v)
    xs = psi.sample(np.random.default_rng(0), 20_000)
    assert tv_distance(xs, np.abs(v) ** 2) <= 0.02
    with pytest.raises(PreconditionError):
        DenseCtState(np.array([1.0, 1.0]))

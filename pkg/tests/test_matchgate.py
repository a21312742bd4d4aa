import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _support import pauli_dense
from weaksim import gates as G
from weaksim.core import PreconditionError
from weaksim.matchgate import (
    MatchgateCircuit,
    MatchgateState,
    conjugate_z1,
    gate_rotation,
    pfaffian,
    pfaffian_batch,
    random_su2,
)
from weaksim.oracle import assemble, circuit_unitary, dense_evolve


def pfaffian_by_expansion(A):
    """Recursive expansion along the first row (exponential, reference only)."""
    m = A.shape[0]
    if m == 0:
        return 1.0
    if m % 2:
        return 0.0
    total = 0
    for j in range(1, m):
        rest = [k for k in range(1, m) if k != j]
        total += (-1) ** (j + 1) * A[0, j] * pfaffian_by_expansion(A[np.ix_(rest, rest)])
    return total


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 5), st.integers(0, 2**32 - 1))
def test_pfaffian_matches_expansion(half, seed):
    rng = np.random.default_rng(seed)
    m = 2 * half
    B = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    A = B - B.T
    assert pfaffian(A) == pytest.approx(pfaffian_by_expansion(A), rel=1e-9, abs=1e-9)
    if m:
        # Pf(A)^2 = det(A)
        assert pfaffian(A) ** 2 == pytest.approx(np.linalg.det(A), rel=1e-8, abs=1e-8)


def test_pfaffian_batch_handles_zero_pivots():
    A = np.zeros((6, 6))
    for i, j in [(0, 3), (1, 4), (2, 5)]:
        A[i, j], A[j, i] = 1.0, -1.0
    ref = pfaffian_by_expansion(A)
    assert pfaffian_batch(np.stack([A, 2 * A]))[0] == pytest.approx(ref)
    assert pfaffian_batch(np.stack([A, 2 * A]))[1] == pytest.approx(8 * ref)


def test_random_su2_is_special_unitary():
    rng = np.random.default_rng(0)
    for _ in range(20):
        u = random_su2(rng)
        assert G.is_unitary(u)
        assert np.linalg.det(u) == pytest.approx(1)


def test_gate_rotation_is_orthogonal():
    rng = np.random.default_rng(1)
    R = gate_rotation(G.matchgate_matrix(random_su2(rng), random_su2(rng)))
    assert np.allclose(R @ R.T, np.eye(4), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1)


def test_matchgate_rejects_distant_targets():
    rng = np.random.default_rng(2)
    with pytest.raises(PreconditionError):
        MatchgateCircuit(4).append({"gate": "matchgate", "targets": [0, 2], "A": random_su2(rng),
                                    "B": random_su2(rng)})


def test_matchgate_rejects_non_special_blocks():
    with pytest.raises(PreconditionError):
        MatchgateCircuit(2).append({"gate": "matchgate", "targets": [0, 1], "A": 1j * np.eye(2), "B": np.eye(2)})


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), st.integers(0, 40), st.integers(0, 2**32 - 1))
def test_matchgate_state_matches_dense(n, gates, seed):
    rng = np.random.default_rng(seed)
    circ = MatchgateCircuit.random(n, gates, rng)
    x0 = int(rng.integers(2**n))
    psi = MatchgateState(circ, x0)
    ref = dense_evolve(circ.gate_dicts(), x0, n).vector
    assert np.abs(psi.amplitudes(np.arange(2**n)) - ref).max() <= 1e-9


def test_every_input_of_a_small_register():
    rng = np.random.default_rng(3)
    circ = MatchgateCircuit.brickwork(4, 4, rng)
    for x0 in range(16):
        ref = dense_evolve(circ.gate_dicts(), x0, 4).vector
        assert np.allclose(MatchgateState(circ, x0).amplitudes(np.arange(16)), ref, atol=1e-10)


@pytest.mark.parametrize("qubit", [0, 2, 4])
def test_conjugated_z_matches_dense(qubit):
    rng = np.random.default_rng(4 + qubit)
    n = 5
    circ = MatchgateCircuit.random(n, 15, rng)
    U = circuit_unitary(circ.gate_dicts(), n)
    Z = pauli_dense("".join("Z" if q == qubit else "I" for q in range(n)))
    op = conjugate_z1(circ, qubit)
    assert np.allclose(assemble(op), U.conj().T @ Z @ U, atol=1e-10)
    # quadratic in Majoranas: at most n(2n-1) terms, each of weight <= n
    assert len(op.terms) <= n * (2 * n - 1)


def test_matchgate_marginals_sum_to_one():
    rng = np.random.default_rng(5)
    psi = MatchgateState(MatchgateCircuit.random(6, 20, rng), 0b100110)
    for S in [(0,), (2, 3), (0, 1, 5)]:
        assert psi.marginal(S, np.arange(2 ** len(S))).sum() == pytest.approx(1)


def test_brickwork_layers():
    rng = np.random.default_rng(6)
    c = MatchgateCircuit.brickwork(6, 3, rng)
    firsts = [g["targets"][0] for g in c.gates]
    assert firsts == [0, 2, 4, 1, 3, 0, 2, 4]

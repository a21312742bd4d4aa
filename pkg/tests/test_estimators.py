import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _support import STATE_KINDS, pauli_dense, product_vector, random_operator, random_state
from weaksim import instances as I
from weaksim.core import PreconditionError, RandomStream, RangeViolation, complex_samples, required_samples
from weaksim.ct_states import ProductState, StabilizerState
from weaksim.ecs_ops import DenseOp, PauliSum, PauliSumOp
from weaksim.estimators import (
    ErrorBudget,
    RangeLog,
    estimate_local_observable,
    estimate_matrix_element,
    estimate_overlap,
    estimate_partial_projected,
)

EPS, DELTA = 0.05, 1e-3


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(STATE_KINDS), st.sampled_from(STATE_KINDS), st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_overlap_within_epsilon(k1, k2, n, seed):
    rng = np.random.default_rng(seed)
    phi, vphi = random_state(k1, n, rng)
    psi, vpsi = random_state(k2, n, rng)
    est = estimate_overlap(phi, psi, (EPS, DELTA), seed)
    assert abs(est.value - np.vdot(vphi, vpsi)) <= EPS
    assert est.samples_used == 2 * complex_samples(EPS / 2, DELTA / 2)


def test_overlap_of_a_state_with_itself_is_one():
    psi, _ = random_state("stabilizer", 6, np.random.default_rng(0))
    est = estimate_overlap(psi, psi, (EPS, DELTA), 1, real=True)
    assert est.value == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(STATE_KINDS), st.sampled_from(["pauli_sum", "basis_preserving", "local_gate", "scaled"]),
       st.integers(3, 6), st.integers(0, 2**32 - 1))
def test_matrix_element_within_epsilon(kind, op_kind, n, seed):
    rng = np.random.default_rng(seed)
    phi, vphi = random_state(kind, n, rng)
    psi, vpsi = random_state("product", n, rng)
    A, a = random_operator(op_kind, n, rng)
    est = estimate_matrix_element(phi, A, psi, (EPS, DELTA), seed)
    assert abs(est.value - np.vdot(vphi, a @ vpsi)) <= EPS


def test_per_term_mode_gives_the_same_numbers():
    rng = np.random.default_rng(1)
    phi, _ = random_state("matchgate", 6, rng)
    psi, _ = random_state("qft_product", 6, rng)
    A, _ = random_operator("combination", 6, rng)
    log = RangeLog()
    a = estimate_matrix_element(phi, A, psi, (0.1, 0.01), 3)
    b = estimate_matrix_element(phi, A, psi, (0.1, 0.01), 3, per_term=True, log=log)
    assert a.value == pytest.approx(b.value, abs=1e-12)
    assert not log.violations()
    assert {"F_i", "G_i"} <= set(log.worst)


@pytest.mark.parametrize("workers", [2, 4])
def test_worker_count_does_not_change_estimates(workers):
    rng = np.random.default_rng(2)
    phi, _ = random_state("mps", 7, rng)
    psi, _ = random_state("stabilizer", 7, rng)
    A, _ = random_operator("composition", 7, rng)
    a = estimate_matrix_element(phi, A, psi, (0.1, 0.01), RandomStream(5))
    b = estimate_matrix_element(phi, A, psi, (0.1, 0.01), RandomStream(5), workers=workers)
    assert a.value == b.value


def test_real_mode_for_hermitian_expectations():
    rng = np.random.default_rng(3)
    psi, vec = random_state("stabilizer", 5, rng)
    O = PauliSumOp(PauliSum.from_labels([(0.5, "ZZIII"), (0.5, "IXIXI")]))
    est = estimate_matrix_element(psi, O, psi, (EPS, DELTA), 0)
    assert isinstance(est.value, float)
    assert abs(est.value - np.vdot(vec, O.terms.dense() @ vec).real) <= EPS


def test_lying_operator_bound_aborts():
    m = np.diag([3.0, 1.0, 1.0, 1.0])
    A = DenseOp(m, norm_bound=0.5)
    psi = ProductState.plus(2)
    with pytest.raises(RangeViolation):
        estimate_matrix_element(psi, A, psi, (0.1, 0.1), 0, per_term=True)


def test_entry_accuracy_consumes_budget():
    terms = PauliSum.from_labels([(0.5, "ZI"), (0.5, "IX")])
    psi = ProductState.plus(2)
    ok = PauliSumOp(terms, entry_accuracy=0.01)
    est = estimate_matrix_element(psi, ok, psi, (0.1, 0.01), 0)
    assert est.details["bias_bound"] == pytest.approx(ok.s * 0.01)
    with pytest.raises(PreconditionError):
        estimate_matrix_element(psi, PauliSumOp(terms, entry_accuracy=0.1), psi, (0.1, 0.01), 0)


def test_width_mismatch_is_rejected():
    with pytest.raises(PreconditionError):
        estimate_overlap(ProductState.plus(3), ProductState.plus(4))


def test_local_observable_matches_dense():
    rng = np.random.default_rng(4)
    for kind in ("stabilizer", "matchgate", "mps", "phase"):
        psi, vec = random_state(kind, 6, rng)
        terms = [(0.4, "ZZIIII"), (0.3, "IIXYII"), (-0.3, "IIIIIZ"), (0.2, "IIIIII")]
        O = PauliSum.from_labels(terms)
        est = estimate_local_observable(psi, O, (EPS, DELTA), 1)
        exact = sum(c * np.vdot(vec, pauli_dense(lab) @ vec) for c, lab in terms).real
        assert abs(est.value - exact) <= EPS


def test_local_observable_locality_bound():
    psi = ProductState.plus(4)
    with pytest.raises(PreconditionError):
        estimate_local_observable(psi, PauliSum.from_labels([(1.0, "XXXX")]), max_locality=3)


def test_identity_terms_are_exact():
    psi = ProductState.plus(3)
    est = estimate_local_observable(psi, PauliSum.from_labels([(0.7, "III")]), (EPS, DELTA), 0)
    assert est.value == pytest.approx(0.7)


def test_partial_projected_overlap():
    rng = np.random.default_rng(5)
    n, k = 5, 2
    phi, vphi = random_state("matchgate", n, rng)
    psi, vpsi = random_state("product", n, rng)
    A, a = random_operator("basis_preserving", n, rng)
    B, b = random_operator("local_gate", n, rng)
    fx, fc = I.random_factors(k, rng), I.random_factors(k, rng)
    proj = np.kron(np.outer(product_vector(fx), product_vector(fc).conj()), np.eye(2 ** (n - k)))
    est = estimate_partial_projected(phi, A, ProductState(fx), ProductState(fc), B, psi, (EPS, DELTA), 0)
    assert abs(est.value - np.vdot(vphi, a @ proj @ b @ vpsi)) <= EPS


def test_ghz_plus_overlap():
    n = 8
    gl = [{"gate": "h", "targets": [0]}] + [{"gate": "cnot", "targets": [q, q + 1]} for q in range(n - 1)]
    est = estimate_overlap(StabilizerState(n, gl), ProductState.plus(n), (EPS, DELTA), 0)
    assert abs(est.value - 2 * 2 ** (-(n + 1) / 2)) <= EPS


def test_error_budget_arithmetic():
    b = ErrorBudget(0.1, 0.01)
    assert b.split(4) == ErrorBudget(0.025, 0.0025)
    assert b.scaled(0.5, 0.5) == ErrorBudget(0.05, 0.005)
    with pytest.raises(PreconditionError):
        ErrorBudget(0.1, 1.0)
    assert required_samples(b.epsilon, b.delta) > 0

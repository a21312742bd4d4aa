"""Sampling estimators for overlaps, matrix elements and observables of tractable states.

All estimators sample from the Born distributions of the two states and
evaluate importance-weight ratios that are bounded by construction, so plain
Chernoff-Hoeffding budgets apply. Every evaluated sample is range-checked; a
value above its declared bound raises :class:`RangeViolation` (it means a
state or operator lied about itself).
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .core import (
    Estimate,
    PreconditionError,
    RandomStream,
    as_stream,
    blocked_sums,
    check_range,
    complex_samples,
    required_samples,
)
from .ct_states import BasisPreservedState, CtState, tensor
from .ecs_ops import (
    BasisPreservingOp,
    EcsOperator,
    PauliSum,
    PauliSumOp,
    compose,
    log_locality_bound,
    parity_sign,
    swap_block_op,
    tensor_identity,
)


@dataclass(frozen=True)
class ErrorBudget:
    """Accuracy and failure probability; sub-budgets add linearly / by union bound."""

    epsilon: float = 0.05
    delta: float = 1e-3

    def __post_init__(self):
        if not self.epsilon > 0:
            raise PreconditionError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise PreconditionError("delta must lie in (0, 1)")

    def split(self, parts: int) -> "ErrorBudget":
        return ErrorBudget(self.epsilon / parts, self.delta / parts)

    def scaled(self, eps_factor: float = 1.0, delta_factor: float = 1.0) -> "ErrorBudget":
        return ErrorBudget(self.epsilon * eps_factor, self.delta * delta_factor)


def as_budget(budget=None, epsilon=None, delta=None) -> ErrorBudget:
    if isinstance(budget, ErrorBudget):
        return budget
    if budget is not None:
        epsilon, delta = budget
    return ErrorBudget(0.05 if epsilon is None else epsilon, 1e-3 if delta is None else delta)


class RangeLog:
    """Largest observed ``|value| / bound`` per named quantity (thread-safe)."""

    def __init__(self):
        self.worst: dict[str, float] = {}
        self._lock = threading.Lock()

    def record(self, name: str, values: np.ndarray, bound: float) -> None:
        check_range(values, bound, name)
        if values.size == 0:
            return
        r = float(np.max(np.abs(values))) / bound if bound > 0 else 0.0
        with self._lock:
            self.worst[name] = max(self.worst.get(name, 0.0), r)

    def violations(self, tol: float = 1e-9) -> list[str]:
        return [k for k, v in self.worst.items() if v > 1 + tol]


# relative band inside which p_x and q_y count as tied; ties go to the F side
TIE_TOL = 1e-9


def _f_side(p, q):
    """``p >= q`` with near-ties decided identically in every batch."""
    return p >= q * (1 - TIE_TOL)


def _per_distinct(f):
    """Evaluate ``f`` once per distinct draw; small registers repeat strings heavily."""
    def wrapped(xs):
        uniq, inv = np.unique(xs, return_inverse=True)
        if 2 * len(uniq) > len(xs):
            return f(xs)
        return np.asarray(f(uniq))[inv.reshape(-1)]
    return wrapped


def _mean(sampler, f, k, stream, workers, real):
    total = blocked_sums(sampler, _per_distinct(f), k, stream, workers=workers)
    v = complex(total) / k
    return v.real if real else v


def _budget_for(eps, delta, bound, real):
    return required_samples(eps, delta, bound) if real else complex_samples(eps, delta, bound)


def _safe_ratio(num, den):
    out = np.zeros(np.broadcast(num, den).shape, dtype=np.complex128)
    ok = np.broadcast_to(den != 0, out.shape)
    num = np.broadcast_to(num, out.shape)
    den = np.broadcast_to(den, out.shape)
    out[ok] = num[ok] / den[ok]
    return out


def _check_widths(*states_and_ops):
    widths = {x.n for x in states_and_ops}
    if len(widths) != 1:
        raise PreconditionError(f"width mismatch: {sorted(widths)}")


# --------------------------------------------------------------------------
# overlaps


def estimate_overlap(phi: CtState, psi: CtState, budget=None, stream: RandomStream | int | None = None, *,
                     epsilon=None, delta=None, real: bool = False, workers: int = 1) -> Estimate:
    """Estimate ``<phi|psi>``.

    With ``p = |psi|^2`` and ``q = |phi|^2``, the overlap splits into
    ``E_p[F] + E_q[G]`` where ``F = conj(phi)/conj(psi)`` on ``{p >= q}`` and
    ``G = psi/phi`` on ``{p < q}``; both are bounded by 1. Each half gets
    ``epsilon/2`` and ``delta/2``. ``real=True`` declares the overlap real and
    estimates only real parts.
    """
    _check_widths(phi, psi)
    b = as_budget(budget, epsilon, delta)
    stream = as_stream(stream)
    log = RangeLog()
    half = b.scaled(0.5, 0.5)

    def F(xs):
        a = psi.amplitudes(xs)
        c = phi.amplitudes(xs)
        keep = _f_side(np.abs(a) ** 2, np.abs(c) ** 2)
        vals = np.where(keep, _safe_ratio(np.conj(c), np.conj(a)), 0)
        log.record("F", vals, 1.0)
        return vals.real if real else vals

    def G(ys):
        a = psi.amplitudes(ys)
        c = phi.amplitudes(ys)
        keep = ~_f_side(np.abs(a) ** 2, np.abs(c) ** 2)
        vals = np.where(keep, _safe_ratio(a, c), 0)
        log.record("G", vals, 1.0)
        return vals.real if real else vals

    k = _budget_for(half.epsilon, half.delta, 1.0, real)
    f_mean = _mean(psi.sample, F, k, stream.child(0), workers, real)
    g_mean = _mean(phi.sample, G, k, stream.child(1), workers, real)
    return Estimate(f_mean + g_mean, b.epsilon, b.delta, 2 * k,
                    {"F": f_mean, "G": g_mean, "range": dict(log.worst)})


# --------------------------------------------------------------------------
# matrix elements


def _locate(rows_of_c, ys):
    """Slot index of ``ys[j]`` within ``rows_of_c[j]`` (-1 if absent)."""
    hit = rows_of_c == ys[:, None]
    pos = np.argmax(hit, axis=1)
    return np.where(hit.any(axis=1), pos, -1)


def estimate_matrix_element(phi: CtState, A: EcsOperator, psi: CtState, budget=None,
                            stream: RandomStream | int | None = None, *, epsilon=None, delta=None,
                            per_term: bool = False, real: bool | None = None, workers: int = 1,
                            log: RangeLog | None = None) -> Estimate:
    """Estimate ``<phi|A|psi>`` for tractable states and a sparse operator.

    Writing column ``x`` of ``A`` as entries ``(r_i(x), alpha_i(x))``, the value
    is ``sum_i sigma_i`` with ``sigma_i = E_p[F_i] + E_q[G_i]``:

    * ``F_i(x) = conj(phi(r_i))/conj(psi(x)) * alpha_i(x)`` when ``p_x >= q_{r_i(x)}``,
    * ``G_i(y)`` sums ``psi(x)/phi(y) * alpha_i(x)`` over the ``x`` with
      ``r_i(x) = y`` and ``p_x < q_y``; these ``x`` are found from row ``y`` and
      confirmed against their columns.

    ``per_term=True`` evaluates every ``F_i`` and ``G_i`` separately and checks
    ``|F_i| <= a`` and ``|G_i| <= s*a`` (``a`` bounds the entries). The default
    evaluates the sums directly from the row enumeration, which gives the same
    numbers faster. The two halves get ``epsilon/2`` and ``delta/2`` each; the
    sample count is the smaller of the even split across the ``2s`` terms and
    the pooled budget with ranges set by the column / row 1-norms.

    Operators with approximate entries (``entry_accuracy = eta``) carry a bias
    of at most ``s*eta``; half the accuracy is reserved for it and
    ``s*eta <= epsilon/2`` is required.

    ``real`` defaults to True when ``phi is psi`` and ``A`` is Hermitian.
    """
    _check_widths(phi, A, psi)
    b = as_budget(budget, epsilon, delta)
    stream = as_stream(stream)
    log = RangeLog() if log is None else log
    if real is None:
        real = phi is psi and A.hermitian
    s = A.s
    bias = s * A.entry_accuracy
    sampling = b
    if A.entry_accuracy > 0:
        if bias > b.epsilon / 2 * (1 + 1e-12):
            raise PreconditionError(f"entry accuracy {A.entry_accuracy} gives bias {bias} > epsilon/2")
        sampling = b.scaled(0.5, 1.0)
    if s == 0:
        return Estimate(0.0, b.epsilon, b.delta, 1, {"bias_bound": 0.0, "range": {}})
    half = sampling.scaled(0.5, 0.5)
    a_bound = A.entry_bound
    mf, mg = A.col_norm_bound, A.row_norm_bound
    even = half.split(s)
    kf = min(_budget_for(even.epsilon, even.delta, a_bound, real), _budget_for(half.epsilon, half.delta, mf, real))
    kg = min(_budget_for(even.epsilon, even.delta, s * a_bound, real),
             _budget_for(half.epsilon, half.delta, mg, real))

    def F(xs):
        a = psi.amplitudes(xs)
        rows, alpha = A.columns(xs)
        valid = rows >= 0
        c = np.zeros(rows.shape, dtype=np.complex128)
        c[valid] = phi.amplitudes(rows[valid])
        keep = valid & _f_side((np.abs(a) ** 2)[:, None], np.abs(c) ** 2)
        terms = np.where(keep, _safe_ratio(np.conj(c), np.conj(a)[:, None]) * alpha, 0)
        if per_term:
            log.record("F_i", terms, a_bound)
        vals = terms.sum(axis=1)
        log.record("sum F_i", vals, mf)
        return vals.real if real else vals

    def G(ys):
        c = phi.amplitudes(ys)
        cols, beta = A.rows(ys)
        valid = cols >= 0
        a = np.zeros(cols.shape, dtype=np.complex128)
        a[valid] = psi.amplitudes(cols[valid])
        keep = valid & ~_f_side(np.abs(a) ** 2, (np.abs(c) ** 2)[:, None])
        ratio = np.where(keep, _safe_ratio(a, c[:, None]), 0)
        if per_term:
            vals = _per_term_g(A, ys, cols, beta, valid, ratio, s)
            log.record("G_i", vals, s * a_bound)
            vals = vals.sum(axis=1)
        else:
            vals = (ratio * beta).sum(axis=1)
        log.record("sum G_i", vals, mg)
        return vals.real if real else vals

    f_mean = _mean(psi.sample, F, kf, stream.child(0), workers, real)
    g_mean = _mean(phi.sample, G, kg, stream.child(1), workers, real)
    return Estimate(f_mean + g_mean, b.epsilon, b.delta, kf + kg,
                    {"F": f_mean, "G": g_mean, "bias_bound": bias, "range": dict(log.worst), "s": s})


def _per_term_g(A, ys, cols, beta, valid, ratio, s):
    """``G_i(y)`` for every slot ``i``: confirm each row entry against its column."""
    k, w = cols.shape
    flat_c = np.where(valid, cols, 0).ravel()
    rows_of_c, alpha = A.columns(flat_c)
    y_rep = np.repeat(ys, w)
    pos = _locate(rows_of_c, y_rep).reshape(k, w)
    if np.any(valid & (pos < 0)):
        raise PreconditionError(f"{A.label}: row and column enumerations disagree")
    a_i = np.take_along_axis(alpha, np.maximum(pos, 0).reshape(-1, 1), axis=1).reshape(k, w)
    scale = max(1.0, float(np.max(np.abs(beta), initial=0.0)))
    if np.any(valid & (np.abs(a_i - beta) > 1e-9 * scale)):
        raise PreconditionError(f"{A.label}: row and column coefficients disagree")
    out = np.zeros((k, s), dtype=np.complex128)
    rr = np.repeat(np.arange(k), w)
    pp = pos.ravel()
    ok = valid.ravel()
    np.add.at(out, (rr[ok], pp[ok]), (ratio * a_i).ravel()[ok])
    return out


# --------------------------------------------------------------------------
# local observables


def pauli_term_op(n: int, xmask: int, zmask: int, phase: complex = 1.0) -> BasisPreservingOp:
    """Unit-modulus Pauli ``phase * X^x Z^z`` as a basis-preserving operator."""
    xmask, zmask, phase = int(xmask), int(zmask), complex(phase)

    def forward(xs):
        return xs ^ xmask, phase * parity_sign(xs & zmask)

    return BasisPreservingOp(n, forward, lambda ys: ys ^ xmask, label="pauli")


def estimate_local_observable(psi: CtState, O, budget=None, stream: RandomStream | int | None = None, *,
                              epsilon=None, delta=None, max_locality: int | None = None,
                              workers: int = 1) -> Estimate:
    """Estimate ``<psi|O|psi>`` for a Pauli sum ``O = sum_t a_t P_t`` of low weight.

    Each ``<psi|P_t|psi>`` is an overlap between ``psi`` and the basis-permuted
    state ``P_t|psi>``; term ``t`` gets accuracy ``epsilon / sum|a|`` and
    ``delta / N``. Identity terms are exact.
    """
    terms = O.terms if isinstance(O, PauliSumOp) else O
    if not isinstance(terms, PauliSum):
        terms = PauliSum.from_labels(terms)
    _check_widths(psi, terms)
    b = as_budget(budget, epsilon, delta)
    stream = as_stream(stream)
    bound = log_locality_bound(psi.n) if max_locality is None else max_locality
    if terms.max_weight() > bound:
        raise PreconditionError(f"observable weight {terms.max_weight()} exceeds the locality bound {bound}")
    weights = np.abs(terms.coeffs)
    total = float(weights.sum())
    if total == 0:
        return Estimate(0.0, b.epsilon, b.delta, 1, {"terms": []})
    sub = ErrorBudget(b.epsilon / total, b.delta / len(terms))
    value = 0j
    used = 0
    parts = []
    for t, (x, z, c) in enumerate(zip(terms.xmasks, terms.zmasks, terms.coeffs)):
        a = abs(c)
        if a == 0:
            continue
        phase = c / a
        if x == 0 and z == 0:
            ov = 1.0
        else:
            # phase * X^x Z^z is Hermitian iff phase / i^{|x&z|} is real
            w = bin(int(x) & int(z)).count("1")
            hermitian = abs((phase / 1j**w).imag) < 1e-12
            P = pauli_term_op(psi.n, x, z, phase)
            est = estimate_overlap(psi, BasisPreservedState(P, psi), sub, stream.child(t), real=hermitian,
                                   workers=workers)
            ov = est.value
            used += est.samples_used
        value += a * ov
        parts.append((t, complex(ov)))
    if terms.is_hermitian():
        value = value.real
    return Estimate(value, b.epsilon, b.delta, max(used, 1), {"terms": parts})


# --------------------------------------------------------------------------
# projected partial overlaps


def partial_projected_operator(A: EcsOperator, B: EcsOperator, k: int, budget: int | None = None) -> EcsOperator:
    """``(I_k (x) A) SWAP_k (I_k (x) B)`` on ``k + n`` qubits."""
    if A.n != B.n:
        raise PreconditionError("A and B act on different widths")
    kw = {} if budget is None else {"budget": budget}
    return compose(tensor_identity(A, k), swap_block_op(k, A.n), tensor_identity(B, k), **kw)


def estimate_partial_projected(phi: CtState, A: EcsOperator, xi: CtState, chi: CtState, B: EcsOperator,
                               psi: CtState, budget=None, stream: RandomStream | int | None = None, *,
                               epsilon=None, delta=None, workers: int = 1, **kw) -> Estimate:
    """Estimate ``<phi| A (|xi><chi| (x) I) B |psi>`` through the swap identity.

    The value equals ``(<chi|<phi|) (I (x) A) SWAP (I (x) B) (|xi>|psi>)`` where
    SWAP exchanges the first ``k`` qubits with the next ``k``.
    """
    k = xi.n
    if chi.n != k:
        raise PreconditionError("xi and chi must have equal widths")
    if k > psi.n:
        raise PreconditionError("projector wider than the register")
    _check_widths(phi, A, B, psi)
    op = partial_projected_operator(A, B, k)
    est = estimate_matrix_element(tensor(chi, phi), op, tensor(xi, psi), budget, stream, epsilon=epsilon,
                                  delta=delta, workers=workers, **kw)
    return est

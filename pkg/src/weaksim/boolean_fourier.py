"""Fourier analysis of Boolean functions and simulation of five-round circuits.

Coefficients are normalised as ``c(u) = 2^{-m} sum_x (-1)^{u.x + g(x)}``, so a
linear function has a single coefficient of modulus 1 and Parseval reads
``sum_u c(u)^2 = 1``. Input strings use the package bit order: bit 0 is the
most significant bit of the packed integer.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
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
    as_index,
    as_stream,
    estimate_mean,
    parity,
)
from .ct_states import BasisPreservedState, ProductState
from .ecs_ops import BasisPreservingOp, PauliSum, PauliSumOp, basis_preserving_op
from .estimators import as_budget, estimate_matrix_element

EXHAUSTIVE_MAX = 20
DEGREE_MAX = 16


# --------------------------------------------------------------------------
# oracles


class BooleanOracle:
    """A function ``{0,1}^m -> {0,1}`` evaluated on int64 batches, with a query counter."""

    def __init__(self, m: int, fn: Callable[[np.ndarray], np.ndarray], name: str = "g"):
        if not 1 <= m <= 62:
            raise PreconditionError("oracle width must lie in [1, 62]")
        self.m = int(m)
        self._fn = fn
        self.name = name
        self.queries = 0
        self._lock = threading.Lock()

    def evaluate(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.int64)
        with self._lock:
            self.queries += int(xs.size)
        return (np.asarray(self._fn(xs), dtype=np.int64) & 1).astype(np.int64)

    def signs(self, xs) -> np.ndarray:
        """``(-1)^{g(x)}`` as float."""
        return 1.0 - 2.0 * self.evaluate(xs)

    def __call__(self, x) -> int:
        return int(self.evaluate(np.array([as_index(x, self.m)]))[0])

    def truth_table(self) -> np.ndarray:
        if self.m > EXHAUSTIVE_MAX:
            raise BudgetExceeded(f"truth table capped at {EXHAUSTIVE_MAX} bits")
        return self.evaluate(np.arange(2**self.m, dtype=np.int64))

    def __repr__(self):
        return f"BooleanOracle(m={self.m}, name={self.name!r})"

    # constructors ----------------------------------------------------------
    @classmethod
    def from_table(cls, table, name: str = "table") -> "BooleanOracle":
        t = np.asarray(table, dtype=np.int64).ravel()
        m = int(round(math.log2(len(t)))) if len(t) else 0
        if len(t) != 2**m or m < 1:
            raise SchemaError("truth tables need 2^m entries with m >= 1")
        if np.any((t != 0) & (t != 1)):
            raise SchemaError("truth table entries must be 0 or 1")
        return cls(m, lambda xs: t[xs], name)

    @classmethod
    def constant(cls, m: int, value: int = 0) -> "BooleanOracle":
        return cls(m, lambda xs: np.full(xs.shape, value & 1, dtype=np.int64), f"const{value & 1}")

    @classmethod
    def parity(cls, m: int, a) -> "BooleanOracle":
        a = as_index(a, m)
        return cls(m, lambda xs: parity(xs & a), f"parity:{a:0{m}b}")

    @classmethod
    def and_all(cls, m: int = 2) -> "BooleanOracle":
        full = (1 << m) - 1
        return cls(m, lambda xs: (xs == full).astype(np.int64), "and")

    @classmethod
    def from_anf(cls, m: int, monomials: Sequence[int]) -> "BooleanOracle":
        """Sum over GF(2) of monomials ``prod_{i in S} x_i`` given as bit masks ``S``."""
        mons = np.asarray(list(monomials), dtype=np.int64)

        def fn(xs):
            if not len(mons):
                return np.zeros(xs.shape, dtype=np.int64)
            hit = (xs[..., None] & mons) == mons
            return hit.sum(axis=-1) & 1

        return cls(m, fn, f"anf[{len(mons)}]")

    @classmethod
    def random_sparse(cls, m: int, s: int, seed: int = 0) -> "BooleanOracle":
        """``g(x) = h(L_1.x, ..., L_k.x)`` with independent forms ``L_i`` and a random non-constant ``h``.

        ``k = max(1, floor(log2 s))``. The support of ``g`` lies in the span of
        the forms, and ``h`` has odd weight, which makes every coefficient in
        that span nonzero for ``k >= 2``: ``g`` is exactly ``2^k``-sparse. With
        one form ``g`` is a signed parity, hence 1-sparse.
        """
        if s < 1:
            raise PreconditionError("sparseness must be positive")
        k = min(max(1, int(math.floor(math.log2(s)))), m)
        rng = np.random.default_rng(seed)
        forms: list[int] = []
        while len(forms) < k:
            cand = int(rng.integers(1, 2**m))
            if _gf2_independent(forms + [cand]):
                forms.append(cand)
        h = rng.integers(0, 2, size=2**k).astype(np.int64)
        if k == 1:
            h = np.array([0, 1], dtype=np.int64) ^ h[0]
        elif h.sum() % 2 == 0:
            h[int(rng.integers(len(h)))] ^= 1
        fa = np.asarray(forms, dtype=np.int64)

        def fn(xs):
            idx = np.zeros(xs.shape, dtype=np.int64)
            for f in fa:
                idx = (idx << 1) | parity(xs & f)
            return h[idx]

        return cls(m, fn, f"random-sparse:s={s},seed={seed},m={m}")

    @classmethod
    def simon_postprocessing(cls, k: int, rows: int) -> "BooleanOracle":
        """On a ``rows x k`` bit matrix ``u`` (row-major): 1 iff ``u x = 0`` has a solution with ``x_1 = 1``.

        Equivalently, the first unit vector is not in the row space of ``u``.
        """
        m = k * rows
        first = 1 << (k - 1)

        def fn(xs):
            basis = np.zeros((k,) + xs.shape, dtype=np.int64)
            for r in range(rows):
                row = (xs >> (k * (rows - 1 - r))) & ((1 << k) - 1)
                _insert(basis, row, k)
            probe = np.full(xs.shape, first, dtype=np.int64)
            return (_reduce(basis, probe, k) != 0).astype(np.int64)

        return cls(m, fn, f"simon-postproc:n={k},N={rows}")


def _gf2_independent(vectors: Sequence[int]) -> bool:
    basis: list[int] = []
    for v in vectors:
        for b in basis:
            v = min(v, v ^ b)
        if v == 0:
            return False
        basis.append(v)
    return True


def _insert(basis, row, k):
    """Vectorised insertion into an XOR basis indexed by leading bit."""
    for b in range(k - 1, -1, -1):
        has = ((row >> b) & 1).astype(bool)
        empty = basis[b] == 0
        take = has & empty
        basis[b] = np.where(take, row, basis[b])
        row = np.where(take, 0, np.where(has, row ^ basis[b], row))


def _reduce(basis, v, k):
    for b in range(k - 1, -1, -1):
        has = ((v >> b) & 1).astype(bool)
        v = np.where(has & (basis[b] != 0), v ^ basis[b], v)
    return v


def _parse_kv(text: str) -> dict[str, str]:
    out = {}
    for part in filter(None, text.split(",")):
        if "=" not in part:
            raise SchemaError(f"expected key=value in {text!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def read_truth_table(path) -> BooleanOracle:
    """One bit per line, ``2^m`` lines."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if any(ln not in ("0", "1") for ln in lines):
        raise SchemaError(f"{path}: truth-table lines must be 0 or 1")
    m = int(round(math.log2(max(len(lines), 1))))
    if len(lines) != 2**m or m > EXHAUSTIVE_MAX:
        raise SchemaError(f"{path}: need 2^m lines with 1 <= m <= {EXHAUSTIVE_MAX}, got {len(lines)}")
    o = BooleanOracle.from_table([int(v) for v in lines], name=str(path))
    return o


def resolve_oracle(spec, m: int | None = None) -> BooleanOracle:
    """Build an oracle from a registry string, a truth-table path or an existing oracle.

    Registry forms: ``parity:a=0110``, ``and`` / ``and:m=3``,
    ``simon-postproc:n=3,N=2``, ``random-sparse:s=4,seed=1,m=12``,
    ``const:v=1,m=4``, ``table:path`` (or a bare path).
    """
    if isinstance(spec, BooleanOracle):
        return spec
    if not isinstance(spec, str):
        raise SchemaError(f"cannot resolve oracle {spec!r}")
    name, _, rest = spec.partition(":")
    kv = _parse_kv(rest) if name in ("parity", "and", "simon-postproc", "random-sparse", "const") else {}

    def width(default=None):
        w = kv.get("m", m if m is not None else default)
        if w is None:
            raise SchemaError(f"oracle {spec!r} needs a width m")
        return int(w)

    if name == "parity":
        a = kv.get("a")
        if a is None:
            raise SchemaError("parity oracles need a=...")
        if set(a) <= {"0", "1"} and "m" not in kv and (m is None or len(a) == m):
            o = BooleanOracle.parity(len(a), BitString.from_str(a))
        else:
            w = width()
            o = BooleanOracle.parity(w, int(a, 0) if not set(a) <= {"0", "1"} else int(a, 2))
    elif name == "and":
        o = BooleanOracle.and_all(width(2))
    elif name == "const":
        o = BooleanOracle.constant(width(), int(kv.get("v", 0)))
    elif name == "simon-postproc":
        k = int(kv.get("n", 3))
        rows = int(kv.get("N", kv.get("rows", max(k - 1, 1))))
        o = BooleanOracle.simon_postprocessing(k, rows)
    elif name == "random-sparse":
        o = BooleanOracle.random_sparse(width(12), int(kv.get("s", 4)), int(kv.get("seed", 0)))
    elif name == "table":
        o = read_truth_table(rest)
    elif Path(spec).exists():
        o = read_truth_table(spec)
    else:
        raise SchemaError(f"unknown oracle {spec!r}")
    if m is not None and o.m != m:
        raise SchemaError(f"oracle {spec!r} has {o.m} input bits, expected {m}")
    return o


# --------------------------------------------------------------------------
# tables and exact transforms


@dataclass
class FourierTable:
    """Learned coefficients ``(u, c(u), accuracy)`` with distinct ``u``."""

    m: int
    entries: list[tuple[int, float, float]] = field(default_factory=list)
    valid: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        us = [u for u, _, _ in self.entries]
        if len(set(us)) != len(us):
            raise PreconditionError("Fourier table entries must have distinct u")
        for u, c, acc in self.entries:
            if abs(c) > 1 + acc + 1e-12:
                raise PreconditionError(f"coefficient {c} at u={u} exceeds 1 + accuracy")

    def __len__(self):
        return len(self.entries)

    def support(self) -> set[int]:
        return {u for u, _, _ in self.entries}

    def as_dict(self) -> dict[int, float]:
        return {u: c for u, c, _ in self.entries}

    def residual_weight(self) -> float:
        return 1.0 - sum(c * c for _, c, _ in self.entries)

    def to_dict(self) -> dict:
        return {"kind": "fourier_table", "m": self.m, "valid": self.valid,
                "entries": [{"u": format(u, f"0{self.m}b"), "coeff": float(c), "accuracy": float(a)}
                            for u, c, a in sorted(self.entries)]}

    @classmethod
    def from_dict(cls, d: dict) -> "FourierTable":
        m = int(d["m"])
        ents = [(int(e["u"], 2), float(e["coeff"]), float(e.get("accuracy", 0.0))) for e in d["entries"]]
        return cls(m, ents, bool(d.get("valid", True)))


def fwht(values: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform along the last axis (length 2^m)."""
    a = np.array(values, dtype=np.float64)
    n = a.shape[-1]
    h = 1
    while h < n:
        a = a.reshape(a.shape[:-1] + (n // (2 * h), 2, h))
        x, y = a[..., 0, :].copy(), a[..., 1, :].copy()
        a[..., 0, :], a[..., 1, :] = x + y, x - y
        a = a.reshape(a.shape[:-3] + (n,))
        h *= 2
    return a


def fourier_spectrum(g: BooleanOracle) -> np.ndarray:
    """All ``2^m`` coefficients ``c(u)`` by a fast transform (``m <= 20``)."""
    if g.m > EXHAUSTIVE_MAX:
        raise BudgetExceeded(f"exhaustive transform capped at m = {EXHAUSTIVE_MAX}")
    return fwht(g.signs(np.arange(2**g.m, dtype=np.int64))) / 2**g.m


def fourier_coefficient_exact(g: BooleanOracle, u) -> float:
    """``2^{-m} sum_x (-1)^{u.x + g(x)}`` by full summation (``m <= 20``)."""
    if g.m > EXHAUSTIVE_MAX:
        raise BudgetExceeded(f"exhaustive sum capped at m = {EXHAUSTIVE_MAX}")
    u = as_index(u, g.m)
    xs = np.arange(2**g.m, dtype=np.int64)
    return float(np.mean(g.signs(xs) * (1 - 2 * parity(xs & u))))


def exact_table(g: BooleanOracle, threshold: float = 0.0, tol: float = 1e-12) -> FourierTable:
    spec = fourier_spectrum(g)
    keep = np.nonzero((np.abs(spec) >= threshold) & (np.abs(spec) > tol))[0]
    return FourierTable(g.m, [(int(u), float(spec[u]), 0.0) for u in keep])


def sparseness_and_degree(g: BooleanOracle) -> tuple[int, int]:
    """Number of nonzero coefficients and GF(2) degree (Moebius transform), ``m <= 16``."""
    if g.m > DEGREE_MAX:
        raise BudgetExceeded(f"exhaustive sparseness capped at m = {DEGREE_MAX}")
    spec = fourier_spectrum(g)
    s = int(np.count_nonzero(np.abs(spec) > 1e-9))
    anf = g.truth_table().astype(np.uint8)
    n = anf.size
    h = 1
    while h < n:
        a = anf.reshape(-1, 2, h)
        a[:, 1, :] ^= a[:, 0, :]
        h *= 2
    idx = np.nonzero(anf)[0]
    d = int(np.bitwise_count(idx.astype(np.int64)).max()) if idx.size else 0
    return s, d


def granularity(s: int) -> float:
    """Smallest possible nonzero |c(u)| of an s-sparse Boolean function.

    Nonzero coefficients of an s-sparse function are multiples of
    ``2^{1 - ceil(log2 s)}`` for ``s >= 2``; a 1-sparse function is a signed
    character.
    """
    if s < 1:
        raise PreconditionError("sparseness must be positive")
    if s == 1:
        return 1.0
    return 2.0 ** (1 - math.ceil(math.log2(s)))


# --------------------------------------------------------------------------
# estimation and heavy-coefficient search


def estimate_fourier_coefficient(g: BooleanOracle, u, epsilon: float = 0.05, delta: float = 1e-3, stream=None, *,
                                 workers: int = 1) -> Estimate:
    """Mean of ``(-1)^{g(x) + u.x}`` over uniform ``x``."""
    u = as_index(u, g.m)
    m = g.m

    def sampler(rng, k):
        return rng.integers(0, 2**m, size=k, dtype=np.int64)

    def f(xs):
        return g.signs(xs) * (1 - 2 * parity(xs & u))

    return estimate_mean(sampler, f, epsilon, delta, 1.0, stream, real=True, workers=workers)


def estimate_prefix_weight(g: BooleanOracle, alpha: int, k: int, epsilon: float, delta: float, stream=None, *,
                           workers: int = 1) -> Estimate:
    """``sum_beta c(alpha beta)^2`` over all completions of the k-bit prefix ``alpha``.

    Equals ``E[g'(y x) g'(z x) (-1)^{alpha.(y ^ z)}]`` for uniform k-bit ``y, z``
    and a shared suffix ``x`` (``g' = (-1)^g``).
    """
    m = g.m
    rest = m - k

    def sampler(rng, cnt):
        return rng.integers(0, 2 ** (m + k), size=cnt, dtype=np.int64)

    def f(w):
        y = w >> (m + k - k) if k else np.zeros_like(w)
        z = (w >> rest) & ((1 << k) - 1) if k else np.zeros_like(w)
        x = w & ((1 << rest) - 1)
        a = g.signs((y << rest) | x)
        b = g.signs((z << rest) | x)
        return a * b * (1 - 2 * parity((y ^ z) & alpha))

    return estimate_mean(sampler, f, epsilon, delta, 1.0, stream, real=True, workers=workers)


def km_heavy_coefficients(g: BooleanOracle, threshold: float, delta: float = 1e-3, stream=None, *,
                          max_nodes: int | None = None, workers: int = 1) -> FourierTable:
    """All ``u`` with ``|c(u)| >= threshold`` (with probability ``1 - delta``).

    Prefixes are refined bit by bit; a prefix survives when its estimated
    subtree weight (accuracy ``threshold^2/4``) is at least ``threshold^2/2``.
    By Parseval at most ``4/threshold^2`` prefixes per level survive. The
    surviving full strings get coefficient estimates of accuracy
    ``threshold/4`` and are kept when the estimate reaches ``threshold/2``.
    Exceeding ``max_nodes`` raises :class:`BudgetExceeded` whose ``partial``
    attribute holds a table flagged invalid.
    """
    if not 0 < threshold <= 1:
        raise PreconditionError("threshold must lie in (0, 1]")
    if not 0 < delta < 1:
        raise PreconditionError("delta must lie in (0, 1)")
    stream = as_stream(stream)
    m = g.m
    width = math.ceil(4 / threshold**2)
    if max_nodes is None:
        max_nodes = 2 * m * width
    d_node = delta / 2 / max_nodes
    d_leaf = delta / 2 / (2 * width)
    w_acc = threshold**2 / 4
    live = [0]
    nodes = 0
    for k in range(1, m + 1):
        nxt = []
        for alpha in live:
            for b in (0, 1):
                child = (alpha << 1) | b
                nodes += 1
                if nodes > max_nodes:
                    err = BudgetExceeded(f"prefix search exceeded {max_nodes} nodes at level {k}")
                    err.partial = FourierTable(m, [], valid=False, meta={"level": k, "live": len(live)})
                    raise err
                est = estimate_prefix_weight(g, child, k, w_acc, d_node, stream.child(k).child(child),
                                             workers=workers)
                if est.value >= threshold**2 / 2:
                    nxt.append(child)
        live = nxt
        if not live:
            break
    entries = []
    leaf_stream = stream.child(m + 1)
    for u in live[: 2 * width]:
        est = estimate_fourier_coefficient(g, u, threshold / 4, d_leaf, leaf_stream.child(u), workers=workers)
        if abs(est.value) >= threshold / 2:
            entries.append((u, float(est.value), threshold / 4))
    return FourierTable(m, entries, meta={"nodes": nodes, "queries": g.queries, "threshold": threshold})


def refine_table(g: BooleanOracle, table: FourierTable, accuracy: float, delta: float, stream=None, *,
                 workers: int = 1) -> FourierTable:
    """Re-estimate every coefficient in ``table`` to ``accuracy`` (union bound over entries)."""
    stream = as_stream(stream)
    if not len(table):
        return FourierTable(table.m, [], table.valid, dict(table.meta))
    d = delta / len(table)
    out = []
    for u, _, _ in table.entries:
        est = estimate_fourier_coefficient(g, u, accuracy, d, stream.child(u), workers=workers)
        out.append((u, float(est.value), accuracy))
    return FourierTable(table.m, out, table.valid, dict(table.meta))


# --------------------------------------------------------------------------
# the W_g operator


def wg_operator(table: FourierTable, m: int | None = None, theta: float = 0.0) -> PauliSumOp:
    """``A = sum_w c(w) X^w`` so that ``<u|A|v> = c(u ^ v)`` over the table entries.

    Entries below ``theta`` are rejected. The operator's entry accuracy is the
    largest table accuracy.
    """
    m = table.m if m is None else m
    if m != table.m:
        raise PreconditionError("table width differs from m")
    for u, c, _ in table.entries:
        if abs(c) < theta:
            raise PreconditionError(f"entry c({u:0{m}b}) = {c} lies below the threshold {theta}")
    if not len(table):
        terms = PauliSum(m, [], [], [])
    else:
        us = [u for u, _, _ in table.entries]
        terms = PauliSum(m, us, [0] * len(us), [c for _, c, _ in table.entries])
    acc = max((a for _, _, a in table.entries), default=0.0)
    op = PauliSumOp(terms, entry_accuracy=acc, label=f"W[{len(table)}]")
    op.hermitian = True
    return op


def wg_dense(g: BooleanOracle) -> np.ndarray:
    """Exact ``W_g[u, v] = c(u ^ v)`` for small m."""
    if g.m > 12:
        raise BudgetExceeded("dense W_g capped at 12 bits")
    spec = fourier_spectrum(g)
    v = np.arange(2**g.m)
    return spec[v[:, None] ^ v[None, :]]


# --------------------------------------------------------------------------
# five-round circuits


def _subset(qs, n, what):
    qs = [int(q) for q in qs]
    if len(set(qs)) != len(qs) or any(not 0 <= q < n for q in qs):
        raise SchemaError(f"bad qubit subset for {what}: {qs}")
    return qs


def five_round_state(n: int, S1: Sequence[int], V, input=None):
    """``V H_{S1} |input>`` as a tractable state (basis-preserving image of a product state)."""
    S1 = _subset(S1, n, "the first Hadamard round")
    bits = [0] * n if input is None else list(BitString(n, as_index(input, n)).bits())
    f = np.zeros((n, 2), dtype=complex)
    for q in range(n):
        f[q, bits[q]] = 1
    psi = ProductState(f).apply_local({q: G.H for q in S1})
    if V is None:
        return psi
    M = V if isinstance(V, BasisPreservingOp) else basis_preserving_op(V, n)
    if M.n != n:
        raise PreconditionError("basis-preserving round has the wrong width")
    return BasisPreservedState(M, psi)


def simulate_five_round(S1: Sequence[int], V, S2: Sequence[int], S: Sequence[int], g: BooleanOracle,
                        sparseness_hint: int, budget=None, stream=None, *, n: int, input=None,
                        workers: int = 1) -> Estimate:
    """Estimate ``<(-1)^{g(u)}>`` for ``u`` measured on ``S`` after ``H_{S2} V H_{S1}``.

    The measured observable is ``W_g`` on ``S`` (identity elsewhere) applied to
    the state ``V H_{S1}|input>``. Heavy coefficients are found by prefix
    search, re-estimated, and assembled into an approximate ``W_g``; the
    matrix-element estimate then has error at most ``2 * epsilon``:

    * truncation ``||W_g - W_g^theta|| <= s*theta`` with ``theta = epsilon / s``,
    * entry errors ``s * eta <= epsilon / 2`` with ``eta = epsilon / (2 s)``,
    * sampling error ``epsilon / 2``.

    The search runs at ``max(theta, granularity(s))``: under the sparseness
    promise no nonzero coefficient is smaller than the granularity, so nothing
    the truncation would keep is missed. A learned table larger than the hint
    breaks the promise and raises :class:`PreconditionError`.
    """
    b = as_budget(budget)
    stream = as_stream(stream)
    S1 = _subset(S1, n, "the first Hadamard round")
    S2 = _subset(S2, n, "the second Hadamard round")
    S = _subset(S, n, "the measured set")
    if g.m != len(S):
        raise PreconditionError(f"g takes {g.m} bits but {len(S)} qubits are measured")
    if not set(S) <= set(S2):
        raise OutOfClass("measured qubits outside the second Hadamard round are not covered")
    s = int(sparseness_hint)
    if s < 1:
        raise PreconditionError("sparseness hint must be positive")
    eps, delta = b.epsilon, b.delta
    theta = eps / s
    search = max(theta, granularity(s))
    table = km_heavy_coefficients(g, search, delta / 4, stream.child(0), workers=workers)
    if len(table) > s:
        raise PreconditionError(f"learned {len(table)} heavy coefficients, more than the promised {s}")
    eta = eps / (2 * s)
    table = refine_table(g, table, eta, delta / 4, stream.child(1), workers=workers)
    for u, c, a in table.entries:
        if abs(c) + a < theta:
            raise PreconditionError(f"coefficient at {u:0{g.m}b} fell below the threshold after refinement")
    W = wg_operator(table, g.m)
    if len(table):
        terms = W.terms.embedded(S, n)
    else:
        terms = PauliSum(n, [], [], [])
    A = PauliSumOp(terms, entry_accuracy=eta, label="W_g on S")
    A.hermitian = True
    psi = five_round_state(n, S1, V, input)
    est = estimate_matrix_element(psi, A, psi, (eps, delta / 2), stream.child(2), real=True, workers=workers)
    residual = table.residual_weight()
    details = dict(est.details)
    details.update({"table": table.to_dict(), "theta": theta, "search_threshold": search, "eta": eta,
                    "residual_weight": residual, "promise_warning": residual > theta**2 + s * eta,
                    "queries": g.queries})
    return Estimate(est.value, 2 * eps, delta, est.samples_used, details)


__all__ = [
    "BooleanOracle", "FourierTable", "resolve_oracle", "read_truth_table", "fwht", "fourier_spectrum",
    "fourier_coefficient_exact", "exact_table", "sparseness_and_degree", "granularity",
    "estimate_fourier_coefficient", "estimate_prefix_weight", "km_heavy_coefficients", "refine_table",
    "wg_operator", "wg_dense", "five_round_state", "simulate_five_round",
]

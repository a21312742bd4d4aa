"""Exact dense state-vector reference for small registers."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import gates as G
from .core import BudgetExceeded, PreconditionError, SchemaError, as_index
from .ct_states import CtState

DEFAULT_CAP = 12


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise BudgetExceeded(f"dense reference capped at {cap} qubits (got {n}); raise the cap explicitly")


@dataclass
class DenseState:
    n: int
    vector: np.ndarray

    @classmethod
    def basis(cls, x, n: int) -> "DenseState":
        v = np.zeros(2**n, dtype=np.complex128)
        v[as_index(x, n)] = 1
        return cls(n, v)

    @classmethod
    def from_ct(cls, psi: CtState, cap: int = DEFAULT_CAP) -> "DenseState":
        _check_cap(psi.n, cap)
        return cls(psi.n, psi.amplitudes(np.arange(2**psi.n, dtype=np.int64)))

    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.vector) ** 2

    def tensor(self, other: "DenseState") -> "DenseState":
        return DenseState(self.n + other.n, np.kron(self.vector, other.vector))


def apply_matrix(vec: np.ndarray, n: int, m: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Apply a 2^k x 2^k matrix to ``targets`` (first target = most significant)."""
    k = len(targets)
    psi = vec.reshape((2,) * n)
    psi = np.moveaxis(psi, list(targets), list(range(k)))
    shape = psi.shape
    psi = (m @ psi.reshape(2**k, -1)).reshape(shape)
    return np.moveaxis(psi, list(range(k)), list(targets)).reshape(-1)


def _apply_qft(vec, n, targets, inverse=False):
    k = len(targets)
    psi = vec.reshape((2,) * n)
    psi = np.moveaxis(psi, list(targets), list(range(k)))
    shape = psi.shape
    flat = psi.reshape(2**k, -1)
    flat = np.fft.fft(flat, axis=0, norm="ortho") if inverse else np.fft.ifft(flat, axis=0, norm="ortho")
    return np.moveaxis(flat.reshape(shape), list(range(k)), list(targets)).reshape(-1)


def _apply_oracle(vec, n, gate):
    ins, outs = G.oracle_split(gate)
    f = G.resolve_function(gate.get("function"), len(ins), len(outs))
    idx = np.arange(2**n, dtype=np.int64)

    def gather(qs):
        out = np.zeros_like(idx)
        for q in qs:
            out = (out << 1) | ((idx >> (n - 1 - q)) & 1)
        return out

    fx = np.asarray(f(gather(ins)), dtype=np.int64)
    new = idx.copy()
    for j, q in enumerate(outs):
        b = (fx >> (len(outs) - 1 - j)) & 1
        new ^= b << (n - 1 - q)
    out = np.zeros_like(vec)
    out[new] = vec
    return out


def apply_gate(vec: np.ndarray, n: int, gate: dict) -> np.ndarray:
    g = G.canonical(gate)
    G.check_targets(g, n)
    name = g["gate"]
    if name == "qft":
        return _apply_qft(vec, n, g["targets"], inverse=bool(g.get("inverse", False)))
    if name == "oracle":
        return _apply_oracle(vec, n, g)
    return apply_matrix(vec, n, G.gate_matrix(g), g["targets"])


def dense_evolve(circuit: Sequence[dict], input, n: int | None = None, cap: int = DEFAULT_CAP) -> DenseState:
    """Apply a gate list to a basis state (BitString/int with ``n``) or a DenseState."""
    if isinstance(input, DenseState):
        state = DenseState(input.n, input.vector.copy())
    else:
        if n is None:
            n = getattr(input, "width", None)
        if n is None:
            raise PreconditionError("n is required for integer inputs")
        _check_cap(n, cap)
        state = DenseState.basis(input, n)
    _check_cap(state.n, cap)
    vec = state.vector
    for g in circuit:
        vec = apply_gate(vec, state.n, g)
    return DenseState(state.n, vec)


def circuit_unitary(circuit: Sequence[dict], n: int, cap: int = 10) -> np.ndarray:
    _check_cap(n, cap)
    d = 2**n
    out = np.zeros((d, d), dtype=np.complex128)
    for j in range(d):
        out[:, j] = dense_evolve(circuit, j, n, cap).vector
    return out


def assemble(A, cap: int = DEFAULT_CAP, from_rows: bool = False) -> np.ndarray:
    """Dense matrix of an ECS operator, from its columns (default) or its rows."""
    _check_cap(A.n, cap)
    d = 2**A.n
    xs = np.arange(d, dtype=np.int64)
    m = np.zeros((d, d), dtype=np.complex128)
    chunk = max(1, 2**18 // max(A.s, 1))
    for lo in range(0, d, chunk):
        part = xs[lo: lo + chunk]
        idx, c = A.rows(part) if from_rows else A.columns(part)
        if idx.shape[1] > A.s:
            raise PreconditionError(f"{A.label}: returned {idx.shape[1]} slots > declared s={A.s}")
        valid = idx >= 0
        other = np.broadcast_to(part[:, None], idx.shape)
        if from_rows:
            np.add.at(m, (other[valid], idx[valid]), c[valid])
        else:
            np.add.at(m, (idx[valid], other[valid]), c[valid])
    return m


def audit_duality(A, cap: int = 10, tol: float = 1e-12) -> bool:
    """Rows and columns describe the same matrix."""
    return bool(np.allclose(assemble(A, cap), assemble(A, cap, from_rows=True), atol=tol))


def as_dense_vector(x, cap: int = DEFAULT_CAP) -> np.ndarray:
    if isinstance(x, DenseState):
        return x.vector
    if isinstance(x, CtState):
        return DenseState.from_ct(x, cap).vector
    return np.asarray(x, dtype=np.complex128)


def dense_matrix_element(phi, A, psi, cap: int = DEFAULT_CAP) -> complex:
    """``<phi|A|psi>`` exactly; ``A`` may be an ECS operator, a matrix or None (identity)."""
    p = as_dense_vector(phi, cap)
    q = as_dense_vector(psi, cap)
    if A is None:
        return complex(np.vdot(p, q))
    m = A if isinstance(A, np.ndarray) else assemble(A, cap)
    return complex(np.vdot(p, m @ q))


def dense_expectation(psi, A, cap: int = DEFAULT_CAP) -> complex:
    return dense_matrix_element(psi, A, psi, cap)


@dataclass(frozen=True)
class NormReport:
    spectral: float
    max_row_sum: float
    max_col_sum: float
    iterations: int


def dense_spectral_norm(A, cap: int = 10, tol: float = 1e-8, max_iter: int = 100000, seed: int = 0,
                        block: int = 8) -> NormReport:
    """Largest singular value by block power iteration on A^dag A, plus max row/column 1-norms.

    A block of vectors with a Rayleigh-Ritz step keeps nearly equal top
    singular values from stalling the iteration below the maximum.
    """
    m = A if isinstance(A, np.ndarray) else assemble(A, cap)
    d = m.shape[0]
    if d > 2**cap:
        raise BudgetExceeded("matrix too large for the dense norm")
    rows = float(np.abs(m).sum(axis=1).max()) if d else 0.0
    cols = float(np.abs(m).sum(axis=0).max()) if d else 0.0
    if not np.any(m):
        return NormReport(0.0, rows, cols, 0)
    gram = m.conj().T @ m
    rng = np.random.default_rng(seed)
    k = min(block, gram.shape[1])
    Q, _ = np.linalg.qr(rng.normal(size=(gram.shape[1], k)) + 1j * rng.normal(size=(gram.shape[1], k)))
    lam = 0.0
    for it in range(1, max_iter + 1):
        Q, _ = np.linalg.qr(gram @ Q)
        new = float(np.linalg.eigvalsh(Q.conj().T @ gram @ Q)[-1])
        if abs(new - lam) <= tol * max(new, 1e-300) and it > 5:
            lam = new
            break
        lam = new
    else:
        raise RuntimeError("power iteration did not converge")
    return NormReport(float(np.sqrt(max(lam, 0.0))), rows, cols, it)


class DenseCtState(CtState):
    """A dense vector wrapped as a CT state (reference/testing only)."""

    kind = "dense"

    def __init__(self, vector, n: int | None = None):
        v = np.asarray(vector, dtype=np.complex128)
        n = int(round(np.log2(len(v)))) if n is None else n
        if len(v) != 2**n:
            raise SchemaError("vector length must be 2^n")
        if abs(np.linalg.norm(v) - 1) > 1e-10:
            raise PreconditionError("dense state is not normalised")
        super().__init__(n)
        self.vector = v
        self._cdf = np.cumsum(np.abs(v) ** 2)

    def amplitudes(self, xs):
        return self.vector[np.asarray(xs, dtype=np.int64)]

    def sample(self, rng, k):
        u = rng.random(k) * self._cdf[-1]
        return np.minimum(np.searchsorted(self._cdf, u, side="right"), len(self.vector) - 1).astype(np.int64)


def tv_distance(samples: np.ndarray, probs: np.ndarray) -> float:
    """Total-variation distance between an empirical histogram and a distribution."""
    counts = np.bincount(np.asarray(samples, dtype=np.int64), minlength=len(probs)).astype(float)
    return 0.5 * float(np.abs(counts / counts.sum() - probs).sum())

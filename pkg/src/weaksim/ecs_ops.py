"""Sparse operators given by row and column enumeration.

Every operator answers two batched queries:

* ``columns(xs)`` -> ``(rows, coeffs)`` of shape ``(K, s)``: the nonzero entries
  ``<r_i(x)|A|x> = alpha_i(x)`` of column ``x``, ascending in row index;
* ``rows(ys)`` -> ``(cols, coeffs)`` of shape ``(K, s)``: the nonzero entries
  ``<y|A|c_i(y)> = beta_i(y)`` of row ``y``, ascending in column index.

Unused slots are padded with index ``-1`` and coefficient ``0``.
"""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from . import gates as G
from .core import (
    BitString,
    BudgetExceeded,
    PreconditionError,
    SchemaError,
    as_index,
    check_width,
    parity,
    qubit_mask,
)

ZERO_TOL = 1e-14
DEFAULT_COMPOSE_BUDGET = 10**6
DEFAULT_MAX_TERMS = 1 << 16


class SparsenessViolation(PreconditionError):
    """An operator produced more nonzero entries than it declared."""


def parity_sign(v):
    """``(-1)^{popcount(v)}`` as int64."""
    return 1 - 2 * parity(v)


def log_locality_bound(n: int) -> int:
    """Largest gate width accepted as O(log n)."""
    return int(2 * math.log2(max(n, 2)) + 2)


def merge_entries(idx: np.ndarray, coeffs: np.ndarray, width: int | None = None):
    """Merge duplicate indices per row, drop near-zeros, sort ascending and pad.

    ``idx`` uses ``-1`` for empty slots. Returns arrays of shape ``(K, width)``;
    ``width`` defaults to the largest surviving count. Raises
    :class:`SparsenessViolation` if some row keeps more than ``width`` entries.
    """
    idx = np.asarray(idx, dtype=np.int64)
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    k, w = idx.shape
    if w == 0:
        width = 0 if width is None else width
        return np.full((k, width), -1, np.int64), np.zeros((k, width), np.complex128)
    big = np.int64(np.iinfo(np.int64).max)
    key = np.where(idx < 0, big, idx)
    order = np.argsort(key, axis=1, kind="stable")
    key = np.take_along_axis(key, order, axis=1)
    c = np.take_along_axis(coeffs, order, axis=1)
    start = np.ones((k, w), dtype=bool)
    start[:, 1:] = key[:, 1:] != key[:, :-1]
    gid = np.cumsum(start, axis=1) - 1
    rows = np.repeat(np.arange(k), w)
    summed = np.zeros((k, w), dtype=np.complex128)
    np.add.at(summed, (rows, gid.ravel()), c.ravel())
    gkey = np.full((k, w), big, dtype=np.int64)
    gkey[rows, gid.ravel()] = key.ravel()
    keep = (gkey != big) & (np.abs(summed) > ZERO_TOL)
    counts = keep.sum(axis=1)
    need = int(counts.max()) if k else 0
    if width is None:
        width = need
    elif need > width:
        raise SparsenessViolation(f"{need} nonzero entries exceed the declared sparseness {width}")
    # stable compaction keeps ascending order
    perm = np.argsort(~keep, axis=1, kind="stable")[:, :width]
    out_idx = np.take_along_axis(np.where(keep, gkey, -1), perm, axis=1)
    out_c = np.take_along_axis(np.where(keep, summed, 0), perm, axis=1)
    if out_idx.shape[1] < width:
        pad = width - out_idx.shape[1]
        out_idx = np.pad(out_idx, ((0, 0), (0, pad)), constant_values=-1)
        out_c = np.pad(out_c, ((0, 0), (0, pad)))
    return out_idx, out_c


class EcsOperator:
    """Base class for row/column-enumerable sparse operators.

    Attributes
    ----------
    n : qubit count
    s : declared sparseness (max nonzeros per row and per column)
    norm_bound : declared bound on the spectral norm
    col_norm_bound, row_norm_bound : bounds on max column / row 1-norms
    entry_accuracy : additive accuracy of each coefficient (0 for exact operators)
    frame : ``"computational"`` or ``"pm"`` (Hadamard-rotated basis)
    """

    hermitian = False
    unitary = False

    def __init__(self, n, s, norm_bound=1.0, col_norm_bound=None, row_norm_bound=None,
                 entry_accuracy=0.0, frame="computational", label=""):
        self.n = check_width(int(n))
        self.s = int(s)
        self.norm_bound = float(norm_bound)
        sq = math.sqrt(max(self.s, 1)) * self.norm_bound
        self.col_norm_bound = float(sq if col_norm_bound is None else min(col_norm_bound, sq))
        self.row_norm_bound = float(sq if row_norm_bound is None else min(row_norm_bound, sq))
        self.entry_accuracy = float(entry_accuracy)
        self.frame = frame
        self.label = label

    @property
    def exact(self) -> bool:
        return self.entry_accuracy == 0.0

    @property
    def entry_bound(self) -> float:
        return min(self.norm_bound, self.col_norm_bound, self.row_norm_bound)

    # batched queries ------------------------------------------------------
    def columns(self, xs):
        raise NotImplementedError

    def rows(self, ys):
        raise NotImplementedError

    # scalar conveniences ----------------------------------------------------
    def column(self, x) -> list[tuple[BitString, complex]]:
        r, c = self.columns(np.array([as_index(x, self.n)], dtype=np.int64))
        return [(BitString(self.n, int(i)), complex(v)) for i, v in zip(r[0], c[0]) if i >= 0]

    def row(self, y) -> list[tuple[BitString, complex]]:
        r, c = self.rows(np.array([as_index(y, self.n)], dtype=np.int64))
        return [(BitString(self.n, int(i)), complex(v)) for i, v in zip(r[0], c[0]) if i >= 0]

    def adjoint(self) -> "EcsOperator":
        return AdjointOp(self)

    def __matmul__(self, other: "EcsOperator") -> "EcsOperator":
        return compose(self, other)

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, s={self.s}, label={self.label!r})"


class AdjointOp(EcsOperator):
    """Conjugate transpose: columns and rows swap roles."""

    def __init__(self, op: EcsOperator):
        super().__init__(op.n, op.s, op.norm_bound, op.row_norm_bound, op.col_norm_bound,
                         op.entry_accuracy, op.frame, f"({op.label})^dag")
        self.op = op
        self.hermitian = op.hermitian
        self.unitary = op.unitary

    def columns(self, xs):
        r, c = self.op.rows(xs)
        return r, np.conj(c)

    def rows(self, ys):
        r, c = self.op.columns(ys)
        return r, np.conj(c)

    def adjoint(self):
        return self.op


class ScaledOp(EcsOperator):
    def __init__(self, scale: complex, op: EcsOperator):
        a = abs(scale)
        super().__init__(op.n, op.s, a * op.norm_bound, a * op.col_norm_bound, a * op.row_norm_bound,
                         a * op.entry_accuracy, op.frame, f"{scale}*{op.label}")
        self.scale = complex(scale)
        self.op = op
        self.hermitian = op.hermitian and self.scale.imag == 0
        self.unitary = op.unitary and abs(a - 1) < 1e-12

    def columns(self, xs):
        r, c = self.op.columns(xs)
        return r, self.scale * c

    def rows(self, ys):
        r, c = self.op.rows(ys)
        return r, self.scale * c


class ZeroOp(EcsOperator):
    hermitian = True

    def __init__(self, n: int):
        super().__init__(n, 0, 0.0, 0.0, 0.0, label="0")

    def columns(self, xs):
        k = len(xs)
        return np.full((k, 0), -1, np.int64), np.zeros((k, 0), np.complex128)

    rows = columns


# --------------------------------------------------------------------------
# basis-preserving operators


class BasisPreservingOp(EcsOperator):
    """``M|x> = gamma_x |pi(x)>`` from vectorised evaluators.

    ``forward(xs) -> (pi(xs), gamma(xs))`` and ``inverse(ys) -> pi^{-1}(ys)``.
    """

    def __init__(self, n, forward: Callable, inverse: Callable, norm_bound=1.0, label="", frame="computational",
                 hermitian=False, unitary=True):
        super().__init__(n, 1, norm_bound, norm_bound, norm_bound, frame=frame, label=label)
        self._forward = forward
        self._inverse = inverse
        self.hermitian = hermitian
        self.unitary = unitary

    def pi(self, xs):
        return self._forward(np.asarray(xs, dtype=np.int64))[0]

    def pi_inv(self, ys):
        return self._inverse(np.asarray(ys, dtype=np.int64))

    def gamma(self, xs):
        return self._forward(np.asarray(xs, dtype=np.int64))[1]

    def apply(self, xs):
        """``(pi(xs), gamma(xs))``."""
        return self._forward(np.asarray(xs, dtype=np.int64))

    def columns(self, xs):
        ys, g = self.apply(xs)
        return _single(ys, g)

    def rows(self, ys):
        ys = np.asarray(ys, dtype=np.int64)
        xs = self.pi_inv(ys)
        return _single(xs, self.gamma(xs))


def _single(idx, coeffs):
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    idx = np.where(np.abs(coeffs) > ZERO_TOL, idx, -1)[:, None]
    return idx.astype(np.int64), np.where(idx[:, 0] >= 0, coeffs, 0)[:, None]


def _flip(xs, q, n):
    return xs ^ (np.int64(1) << (n - 1 - q))


def _bit(xs, q, n):
    return (xs >> (n - 1 - q)) & 1


def _gather(xs, qubits, n):
    out = np.zeros_like(xs)
    for q in qubits:
        out = (out << 1) | _bit(xs, q, n)
    return out


def _scatter(xs, qubits, values, n):
    """Overwrite the bits at ``qubits`` with ``values`` (first qubit = MSB of values)."""
    k = len(qubits)
    mask = np.int64(qubit_mask(qubits, n))
    out = xs & ~mask
    for j, q in enumerate(qubits):
        b = (values >> (k - 1 - j)) & 1
        out = out | (b << (n - 1 - q))
    return out


class _GateStep:
    """One basis-preserving gate as permutation + phase on int64 batches."""

    def __init__(self, gate: dict, n: int):
        g = G.canonical(gate)
        G.check_targets(g, n)
        if g["gate"] not in G.BASIS_PRESERVING:
            raise SchemaError(f"gate {g['gate']!r} is not basis-preserving")
        self.gate = g
        self.name = g["gate"]
        self.t = g["targets"]
        self.n = n
        self.theta = g.get("param")
        if self.name == "oracle":
            ins, outs = G.oracle_split(g)
            self.ins, self.outs = ins, outs
            self.f = G.resolve_function(g.get("function"), len(ins), len(outs))
        if self.name == "diagonal":
            self.phases = np.exp(1j * np.asarray(g["phases"], dtype=float))
            if self.phases.shape != (2 ** len(self.t),):
                raise SchemaError("diagonal gate needs 2^k phases")

    def forward(self, xs, gam):
        n, t, name = self.n, self.t, self.name
        if name == "i":
            return xs, gam
        if name == "x":
            return _flip(xs, t[0], n), gam
        if name == "y":
            b = _bit(xs, t[0], n)
            return _flip(xs, t[0], n), gam * 1j * (1 - 2 * b)
        if name == "z":
            return xs, gam * (1 - 2 * _bit(xs, t[0], n))
        if name in ("s", "sdg", "t", "p"):
            ang = {"s": math.pi / 2, "sdg": -math.pi / 2, "t": math.pi / 4}.get(name, self.theta)
            return xs, gam * np.exp(1j * ang * _bit(xs, t[0], n))
        if name == "expz":
            return xs, gam * np.exp(1j * self.theta * (1 - 2 * _bit(xs, t[0], n)))
        if name == "cnot":
            c = _bit(xs, t[0], n)
            return xs ^ (c << (n - 1 - t[1])), gam
        if name == "cz":
            both = _bit(xs, t[0], n) & _bit(xs, t[1], n)
            return xs, gam * np.where(both == 1, np.exp(1j * self.theta), 1)
        if name == "swap":
            d = _bit(xs, t[0], n) ^ _bit(xs, t[1], n)
            return xs ^ (d << (n - 1 - t[0])) ^ (d << (n - 1 - t[1])), gam
        if name == "toffoli":
            c = _bit(xs, t[0], n) & _bit(xs, t[1], n)
            return xs ^ (c << (n - 1 - t[2])), gam
        if name == "oracle":
            fx = np.asarray(self.f(_gather(xs, self.ins, n)), dtype=np.int64)
            cur = _gather(xs, self.outs, n)
            return _scatter(xs, self.outs, cur ^ fx, n), gam
        if name == "diagonal":
            return xs, gam * self.phases[_gather(xs, t, n)]
        raise SchemaError(name)

    def backward(self, ys):
        """Inverse permutation only."""
        n, t, name = self.n, self.t, self.name
        if name in ("x", "y"):
            return _flip(ys, t[0], n)
        if name in ("cnot", "swap", "toffoli", "oracle"):
            return self.forward(ys, np.ones(len(ys), complex))[0]
        return ys


class BasisPreservingCircuit(BasisPreservingOp):
    """Basis-preserving operator from a gate list (applied left to right)."""

    def __init__(self, gate_list: Sequence[dict], n: int, label: str = "", frame="computational"):
        steps = [_GateStep(g, n) for g in gate_list]
        self.steps = steps
        self.gate_list = [s.gate for s in steps]

        def forward(xs):
            gam = np.ones(len(xs), dtype=np.complex128)
            for st in steps:
                xs, gam = st.forward(xs, gam)
            return xs, gam

        def inverse(ys):
            for st in reversed(steps):
                ys = st.backward(ys)
            return ys

        super().__init__(n, forward, inverse, 1.0, label or f"circuit[{len(steps)}]", frame)
        diag_names = {"i", "z", "s", "sdg", "t", "p", "expz", "cz", "diagonal"}
        self.is_diagonal = all(s.name in diag_names for s in steps)


def basis_preserving_op(gate_list: Sequence[dict], n: int, label: str = "") -> BasisPreservingCircuit:
    return BasisPreservingCircuit(gate_list, n, label)


def diagonal_sign_op(f: Callable, n: int, label: str = "") -> BasisPreservingOp:
    """``sum_x (-1)^{f(x)} |x><x|`` for a vectorised 0/1 function ``f``."""

    def forward(xs):
        return xs, (1 - 2 * (np.asarray(f(xs), dtype=np.int64) & 1)).astype(np.complex128)

    return BasisPreservingOp(n, forward, lambda ys: ys, 1.0, label or "sign", hermitian=True)


def swap_block_op(k: int, n: int) -> BasisPreservingOp:
    """Permutation on k+n qubits swapping qubit i with qubit i+k for i < k."""
    if not 0 <= k <= n:
        raise PreconditionError("swap block needs 0 <= k <= n")
    total = k + n
    if k == 0:
        return BasisPreservingOp(total, lambda xs: (xs, np.ones(len(xs), complex)), lambda ys: ys, label="I",
                                 hermitian=True)

    def perm(xs):
        xs = np.asarray(xs, dtype=np.int64)
        for i in range(k):
            d = _bit(xs, i, total) ^ _bit(xs, i + k, total)
            xs = xs ^ (d << (total - 1 - i)) ^ (d << (total - 1 - i - k))
        return xs

    return BasisPreservingOp(total, lambda xs: (perm(xs), np.ones(len(xs), complex)), perm,
                             label=f"swap[{k}]", hermitian=True)


# --------------------------------------------------------------------------
# Pauli sums


PAULI_XZ = {"I": (0, 0, 1), "X": (1, 0, 1), "Z": (0, 1, 1), "Y": (1, 1, 1j)}


class PauliSum:
    """Weighted Pauli strings stored as ``coeff * X^x Z^z`` (Y = i X Z).

    Terms with equal ``(x, z)`` are merged on construction.
    """

    def __init__(self, n: int, xmasks, zmasks, coeffs):
        self.n = check_width(int(n))
        x = np.asarray(xmasks, dtype=np.int64).ravel()
        z = np.asarray(zmasks, dtype=np.int64).ravel()
        c = np.asarray(coeffs, dtype=np.complex128).ravel()
        if not (len(x) == len(z) == len(c)):
            raise ValueError("mask and coefficient lengths differ")
        if len(x):
            keys = np.stack([x, z], axis=1)
            uniq, inv = np.unique(keys, axis=0, return_inverse=True)
            summed = np.zeros(len(uniq), dtype=np.complex128)
            np.add.at(summed, inv.ravel(), c)
            keep = np.abs(summed) > ZERO_TOL
            x, z, c = uniq[keep, 0], uniq[keep, 1], summed[keep]
        self.xmasks, self.zmasks, self.coeffs = x, z, c

    @classmethod
    def from_labels(cls, terms: Sequence[tuple[complex, str]]) -> "PauliSum":
        """Build from ``(coefficient, "XIZY...")`` pairs (qubit 0 first)."""
        if not terms:
            raise ValueError("empty Pauli sum; use ZeroOp")
        n = len(terms[0][1])
        xs, zs, cs = [], [], []
        for coef, label in terms:
            if len(label) != n:
                raise SchemaError("Pauli labels must share one width")
            x = z = 0
            ph = 1
            for q, ch in enumerate(label.upper()):
                if ch not in PAULI_XZ:
                    raise SchemaError(f"bad Pauli letter {ch!r}")
                bx, bz, f = PAULI_XZ[ch]
                x |= bx << (n - 1 - q)
                z |= bz << (n - 1 - q)
                ph *= f
            xs.append(x)
            zs.append(z)
            cs.append(complex(coef) * ph)
        return cls(n, xs, zs, cs)

    @classmethod
    def single(cls, n: int, label_map: dict[int, str], coeff: complex = 1.0) -> "PauliSum":
        chars = ["I"] * n
        for q, p in label_map.items():
            chars[q] = p
        return cls.from_labels([(coeff, "".join(chars))])

    def __len__(self):
        return len(self.coeffs)

    def labels(self) -> list[tuple[complex, str]]:
        """Inverse of :meth:`from_labels` (coefficients of the letter form)."""
        out = []
        for x, z, c in zip(self.xmasks, self.zmasks, self.coeffs):
            chars = []
            ny = 0
            for q in range(self.n):
                bx = (int(x) >> (self.n - 1 - q)) & 1
                bz = (int(z) >> (self.n - 1 - q)) & 1
                chars.append("IZXY"[bx * 2 + bz])
                ny += bx & bz
            out.append((complex(c) * (-1j) ** ny, "".join(chars)))
        return out

    def one_norm(self) -> float:
        return float(np.abs(self.coeffs).sum())

    def line_norms(self, max_work: int = 1 << 23) -> tuple[float, float] | None:
        """Exact largest column and row 1-norms, or None when too costly.

        Column ``x`` depends on ``x`` only through the Z-support, so enumerating
        those bits covers every column.
        """
        if not len(self):
            return 0.0, 0.0
        zsup = int(np.bitwise_or.reduce(self.zmasks))
        bits = [b for b in range(self.n) if (zsup >> b) & 1]
        if (len(self) << len(bits)) > max_work:
            return None
        v = np.zeros(1, dtype=np.int64)
        for b in bits:
            v = np.concatenate([v, v | (np.int64(1) << b)])
        _, group = np.unique(self.xmasks, return_inverse=True)
        onehot = np.zeros((len(self), int(group.max()) + 1))
        onehot[np.arange(len(self)), group.ravel()] = 1
        signs = parity_sign(v[:, None] & self.zmasks[None, :])
        col = np.abs((signs * self.coeffs[None, :]) @ onehot).sum(axis=1).max()
        row_c = self.coeffs * parity_sign(self.xmasks & self.zmasks)
        row = np.abs((signs * row_c[None, :]) @ onehot).sum(axis=1).max()
        return float(col), float(row)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        sign = parity_sign(self.xmasks & self.zmasks)
        return bool(np.allclose(np.conj(self.coeffs) * sign, self.coeffs, atol=tol))

    def support(self) -> list[int]:
        m = int(np.bitwise_or.reduce(self.xmasks | self.zmasks)) if len(self) else 0
        return [q for q in range(self.n) if (m >> (self.n - 1 - q)) & 1]

    def max_weight(self) -> int:
        if not len(self):
            return 0
        return int(np.bitwise_count(self.xmasks | self.zmasks).max())

    def scaled(self, a: complex) -> "PauliSum":
        return PauliSum(self.n, self.xmasks, self.zmasks, self.coeffs * a)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if self.n != other.n:
            raise ValueError("width mismatch")
        return PauliSum(self.n, np.r_[self.xmasks, other.xmasks], np.r_[self.zmasks, other.zmasks],
                        np.r_[self.coeffs, other.coeffs])

    def dense(self) -> np.ndarray:
        if self.n > 12:
            raise BudgetExceeded("dense Pauli sums are capped at 12 qubits")
        d = 2 ** self.n
        v = np.arange(d, dtype=np.int64)
        m = np.zeros((d, d), dtype=np.complex128)
        for x, z, c in zip(self.xmasks, self.zmasks, self.coeffs):
            sign = parity_sign(v & z)
            m[v ^ x, v] += c * sign
        return m

    def embedded(self, qubits: Sequence[int], n: int) -> "PauliSum":
        """Place this sum on ``qubits`` of an n-qubit register."""
        if len(qubits) != self.n:
            raise PreconditionError("one target per Pauli qubit")
        return PauliSum(n, _scatter(np.zeros_like(self.xmasks), qubits, self.xmasks, n),
                        _scatter(np.zeros_like(self.zmasks), qubits, self.zmasks, n), self.coeffs)

    def restricted(self, qubits: Sequence[int]) -> "PauliSum":
        """The same terms read on ``qubits`` only (caller guarantees the support fits)."""
        return PauliSum(len(qubits), _gather(self.xmasks, qubits, self.n), _gather(self.zmasks, qubits, self.n),
                        self.coeffs)


def pauli_decompose(matrix) -> PauliSum:
    """Expand a 2^k x 2^k matrix as ``sum c X^x Z^z`` with ``c = Tr((X^x Z^z)^dag M) / 2^k``."""
    m = np.asarray(matrix, dtype=np.complex128)
    d = m.shape[0]
    k = int(round(math.log2(d)))
    if m.shape != (2**k, 2**k):
        raise PreconditionError("matrix must be 2^k x 2^k")
    v = np.arange(d, dtype=np.int64)
    walsh = parity_sign(v[:, None] & v[None, :])
    # row x of diag holds M[v ^ x, v]
    diag = m[v[:, None] ^ v[None, :], v[None, :]]
    coeffs = diag @ walsh.T / d
    xs, zs = np.meshgrid(v, v, indexing="ij")
    return PauliSum(k, xs.ravel(), zs.ravel(), coeffs.ravel())


class PauliSumOp(EcsOperator):
    """Column/row enumeration of a :class:`PauliSum`.

    Sparseness is the number of distinct X-masks. ``norm_bound`` defaults to the
    coefficient 1-norm; row and column 1-norms are computed exactly when the
    Z-support is small and fall back to the coefficient 1-norm otherwise.
    """

    def __init__(self, terms: PauliSum, norm_bound: float | None = None, max_terms: int = DEFAULT_MAX_TERMS,
                 entry_accuracy: float = 0.0, label: str = "", frame="computational"):
        if len(terms) > max_terms:
            raise BudgetExceeded(f"{len(terms)} Pauli terms exceed the bound {max_terms}")
        one = terms.one_norm()
        s = len(np.unique(terms.xmasks))
        col = row = one
        exact = terms.line_norms()
        if exact is not None:
            col, row = exact
        super().__init__(terms.n, s, one if norm_bound is None else min(norm_bound, one), col, row,
                         entry_accuracy, frame, label or f"pauli[{len(terms)}]")
        self.terms = terms
        self.hermitian = terms.is_hermitian()

    def columns(self, xs):
        xs = np.asarray(xs, dtype=np.int64)[:, None]
        t = self.terms
        if not len(t):
            return ZeroOp(self.n).columns(xs[:, 0])
        sign = parity_sign(xs & t.zmasks[None, :])
        return merge_entries(xs ^ t.xmasks[None, :], sign * t.coeffs[None, :], self.s)

    def rows(self, ys):
        # <y| c X^x Z^z |y ^ x> = c (-1)^{z.(y ^ x)}
        ys = np.asarray(ys, dtype=np.int64)[:, None]
        t = self.terms
        if not len(t):
            return ZeroOp(self.n).columns(ys[:, 0])
        cols = ys ^ t.xmasks[None, :]
        sign = parity_sign(cols & t.zmasks[None, :])
        return merge_entries(cols, sign * t.coeffs[None, :], self.s)


def pauli_sum_op(terms, norm_bound: float | None = None, **kw) -> PauliSumOp:
    if not isinstance(terms, PauliSum):
        terms = PauliSum.from_labels(terms)
    return PauliSumOp(terms, norm_bound, **kw)


def z_observable(n: int, qubit: int = 0) -> PauliSumOp:
    return PauliSumOp(PauliSum.single(n, {qubit: "Z"}), label=f"Z{qubit}")


# --------------------------------------------------------------------------
# local gates and embeddings


class LocalGateOp(EcsOperator):
    """A d-qubit matrix on ``targets`` tensored with the identity elsewhere."""

    def __init__(self, matrix, targets: Sequence[int], n: int, max_width: int | None = None,
                 require_unitary: bool = True, norm_bound: float | None = None, label: str = "",
                 frame="computational"):
        m = np.asarray(matrix, dtype=np.complex128)
        d = len(targets)
        if m.shape != (2**d, 2**d):
            raise PreconditionError(f"matrix shape {m.shape} does not match {d} targets")
        bound = log_locality_bound(n) if max_width is None else max_width
        if d > bound:
            raise BudgetExceeded(f"gate width {d} exceeds the locality bound {bound}")
        if len(set(targets)) != d or any(not 0 <= t < n for t in targets):
            raise PreconditionError(f"bad targets {targets}")
        if require_unitary and not G.is_unitary(m):
            raise PreconditionError("local gate is not unitary")
        nz = np.abs(m) > ZERO_TOL
        s = int(max(nz.sum(axis=0).max(), nz.sum(axis=1).max()))
        cn = float(np.abs(m).sum(axis=0).max())
        rn = float(np.abs(m).sum(axis=1).max())
        if norm_bound is None:
            norm_bound = 1.0 if require_unitary else float(np.linalg.norm(m, 2))
        super().__init__(n, s, norm_bound, cn, rn, frame=frame, label=label or f"local{tuple(targets)}")
        self.matrix = m
        self.targets = list(targets)
        self.hermitian = bool(np.allclose(m, m.conj().T, atol=1e-12))
        self.unitary = require_unitary or G.is_unitary(m)

    def columns(self, xs):
        xs = np.asarray(xs, dtype=np.int64)
        a = _gather(xs, self.targets, self.n)
        d = 2 ** len(self.targets)
        b = np.arange(d, dtype=np.int64)
        rows = _scatter(xs[:, None], self.targets, b[None, :], self.n)
        return merge_entries(rows, self.matrix[b[None, :], a[:, None]], self.s)

    def rows(self, ys):
        ys = np.asarray(ys, dtype=np.int64)
        a = _gather(ys, self.targets, self.n)
        d = 2 ** len(self.targets)
        b = np.arange(d, dtype=np.int64)
        cols = _scatter(ys[:, None], self.targets, b[None, :], self.n)
        return merge_entries(cols, self.matrix[a[:, None], b[None, :]], self.s)


def local_gate_op(G_, targets, n, **kw) -> LocalGateOp:
    return LocalGateOp(G_, targets, n, **kw)


class EmbeddedOp(EcsOperator):
    """A k-qubit operator acting on the qubits ``qubits`` of an n-qubit register."""

    def __init__(self, op: EcsOperator, qubits: Sequence[int], n: int):
        if len(qubits) != op.n:
            raise PreconditionError("embedding needs one target per operator qubit")
        if len(set(qubits)) != len(qubits) or any(not 0 <= q < n for q in qubits):
            raise PreconditionError(f"bad embedding targets {qubits}")
        super().__init__(n, op.s, op.norm_bound, op.col_norm_bound, op.row_norm_bound, op.entry_accuracy,
                         op.frame, f"{op.label}@{tuple(qubits)}")
        self.op = op
        self.qubits = list(qubits)
        self.hermitian = op.hermitian
        self.unitary = op.unitary

    def _lift(self, xs, inner):
        xs = np.asarray(xs, dtype=np.int64)
        idx, c = inner(_gather(xs, self.qubits, self.n))
        full = _scatter(xs[:, None], self.qubits, np.maximum(idx, 0), self.n)
        return np.where(idx >= 0, full, -1), c

    def columns(self, xs):
        return self._lift(xs, self.op.columns)

    def rows(self, ys):
        return self._lift(ys, self.op.rows)


def tensor_identity(op: EcsOperator, k: int, before: bool = True) -> EcsOperator:
    """``I_k (x) op`` (``before=True``) or ``op (x) I_k`` as an embedded operator."""
    n = op.n + k
    qubits = list(range(k, n)) if before else list(range(op.n))
    return EmbeddedOp(op, qubits, n)


# --------------------------------------------------------------------------
# products and sums


class ComposedOp(EcsOperator):
    """Product ``A @ B`` (B acts first)."""

    def __init__(self, A: EcsOperator, B: EcsOperator, budget: int = DEFAULT_COMPOSE_BUDGET):
        if A.n != B.n:
            raise PreconditionError("width mismatch in composition")
        if A.frame != B.frame:
            raise PreconditionError("frame mismatch in composition")
        s = A.s * B.s
        if s > budget:
            raise BudgetExceeded(f"composed sparseness {A.s}*{B.s}={s} exceeds the budget {budget}")
        acc = A.entry_accuracy * B.norm_bound + B.entry_accuracy * A.norm_bound
        super().__init__(A.n, s, A.norm_bound * B.norm_bound, A.col_norm_bound * B.col_norm_bound,
                         A.row_norm_bound * B.row_norm_bound, acc, A.frame, f"{A.label}*{B.label}")
        self.A, self.B = A, B
        self.budget = budget
        self.unitary = A.unitary and B.unitary

    @staticmethod
    def _chain(first, second, xs, width):
        mid, c1 = first(xs)
        k, s1 = mid.shape
        flat = np.maximum(mid.ravel(), 0)
        out, c2 = second(flat)
        s2 = out.shape[1]
        out = out.reshape(k, s1 * s2)
        valid = np.repeat(mid >= 0, s2, axis=1) & (out >= 0)
        coeff = np.repeat(c1, s2, axis=1) * c2.reshape(k, s1 * s2)
        return merge_entries(np.where(valid, out, -1), np.where(valid, coeff, 0), width)

    def columns(self, xs):
        return self._chain(self.B.columns, self.A.columns, np.asarray(xs, dtype=np.int64), self.s)

    def rows(self, ys):
        return self._chain(self.A.rows, self.B.rows, np.asarray(ys, dtype=np.int64), self.s)


def compose(*ops: EcsOperator, budget: int = DEFAULT_COMPOSE_BUDGET) -> EcsOperator:
    """Product ``ops[0] @ ops[1] @ ...`` with the sparseness budget checked at every step."""
    if not ops:
        raise ValueError("nothing to compose")
    out = ops[-1]
    for op in reversed(ops[:-1]):
        out = ComposedOp(op, out, budget)
    return out


def conjugate(U: EcsOperator, O: EcsOperator, budget: int = DEFAULT_COMPOSE_BUDGET) -> EcsOperator:
    """``U^dag O U`` with Hermiticity carried over from ``O``."""
    out = compose(U.adjoint(), O, U, budget=budget)
    out.hermitian = O.hermitian
    return out


class LinearCombinationOp(EcsOperator):
    """``sum_j c_j A_j``."""

    def __init__(self, terms: Sequence[tuple[complex, EcsOperator]]):
        if not terms:
            raise ValueError("empty combination")
        n = terms[0][1].n
        if any(op.n != n for _, op in terms):
            raise PreconditionError("width mismatch in linear combination")
        s = sum(op.s for _, op in terms)
        nb = sum(abs(c) * op.norm_bound for c, op in terms)
        cn = sum(abs(c) * op.col_norm_bound for c, op in terms)
        rn = sum(abs(c) * op.row_norm_bound for c, op in terms)
        acc = sum(abs(c) * op.entry_accuracy for c, op in terms)
        super().__init__(n, s, nb, cn, rn, acc, terms[0][1].frame, "+".join(op.label for _, op in terms))
        self.terms = [(complex(c), op) for c, op in terms]
        self.hermitian = all(op.hermitian and complex(c).imag == 0 for c, op in terms)

    def _stack(self, xs, which):
        idx, cs = [], []
        for c, op in self.terms:
            i, v = getattr(op, which)(xs)
            idx.append(i)
            cs.append(c * v)
        return merge_entries(np.concatenate(idx, axis=1), np.concatenate(cs, axis=1), self.s)

    def columns(self, xs):
        return self._stack(np.asarray(xs, dtype=np.int64), "columns")

    def rows(self, ys):
        return self._stack(np.asarray(ys, dtype=np.int64), "rows")


def linear_combination(terms):
    return LinearCombinationOp(terms)


class DenseOp(EcsOperator):
    """Explicit matrix (small n only); handy for tests and random sparse unitaries."""

    def __init__(self, matrix, norm_bound: float | None = None, label: str = "dense"):
        m = np.asarray(matrix, dtype=np.complex128)
        n = int(round(math.log2(m.shape[0])))
        if m.shape != (2**n, 2**n):
            raise PreconditionError("dense operator must be 2^n x 2^n")
        if n > 12:
            raise BudgetExceeded("dense operators are capped at 12 qubits")
        nz = np.abs(m) > ZERO_TOL
        s = int(max(nz.sum(axis=0).max(), nz.sum(axis=1).max()))
        if norm_bound is None:
            norm_bound = float(np.linalg.norm(m, 2))
        super().__init__(n, s, norm_bound, float(np.abs(m).sum(axis=0).max()), float(np.abs(m).sum(axis=1).max()),
                         label=label)
        self.matrix = m
        self.hermitian = bool(np.allclose(m, m.conj().T, atol=1e-12))
        self.unitary = G.is_unitary(m)
        d = 2**n
        self._col = merge_entries(np.broadcast_to(np.arange(d), (d, d)), m.T, s)
        self._row = merge_entries(np.broadcast_to(np.arange(d), (d, d)), m, s)

    def columns(self, xs):
        xs = np.asarray(xs, dtype=np.int64)
        return self._col[0][xs], self._col[1][xs]

    def rows(self, ys):
        ys = np.asarray(ys, dtype=np.int64)
        return self._row[0][ys], self._row[1][ys]


# --------------------------------------------------------------------------
# Hadamard frame


class FramedOp(EcsOperator):
    """Same matrix, reinterpreted in another basis frame."""

    def __init__(self, op: EcsOperator, frame: str):
        super().__init__(op.n, op.s, op.norm_bound, op.col_norm_bound, op.row_norm_bound, op.entry_accuracy, frame,
                         op.label)
        self.op = op
        self.hermitian = op.hermitian
        self.unitary = op.unitary

    def columns(self, xs):
        return self.op.columns(xs)

    def rows(self, ys):
        return self.op.rows(ys)


def hadamard_frame(A: EcsOperator) -> EcsOperator:
    """Tag ``A`` as the computational-basis form of an operator meant in the +/- basis.

    If ``A = H^n B H^n`` then ``<b_x|B|b_y> = <x|A|y>``; the matrix is unchanged.
    """
    return FramedOp(A, "pm" if A.frame == "computational" else "computational")


def hadamard_conjugate_gate(gate: dict) -> dict:
    """``H^n g H^n`` for CNOT and e^{i theta X} gates (CNOT reverses, X-rotation becomes Z-rotation)."""
    g = G.canonical(gate)
    if g["gate"] == "cnot":
        return {"gate": "cnot", "targets": [g["targets"][1], g["targets"][0]]}
    if g["gate"] == "expx":
        return {"gate": "expz", "targets": list(g["targets"]), "param": g["param"]}
    if g["gate"] == "expz":
        return {"gate": "expx", "targets": list(g["targets"]), "param": g["param"]}
    if g["gate"] in ("x", "z"):
        return {"gate": "z" if g["gate"] == "x" else "x", "targets": list(g["targets"])}
    raise PreconditionError(f"no Hadamard-conjugation rule for {g['gate']!r}")

"""States with efficient amplitude queries and exact samplers.

Every state exposes ``amplitudes(xs)`` (batched ``<x|psi>``) and
``sample(rng, k)`` (``k`` i.i.d. draws from ``|<x|psi>|^2``). Several families
also expose ``marginal(S, ys)``: the probability that the qubits ``S`` read the
packed outcomes ``ys`` (``S[0]`` is the most significant bit of ``ys``).
"""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from . import gates as G
from .core import (
    BitString,
    OutOfClass,
    PreconditionError,
    RandomStream,
    SchemaError,
    as_index,
    as_stream,
    bit_matrix,
    check_width,
    get_bit,
)

NORM_TOL = 1e-12


class CtState:
    """Base class: amplitude oracle plus sampler over n-qubit basis states."""

    kind = "abstract"

    def __init__(self, n: int):
        self.n = check_width(int(n))

    def amplitudes(self, xs) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        raise NotImplementedError

    def probabilities(self, xs) -> np.ndarray:
        return np.abs(self.amplitudes(xs)) ** 2

    def amplitude(self, x) -> complex:
        return complex(self.amplitudes(np.array([as_index(x, self.n)], dtype=np.int64))[0])

    def draw(self, stream: RandomStream | int, k: int = 1) -> list[BitString]:
        xs = self.sample(as_stream(stream).generator(), k)
        return [BitString(self.n, int(x)) for x in xs]

    def to_dict(self) -> dict:
        raise OutOfClass(f"{type(self).__name__} has no file description")

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n})"


# --------------------------------------------------------------------------
# marginal-chain sampling


def marginal_chain_sampler(marginal: Callable, n: int, rng: np.random.Generator, k: int,
                           order: Sequence[int] | None = None, tol: float = 1e-9) -> np.ndarray:
    """Draw ``k`` strings bit by bit from a consistent marginal oracle.

    ``marginal(S, ys)`` returns ``p_{S,y}`` for each packed outcome in ``ys``.
    Qubits are fixed in ``order`` (default 0..n-1) using the conditionals
    ``p_{S+i, y1} / p_{S, y}``.
    """
    order = list(range(n)) if order is None else list(order)
    ys = np.zeros(k, dtype=np.int64)
    prev = np.ones(k)
    xs = np.zeros(k, dtype=np.int64)
    for step, q in enumerate(order):
        S = tuple(order[: step + 1])
        # many samples share a prefix; evaluate each distinct prefix once
        uniq, inv = np.unique(ys, return_inverse=True)
        p1 = np.asarray(marginal(S, (uniq << 1) | 1), dtype=float)[inv.ravel()]
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = np.where(prev > 0, p1 / prev, 0.0)
        if np.any(cond < -tol) or np.any(cond > 1 + tol):
            raise PreconditionError("inconsistent marginal oracle: conditional outside [0, 1]")
        bit = (rng.random(k) < cond).astype(np.int64)
        ys = (ys << 1) | bit
        prev = np.where(bit == 1, p1, prev - p1)
        xs |= bit << (n - 1 - q)
    return xs


# --------------------------------------------------------------------------
# product and phase states


def _factors(factors) -> np.ndarray:
    f = np.asarray(factors, dtype=np.complex128)
    if f.ndim == 3 and f.shape[-1] == 2 and np.isrealobj(np.asarray(factors)):
        f = f[..., 0] + 1j * f[..., 1]
    if f.ndim != 2 or f.shape[1] != 2:
        raise PreconditionError("factors must be n pairs (<0|psi_i>, <1|psi_i>)")
    norms = np.sum(np.abs(f) ** 2, axis=1)
    if np.any(np.abs(norms - 1) > NORM_TOL):
        raise PreconditionError(f"unnormalised factor(s) at positions {np.nonzero(np.abs(norms - 1) > NORM_TOL)[0]}")
    return f


class ProductState(CtState):
    kind = "product"

    def __init__(self, factors):
        f = _factors(factors)
        super().__init__(len(f))
        self.factors = f

    @classmethod
    def basis(cls, x) -> "ProductState":
        if isinstance(x, str):
            x = BitString.from_str(x)
        bits = x.bits() if isinstance(x, BitString) else tuple(x)
        return cls([(1, 0) if b == 0 else (0, 1) for b in bits])

    @classmethod
    def plus(cls, n: int) -> "ProductState":
        return cls([(G.SQ2, G.SQ2)] * n)

    def amplitudes(self, xs):
        xs = np.asarray(xs, dtype=np.int64)
        out = np.ones(xs.shape, dtype=np.complex128)
        for i in range(self.n):
            out = out * self.factors[i, get_bit(xs, i, self.n)]
        return out

    def marginal(self, S, ys):
        ys = np.asarray(ys, dtype=np.int64)
        p = np.ones(ys.shape)
        probs = np.abs(self.factors) ** 2
        for j, q in enumerate(S):
            p = p * probs[q, (ys >> (len(S) - 1 - j)) & 1]
        return p

    def sample(self, rng, k):
        p1 = np.abs(self.factors[:, 1]) ** 2
        bits = (rng.random((k, self.n)) < p1[None, :]).astype(np.int64)
        w = np.int64(1) << np.arange(self.n - 1, -1, -1, dtype=np.int64)
        return bits @ w

    def apply_local(self, unitaries: dict[int, np.ndarray]) -> "ProductState":
        """Apply single-qubit unitaries ``{qubit: 2x2}``."""
        f = self.factors.copy()
        for q, u in unitaries.items():
            f[q] = np.asarray(u, dtype=complex) @ f[q]
        return ProductState(f)

    def to_dict(self):
        return {"kind": "product", "factors": [[[z.real, z.imag] for z in row] for row in self.factors]}


class PhaseState(CtState):
    """``2^{-n/2} sum_x e^{i theta(x)} |x>`` for a vectorised real ``theta``."""

    kind = "phase"

    def __init__(self, n: int, theta: Callable, terms=None):
        super().__init__(n)
        self.theta = theta
        self.terms = terms

    @classmethod
    def from_terms(cls, n: int, terms: Sequence[tuple[Sequence[int], float]]) -> "PhaseState":
        """``theta(x) = sum_j angle_j * prod_{q in qubits_j} x_q``."""
        terms = [(tuple(int(q) for q in qs), float(a)) for qs, a in terms]
        for qs, _ in terms:
            if any(not 0 <= q < n for q in qs):
                raise SchemaError(f"phase term qubits {qs} out of range")

        def theta(xs):
            xs = np.asarray(xs, dtype=np.int64)
            out = np.zeros(xs.shape)
            for qs, a in terms:
                m = np.ones(xs.shape, dtype=np.int64)
                for q in qs:
                    m = m & get_bit(xs, q, n)
                out = out + a * m
            return out

        return cls(n, theta, terms)

    def amplitudes(self, xs):
        xs = np.asarray(xs, dtype=np.int64)
        return np.exp(1j * np.asarray(self.theta(xs), dtype=float)) * 2.0 ** (-self.n / 2)

    def marginal(self, S, ys):
        return np.full(np.shape(ys), 2.0 ** (-len(S)))

    def sample(self, rng, k):
        return _uniform_strings(rng, k, self.n)

    def to_dict(self):
        if self.terms is None:
            raise OutOfClass("phase state built from a callable has no file description")
        return {"kind": "phase", "n": self.n, "terms": [{"qubits": list(qs), "angle": a} for qs, a in self.terms]}


def _uniform_strings(rng, k, n):
    if n <= 62:
        return rng.integers(0, np.int64(1) << n, size=k, dtype=np.int64)
    raise PreconditionError("too many qubits")


def product_state(factors) -> ProductState:
    return ProductState(factors)


def phase_state(theta, n: int | None = None) -> PhaseState:
    if callable(theta):
        if n is None:
            raise PreconditionError("n is required with a callable phase")
        return PhaseState(n, theta)
    return PhaseState.from_terms(n, theta)


# --------------------------------------------------------------------------
# stabilizer states


def _gf2_rank(m: np.ndarray) -> int:
    m = (np.asarray(m, dtype=np.uint8) & 1).copy()
    rank = 0
    rows, cols = m.shape
    for c in range(cols):
        piv = np.nonzero(m[rank:, c])[0]
        if len(piv) == 0:
            continue
        p = rank + piv[0]
        m[[rank, p]] = m[[p, rank]]
        hits = np.nonzero(m[:, c])[0]
        hits = hits[hits != rank]
        m[hits] ^= m[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def _gf2_kernel_vector(A: np.ndarray):
    """A nonzero kernel vector of A (columns dependent), or None."""
    n, k = A.shape
    m = A.copy() & 1
    pivots = []
    r = 0
    for c in range(k):
        piv = np.nonzero(m[r:, c])[0] if r < n else []
        if len(piv) == 0:
            # column c is free: build a kernel vector
            v = np.zeros(k, dtype=np.uint8)
            v[c] = 1
            for row, pc in enumerate(pivots):
                if m[row, c]:
                    v[pc] = 1
            return v
        p = r + piv[0]
        m[[r, p]] = m[[p, r]]
        hits = np.nonzero(m[:, c])[0]
        hits = hits[hits != r]
        m[hits] ^= m[r]
        pivots.append(c)
        r += 1
    return None


class StabilizerState(CtState):
    """Stabilizer state as an affine quadratic form.

    ``|psi> = omega * sum_{t in F_2^k} i^{q(t)} |A t + b>`` with ``A`` an
    ``n x k`` binary matrix of full column rank and
    ``q(t) = sum_i L_i t_i + 2 sum_{i<j} J_ij t_i t_j (mod 4)``.
    Built from a Clifford gate list acting on ``|0...0>`` (or ``|input>``).
    """

    kind = "stabilizer"

    def __init__(self, n: int, gate_list: Sequence[dict] = (), input_bits: int = 0):
        super().__init__(n)
        self.A = np.zeros((n, 0), dtype=np.uint8)
        self.b = np.array([(input_bits >> (n - 1 - i)) & 1 for i in range(n)], dtype=np.uint8)
        self.L = np.zeros(0, dtype=np.int64)
        self.J = np.zeros((0, 0), dtype=np.uint8)
        self.omega = 1.0 + 0j
        self.gate_list = []
        self.input_bits = int(input_bits)
        for g in gate_list:
            self.apply(g)

    # --- phase bookkeeping ------------------------------------------------
    @property
    def k(self) -> int:
        return self.A.shape[1]

    def _add_linear_phase(self, c: int, R: np.ndarray, b0: int):
        """Multiply by ``i^{c (b0 XOR R.t)}``."""
        c %= 4
        if c == 0:
            return
        self.omega *= 1j ** ((c * b0) % 4)
        coef = (c * (1 - 2 * b0)) % 4
        idx = np.nonzero(R)[0]
        self.L[idx] = (self.L[idx] + coef) % 4
        if c % 2 and len(idx) > 1:
            sub = np.ix_(idx, idx)
            self.J[sub] ^= np.triu(np.ones((len(idx), len(idx)), dtype=np.uint8), 1)

    def _jsym(self):
        return (self.J | self.J.T) & 1

    def _drop(self, v: int):
        keep = [i for i in range(self.k) if i != v]
        self.A = self.A[:, keep]
        self.L = self.L[keep]
        self.J = self.J[np.ix_(keep, keep)]

    def _substitute(self, m: int, S: np.ndarray, c0: int):
        """Replace variable ``t_m`` by ``c0 XOR sum_{i in S} t_i`` and drop it."""
        S = S.copy()
        S[m] = 0
        col = self.A[:, m].copy()
        for i in np.nonzero(S)[0]:
            self.A[:, i] ^= col
        if c0:
            self.b ^= col
        Lm = int(self.L[m])
        js = self._jsym()[m].copy()
        self._add_linear_phase(Lm, S, c0)
        for l in np.nonzero(js)[0]:
            if l == m:
                continue
            if c0:
                self.L[l] = (self.L[l] + 2) % 4
            for i in np.nonzero(S)[0]:
                if i == l:
                    self.L[l] = (self.L[l] + 2) % 4
                else:
                    a, bb = min(i, l), max(i, l)
                    self.J[a, bb] ^= 1
        self._drop(m)

    # --- gates ----------------------------------------------------------
    def apply(self, gate: dict) -> "StabilizerState":
        g = G.canonical(gate)
        G.check_targets(g, self.n)
        name, t = g["gate"], g["targets"]
        if name not in G.CLIFFORD and not (name == "cz" and abs(g["param"] - math.pi) < 1e-12):
            raise OutOfClass(f"gate {name!r} is not Clifford")
        self.gate_list.append(g)
        if name == "i":
            pass
        elif name == "x":
            self.b[t[0]] ^= 1
        elif name == "z":
            self._add_linear_phase(2, self.A[t[0]], int(self.b[t[0]]))
        elif name == "y":
            self.apply_raw_z(t[0])
            self.b[t[0]] ^= 1
            self.omega *= 1j
        elif name == "s":
            self._add_linear_phase(1, self.A[t[0]], int(self.b[t[0]]))
        elif name == "sdg":
            self._add_linear_phase(3, self.A[t[0]], int(self.b[t[0]]))
        elif name == "cnot":
            c, tt = t
            self.A[tt] ^= self.A[c]
            self.b[tt] ^= self.b[c]
        elif name == "cz":
            j, l = t
            self._add_linear_phase(1, self.A[j], int(self.b[j]))
            self._add_linear_phase(1, self.A[l], int(self.b[l]))
            self._add_linear_phase(3, self.A[j] ^ self.A[l], int(self.b[j] ^ self.b[l]))
        elif name == "swap":
            j, l = t
            self.A[[j, l]] = self.A[[l, j]]
            self.b[[j, l]] = self.b[[l, j]]
        elif name == "h":
            self._hadamard(t[0])
        return self

    def apply_raw_z(self, q: int):
        self._add_linear_phase(2, self.A[q], int(self.b[q]))

    def _hadamard(self, j: int):
        a = self.A[j].copy()
        bj = int(self.b[j])
        k = self.k
        self.A = np.concatenate([self.A, np.zeros((self.n, 1), np.uint8)], axis=1)
        self.A[j] = 0
        self.A[j, k] = 1
        self.b[j] = 0
        self.L = np.append(self.L, (2 * bj) % 4)
        J = np.zeros((k + 1, k + 1), np.uint8)
        J[:k, :k] = self.J
        J[:k, k] = a
        self.J = J
        self.omega /= math.sqrt(2)
        kappa = _gf2_kernel_vector(self.A)
        if kappa is None:
            return
        kappa = kappa.astype(np.int64)
        p = int(np.nonzero(kappa)[0][0])
        idx = np.nonzero(kappa)[0]
        jsym = self._jsym().astype(np.int64)
        alpha = int(self.L[idx].sum() + 2 * np.triu(self.J[np.ix_(idx, idx)], 1).sum()) % 4
        beta = ((kappa * (self.L % 2)) + jsym @ kappa) % 2
        beta[p] = 0
        if alpha % 2:
            self.omega *= math.sqrt(2) * np.exp(1j * math.pi / 4 * (1 if alpha == 1 else -1))
            self._add_linear_phase(3 if alpha == 1 else 1, beta.astype(np.uint8), 0)
            self._drop(p)
            return
        self.omega *= 2
        if not beta.any():
            if alpha != 0:
                raise RuntimeError("stabilizer update produced a zero state")
            self._drop(p)
            return
        self._drop(p)
        beta = np.delete(beta, p).astype(np.uint8)
        m = int(np.nonzero(beta)[0][0])
        self._substitute(m, beta, alpha // 2)

    # --- queries --------------------------------------------------------
    def _solver(self):
        if getattr(self, "_solver_cache", None) is not None and self._solver_cache[0] == len(self.gate_list):
            return self._solver_cache[1:]
        A = self.A.astype(np.uint8)
        n, k = A.shape
        # pick k independent rows and invert that block over GF(2)
        rows = []
        basis = np.zeros((0, k), np.uint8)
        for i in range(n):
            cand = np.vstack([basis, A[i]])
            if _gf2_rank(cand) > len(basis):
                basis = cand
                rows.append(i)
            if len(rows) == k:
                break
        inv = _gf2_inverse(A[rows]) if k else np.zeros((0, 0), np.uint8)
        self._solver_cache = (len(self.gate_list), rows, inv)
        return rows, inv

    def amplitudes(self, xs):
        xs = np.asarray(xs, dtype=np.int64)
        X = bit_matrix(xs, self.n).astype(np.int64)
        rows, inv = self._solver()
        Xb = X ^ self.b[None, :].astype(np.int64)
        if self.k == 0:
            ok = ~Xb.any(axis=1)
            return np.where(ok, self.omega, 0).astype(np.complex128)
        t = (Xb[:, rows] @ inv.T.astype(np.int64)) % 2
        ok = np.all(((t @ self.A.T.astype(np.int64)) % 2) == Xb, axis=1)
        q = t @ self.L + 2 * np.einsum("ki,ij,kj->k", t, np.triu(self.J, 1).astype(np.int64), t)
        return np.where(ok, self.omega * (1j ** (q % 4)), 0).astype(np.complex128)

    def marginal(self, S, ys):
        ys = np.asarray(ys, dtype=np.int64)
        S = list(S)
        As = self.A[S]
        r = _gf2_rank(As)
        out = np.empty(ys.shape)
        for idx, y in np.ndenumerate(ys):
            yb = np.array([(int(y) >> (len(S) - 1 - j)) & 1 for j in range(len(S))], np.uint8) ^ self.b[S]
            consistent = _gf2_rank(np.concatenate([As, yb[:, None]], axis=1)) == r
            out[idx] = 2.0 ** (-r) if consistent else 0.0
        return out

    def _chain_plan(self):
        """For each qubit in order: None (fresh uniform bit) or the earlier qubits it equals the XOR of."""
        plan = []
        basis = []  # (row vector as int, combination mask over qubits)
        for i in range(self.n):
            v = int("".join(str(int(c)) for c in self.A[i]) or "0", 2)
            comb = 0
            for bv, bc in basis:
                if v ^ bv < v:
                    v ^= bv
                    comb ^= bc
            if v == 0:
                plan.append([q for q in range(i) if (comb >> q) & 1])
            else:
                basis.append((v, comb | (1 << i)))
                basis.sort(key=lambda e: -e[0])
                plan.append(None)
        return plan

    def sample(self, rng, k):
        """Marginal-chain sampling: each bit is either forced by earlier bits or a fair coin."""
        plan = self._chain_plan()
        bits = np.zeros((k, self.n), dtype=np.int64)
        coins = rng.integers(0, 2, size=(k, self.n), dtype=np.int64)
        b = self.b.astype(np.int64)
        for i, dep in enumerate(plan):
            if dep is None:
                bits[:, i] = coins[:, i]
            else:
                acc = np.full(k, b[i], dtype=np.int64)
                for q in dep:
                    acc ^= bits[:, q] ^ b[q]
                bits[:, i] = acc
        w = np.int64(1) << np.arange(self.n - 1, -1, -1, dtype=np.int64)
        return bits @ w

    def copy(self) -> "StabilizerState":
        return StabilizerState(self.n, self.gate_list, self.input_bits)

    def to_dict(self):
        d = {"kind": "stabilizer", "n": self.n, "gates": [dict(g) for g in self.gate_list]}
        if self.input_bits:
            d["input"] = format(self.input_bits, f"0{self.n}b")
        return d


def _gf2_inverse(M: np.ndarray) -> np.ndarray:
    k = M.shape[0]
    aug = np.concatenate([M.astype(np.uint8) & 1, np.eye(k, dtype=np.uint8)], axis=1)
    for c in range(k):
        piv = c + np.nonzero(aug[c:, c])[0][0]
        aug[[c, piv]] = aug[[piv, c]]
        hits = np.nonzero(aug[:, c])[0]
        hits = hits[hits != c]
        aug[hits] ^= aug[c]
    return aug[:, k:]


def stabilizer_state(gate_list: Sequence[dict], n: int, input_bits: int = 0) -> StabilizerState:
    return StabilizerState(n, gate_list, input_bits)


# --------------------------------------------------------------------------
# matrix product states


class MpsState(CtState):
    """``<x|psi> = Tr(A_0[x_0] ... A_{n-1}[x_{n-1}]) / norm``.

    ``tensors[i]`` has shape ``(2, D_i, D_{i+1})`` with ``D_n = D_0`` (trace closure).
    """

    kind = "mps"

    def __init__(self, tensors: Sequence[np.ndarray]):
        ts = [np.asarray(t, dtype=np.complex128) for t in tensors]
        super().__init__(len(ts))
        for i, t in enumerate(ts):
            if t.ndim != 3 or t.shape[0] != 2:
                raise PreconditionError(f"site {i}: expected shape (2, Dl, Dr), got {t.shape}")
            nxt = ts[(i + 1) % len(ts)]
            if t.shape[2] != nxt.shape[1]:
                raise PreconditionError(f"bond mismatch between sites {i} and {(i + 1) % len(ts)}")
        self.tensors = ts
        # right environments R_j[b, d, a, c]: sites j..n-1 closed back onto the left boundary
        d0 = ts[0].shape[1]
        env = [None] * (self.n + 1)
        env[self.n] = np.einsum("ba,dc->bdac", np.eye(d0), np.eye(d0))
        for j in range(self.n - 1, -1, -1):
            E = np.einsum("sab,scd->acbd", ts[j], ts[j].conj())
            env[j] = np.einsum("acbd,bdxy->acxy", E, env[j + 1])
        norm2 = np.einsum("acac->", env[0])
        if not (abs(norm2) > 0 and np.isfinite(norm2)):
            raise PreconditionError("MPS has zero (or non-finite) norm")
        self.norm = math.sqrt(abs(norm2.real))
        self._env = env

    @classmethod
    def from_product(cls, factors) -> "MpsState":
        f = _factors(factors)
        return cls([fi.reshape(2, 1, 1) for fi in f])

    def amplitudes(self, xs):
        xs = np.asarray(xs, dtype=np.int64)
        # estimator batches repeat strings heavily; contract each distinct one once
        uniq, inv = np.unique(xs, return_inverse=True)
        k = uniq.shape[0]
        d0 = self.tensors[0].shape[1]
        L = np.broadcast_to(np.eye(d0, dtype=np.complex128), (k, d0, d0))
        for i, t in enumerate(self.tensors):
            L = L @ t[get_bit(uniq, i, self.n)]
        return (np.trace(L, axis1=1, axis2=2) / self.norm)[inv.reshape(xs.shape)]

    def _prefix_prob(self, L, j):
        return np.einsum("kab,kcd,bdac->k", L, L.conj(), self._env[j]).real

    def marginal(self, S, ys):
        S = list(S)
        if S != list(range(len(S))):
            raise OutOfClass("MPS marginals are provided for prefixes 0..j-1")
        ys = np.asarray(ys, dtype=np.int64)
        k = ys.shape[0]
        d0 = self.tensors[0].shape[1]
        L = np.broadcast_to(np.eye(d0, dtype=np.complex128), (k, d0, d0))
        for i in range(len(S)):
            L = L @ self.tensors[i][(ys >> (len(S) - 1 - i)) & 1]
        return self._prefix_prob(L, len(S)) / self.norm**2

    def sample(self, rng, k):
        # carry one left environment per distinct prefix, not per sample
        d0 = self.tensors[0].shape[1]
        L = np.eye(d0, dtype=np.complex128)[None]
        inv = np.zeros(k, dtype=np.int64)
        xs = np.zeros(k, dtype=np.int64)
        for j, t in enumerate(self.tensors):
            L0 = L @ t[0]
            L1 = L @ t[1]
            p0 = np.maximum(self._prefix_prob(L0, j + 1), 0)
            p1 = np.maximum(self._prefix_prob(L1, j + 1), 0)
            bit = (rng.random(k) * (p0 + p1)[inv] < p1[inv]).astype(np.int64)
            keys, inv = np.unique(2 * inv + bit, return_inverse=True)
            inv = inv.reshape(k)
            L = np.where((keys & 1)[:, None, None] == 1, L1[keys >> 1], L0[keys >> 1])
            scale = np.abs(L).reshape(len(keys), -1).max(axis=1)
            L = L / np.where(scale > 0, scale, 1)[:, None, None]
            xs |= bit << (self.n - 1 - j)
        return xs

    def to_dict(self):
        return {"kind": "mps", "tensors": [[[[[z.real, z.imag] for z in row] for row in mat] for mat in t]
                                            for t in self.tensors]}


def mps_state(tensors) -> MpsState:
    return MpsState(tensors)


# --------------------------------------------------------------------------
# QFT of a product state


class QftProductState(CtState):
    """``QFT |alpha_1 ... alpha_n>`` with ``int(x)`` read most-significant-qubit first."""

    kind = "qft_product"

    def __init__(self, factors):
        f = _factors(factors)
        super().__init__(len(f))
        self.factors = f

    def _factor(self, j: int, low: np.ndarray) -> np.ndarray:
        """``<0|a_j> + e^{2 pi i low / 2^j} <1|a_j>`` for ``low = x mod 2^j`` (j is 1-based)."""
        a0, a1 = self.factors[j - 1]
        return a0 + np.exp(2j * np.pi * (low / float(2**j))) * a1

    def amplitudes(self, xs):
        xs = np.asarray(xs, dtype=np.int64)
        out = np.full(xs.shape, 2.0 ** (-self.n / 2), dtype=np.complex128)
        for j in range(1, self.n + 1):
            out = out * self._factor(j, xs & ((np.int64(1) << j) - 1))
        return out

    def marginal(self, S, ys):
        """Marginal of the ``len(S)`` lowest-order qubits (S listed from high to low order)."""
        k = len(S)
        if list(S) != list(range(self.n - k, self.n)) and list(S) != list(range(self.n - 1, self.n - k - 1, -1)):
            raise OutOfClass("QFT-product marginals are provided for low-order qubit sets")
        ys = np.asarray(ys, dtype=np.int64)
        if list(S) != sorted(S):
            # packed with S[0] = lowest qubit first -> reverse to an integer
            r = np.zeros_like(ys)
            for j in range(k):
                r |= ((ys >> (k - 1 - j)) & 1) << j
            ys = r
        p = np.full(ys.shape, 2.0 ** (-k))
        for j in range(1, k + 1):
            p = p * np.abs(self._factor(j, ys & ((np.int64(1) << j) - 1))) ** 2
        return p

    def sample(self, rng, k):
        r = np.zeros(k, dtype=np.int64)
        for j in range(1, self.n + 1):
            p1 = np.abs(self._factor(j, r + (np.int64(1) << (j - 1)))) ** 2 / 2
            bit = (rng.random(k) < p1).astype(np.int64)
            r |= bit << (j - 1)
        return r

    def to_dict(self):
        return {"kind": "qft_product", "factors": [[[z.real, z.imag] for z in row] for row in self.factors]}


def qft_product_state(factors) -> QftProductState:
    return QftProductState(factors)


# --------------------------------------------------------------------------
# derived states


class BasisPreservedState(CtState):
    """Image ``M|psi>`` of a CT state under a basis-preserving unitary ``M``."""

    kind = "basis_preserved"

    def __init__(self, op, psi: CtState, tol: float = 1e-10):
        if op.n != psi.n:
            raise PreconditionError("width mismatch")
        super().__init__(psi.n)
        self.op = op
        self.psi = psi
        self.tol = tol

    def amplitudes(self, xs):
        xs = np.asarray(xs, dtype=np.int64)
        pre = self.op.pi_inv(xs)
        gam = self.op.gamma(pre)
        if np.any(np.abs(np.abs(gam) - 1) > self.tol):
            raise PreconditionError("basis-preserving operator is not unitary (|gamma| != 1)")
        return gam * self.psi.amplitudes(pre)

    def sample(self, rng, k):
        return self.op.pi(self.psi.sample(rng, k))

    def to_dict(self):
        gl = getattr(self.op, "gate_list", None)
        if gl is None:
            raise OutOfClass("operator has no gate-list description")
        return {"kind": "basis_preserved", "state": self.psi.to_dict(), "gates": [dict(g) for g in gl]}


def apply_basis_preserving(M, psi: CtState) -> CtState:
    return BasisPreservedState(M, psi)


class TensorState(CtState):
    """``|a>|b>`` with ``a`` on the leading qubits."""

    kind = "tensor"

    def __init__(self, a: CtState, b: CtState):
        super().__init__(a.n + b.n)
        self.a, self.b = a, b

    def amplitudes(self, xs):
        xs = np.asarray(xs, dtype=np.int64)
        mask = (np.int64(1) << self.b.n) - 1
        return self.a.amplitudes(xs >> self.b.n) * self.b.amplitudes(xs & mask)

    def sample(self, rng, k):
        hi = self.a.sample(rng, k)
        lo = self.b.sample(rng, k)
        return (hi << self.b.n) | lo

    def to_dict(self):
        return {"kind": "tensor", "parts": [self.a.to_dict(), self.b.to_dict()]}


def tensor(psi: CtState, phi: CtState) -> TensorState:
    return TensorState(psi, phi)


def rotate_to_pm_basis(psi: CtState) -> CtState:
    """``H^n |psi>`` for families where the rotated state has a known CT form."""
    if isinstance(psi, ProductState):
        return ProductState(psi.factors @ G.H.T)
    if isinstance(psi, StabilizerState):
        gl = list(psi.gate_list) + [{"gate": "h", "targets": [q]} for q in range(psi.n)]
        return StabilizerState(psi.n, gl, psi.input_bits)
    if isinstance(psi, TensorState):
        return TensorState(rotate_to_pm_basis(psi.a), rotate_to_pm_basis(psi.b))
    raise OutOfClass(f"no constructive +/- basis form for {type(psi).__name__}")

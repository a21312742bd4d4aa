"""Nearest-neighbour matchgate circuits via the free-fermion (Majorana) picture.

Majorana operators follow the Jordan-Wigner convention with qubit 0 first:
``c_{2j} = Z_0..Z_{j-1} X_j`` and ``c_{2j+1} = Z_0..Z_{j-1} Y_j``. A circuit U
acts as ``U^dag c_mu U = sum_nu R[mu, nu] c_nu`` with R real orthogonal.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import gates as G
from .core import PreconditionError, SchemaError, bit_matrix, check_width
from .ct_states import CtState, marginal_chain_sampler
from .ecs_ops import PauliSum, PauliSumOp

_LOCAL_MAJORANAS = [
    np.kron(G.X, G.I2),
    np.kron(G.Y, G.I2),
    np.kron(G.Z, G.X),
    np.kron(G.Z, G.Y),
]


def random_su2(rng: np.random.Generator) -> np.ndarray:
    a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
    nrm = math.sqrt(abs(a) ** 2 + abs(b) ** 2)
    a, b = a / nrm, b / nrm
    return np.array([[a, -np.conj(b)], [b, np.conj(a)]])


def _check_su2(m: np.ndarray, what: str) -> None:
    if m.shape != (2, 2) or not G.is_unitary(m) or abs(np.linalg.det(m) - 1) > 1e-10:
        raise PreconditionError(f"{what} must lie in SU(2)")


def gate_rotation(Gm: np.ndarray) -> np.ndarray:
    """4x4 block ``R[mu, nu] = Tr(G^dag m_mu G m_nu) / 4`` on the gate's four local modes."""
    R = np.empty((4, 4))
    for mu, mm in enumerate(_LOCAL_MAJORANAS):
        conj = Gm.conj().T @ mm @ Gm
        for nu, mn in enumerate(_LOCAL_MAJORANAS):
            R[mu, nu] = np.trace(conj @ mn).real / 4
    return R


class MatchgateCircuit:
    """Gate list of nearest-neighbour ``G(A, B)`` gates with ``A, B`` in SU(2)."""

    def __init__(self, n: int, gate_list: Sequence[dict] = ()):
        self.n = check_width(int(n))
        self.gates = []
        self.rotation = np.eye(2 * self.n)
        for g in gate_list:
            self.append(g)

    def append(self, gate: dict) -> "MatchgateCircuit":
        g = G.canonical(gate)
        if g["gate"] != "matchgate":
            raise SchemaError(f"expected a matchgate, got {g['gate']!r}")
        G.check_targets(g, self.n)
        i, j = g["targets"]
        if j != i + 1:
            raise PreconditionError(f"matchgate targets {g['targets']} are not nearest neighbours (i, i+1)")
        A = G.parse_complex_matrix(g["A"])
        B = G.parse_complex_matrix(g["B"])
        _check_su2(A, "A")
        _check_su2(B, "B")
        g["A"], g["B"] = A, B
        Rg = np.eye(2 * self.n)
        Rg[2 * i: 2 * i + 4, 2 * i: 2 * i + 4] = gate_rotation(G.matchgate_matrix(A, B))
        self.rotation = Rg @ self.rotation
        self.gates.append(g)
        return self

    def gate_dicts(self) -> list[dict]:
        out = []
        for g in self.gates:
            out.append({"gate": "matchgate", "targets": list(g["targets"]),
                        "A": [[[z.real, z.imag] for z in row] for row in np.asarray(g["A"])],
                        "B": [[[z.real, z.imag] for z in row] for row in np.asarray(g["B"])]})
        return out

    @classmethod
    def random(cls, n: int, num_gates: int, rng: np.random.Generator) -> "MatchgateCircuit":
        c = cls(n)
        for _ in range(num_gates):
            i = int(rng.integers(n - 1))
            c.append({"gate": "matchgate", "targets": [i, i + 1], "A": random_su2(rng), "B": random_su2(rng)})
        return c

    @classmethod
    def brickwork(cls, n: int, depth: int, rng: np.random.Generator, offset: int = 0) -> "MatchgateCircuit":
        c = cls(n)
        for layer in range(depth):
            for i in range((layer + offset) % 2, n - 1, 2):
                c.append({"gate": "matchgate", "targets": [i, i + 1], "A": random_su2(rng), "B": random_su2(rng)})
        return c


# --------------------------------------------------------------------------
# Pfaffians


def pfaffian_batch(A: np.ndarray) -> np.ndarray:
    """Pfaffians of a batch of antisymmetric matrices ``(B, m, m)`` (Parlett-Reid with pivoting)."""
    A = np.array(A, dtype=np.complex128, copy=True)
    bsz, m, _ = A.shape
    if m % 2:
        return np.zeros(bsz, dtype=np.complex128)
    if m == 0:
        return np.ones(bsz, dtype=np.complex128)
    if m == 2:
        return A[:, 0, 1]
    if m == 4:
        return A[:, 0, 1] * A[:, 2, 3] - A[:, 0, 2] * A[:, 1, 3] + A[:, 0, 3] * A[:, 1, 2]
    pf = np.ones(bsz, dtype=np.complex128)
    ar = np.arange(bsz)
    for k in range(0, m - 1, 2):
        # pivot: largest entry in row k beyond the diagonal
        p = k + 1 + np.argmax(np.abs(A[:, k, k + 1:]), axis=1)
        swap = p != k + 1
        if np.any(swap):
            idx = np.broadcast_to(np.arange(m), (bsz, m)).copy()
            idx[ar, k + 1] = p
            idx[ar, p] = k + 1
            A = A[ar[:, None, None], idx[:, :, None], idx[:, None, :]]
            pf = np.where(swap, -pf, pf)
        piv = A[:, k, k + 1]
        pf = pf * piv
        if k + 2 < m:
            safe = np.where(piv == 0, 1, piv)
            tau = A[:, k, k + 2:] / safe[:, None]
            a = A[:, k + 1, k + 2:]
            A[:, k + 2:, k + 2:] += a[:, :, None] * tau[:, None, :] - tau[:, :, None] * a[:, None, :]
    return pf


def pfaffian(A: np.ndarray) -> complex:
    return complex(pfaffian_batch(np.asarray(A)[None])[0])


# --------------------------------------------------------------------------
# matchgate states


def _thouless(R: np.ndarray, x_ref: int, y: int, n: int) -> np.ndarray:
    """Antisymmetric ``Z`` with ``|psi> ~ exp(1/2 a~^dag Z a~^dag)|x_ref>`` (particle-hole on x_ref)."""
    ybits = np.array([(y >> (n - 1 - k)) & 1 for k in range(n)])
    sgn = np.where(ybits == 0, 1.0, -1.0)
    W = (R[:, 0::2] + 1j * sgn[None, :] * R[:, 1::2]).T / 2  # W[k, mu]
    P = W[:, 0::2] - 1j * W[:, 1::2]
    Q = W[:, 0::2] + 1j * W[:, 1::2]
    rbits = np.array([(x_ref >> (n - 1 - j)) & 1 for j in range(n)], dtype=bool)
    Pt, Qt = P.copy(), Q.copy()
    Pt[:, rbits], Qt[:, rbits] = Q[:, rbits], P[:, rbits]
    Z = -np.linalg.solve(Pt, Qt)
    return (Z - Z.T) / 2


def _below_parity(x_ref: int, n: int) -> np.ndarray:
    """E[q] = parity of x_ref bits on qubits < q."""
    bits = np.array([(x_ref >> (n - 1 - j)) & 1 for j in range(n)])
    return np.concatenate([[0], np.cumsum(bits)[:-1]]) % 2


class MatchgateState(CtState):
    """``U|input>`` for a nearest-neighbour matchgate circuit U.

    Amplitudes come from a Pfaffian formula relative to a high-weight
    reference string whose amplitude is tracked exactly gate by gate; marginals
    come from the Majorana covariance matrix.
    """

    kind = "matchgate"

    def __init__(self, circuit: MatchgateCircuit, input_bits: int = 0):
        super().__init__(circuit.n)
        n = self.n
        if not 0 <= input_bits < 2**n:
            raise PreconditionError("input does not fit the register")
        self.circuit = circuit
        self.input_bits = int(input_bits)
        R = np.eye(2 * n)
        x_ref, a_ref = self.input_bits, 1.0 + 0j
        Z = np.zeros((n, n), dtype=np.complex128)
        for g in circuit.gates:
            i = g["targets"][0]
            Gm = G.matchgate_matrix(g["A"], g["B"])
            E = _below_parity(x_ref, n)
            shift_i, shift_j = n - 1 - i, n - 2 - i
            cur = (((x_ref >> shift_i) & 1) << 1) | ((x_ref >> shift_j) & 1)
            old = np.zeros(4, dtype=np.complex128)
            old[cur] = a_ref
            # flipping both local bits: S = {i, i+1}
            old[cur ^ 3] = a_ref * (-1) ** (E[i] + E[i + 1]) * Z[i, i + 1]
            new = Gm @ old
            v = int(np.argmax(np.abs(new)))
            x_ref = (x_ref & ~((1 << shift_i) | (1 << shift_j))) | ((v >> 1) << shift_i) | ((v & 1) << shift_j)
            a_ref = new[v]
            Rg = np.eye(2 * n)
            Rg[2 * i: 2 * i + 4, 2 * i: 2 * i + 4] = gate_rotation(Gm)
            R = Rg @ R
            Z = _thouless(R, x_ref, self.input_bits, n)
            x_ref, a_ref, Z = self._improve(R, x_ref, a_ref, Z)
        self.R = R
        self.x_ref, self.a_ref, self.Z = x_ref, a_ref, Z
        self._E = _below_parity(x_ref, n)
        My = np.zeros((2 * n, 2 * n))
        for j in range(n):
            s = 1 - 2 * ((self.input_bits >> (n - 1 - j)) & 1)
            My[2 * j, 2 * j + 1] = -s
            My[2 * j + 1, 2 * j] = s
        self.covariance = R @ My @ R.T

    def _improve(self, R, x_ref, a_ref, Z, max_steps: int = 10_000):
        n = self.n
        for _ in range(max_steps):
            absz = np.abs(np.triu(Z, 1))
            i, k = np.unravel_index(np.argmax(absz), absz.shape)
            if absz[i, k] <= 1 + 1e-12:
                break
            E = _below_parity(x_ref, n)
            a_ref = a_ref * (-1) ** (E[i] + E[k]) * Z[i, k]
            x_ref ^= (1 << (n - 1 - i)) | (1 << (n - 1 - k))
            Z = _thouless(R, x_ref, self.input_bits, n)
        return x_ref, a_ref, Z

    @property
    def rotation(self) -> np.ndarray:
        return self.R

    def amplitudes(self, xs):
        xs = np.asarray(xs, dtype=np.int64)
        n = self.n
        S = xs ^ np.int64(self.x_ref)
        cnt = np.bitwise_count(S).astype(np.int64)
        out = np.zeros(xs.shape, dtype=np.complex128)
        flat_S, flat_cnt = S.ravel(), cnt.ravel()
        flat_out = out.ravel()
        for m in np.unique(flat_cnt):
            if m % 2:
                continue
            sel = np.nonzero(flat_cnt == m)[0]
            if m == 0:
                flat_out[sel] = self.a_ref
                continue
            bits = bit_matrix(flat_S[sel], n)
            idx = np.argsort(1 - bits, axis=1, kind="stable")[:, :m]
            sub = self.Z[idx[:, :, None], idx[:, None, :]]
            sign = 1 - 2 * (self._E[idx].sum(axis=1) % 2)
            flat_out[sel] = self.a_ref * sign * pfaffian_batch(sub)
        return flat_out.reshape(xs.shape)

    def marginal(self, S, ys):
        """``p_{S,y} = 2^{-|S|} |Pf(-M_S' + sum_j s_j J)|`` from the covariance matrix."""
        S = list(S)
        ys = np.asarray(ys, dtype=np.int64)
        m = len(S)
        modes = np.array([[2 * q, 2 * q + 1] for q in S]).ravel()
        base = -self.covariance[np.ix_(modes, modes)]
        bits = (ys[:, None] >> np.arange(m - 1, -1, -1)) & 1
        s = 1.0 - 2.0 * bits
        mats = np.broadcast_to(base, (len(ys), 2 * m, 2 * m)).copy()
        r = np.arange(m)
        mats[:, 2 * r, 2 * r + 1] += s
        mats[:, 2 * r + 1, 2 * r] -= s
        det = np.linalg.det(mats)
        return np.sqrt(np.abs(det)) * 2.0 ** (-m)

    def sample(self, rng, k):
        return marginal_chain_sampler(self.marginal, self.n, rng, k)

    def to_dict(self):
        return {"kind": "matchgate", "n": self.n, "input": format(self.input_bits, f"0{self.n}b"),
                "gates": self.circuit.gate_dicts()}


def matchgate_state(circuit: MatchgateCircuit, input_bits=0) -> MatchgateState:
    if hasattr(input_bits, "value"):
        input_bits = input_bits.value
    return MatchgateState(circuit, int(input_bits))


# --------------------------------------------------------------------------
# Heisenberg picture of Z on one qubit


def _majorana_pauli(mu: int, n: int) -> tuple[int, int, complex]:
    j = mu // 2
    x = 1 << (n - 1 - j)
    below = sum(1 << (n - 1 - q) for q in range(j))
    if mu % 2 == 0:
        return x, below, 1.0
    return x, below | x, 1j


def conjugate_z1(circuit: MatchgateCircuit, qubit: int = 0, tol: float = 1e-14) -> PauliSumOp:
    """``U^dag Z_q U`` as a Pauli sum with at most n(2n-1) terms."""
    n = circuit.n
    R = circuit.rotation
    r0, r1 = R[2 * qubit], R[2 * qubit + 1]
    W = np.outer(r0, r1) - np.outer(r1, r0)
    maj = [_majorana_pauli(mu, n) for mu in range(2 * n)]
    xs, zs, cs = [], [], []
    for nu in range(2 * n):
        x1, z1, c1 = maj[nu]
        for lam in range(nu + 1, 2 * n):
            w = W[nu, lam]
            if abs(w) <= tol:
                continue
            x2, z2, c2 = maj[lam]
            sign = -1 if bin(z1 & x2).count("1") % 2 else 1
            xs.append(x1 ^ x2)
            zs.append(z1 ^ z2)
            cs.append(-1j * w * c1 * c2 * sign)
    terms = PauliSum(n, xs, zs, cs)
    op = PauliSumOp(terms, norm_bound=1.0, label=f"U^dag Z{qubit} U")
    op.hermitian = True
    return op

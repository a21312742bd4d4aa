"""Gate vocabulary shared by the dense reference, the operator constructors and the JSON schema.

A gate is a dict ``{"gate": name, "targets": [...], "param": theta}`` with extra
keys for some kinds (``A``/``B`` for matchgates, ``matrix`` for explicit
unitaries, ``function`` for classical-function oracles).
"""
from __future__ import annotations

import math

import numpy as np

from .core import SchemaError

SQ2 = 1 / math.sqrt(2)

H = np.array([[1, 1], [1, -1]], dtype=complex) * SQ2
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)
S = np.diag([1, 1j])

ALIASES = {
    "phase": "s",
    "cx": "cnot",
    "ccx": "toffoli",
    "ccnot": "toffoli",
    "cphase": "cz",
    "rx_exp": "expx",
    "rz_exp": "expz",
    "u_f": "oracle",
}

# name -> number of targets (None = variable)
ARITY = {
    "i": 1, "x": 1, "y": 1, "z": 1, "h": 1, "s": 1, "sdg": 1, "t": 1, "p": 1,
    "expx": 1, "expz": 1,
    "cnot": 2, "cz": 2, "swap": 2, "matchgate": 2,
    "toffoli": 3,
    "unitary": None, "qft": None, "oracle": None, "diagonal": None,
}

CLIFFORD = {"i", "x", "y", "z", "h", "s", "sdg", "cnot", "cz", "swap"}
BASIS_PRESERVING = {
    "i", "x", "y", "z", "s", "sdg", "t", "p", "expz", "cnot", "cz", "swap", "toffoli", "oracle", "diagonal",
}


def canonical(gate: dict) -> dict:
    """Normalise names/aliases and validate arity; returns a new dict."""
    if not isinstance(gate, dict) or "gate" not in gate:
        raise SchemaError(f"gate entries need a 'gate' field: {gate!r}")
    g = dict(gate)
    name = str(g["gate"]).lower()
    name = ALIASES.get(name, name)
    if name not in ARITY:
        raise SchemaError(f"unknown gate {gate['gate']!r}")
    g["gate"] = name
    targets = g.get("targets")
    if targets is None:
        raise SchemaError(f"gate {name!r} needs 'targets'")
    g["targets"] = [int(t) for t in targets]
    need = ARITY[name]
    if need is not None and len(g["targets"]) != need:
        raise SchemaError(f"gate {name!r} takes {need} targets, got {len(g['targets'])}")
    if len(set(g["targets"])) != len(g["targets"]):
        raise SchemaError(f"repeated target in {gate!r}")
    if name == "cz" and g.get("param") is None:
        g["param"] = math.pi
    if name in ("p", "expx", "expz") and g.get("param") is None:
        raise SchemaError(f"gate {name!r} needs 'param'")
    return g


def check_targets(gate: dict, n: int) -> None:
    for t in gate["targets"]:
        if not 0 <= t < n:
            raise SchemaError(f"target {t} out of range for {n} qubits in {gate!r}")


def parse_complex_matrix(data) -> np.ndarray:
    """Accept nested lists of numbers or of ``[re, im]`` pairs."""
    arr = np.asarray(data, dtype=object)
    try:
        if arr.ndim >= 1 and arr.shape[-1] == 2 and arr.ndim == 3:
            a = np.asarray(data, dtype=float)
            return a[..., 0] + 1j * a[..., 1]
        return np.asarray(data, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"cannot parse matrix {data!r}") from exc


def matchgate_matrix(A, B) -> np.ndarray:
    """4x4 gate with A on span{|00>,|11>} and B on span{|01>,|10>}."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    G = np.zeros((4, 4), dtype=complex)
    G[np.ix_([0, 3], [0, 3])] = A
    G[np.ix_([1, 2], [1, 2])] = B
    return G


def gate_matrix(gate: dict) -> np.ndarray:
    """Dense matrix of a fixed-size gate (not qft/oracle)."""
    name = gate["gate"]
    theta = gate.get("param")
    if name == "i":
        return I2
    if name == "x":
        return X
    if name == "y":
        return Y
    if name == "z":
        return Z
    if name == "h":
        return H
    if name == "s":
        return S
    if name == "sdg":
        return S.conj()
    if name == "t":
        return np.diag([1, np.exp(1j * math.pi / 4)])
    if name == "p":
        return np.diag([1, np.exp(1j * theta)])
    if name == "expx":
        return np.array([[math.cos(theta), 1j * math.sin(theta)], [1j * math.sin(theta), math.cos(theta)]])
    if name == "expz":
        return np.diag([np.exp(1j * theta), np.exp(-1j * theta)])
    if name == "cnot":
        m = np.eye(4, dtype=complex)
        m[2:, 2:] = X
        return m
    if name == "cz":
        return np.diag([1, 1, 1, np.exp(1j * theta)])
    if name == "swap":
        return np.eye(4, dtype=complex)[[0, 2, 1, 3]]
    if name == "toffoli":
        m = np.eye(8, dtype=complex)
        m[6:, 6:] = X
        return m
    if name == "matchgate":
        return matchgate_matrix(parse_complex_matrix(gate["A"]), parse_complex_matrix(gate["B"]))
    if name == "diagonal":
        phases = np.asarray(gate["phases"], dtype=float)
        if phases.shape != (2 ** len(gate["targets"]),):
            raise SchemaError("diagonal gate needs 2^k phases")
        return np.diag(np.exp(1j * phases))
    if name == "unitary":
        m = parse_complex_matrix(gate["matrix"])
        d = 2 ** len(gate["targets"])
        if m.shape != (d, d):
            raise SchemaError(f"unitary on {len(gate['targets'])} qubits needs a {d}x{d} matrix")
        return m
    raise SchemaError(f"gate {name!r} has no fixed matrix")


def qft_matrix(k: int) -> np.ndarray:
    d = 2 ** k
    j = np.arange(d)
    return np.exp(2j * np.pi * np.outer(j, j) / d) / math.sqrt(d)


def is_unitary(m: np.ndarray, tol: float = 1e-10) -> bool:
    m = np.asarray(m)
    return m.shape[0] == m.shape[1] and np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=tol)


def oracle_split(gate: dict) -> tuple[list[int], list[int]]:
    """Input and output qubits of a classical-function oracle gate."""
    targets = gate["targets"]
    m_in = int(gate.get("inputs", len(targets) - 1))
    if not 0 < m_in < len(targets):
        raise SchemaError("oracle gates need 1 <= inputs < len(targets)")
    return targets[:m_in], targets[m_in:]


def simon_table(m: int, a: int, seed: int = 0) -> np.ndarray:
    """Outputs of a 2-to-1 function on m bits with f(x) = f(x ^ a)."""
    if not 0 < a < 2 ** m:
        raise SchemaError("hidden string must be nonzero and fit in m bits")
    rng = np.random.default_rng(seed)
    labels = rng.permutation(2 ** m)
    xs = np.arange(2 ** m)
    return labels[np.minimum(xs, xs ^ a)].astype(np.int64)


def resolve_function(spec, m_in: int, m_out: int):
    """Vectorised classical function ``int64[K] -> int64[K]`` from a description.

    Accepted forms: a list of ``2**m_in`` integer outputs; ``{"table": [...]}``;
    ``{"simon": {"a": int|bitstring, "seed": int}}`` (needs m_out == m_in);
    ``{"linear": [row masks]}`` (output bit j = parity(row_j & x)); or a
    Boolean-oracle registry string (m_out == 1).
    """
    if callable(spec):
        return spec
    if isinstance(spec, str):
        from .boolean_fourier import resolve_oracle

        g = resolve_oracle(spec, m_in)
        if m_out != 1:
            raise SchemaError("registry oracles are single-output")
        return g.evaluate
    if isinstance(spec, dict) and "simon" in spec:
        cfg = spec["simon"]
        a = cfg["a"]
        a = int(a, 2) if isinstance(a, str) else int(a)
        if m_out != m_in:
            raise SchemaError("simon functions need equal input and output widths")
        table = simon_table(m_in, a, int(cfg.get("seed", 0)))
    elif isinstance(spec, dict) and "linear" in spec:
        rows = [int(r, 2) if isinstance(r, str) else int(r) for r in spec["linear"]]
        if len(rows) != m_out:
            raise SchemaError("linear function needs one row per output bit")

        def linear(xs, rows=tuple(rows)):
            xs = np.asarray(xs, dtype=np.int64)
            out = np.zeros_like(xs)
            for r in rows:
                out = (out << 1) | (np.bitwise_count(xs & r) & 1).astype(np.int64)
            return out

        return linear
    else:
        values = spec.get("table") if isinstance(spec, dict) else spec
        if values is None:
            raise SchemaError(f"cannot resolve function {spec!r}")
        table = np.asarray(values, dtype=np.int64)
    if table.shape != (2 ** m_in,):
        raise SchemaError(f"function table needs {2 ** m_in} entries")
    if table.min() < 0 or table.max() >= 2 ** m_out:
        raise SchemaError("function outputs do not fit the output register")

    def lookup(xs, table=table):
        return table[np.asarray(xs, dtype=np.int64)]

    return lookup


def apply_local(block: np.ndarray, n: int, m: np.ndarray, targets) -> np.ndarray:
    """Apply a 2^k x 2^k matrix to ``targets`` of every column of a (2^n, c) array."""
    k = len(targets)
    cols = block.shape[1]
    psi = block.reshape((2,) * n + (cols,))
    psi = np.moveaxis(psi, list(targets), list(range(k)))
    shape = psi.shape
    psi = (m @ psi.reshape(2**k, -1)).reshape(shape)
    return np.moveaxis(psi, list(range(k)), list(targets)).reshape(2**n, cols)


def circuit_depth(gate_list) -> int:
    """As-soon-as-possible layer count."""
    level: dict[int, int] = {}
    depth = 0
    for g in gate_list:
        t = g["targets"]
        d = 1 + max((level.get(q, 0) for q in t), default=0)
        for q in t:
            level[q] = d
        depth = max(depth, d)
    return depth

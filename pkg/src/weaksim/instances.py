"""Random circuit and plan generators shared by the tests, demos and bundled fixtures."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .matchgate import MatchgateCircuit, random_su2
from .schema import SCHEMA_VERSION, to_jsonable


def random_factors(n: int, rng: np.random.Generator) -> np.ndarray:
    f = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    return f / np.linalg.norm(f, axis=1, keepdims=True)


def product_dict(factors) -> dict:
    return {"kind": "product", "factors": [[[z.real, z.imag] for z in row] for row in np.asarray(factors)]}


def random_local_gates(n: int, rng: np.random.Generator) -> list[dict]:
    return [{"gate": "unitary", "targets": [q], "matrix": to_jsonable(random_su2(rng))} for q in range(n)]


def random_basis_preserving(n: int, count: int, rng: np.random.Generator, phases: bool = True) -> list[dict]:
    """Toffoli, CNOT and (optionally) phase gates."""
    out = []
    for _ in range(count):
        r = int(rng.integers(3 if phases else 2))
        if (r == 0 and n < 3) or (r == 1 and n < 2):
            r = 2 if phases else -1
        if r == -1:
            out.append({"gate": "x", "targets": [int(rng.integers(n))]})
        elif r == 0:
            out.append({"gate": "toffoli", "targets": [int(q) for q in rng.choice(n, 3, replace=False)]})
        elif r == 1:
            out.append({"gate": "cnot", "targets": [int(q) for q in rng.choice(n, 2, replace=False)]})
        else:
            out.append({"gate": "p", "targets": [int(rng.integers(n))], "param": float(rng.uniform(0, 2 * np.pi))})
    return out


def random_clifford(n: int, count: int, rng: np.random.Generator) -> list[dict]:
    out = []
    for _ in range(count):
        r = int(rng.integers(3 if n > 1 else 2))
        if r == 0:
            out.append({"gate": "h", "targets": [int(rng.integers(n))]})
        elif r == 1:
            out.append({"gate": "s", "targets": [int(rng.integers(n))]})
        else:
            out.append({"gate": "cnot", "targets": [int(q) for q in rng.choice(n, 2, replace=False)]})
    return out


def random_nn_circuit(n: int, depth: int, rng: np.random.Generator) -> list[dict]:
    """Brickwork of Haar-ish random two-qubit unitaries on neighbouring qubits."""
    out = []
    for d in range(depth):
        for q in range(d % 2, n - 1, 2):
            u = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))[0]
            out.append({"gate": "unitary", "targets": [q, q + 1], "matrix": to_jsonable(u)})
    return out


def random_cnot_expx(n: int, count: int, rng: np.random.Generator) -> list[dict]:
    out = []
    for _ in range(count):
        if n > 1 and rng.random() < 0.5:
            out.append({"gate": "cnot", "targets": [int(q) for q in rng.choice(n, 2, replace=False)]})
        else:
            out.append({"gate": "expx", "targets": [int(rng.integers(n))],
                        "param": float(rng.uniform(0, 2 * np.pi))})
    return out


def random_toffoli_cz(n: int, count: int, rng: np.random.Generator) -> list[dict]:
    out = []
    for _ in range(count):
        r = rng.random()
        if r < 0.4:
            out.append({"gate": "toffoli", "targets": [int(q) for q in rng.choice(n, 3, replace=False)]})
        elif r < 0.7:
            out.append({"gate": "cz", "targets": [int(q) for q in rng.choice(n, 2, replace=False)]})
        elif r < 0.9:
            out.append({"gate": "cnot", "targets": [int(q) for q in rng.choice(n, 2, replace=False)]})
        else:
            out.append({"gate": "x", "targets": [int(rng.integers(n))]})
    return out


def _plan(driver: str, n: int, **fields) -> dict:
    return {"schema": SCHEMA_VERSION, "kind": "plan", "driver": driver, "n": n, **to_jsonable(fields)}


# --------------------------------------------------------------------------
# composed plans


def local_qft_sparse_matchgate_plan(n: int, rng: np.random.Generator) -> dict:
    """Local gates, full QFT, a basis-preserving sparse unitary, then a matchgate brickwork; measure Z on qubit 0."""
    bp = random_basis_preserving(n, 10, rng)
    stages = [{"kind": "local", "gates": random_local_gates(n, rng)}, {"kind": "qft"},
              {"kind": "ecs_unitary", "operator": {"kind": "basis_preserving", "n": n, "gates": bp}},
              {"kind": "matchgate", "gates": MatchgateCircuit.brickwork(n, 2, rng).gate_dicts()}]
    return _plan("composed", n, stages=stages)


def matchgate_toffoli_clifford_nn_plan(n: int, rng: np.random.Generator) -> dict:
    """Matchgates, Toffoli/CNOT, Clifford, then a depth-2 nearest-neighbour brickwork; measure Z on qubit 0."""
    stages = [{"kind": "matchgate", "gates": MatchgateCircuit.random(n, 20, rng).gate_dicts()},
              {"kind": "toffoli", "gates": random_basis_preserving(n, 8, rng, phases=False)},
              {"kind": "clifford", "gates": random_clifford(n, 12, rng)},
              {"kind": "nn_circuit", "gates": random_nn_circuit(n, 2, rng)}]
    return _plan("composed", n, stages=stages)


def hadamard_sandwich_matchgate_plan(n: int, rng: np.random.Generator) -> dict:
    """Hadamards, basis-preserving gates, Hadamards, matchgates; measure Z on qubit 0."""
    S1 = [int(q) for q in np.nonzero(rng.random(n) < 0.5)[0]]
    S3 = [int(q) for q in np.nonzero(rng.random(n) < 0.5)[0]]
    stages = [{"kind": "hadamard", "qubits": S1},
              {"kind": "basis_preserving", "gates": random_basis_preserving(n, 10, rng)},
              {"kind": "hadamard", "qubits": S3},
              {"kind": "matchgate", "gates": MatchgateCircuit.random(n, 20, rng).gate_dicts()}]
    return _plan("composed", n, stages=stages)


def cnot_expx_plan_doc(n: int, count: int, rng: np.random.Generator) -> dict:
    return _plan("cnot-expx", n, input=product_dict(random_factors(n, rng)),
                 gates=random_cnot_expx(n, count, rng))


def cluster_plan(n: int = 8) -> dict:
    """CZ on every neighbouring pair of |+>^n, observable Z on qubit 0."""
    cz = np.diag([1, 1, 1, -1]).astype(complex)
    ops = [{"kind": "local_gate", "n": n, "targets": [q, q + 1], "matrix": to_jsonable(cz)} for q in range(n - 1)]
    plus = [[2 ** -0.5, 2 ** -0.5]] * n
    return _plan("sparse", n, input=product_dict(plus), ops=ops)


# --------------------------------------------------------------------------
# four- and five-round plans


def dj_plan(k: int, f_table) -> dict:
    n = k + 1
    return _plan("dj", n, k=k, input="0" * k + "1",
                 v1=[{"gate": "h", "targets": [q]} for q in range(n)],
                 v2={"kind": "basis_preserving", "n": n,
                     "gates": [{"gate": "oracle", "targets": list(range(n)), "inputs": k,
                                "function": [int(v) for v in f_table]}]},
                 v3=[{"gate": "h", "targets": [q]} for q in range(k)])


def simon_parity_plan(k: int, a: int, c: int, seed: int = 0) -> dict:
    """Hadamards on the first k-qubit register, Simon oracle, Hadamards; parity c of the measured register."""
    n = 2 * k
    reg = list(range(k))
    return _plan("five-round", n, S1=reg,
                 V=[{"gate": "oracle", "targets": list(range(n)), "inputs": k,
                     "function": {"simon": {"a": format(a, f"0{k}b"), "seed": seed}}}],
                 S2=reg, S=reg, oracle=f"parity:a={format(c, f'0{k}b')}", sparseness=1)


def sparse_five_round_plan(n: int, s: int, seed: int, measured: int = 6, gates: int = 12,
                           hadamards: int | None = None) -> dict:
    """Random Toffoli/CZ/CNOT round between Hadamard layers, random s-sparse postprocessing."""
    rng = np.random.default_rng(seed)
    meas = sorted(int(q) for q in rng.choice(n, measured, replace=False))
    S1 = sorted(int(q) for q in rng.choice(n, n // 2 if hadamards is None else hadamards, replace=False))
    S2 = sorted(set(meas) | {int(q) for q in rng.choice(n, 2, replace=False)})
    return _plan("five-round", n, S1=S1, V=random_toffoli_cz(n, gates, rng), S2=S2, S=meas,
                 oracle=f"random-sparse:s={s},seed={seed},m={measured}", sparseness=s)


# --------------------------------------------------------------------------
# bundled fixtures


def fixture_documents() -> dict[str, dict]:
    """The documents shipped in ``weaksim/data`` (regenerate with :func:`write_fixtures`)."""
    rng = np.random.default_rng(2024)
    n = 6
    ghz = [{"gate": "h", "targets": [0]}] + [{"gate": "cnot", "targets": [q, q + 1]} for q in range(n - 1)]
    docs = {
        "product_plus6.json": product_dict([[2 ** -0.5, 2 ** -0.5]] * n),
        "product_random6.json": product_dict(random_factors(n, rng)),
        "stabilizer_ghz6.json": {"kind": "stabilizer", "n": n, "gates": ghz},
        "stabilizer_random6.json": {"kind": "stabilizer", "n": n, "gates": random_clifford(n, 30, rng)},
        "pauli_sum6.json": {"kind": "pauli_sum", "n": n, "terms": [
            {"coeff": [0.5, 0.0], "pauli": "ZZIIII"}, {"coeff": [0.25, 0.0], "pauli": "XIXIII"},
            {"coeff": [0.0, 0.25], "pauli": "IYIZII"}, {"coeff": [-0.25, 0.0], "pauli": "IIIXXY"}]},
        "observable_zz6.json": {"kind": "pauli_sum", "n": n, "terms": [
            {"coeff": [0.5, 0.0], "pauli": "ZZIIII"}, {"coeff": [0.5, 0.0], "pauli": "IIXIII"}]},
        "identity6.json": {"kind": "identity", "n": n},
        "phase6.json": {"kind": "phase", "n": n, "terms": [{"qubits": [0, 1], "angle": 0.7},
                                                           {"qubits": [2], "angle": 1.3},
                                                           {"qubits": [3, 4, 5], "angle": 2.1}]},
        "qft_product6.json": {"kind": "qft_product", **{k: v for k, v in product_dict(
            random_factors(n, rng)).items() if k != "kind"}},
        "matchgate6.json": {"kind": "matchgate", "n": n, "input": "010100",
                            "gates": MatchgateCircuit.random(n, 10, rng).gate_dicts()},
        "basis_preserving6.json": {"kind": "basis_preserving", "n": n,
                                   "gates": random_basis_preserving(n, 8, rng)},
        "plan_local_qft_sparse_matchgate8.json": local_qft_sparse_matchgate_plan(8, rng),
        "plan_matchgate_toffoli_clifford_nn8.json": matchgate_toffoli_clifford_nn_plan(8, rng),
        "plan_hadamard_sandwich8.json": hadamard_sandwich_matchgate_plan(8, rng),
        "plan_cnot_expx8.json": cnot_expx_plan_doc(8, 50, rng),
        "plan_cluster8.json": cluster_plan(8),
        "plan_dj6.json": dj_plan(6, [1] * 64),
        "plan_simon12.json": simon_parity_plan(6, 0b101101, 0b101101, seed=3),
        "plan_five_round10.json": sparse_five_round_plan(10, 4, seed=0),
        "plan_out_of_class8.json": {**_plan("composed", 8, stages=[
            {"kind": "qft"}, {"kind": "clifford", "gates": [{"gate": "t", "targets": [0]}]}])},
    }
    mps = {"kind": "mps", "tensors": []}
    for i in range(n):
        t = rng.normal(size=(2, 2, 2)) + 1j * rng.normal(size=(2, 2, 2))
        mps["tensors"].append([[[[z.real, z.imag] for z in row] for row in mat] for mat in t])
    docs["mps6.json"] = mps
    return {name: {"schema": SCHEMA_VERSION, **to_jsonable(d)} for name, d in docs.items()}


def fixture_dir() -> Path:
    return Path(__file__).with_name("data")


def write_fixtures(directory=None) -> list[Path]:
    directory = Path(directory) if directory else fixture_dir()
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for name, doc in fixture_documents().items():
        p = directory / name
        p.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
        out.append(p)
    return out

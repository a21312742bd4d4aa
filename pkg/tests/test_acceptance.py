"""Acceptance criteria, each run at its stated size and tolerance.

Every test records one PASS/FAIL line (shown in the terminal summary) before
asserting. Run ``python tests/test_acceptance.py`` to get only those lines.
"""
from __future__ import annotations

import io
import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from _support import (  # noqa: E402
    OPERATOR_KINDS,
    STATE_KINDS,
    kron_all,
    product_vector,
    random_operator,
    random_pauli_labels,
    random_state,
)
from conftest import report  # noqa: E402

from weaksim import gates as G  # noqa: E402
from weaksim import instances as I  # noqa: E402
from weaksim.boolean_fourier import (  # noqa: E402
    BooleanOracle,
    exact_table,
    fourier_spectrum,
    fwht,
    granularity,
    km_heavy_coefficients,
    sparseness_and_degree,
    wg_operator,
)
from weaksim.cli import main  # noqa: E402
from weaksim.core import RandomStream, RangeViolation, estimate_mean  # noqa: E402
from weaksim.ct_states import ProductState  # noqa: E402
from weaksim.ecs_ops import PauliSum  # noqa: E402
from weaksim.estimators import (  # noqa: E402
    RangeLog,
    estimate_local_observable,
    estimate_matrix_element,
    estimate_overlap,
    estimate_partial_projected,
)
from weaksim.oracle import assemble, dense_spectral_norm, tv_distance  # noqa: E402
from weaksim.plans import dense_reference, run_plan  # noqa: E402

EPS, DELTA = 0.05, 1e-3

# shared between criteria 1 and 2
_RUNS: dict = {}


def _criterion1_runs():
    """200 mixed estimator runs at n <= 8 (cached; criterion 2 reads the same range log)."""
    if _RUNS:
        return _RUNS
    rng = np.random.default_rng(20240601)
    log = RangeLog()
    errors, raised = [], []
    modes = OPERATOR_KINDS + ("overlap", "observable", "partial")
    for i in range(200):
        n = int(rng.integers(3, 9))
        mode = modes[i % len(modes)]
        phi, vphi = random_state(STATE_KINDS[i % len(STATE_KINDS)], n, rng)
        psi, vpsi = random_state(STATE_KINDS[(i // len(STATE_KINDS)) % len(STATE_KINDS)], n, rng)
        stream = RandomStream(7, i)
        try:
            if mode == "overlap":
                est = estimate_overlap(phi, psi, (EPS, DELTA), stream)
                exact = np.vdot(vphi, vpsi)
            elif mode == "observable":
                labs = random_pauli_labels(n, rng, 3)
                cs = rng.normal(size=3)
                obs = PauliSum.from_labels(list(zip(cs, labs)))
                est = estimate_local_observable(psi, obs, (EPS, DELTA), stream)
                exact = np.vdot(vpsi, sum(c * kron_all([{"I": np.eye(2), "X": G.X, "Y": G.Y, "Z": G.Z}[ch]
                                                        for ch in lab]) for c, lab in zip(cs, labs)) @ vpsi)
            elif mode == "partial":
                n = min(n, 6)
                phi, vphi = random_state(STATE_KINDS[i % len(STATE_KINDS)], n, rng)
                psi, vpsi = random_state("stabilizer", n, rng)
                k = int(rng.integers(1, 3))
                fx, fc = I.random_factors(k, rng), I.random_factors(k, rng)
                A, a = random_operator("basis_preserving", n, rng)
                B, b = random_operator("local_gate", n, rng)
                proj = np.kron(np.outer(product_vector(fx), product_vector(fc).conj()), np.eye(2 ** (n - k)))
                est = estimate_partial_projected(phi, A, ProductState(fx), ProductState(fc), B, psi, (EPS, DELTA),
                                                 stream, per_term=True, log=log)
                exact = np.vdot(vphi, a @ proj @ b @ vpsi)
            else:
                A, a = random_operator(mode, n, rng)
                est = estimate_matrix_element(phi, A, psi, (EPS, DELTA), stream, per_term=True, log=log)
                exact = np.vdot(vphi, a @ vpsi)
        except RangeViolation as exc:
            raised.append(f"run {i} ({mode}): {exc}")
            continue
        errors.append((i, mode, n, abs(complex(est.value) - complex(exact))))
    _RUNS.update(errors=errors, raised=raised, log=log)
    return _RUNS


def test_criterion_01_estimator_correctness():
    runs = _criterion1_runs()
    fails = [e for e in runs["errors"] if e[3] > EPS]
    worst = max(e[3] for e in runs["errors"])
    ok = len(runs["errors"]) == 200 and len(fails) <= 2
    report("criterion 1 estimator correctness", ok,
           f"{len(runs['errors'])} runs, {len(fails)} beyond eps={EPS}, worst deviation {worst:.4f}")
    assert ok, fails


def test_criterion_02_range_claims():
    runs = _criterion1_runs()
    log = runs["log"]
    viol = log.violations() + runs["raised"]
    names = ", ".join(f"{k} {v:.3f}" for k, v in sorted(log.worst.items()))
    ok = not viol and {"F_i", "G_i"} <= set(log.worst)
    report("criterion 2 range claims", ok, f"{len(viol)} violations; worst |value|/bound: {names}")
    assert ok, viol


def _tv_check(psi, vec, rng, draws=100_000):
    xs = psi.sample(rng, draws)
    return tv_distance(xs, np.abs(vec) ** 2)


def test_criterion_03_ct_family_fidelity():
    rng = np.random.default_rng(3)
    lines, ok = [], True
    for kind in ("stabilizer", "matchgate", "mps", "qft_product"):
        amp_err, tv_worst = 0.0, 0.0
        for i in range(100):
            n = int(rng.integers(2, 9))
            psi, vec = random_state(kind, n, rng)
            xs = np.arange(2**n)
            amp_err = max(amp_err, float(np.abs(psi.amplitudes(xs) - vec).max()))
        for i in range(100):
            # the sampling check runs at n <= 6: at n = 8 an exact sampler's own TV noise at 1e5 draws is ~0.02
            n = int(rng.integers(2, 7))
            psi, vec = random_state(kind, n, rng)
            tv_worst = max(tv_worst, _tv_check(psi, vec, np.random.default_rng(1000 + i)))
        good = amp_err <= 1e-8 and tv_worst <= 0.02
        ok &= good
        lines.append(f"{kind} amp {amp_err:.1e} tv {tv_worst:.4f}")
    report("criterion 3 CT family fidelity", ok, "; ".join(lines))
    assert ok


def _delta_consistent(runs: int, delta: float) -> int:
    return int(math.floor(runs * delta + 3 * math.sqrt(runs * delta * (1 - delta))))


def test_criterion_04_cnot_expx():
    rng = np.random.default_rng(4)
    devs = []
    for i in range(100):
        plan = I.cnot_expx_plan_doc(8, 50, rng)
        est = run_plan(plan, (EPS, DELTA), RandomStream(4, i))
        devs.append(abs(est.value - dense_reference(plan)))
    fails = sum(d > EPS for d in devs)
    allowed = _delta_consistent(100, DELTA)
    ok = fails <= allowed
    report("criterion 4 CNOT / e^(i theta X) circuits", ok,
           f"100 circuits of 50 gates at n=8, {fails} beyond eps (allowed {allowed}), worst {max(devs):.4f}")
    assert ok


@pytest.mark.parametrize("pattern", ["local_qft_sparse_matchgate", "matchgate_toffoli_clifford_nn"])
def test_criterion_05_composed_patterns(pattern):
    build = getattr(I, f"{pattern}_plan")
    rng = np.random.default_rng(5)
    devs = []
    for i in range(50):
        plan = build(8, rng)
        est = run_plan(plan, (EPS, DELTA), RandomStream(5, i))
        devs.append(abs(est.value - dense_reference(plan)))
    fails = sum(d > EPS for d in devs)
    ok = fails <= _delta_consistent(50, DELTA)
    report(f"criterion 5 composed pattern {pattern}", ok,
           f"50 instances at n=8, {fails} beyond eps, worst {max(devs):.4f}")
    assert ok


def test_criterion_06_sparse_circuits(tmp_path):
    plan = I.cluster_plan(8)
    est = run_plan(plan, (EPS, DELTA), RandomStream(6))
    cluster_ok = abs(est.value) <= EPS and abs(dense_reference(plan)) < 1e-12
    # H (x) H on neighbouring pairs: sparseness 4 each, 4^7 = 16384 > the 4096 budget
    hh = np.kron(G.H, G.H)
    ops = [{"kind": "local_gate", "n": 8, "targets": [q, q + 1], "matrix": [[[z.real, z.imag] for z in row]
                                                                          for row in hh]} for q in range(7)]
    doc = {"schema": 1, "kind": "plan", "driver": "sparse", "n": 8, "input": "00000000", "ops": ops}
    path = tmp_path / "overflow.json"
    path.write_text(json.dumps(doc))
    code = main(["simulate", str(path)], stdout=io.StringIO())
    ok = cluster_ok and code == 4
    report("criterion 6 sparse circuits", ok, f"cluster <Z_1> estimate {est.real:+.4f}; overflow exit code {code}")
    assert ok


def test_criterion_07_fourier_machinery():
    rng = np.random.default_rng(7)
    # Parseval, every width up to 14
    parseval = 0.0
    for m in range(1, 15):
        for _ in range(3):
            table = rng.integers(0, 2, size=2**m)
            c = fourier_spectrum(BooleanOracle.from_table(table))
            parseval = max(parseval, abs(float(np.sum(c**2)) - 1.0))
    # prefix search on sparse functions
    km_bad = []
    for i in range(50):
        m = int(rng.integers(6, 15))
        s = int(rng.choice([1, 2, 4, 8]))
        g = BooleanOracle.random_sparse(m, s, seed=i)
        theta = granularity(s) if s > 1 else 0.5
        exact = fourier_spectrum(g)
        found = km_heavy_coefficients(g, theta, DELTA, RandomStream(70, i)).support()
        heavy = set(np.nonzero(np.abs(exact) >= theta - 1e-12)[0].tolist())
        sound = all(abs(exact[u]) >= theta / 2 for u in found)
        if not (heavy <= found and sound):
            km_bad.append((m, s, i))
    # degree law on random polynomials of degree <= 4. For the 0/1-valued function s >= 2^d at every degree;
    # for the +-1 spectrum the same holds except at d = 1, where affine functions are 1-sparse.
    law_bad = []
    degrees = []
    for i in range(50):
        m = int(rng.integers(4, 13))
        monos = set()
        for _ in range(int(rng.integers(1, 6))):
            d = int(rng.integers(0, 5))
            monos.add(int(sum(1 << int(q) for q in rng.choice(m, d, replace=False))))
        d = max(bin(u).count("1") for u in monos)
        degrees.append(d)
        g = BooleanOracle.from_anf(m, sorted(monos))
        table = g.truth_table().astype(float)
        s01 = int(np.count_nonzero(np.abs(fwht(table)) > 1e-9))
        spm = int(np.count_nonzero(np.abs(fwht(1 - 2 * table)) > 1e-9))
        law = (d == 0 or s01 >= 2**d) and (spm == 1 if d == 1 else spm >= 2**d)
        if not law or sparseness_and_degree(g) != (spm, d):
            law_bad.append((m, sorted(monos), s01, spm))
    ok = parseval <= 1e-10 and not km_bad and not law_bad
    report("criterion 7 Fourier machinery", ok,
           f"Parseval error {parseval:.1e} (m<=14); prefix search failures {len(km_bad)}/50; "
           f"degree-law violations {len(law_bad)}/50 (degrees {sorted(set(degrees))})")
    assert ok, (km_bad, law_bad)


def _ug_identity_error(g: BooleanOracle) -> float:
    """Dense H^m U_g^dag Z_out U_g H^m against W_g (x) Z assembled from the exact table."""
    m = g.m
    d = 2**m
    vals = g.truth_table()
    U = np.zeros((2 * d, 2 * d))
    for x in range(d):
        for b in range(2):
            U[2 * x + (b ^ int(vals[x])), 2 * x + b] = 1
    Hm = kron_all([G.H] * m)
    Z = np.kron(np.eye(d), G.Z)
    lhs = np.kron(Hm, np.eye(2)) @ U.T @ Z @ U @ np.kron(Hm, np.eye(2))
    W = assemble(wg_operator(exact_table(g), m))
    return float(np.abs(lhs - np.kron(W, G.Z)).max())


def _test_functions(rng):
    out = []
    for m in range(1, 11):
        out.append(BooleanOracle.and_all(m))
        out.append(BooleanOracle.parity(m, int(rng.integers(2**m))))
        for s in (1, 2, 4, 8, 16):
            if s <= 2**m:
                out.append(BooleanOracle.random_sparse(m, s, seed=int(rng.integers(1 << 30))))
        out.append(BooleanOracle.from_table(rng.integers(0, 2, size=2**m)))
    return out


def test_criterion_08_wg_identity_and_truncation():
    rng = np.random.default_rng(8)
    ident = 0.0
    for m in range(1, 7):
        for g in (BooleanOracle.and_all(m), BooleanOracle.random_sparse(m, 4, seed=m),
                  BooleanOracle.from_table(rng.integers(0, 2, size=2**m))):
            ident = max(ident, _ug_identity_error(g))
    bad, checked = [], 0
    for g in _test_functions(rng):
        c = fourier_spectrum(g)
        nz = np.abs(c) > 1e-12
        s = int(nz.sum())
        W = assemble(wg_operator(exact_table(g), g.m))
        for theta in sorted({0.1, 0.3, 0.6, *np.round(np.abs(c[nz]), 12)}):
            Wt = assemble(wg_operator(exact_table(g, theta), g.m)) if np.any(np.abs(c) >= theta) else 0 * W
            gap = dense_spectral_norm(W - Wt).spectral
            checked += 1
            if gap > s * theta + 1e-9:
                bad.append((g.name, g.m, theta, gap, s))
    ok = ident <= 1e-10 and not bad
    report("criterion 8 W_g identity and truncation bound", ok,
           f"identity error {ident:.1e} (m<=6); {checked} truncations at m<=10, {len(bad)} above s*theta")
    assert ok, bad


def test_criterion_09_five_round():
    devs = []
    for s in (1, 2, 4):
        for n in (8, 10, 12):
            for seed in range(3):
                plan = I.sparse_five_round_plan(n, s, seed, measured=min(6, n // 2 + 2))
                est = run_plan(plan, (EPS, DELTA), RandomStream(9, seed))
                devs.append((s, n, seed, abs(est.value - dense_reference(plan)), est.epsilon))
    sparse_ok = all(d <= 2 * EPS for *_, d, _ in devs) and all(e == 2 * EPS for *_, e in devs)
    rng = np.random.default_rng(9)
    k = 6
    sep = []
    for trial in range(3):
        a = int(rng.integers(1, 2**k))
        others = [c for c in range(1, 2**k) if c != a]
        for c in [a] + [int(v) for v in rng.choice(others, 3, replace=False)]:
            est = run_plan(I.simon_parity_plan(k, a, c, trial), (EPS, DELTA), RandomStream(90, trial, (c,)))
            sep.append((c == a, est.real))
    simon_ok = all(v >= 0.9 for same, v in sep if same) and all(abs(v) <= 0.1 for same, v in sep if not same)
    ok = sparse_ok and simon_ok
    worst = max(d for *_, d, _ in devs)
    report("criterion 9 five-round circuits", ok,
           f"{len(devs)} runs with 1-, 2- (realised as 1-) and 4-sparse g at n<=12, worst deviation {worst:.4f} "
           f"(bound {2 * EPS}); Simon c=a min {min(v for s_, v in sep if s_):.3f}, "
           f"c not in (0,a) max |.| {max(abs(v) for s_, v in sep if not s_):.3f}")
    assert ok


def test_criterion_10_chernoff_coverage():
    reps = 1000
    lines, ok = [], True
    for delta in (0.05, 0.2):
        eps = 0.05
        p = 0.3

        def sampler(rng, k):
            return rng.random(k) < p

        def f(xs):
            return np.where(xs, 1.0, -1.0)

        mean = 2 * p - 1
        fails = sum(abs(estimate_mean(sampler, f, eps, delta, 1.0, RandomStream(10, r), real=True).value - mean) > eps
                    for r in range(reps))
        limit = delta + 3 * math.sqrt(delta * (1 - delta) / reps)
        ok &= fails / reps <= limit
        lines.append(f"delta={delta}: failure rate {fails / reps:.3f} (limit {limit:.3f})")
    # a full estimator with a known answer: overlap of two random product states
    rng = np.random.default_rng(10)
    fa, fb = I.random_factors(4, rng), I.random_factors(4, rng)
    phi, psi = ProductState(fa), ProductState(fb)
    exact = np.vdot(product_vector(fa), product_vector(fb))
    delta = 0.2
    fails = sum(abs(estimate_overlap(phi, psi, (0.1, delta), RandomStream(11, r)).value - exact) > 0.1
                for r in range(reps))
    limit = delta + 3 * math.sqrt(delta * (1 - delta) / reps)
    ok &= fails / reps <= limit
    lines.append(f"overlap delta={delta}: failure rate {fails / reps:.3f}")
    report("criterion 10 Chernoff coverage", ok, "; ".join(lines))
    assert ok


def _cli(args):
    buf = io.StringIO()
    code = main(args, stdout=buf)
    return code, buf.getvalue()


def test_criterion_11_determinism(tmp_path):
    data = Path(I.fixture_dir())
    commands = [
        ["estimate", "overlap", str(data / "stabilizer_ghz6.json"), str(data / "product_plus6.json")],
        ["estimate", "matel", str(data / "matchgate6.json"), str(data / "pauli_sum6.json"),
         str(data / "stabilizer_random6.json"), "--per-term"],
        ["estimate", "observable", str(data / "mps6.json"), str(data / "observable_zz6.json")],
        ["simulate", str(data / "plan_hadamard_sandwich8.json")],
        ["simulate", str(data / "plan_cnot_expx8.json")],
        ["simulate", str(data / "plan_five_round10.json")],
        ["learn", "--oracle", "random-sparse:s=4,seed=2,m=10", "--threshold", "0.4"],
        ["demo", "dj"],
    ]
    diffs = []
    for j, cmd in enumerate(commands):
        outs = set()
        for workers in (1, 3, 1):
            out = tmp_path / f"r{j}_{workers}.jsonl"
            code, text = _cli(cmd + ["--seed", "11", "--workers", str(workers), "--out", str(out)])
            outs.add((code, text, out.read_text()))
        if len(outs) != 1:
            diffs.append(cmd[:2])
    ok = not diffs
    report("criterion 11 determinism", ok, f"{len(commands)} commands x workers 1/3/1, {len(diffs)} differ")
    assert ok, diffs


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))

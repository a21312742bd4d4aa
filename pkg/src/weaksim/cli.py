"""Command-line interface: ``weaksim {estimate,simulate,learn,demo,check}``.

Every command prints one JSON object per line. Reports depend only on the
command, the input files and the seed; the worker count never changes them and
wall time is added only with ``--timing``.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .boolean_fourier import (
    FourierTable,
    exact_table,
    km_heavy_coefficients,
    resolve_oracle,
)
from .core import (
    BudgetExceeded,
    Estimate,
    PreconditionError,
    RandomStream,
    SchemaError,
    VerificationFailed,
    WeaksimError,
)
from .ct_states import ProductState, StabilizerState
from .estimators import (
    ErrorBudget,
    estimate_local_observable,
    estimate_matrix_element,
    estimate_overlap,
    estimate_partial_projected,
)
from .instances import dj_plan, simon_parity_plan, sparse_five_round_plan
from .plans import dense_reference, run_plan
from .schema import (
    DRIVER_ALIASES,
    DRIVERS,
    dumps,
    load_json,
    load_operator,
    load_plan,
    load_state,
    normalise,
)

ESTIMATE_ARITY = {"overlap": 2, "matel": 3, "observable": 2, "partial": 6}
DEMOS = ("simon-parity", "dj", "sparse-five-round", "potts-note")
DEMO_ALIASES = {"theorem2": "sparse-five-round"}


@dataclass(frozen=True)
class RunConfig:
    epsilon: float = 0.05
    delta: float = 1e-3
    seed: int = 0
    workers: int = 1
    verify: bool = False
    out: str | None = None
    timing: bool = False

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise PreconditionError("--eps must lie in (0, 1]")
        if not 0 < self.delta < 1:
            raise PreconditionError("--delta must lie in (0, 1)")
        if self.workers < 1:
            raise PreconditionError("--workers must be at least 1")

    @property
    def budget(self) -> ErrorBudget:
        return ErrorBudget(self.epsilon, self.delta)

    def stream(self, index: int = 0) -> RandomStream:
        return RandomStream(self.seed, index)


class Reporter:
    """Collects report records and writes them as JSON lines."""

    def __init__(self, cfg: RunConfig, stdout=None):
        self.cfg = cfg
        self.stdout = stdout or sys.stdout
        self.lines: list[str] = []

    def emit(self, record: dict) -> None:
        line = dumps(record)
        self.lines.append(line)
        print(line, file=self.stdout)

    def close(self) -> None:
        if self.cfg.out:
            Path(self.cfg.out).write_text("".join(ln + "\n" for ln in self.lines))


def _value(v) -> float | list[float]:
    v = complex(v)
    re, im = round(v.real, 15) + 0.0, round(v.imag, 15) + 0.0
    return re if im == 0 else [re, im]


def estimate_record(est: Estimate, cfg: RunConfig, **extra) -> dict:
    rec = {"value": _value(est.value), "epsilon": est.epsilon, "delta": est.delta, "samples": est.samples_used,
           "seed": cfg.seed}
    rec.update(extra)
    return rec


def _verify(rec: dict, est: Estimate, reference: complex) -> bool:
    dev = abs(complex(est.value) - complex(reference))
    rec["reference"] = _value(reference)
    rec["deviation"] = round(dev, 15)
    rec["verified"] = bool(dev <= est.epsilon)
    return rec["verified"]


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


# --------------------------------------------------------------------------
# commands


def cmd_estimate(kind: str, files: list[str], cfg: RunConfig, rep: Reporter, per_term: bool = False) -> int:
    need = ESTIMATE_ARITY[kind]
    if len(files) != need:
        raise SchemaError(f"'estimate {kind}' takes {need} files, got {len(files)}")
    from .oracle import dense_matrix_element

    kw = {"workers": cfg.workers}
    if kind == "overlap":
        phi, psi = load_state(files[0]), load_state(files[1])
        est, dt = _timed(estimate_overlap, phi, psi, cfg.budget, cfg.stream(), **kw)
        ref = (lambda: dense_matrix_element(phi, None, psi))
    elif kind == "matel":
        phi, A, psi = load_state(files[0]), load_operator(files[1]), load_state(files[2])
        est, dt = _timed(estimate_matrix_element, phi, A, psi, cfg.budget, cfg.stream(), per_term=per_term, **kw)
        ref = (lambda: dense_matrix_element(phi, A, psi))
    elif kind == "observable":
        psi, O = load_state(files[0]), load_operator(files[1])
        if not hasattr(O, "terms"):
            raise SchemaError("observable files must be Pauli sums")
        est, dt = _timed(estimate_local_observable, psi, O.terms, cfg.budget, cfg.stream(), **kw)
        ref = (lambda: dense_matrix_element(psi, O, psi))
    else:
        phi, A, xi, chi, B, psi = (load_state(files[0]), load_operator(files[1]), load_state(files[2]),
                                   load_state(files[3]), load_operator(files[4]), load_state(files[5]))
        est, dt = _timed(estimate_partial_projected, phi, A, xi, chi, B, psi, cfg.budget, cfg.stream(), **kw)

        def ref():
            from .ct_states import tensor
            from .estimators import partial_projected_operator

            return dense_matrix_element(tensor(chi, phi), partial_projected_operator(A, B, xi.n), tensor(xi, psi))
    rec = estimate_record(est, cfg, command="estimate", kind=kind)
    ok = True
    if cfg.verify:
        ok = _verify(rec, est, ref())
    if cfg.timing:
        rec["wall_time"] = dt
    rep.emit(rec)
    if not ok:
        raise VerificationFailed(f"deviation {rec['deviation']} exceeds epsilon {est.epsilon}")
    return 0


def cmd_simulate(path: str, cfg: RunConfig, rep: Reporter, driver: str | None = None) -> int:
    doc = load_plan(path)
    if driver is not None:
        doc["driver"] = DRIVER_ALIASES.get(driver, driver)
    est, dt = _timed(run_plan, doc, cfg.budget, cfg.stream(), workers=cfg.workers)
    rec = estimate_record(est, cfg, command="simulate", driver=doc["driver"])
    for key in ("notes", "split"):
        if key in est.details:
            rec[key] = est.details[key]
    if "table" in est.details:
        rec["fourier_table"] = est.details["table"]
    ok = True
    if cfg.verify:
        ok = _verify(rec, est, dense_reference(doc))
    if cfg.timing:
        rec["wall_time"] = dt
    rep.emit(rec)
    if not ok:
        raise VerificationFailed(f"deviation {rec['deviation']} exceeds epsilon {est.epsilon}")
    return 0


def compare_tables(learned: FourierTable, exact: FourierTable, threshold: float) -> dict:
    """Completeness (every exact coefficient >= threshold found) and soundness (values within accuracy)."""
    ex = exact.as_dict()
    heavy = {u for u, c in ex.items() if abs(c) >= threshold}
    missing = sorted(heavy - learned.support())
    wrong = sorted(u for u, c, a in learned.entries if abs(c - ex.get(u, 0.0)) > a)
    complete, sound = not missing, not wrong
    verdict = ("complete and sound" if complete and sound else
               ", ".join(w for w, bad in (("incomplete", not complete), ("unsound", not sound)) if bad))
    return {"complete": complete, "sound": sound, "verdict": verdict,
            "missing": [format(u, f"0{exact.m}b") for u in missing],
            "wrong": [format(u, f"0{exact.m}b") for u in wrong]}


def cmd_learn(oracle: str, threshold: float, cfg: RunConfig, rep: Reporter, exhaustive: bool = False,
              m: int | None = None, table_out: str | None = None) -> int:
    g = resolve_oracle(oracle, m)
    table, dt = _timed(km_heavy_coefficients, g, threshold, cfg.delta, cfg.stream(), workers=cfg.workers)
    rec = {"command": "learn", "oracle": oracle, "m": g.m, "threshold": threshold, "delta": cfg.delta,
           "seed": cfg.seed, "table": table.to_dict(), "queries": g.queries}
    if exhaustive:
        if g.m > 16:
            raise BudgetExceeded("--exhaustive is limited to m <= 16")
        exact = exact_table(g)
        rec["exact"] = exact.to_dict()
        rec.update(compare_tables(table, exact, threshold))
    if cfg.timing:
        rec["wall_time"] = dt
    if table_out:
        Path(table_out).write_text(dumps({"schema": 1, **table.to_dict()}) + "\n")
    rep.emit(rec)
    if cfg.verify and exhaustive and not (rec["complete"] and rec["sound"]):
        raise VerificationFailed(f"learned table is {rec['verdict']}")
    return 0


def cmd_check(files: list[str], rep: Reporter) -> int:
    """Parse, serialise and re-parse each file; the two serialisations must agree."""
    for f in files:
        doc = load_json(f)
        once = normalise(doc, f)
        twice = normalise(json.loads(dumps(once)), f)
        same = dumps(once) == dumps(twice)
        rep.emit({"command": "check", "file": Path(f).name, "kind": once.get("kind"), "round_trip": same})
        if not same:
            raise SchemaError(f"{f}: serialisation is not stable")
    return 0


# --------------------------------------------------------------------------
# demos


def cmd_demo(name: str, cfg: RunConfig, rep: Reporter) -> int:
    rng = np.random.default_rng(cfg.seed)
    failures = 0
    if name == "simon-parity":
        k = 6
        a = int(rng.integers(1, 2**k))
        others = [c for c in range(1, 2**k) if c != a]
        cs = [("c = a", a), ("c = 0", 0)] + [("c random", int(c)) for c in rng.choice(others, 3, replace=False)]
        for i, (label, c) in enumerate(cs):
            plan = simon_parity_plan(k, a, c, cfg.seed)
            est = run_plan(plan, cfg.budget, cfg.stream(i), workers=cfg.workers)
            expected = 1.0 if c in (0, a) else 0.0
            rec = estimate_record(est, cfg, command="demo", demo=name, case=label, a=format(a, f"0{k}b"),
                                  c=format(c, f"0{k}b"), expected=expected)
            if cfg.verify:
                failures += not _verify(rec, est, dense_reference(plan))
            rep.emit(rec)
    elif name == "dj":
        k = 6
        balanced = np.zeros(2**k, dtype=int)
        balanced[rng.choice(2**k, 2 ** (k - 1), replace=False)] = 1
        for i, (label, table) in enumerate([("constant 0", np.zeros(2**k, dtype=int)),
                                            ("constant 1", np.ones(2**k, dtype=int)), ("balanced", balanced)]):
            plan = dj_plan(k, table)
            est = run_plan(plan, cfg.budget, cfg.stream(i), workers=cfg.workers)
            rec = estimate_record(est, cfg, command="demo", demo=name, case=label,
                                  expected=0.0 if label == "balanced" else 1.0)
            if cfg.verify:
                failures += not _verify(rec, est, dense_reference(plan))
            rep.emit(rec)
    elif name == "sparse-five-round":
        plan = sparse_five_round_plan(10, 4, cfg.seed)
        est = run_plan(plan, cfg.budget, cfg.stream(), workers=cfg.workers)
        rec = estimate_record(est, cfg, command="demo", demo=name, plan=plan)
        # the dense check is cheap at n = 10, so this demo always verifies
        failures += not _verify(rec, est, dense_reference(plan))
        rep.emit(rec)
    elif name == "potts-note":
        rep.emit({"command": "demo", "demo": name, "note": (
            "A normalised Potts partition function can be written as the overlap of a product state with a "
            "stabilizer state. Building that pair from a lattice and its couplings is not implemented here; "
            "the overlap estimator that evaluates it is, and is shown below on a GHZ / product pair.")})
        n = 8
        gl = [{"gate": "h", "targets": [0]}] + [{"gate": "cnot", "targets": [q, q + 1]} for q in range(n - 1)]
        phi = StabilizerState(n, gl)
        psi = ProductState.plus(n)
        est = estimate_overlap(phi, psi, cfg.budget, cfg.stream(), workers=cfg.workers)
        from .oracle import dense_matrix_element

        rec = estimate_record(est, cfg, command="demo", demo=name, case="<GHZ|+^n>")
        failures += not _verify(rec, est, dense_matrix_element(phi, None, psi))
        rep.emit(rec)
    else:
        raise SchemaError(f"unknown demo {name!r}")
    if failures:
        raise VerificationFailed(f"{failures} demo case(s) deviate beyond epsilon")
    return 0


# --------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps", type=float, default=0.05, help="additive accuracy (default 0.05)")
    p.add_argument("--delta", type=float, default=1e-3, help="failure probability (default 1e-3)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--workers", type=int, default=1, help="sampling threads; never changes results")
    p.add_argument("--verify", action="store_true", help="compare with the dense reference (small n)")
    p.add_argument("--out", help="also write the report lines to this file")
    p.add_argument("--timing", action="store_true", help="add wall time to reports (breaks byte identity)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weaksim", description="Weak simulation by sampling estimators.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="overlap / matrix element / local observable / partial overlap")
    p.add_argument("kind", choices=sorted(ESTIMATE_ARITY))
    p.add_argument("files", nargs="+", help="overlap: PHI PSI; matel: PHI OP PSI; observable: PSI OBS; "
                                            "partial: PHI A XI CHI B PSI")
    p.add_argument("--per-term", action="store_true", help="matel: evaluate every F_i/G_i literally")
    _common(p)

    p = sub.add_parser("simulate", help="run a plan file through a circuit driver")
    p.add_argument("plan")
    p.add_argument("--driver", choices=[*DRIVERS, *DRIVER_ALIASES])
    _common(p)

    p = sub.add_parser("learn", help="heavy Fourier coefficients of a Boolean oracle")
    p.add_argument("--oracle", required=True, help="registry string or truth-table file")
    p.add_argument("--threshold", type=float, default=0.25)
    p.add_argument("--m", type=int, help="input width when the oracle string leaves it open")
    p.add_argument("--exhaustive", action="store_true", help="also compare with the exact transform (m <= 16)")
    p.add_argument("--table-out", help="write the learned table as a schema document")
    _common(p)

    p = sub.add_parser("demo", help="narrative examples")
    p.add_argument("name", choices=[*DEMOS, *DEMO_ALIASES])
    _common(p)

    p = sub.add_parser("check", help="schema round-trip of description files")
    p.add_argument("files", nargs="+")
    _common(p)
    return parser


def main(argv=None, stdout=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    stdout = stdout or sys.stdout
    try:
        cfg = RunConfig(args.eps, args.delta, args.seed, args.workers, args.verify, args.out, args.timing)
        rep = Reporter(cfg, stdout)
        try:
            if args.command == "estimate":
                return cmd_estimate(args.kind, args.files, cfg, rep, args.per_term)
            if args.command == "simulate":
                return cmd_simulate(args.plan, cfg, rep, args.driver)
            if args.command == "learn":
                return cmd_learn(args.oracle, args.threshold, cfg, rep, args.exhaustive, args.m, args.table_out)
            if args.command == "demo":
                return cmd_demo(DEMO_ALIASES.get(args.name, args.name), cfg, rep)
            return cmd_check(args.files, rep)
        finally:
            rep.close()
    except WeaksimError as exc:
        print(dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}), file=stdout)
        print(f"weaksim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(dumps({"error": "SchemaError", "message": str(exc), "exit_code": 2}), file=stdout)
        print(f"weaksim: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

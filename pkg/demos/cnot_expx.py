"""CNOT and X-rotation circuits simulated in the +/- basis.

Conjugating by Hadamards turns CNOTs into reversed CNOTs and ``e^{i t X}``
into ``e^{i t Z}``, so the whole circuit becomes basis-preserving. The input
is rotated into the +/- frame, where it is still a product state, and the
conjugated observable has at most two entries per column.
"""
import numpy as np

from weaksim import instances as I
from weaksim.core import RandomStream
from weaksim.plans import dense_reference, run_plan

EPS, DELTA = 0.05, 1e-3


def main(n: int = 8, gates: int = 40, seed: int = 0) -> None:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(5):
        plan = I.cnot_expx_plan_doc(n, gates, rng)
        est = run_plan(plan, (EPS, DELTA), RandomStream(seed, i))
        exact = dense_reference(plan).real
        worst = max(worst, abs(est.real - exact))
        print(f"circuit {i}: estimate {est.real:+.4f}, exact {exact:+.4f}")
    print(f"largest deviation {worst:.4f} (allowed {EPS})")


if __name__ == "__main__":
    main()

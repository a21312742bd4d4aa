"""Circuits glued from classically tractable pieces.

A circuit ``U = U_2 U_1`` can be simulated when the state after ``U_1`` is
tractable and the observable conjugated by ``U_2`` is sparse. The planner tries
every split point and reports which one it used. Three patterns are shown:

* local gates then a QFT-like stage on a product input, followed by a sparse
  matchgate round,
* matchgates on the input, then a Toffoli/Clifford/shallow nearest-neighbour
  stage on the observable side,
* a matchgate circuit sandwiched between Hadamard layers.
"""
import numpy as np

from weaksim import instances as I
from weaksim.core import RandomStream
from weaksim.plans import dense_reference, run_plan

EPS, DELTA = 0.05, 1e-3
PATTERNS = {
    "local + QFT | sparse matchgate": I.local_qft_sparse_matchgate_plan,
    "matchgate | Toffoli, Clifford, shallow NN": I.matchgate_toffoli_clifford_nn_plan,
    "Hadamard sandwich around matchgates": I.hadamard_sandwich_matchgate_plan,
}


def main(n: int = 8, seed: int = 0) -> None:
    rng = np.random.default_rng(seed)
    for i, (name, build) in enumerate(PATTERNS.items()):
        plan = build(n, rng)
        est = run_plan(plan, (EPS, DELTA), RandomStream(seed, i))
        exact = dense_reference(plan).real
        print(f"{name}:")
        for note in est.details["notes"]:
            print(f"    {note}")
        print(f"    <Z_1> estimate {est.real:+.4f}, exact {exact:+.4f}, {est.samples_used} samples")


if __name__ == "__main__":
    main()

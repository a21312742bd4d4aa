"""Hidden-shift structure read off a single parity.

A Simon oracle hides a nonzero string ``a`` with ``f(x) = f(x ^ a)``. After the
usual Hadamard / oracle / Hadamard rounds the first register is uniform over
the strings orthogonal to ``a``. The parity ``c.u`` of that register is then
constant exactly when ``c`` lies in ``{0, a}``, and balanced otherwise, so the
expectation of ``(-1)^{c.u}`` separates the two cases. A parity is a 1-sparse
function, which is what lets the five-round simulator estimate it classically.
"""
import numpy as np

from weaksim import instances as I
from weaksim.core import RandomStream
from weaksim.plans import dense_reference, run_plan

K = 6
EPS, DELTA = 0.05, 1e-3


def main(seed: int = 0) -> None:
    rng = np.random.default_rng(seed)
    a = int(rng.integers(1, 2**K))
    others = [c for c in range(1, 2**K) if c != a]
    print(f"hidden shift a = {a:0{K}b}")
    for i, c in enumerate([a, 0, *rng.choice(others, 4, replace=False)]):
        plan = I.simon_parity_plan(K, a, int(c), seed)
        est = run_plan(plan, (EPS, DELTA), RandomStream(seed, i))
        exact = dense_reference(plan).real
        print(f"c = {int(c):0{K}b}   estimate {est.real:+.3f}   exact {exact:+.3f}   within {est.epsilon}: "
              f"{abs(est.real - exact) <= est.epsilon}")


if __name__ == "__main__":
    main()

"""Five-round circuits with sparse classical postprocessing.

Hadamards on a subset, a basis-preserving round (Toffoli, CZ, CNOT), Hadamards
again, then a Boolean function ``g`` of the measured bits. When ``g`` has few
nonzero Fourier coefficients, the expectation of ``(-1)^g`` is a matrix
element of a sparse operator built from those coefficients. The simulator
learns them by prefix search, re-estimates them, and reports an error bar of
twice the requested accuracy.
"""
from weaksim import instances as I
from weaksim.core import RandomStream
from weaksim.plans import dense_reference, run_plan

EPS, DELTA = 0.05, 1e-3


def main(n: int = 10, seed: int = 0) -> None:
    for s in (1, 4, 8):
        plan = I.sparse_five_round_plan(n, s, seed)
        est = run_plan(plan, (EPS, DELTA), RandomStream(seed, s))
        exact = dense_reference(plan).real
        table = est.details["table"]["entries"]
        print(f"{s}-sparse g: learned {len(table)} coefficients, estimate {est.real:+.4f}, exact {exact:+.4f}, "
              f"error bar {est.epsilon}")
        for e in table:
            print(f"    c({e['u']}) = {e['coeff']:+.4f}")


if __name__ == "__main__":
    main()

"""Finding the heavy Fourier coefficients of a Boolean function from queries.

The search keeps a set of prefixes whose subtree carries enough squared
weight, extending each by one bit per level. Parseval caps the number of
surviving prefixes, so the query count grows with the input width and the
inverse threshold, never with ``2^m``. For small widths the result is compared
with the exact transform.
"""
from weaksim.boolean_fourier import BooleanOracle, exact_table, km_heavy_coefficients
from weaksim.cli import compare_tables


def main() -> None:
    cases = [
        ("AND of 3 bits", BooleanOracle.and_all(3), 0.25),
        ("4-sparse on 12 bits", BooleanOracle.random_sparse(12, 4, seed=1), 0.5),
        ("Simon postprocessing, 3x2", BooleanOracle.simon_postprocessing(3, 2), 0.2),
    ]
    for name, g, theta in cases:
        table = km_heavy_coefficients(g, theta, 1e-3, 0)
        verdict = compare_tables(table, exact_table(g), theta)["verdict"]
        print(f"{name}: {len(table)} coefficients at threshold {theta}, {g.queries} queries, {verdict}")
        for u, c, acc in sorted(table.entries, key=lambda e: -abs(e[1]))[:6]:
            print(f"    c({u:0{g.m}b}) = {c:+.3f} +- {acc:.3f}")


if __name__ == "__main__":
    main()

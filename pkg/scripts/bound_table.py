#!/usr/bin/env python3
"""Side-by-side evaluation of every rate functional on a shared grid.

Prints the comparison table (constants dropped everywhere, natural logs) and
the two headline dominance checks: the eps |ln eps| functional against
eps^3 n ln n at the cube-root scaling, and at the constraint boundary
eps = sqrt(3/(4n)) forced by a near-unit terminal variance.
"""

import argparse
import math

from mclt_lab.bounds import compare_table, evaluate_rate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=None, help="optional CSV path")
    args = ap.parse_args()

    grid = []
    for n in (10**3, 10**4, 10**6):
        eps = n ** (-1.0 / 3.0)
        grid.append({
            "rho": 1.0, "p": 1.0, "n": float(n), "epsilon": eps, "delta": 0.0,
            "var_dev_p": 0.0, "max_inc_2p": eps**2, "sum_inc_2p": n * eps**2,
            "var_dev_l1": 0.0, "var_dev_linf": 0.0,
        })
    ids = ["T1", "C1", "T2", "C2", "HB", "BOLT_A", "BOLT_B", "EO", "MOURRAT"]
    table = compare_table(ids, grid)
    widths = max(len(i) for i in ids) + 2
    print("eps = n^(-1/3) grid:")
    print(" ".join(f"{i:>{widths}}" for i in ["n"] + ids))
    for record, row in zip(table.grid, table.values):
        cells = [f"{record['n']:>{widths}.0e}"] + [f"{v:>{widths}.4g}" for v in row]
        print(" ".join(cells))

    print("\ndominance at eps = n^(-1/3), n = 1e6:")
    gamma = evaluate_rate("C1", {"rho": 1.0, "epsilon": 1e-2})
    bolt = evaluate_rate("BOLT_A", {"epsilon": 1e-2, "n": 1e6})
    print(f"  eps|ln eps| = {gamma:.4f}   eps^3 n ln n = {bolt:.4f}   factor {bolt/gamma:.0f}")

    print("\nconstraint boundary eps = sqrt(3/(4n)):")
    for n in (3, 100, 10**4, 10**6):
        eps = math.sqrt(3.0 / (4.0 * n))
        lhs = evaluate_rate("BOLT_A", {"epsilon": eps, "n": n})
        rhs = 0.75 * evaluate_rate("C1", {"rho": 1.0, "epsilon": eps})
        print(f"  n={n:>8}: eps^3 n ln n = {lhs:.5f} >= (3/4) eps|ln eps| = {rhs:.5f}")

    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(table.to_csv())
        print(f"\nwrote {args.out}")


if __name__ == "__main__":
    main()

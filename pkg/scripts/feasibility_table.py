"""Separation ratio of the reconnection datum over (n, m) for a few diffusivities.

A pair is usable when the ratio is at most 0.05; the scenario picks the
first usable pair in order of increasing n^2 + m^2.
"""

import argparse

from mhdlab import fields as F
from mhdlab import scenarios as SC


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--M", type=float, default=1.0)
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--L", type=int, default=2)
    ap.add_argument("--c", type=float, default=0.1)
    ap.add_argument("--max-nm", type=int, default=4)
    args = ap.parse_args()
    for eta in (0.5, 1.0, 2.0):
        print(f"eta = {eta}")
        print("  n  m   delta       ratio")
        for n in range(1, args.max_nm + 1):
            for m in range(n, args.max_nm + 1):
                delta = F.reconnection_delta(args.M, n, m, args.L, args.c)
                ratio = SC.separation_ratio(args.M, args.T, eta, n, m, delta)
                mark = "  ok" if ratio <= 0.05 else ""
                print(f"  {n}  {m}  {delta:.3e}  {ratio:.3e}{mark}")
        feas = SC.feasible_parameters(args.M, args.T, eta, 1.0, args.L, args.c)
        print(f"  chosen: ({feas.n}, {feas.m}) feasible={feas.feasible}\n")


if __name__ == "__main__":
    main()

"""Continuation of the 8nm lattice points as the perturbation grows past nominal."""

import argparse
import math

import numpy as np

from mhdlab import fields as F
from mhdlab import topology as T
from mhdlab.spectral import Grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=2)
    ap.add_argument("--m", type=int, default=2)
    ap.add_argument("--modes", type=int, default=64)
    args = ap.parse_args()
    n, m = args.n, args.m
    grid = Grid.square(args.modes)
    base = F.taylor_field(F.TaylorSpec(n, m), grid)
    saddles, centers = F.lattice_points(n, m)
    lattice = np.vstack([saddles, centers])
    d0 = F.reconnection_delta(1.0, n, m, 2, 0.1)
    print(" multiple  converged  min separation  brute-force points")
    for mult in (0, 1, 3, 10, 20, 30, 50, 100):
        field, _ = F.reconnection_datum_2d(1.0, n, m, 2, 0.1, grid, delta=mult * d0)
        res = T.continue_critical_points(base, field, 2, lattice=lattice, N=math.hypot(n, m),
                                         separation_floor=math.pi / (2 * max(n, m)))
        found = len(T.find_critical_points(field))
        conv = sum(p.converged for p in res.points)
        print(f"  {mult:6g}   {conv:3d}/{len(res.points)}     {res.min_separation:.4f}          {found}")


if __name__ == "__main__":
    main()

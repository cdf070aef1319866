"""Measured break rate of the sheared saddle connection against -4 eps eta M.

Also prints the rate as originally stated, eta(-2 eps - 2 eps cos(eps pi)),
to show the size of the disagreement over a range of eps.
"""

import argparse

from mhdlab import scenarios as SC


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eta", type=float, default=0.01)
    ap.add_argument("--R", type=float, default=0.0)
    args = ap.parse_args()
    print("  eps    measured     -4 eps eta   stated       rel.err(stated)")
    for eps in (0.05, 0.1, 0.2, 0.3):
        rep = SC.run_instant2d(SC.ScenarioConfig("instant2d", eps=eps, eta=args.eta, R=args.R))
        print(f"  {eps:4.2f}  {rep.hamiltonian_rate:+.4e}  {rep.corrected_rate:+.4e}  "
              f"{rep.stated_rate:+.4e}  {rep.stated_rel_error:.2%}")


if __name__ == "__main__":
    main()

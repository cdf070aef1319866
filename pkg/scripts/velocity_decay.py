"""Late-time velocity amplitude ratio when nu doubles, over a few nu.

For nu near 3 eta the free decay of the initial velocity is still larger
than the forced part at time T, so the ratio there is far above 2.
"""

import argparse

from mhdlab import scenarios as SC


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eta", type=float, default=1.0)
    ap.add_argument("--T", type=float, default=2.0)
    args = ap.parse_args()
    print("  nu    late ratio   early rate(nu)   early rate(2nu)")
    for nu in (5.0, 10.0, 20.0):
        rep = SC.verify_velocity_decay(SC.ScenarioConfig("velocity", nu=nu, eta=args.eta, R=1.0, T=args.T, dt=2e-3))
        print(f"  {nu:4g}  {rep.envelopes['late_ratio']:.4f}       {rep.rates[f'early_nu{nu:g}']:.3f}"
              f"           {rep.rates[f'early_nu{2 * nu:g}']:.3f}")


if __name__ == "__main__":
    main()

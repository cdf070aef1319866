"""Run the 2-D reconnection scenario and print the topology before and after."""

import argparse
import json
from dataclasses import replace

from mhdlab import fields as F
from mhdlab import scenarios as SC


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=0, help="0 picks a feasible pair")
    ap.add_argument("--m", type=int, default=0)
    ap.add_argument("--eta", type=float, default=1.0)
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--delta-scale", type=float, default=1.0, help="multiple of the nominal delta")
    args = ap.parse_args()
    cfg = SC.ScenarioConfig("reconnect2d", n=args.n, m=args.m, eta=args.eta, T=args.T, snapshots=10)
    if args.delta_scale != 1.0:
        if args.n and args.m:
            n, m = args.n, args.m
        else:
            feas = SC.feasible_parameters(cfg.M, cfg.T, cfg.eta, cfg.nu, cfg.L, cfg.c)
            n, m = feas.n, feas.m
        delta = args.delta_scale * F.reconnection_delta(cfg.M, n, m, cfg.L, cfg.c)
        cfg = replace(cfg, n=n, m=m, delta=delta)
    v = SC.run_reconnect2d(cfg)
    out = v.to_dict()
    print("t=0:", json.dumps(out["report_t0"]["summary"]))
    print("t=T:", json.dumps(out["report_T"]["summary"]))
    print("closeness H3:", f"{v.closeness:.3e}", "duhamel ratio:", f"{v.duhamel_ratio:.3e}")
    print("checks:", json.dumps(v.checks))
    print(v.message)


if __name__ == "__main__":
    main()

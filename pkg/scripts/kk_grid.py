"""Sweep reduced Kawaguchi-Kyan instances and report dual objective against the closed-form optimum."""

import argparse

import numpy as np

from sdpfit.dualfit import verify_dual
from sdpfit.generators import KKParams, gen_kk


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--machines", default="2,3,4,6")
    ap.add_argument("--p-min", type=float, default=0.25)
    ap.add_argument("--p-max", type=float, default=6.0)
    ap.add_argument("--p-steps", type=int, default=12)
    ap.add_argument("--eps", type=float, default=0.01)
    args = ap.parse_args()
    worst = (0.0, None)
    for m in (int(t) for t in args.machines.split(",")):
        for k in range(m):
            for p in np.linspace(args.p_min, args.p_max, args.p_steps):
                par = KKParams(m, k, float(p), args.eps)
                kk = gen_kk(par)
                rep = verify_dual("kk-high" if par.high_case else "kk-low", kk.instance, kk)
                r = rep.extra["neOverDual"]
                if r > worst[0]:
                    worst = (r, par)
                flag = "ok" if rep.passed else "FAIL"
                print(f"m={m} k={k} p={p:6.3f} dual={rep.dual_objective:10.5f} opt={par.opt_cost():10.5f} ne/dual={r:.5f} {flag}")
    print(f"worst NE/dual {worst[0]:.5f} at {worst[1]}")


if __name__ == "__main__":
    main()

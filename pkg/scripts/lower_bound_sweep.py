"""Certify the local-search lower-bound family over a range of sizes and print the ratios."""

import argparse

from sdpfit.cost import social_cost
from sdpfit.generators import LAMBDA, gen_lower_bound_ls
from sdpfit.localsearch import check_gamma_potential
from sdpfit.oracle import brute_force_opt


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="2,3,5,10,50,100,500")
    ap.add_argument("--oracle-max", type=int, default=10, help="compare with brute force up to this n")
    args = ap.parse_args()
    print(f"limit lambda^2 = {LAMBDA**2:.6f}")
    print(f"{'n':>5} {'C(local)':>12} {'C(canon)':>12} {'ratio':>9} {'violation':>10} {'opt':>12}")
    for n in (int(t) for t in args.sizes.split(",")):
        lb = gen_lower_bound_ls(n)
        cert = check_gamma_potential(lb.instance, lb.local_opt)
        local = social_cost(lb.instance, lb.local_opt).social
        canon = social_cost(lb.instance, lb.canonical).social
        opt = f"{brute_force_opt(lb.instance)[0]:12.6f}" if n <= args.oracle_max else f"{'-':>12}"
        print(f"{n:5d} {local:12.6f} {canon:12.6f} {local / canon:9.6f} {cert.max_violation:10.2e} {opt}")


if __name__ == "__main__":
    main()

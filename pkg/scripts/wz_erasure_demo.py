"""Wyner-Ziv coding of a DSBS with erasure distortion.

Prints the truncated values psi_n(D), the limit (support restricted) and
the closed form (1 - D) h(p) for comparison.

    python scripts/wz_erasure_demo.py --p 0.25 --D 0.25 --restarts 16
"""

import argparse
import math

from truncrd import (
    SolverOptions,
    TruncationSchedule,
    build_dsbs,
    build_erasure_distortion,
    converge_sweep,
    lift_distortion,
    wyner_ziv_problem,
)


def h(p):
    return 0.0 if p in (0.0, 1.0) else -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p", type=float, default=0.25)
    ap.add_argument("--D", type=float, nargs="+", default=[0.25])
    ap.add_argument("--u-card", type=int, default=3)
    ap.add_argument("--n-max", type=int, default=10)
    ap.add_argument("--restarts", type=int, default=16)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    pr = wyner_ziv_problem(build_dsbs(args.p), 3, args.u_card)
    d = lift_distortion(build_erasure_distortion(2), pr.layout)
    sched = TruncationSchedule.geometric(d, args.n_max)
    opts = SolverOptions(restarts=args.restarts, seed=args.seed)
    for D in args.D:
        rep = converge_sweep(pr, sched, D, opts=opts)
        print(rep.summary())
        print(f"closed form (1 - D) h(p) = {(1 - D) * h(args.p):.9f}\n")


if __name__ == "__main__":
    main()

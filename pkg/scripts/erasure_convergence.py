"""Truncated erasure values climbing to the limit 1 - D for a uniform binary source.

    python scripts/erasure_convergence.py --D 0.1 0.25 0.5 --n-max 12
"""

import argparse

import numpy as np

from truncrd import (
    AlphabetLayout,
    JointPmf,
    TruncationSchedule,
    build_erasure_distortion,
    converge_sweep,
    lift_distortion,
    shannon_problem,
)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--D", type=float, nargs="+", default=[0.1, 0.25, 0.5])
    ap.add_argument("--n-max", type=int, default=12)
    args = ap.parse_args()

    pr = shannon_problem(JointPmf(AlphabetLayout.of(X=2), [0.5, 0.5]), 3)
    d = lift_distortion(build_erasure_distortion(2), pr.layout)
    sched = TruncationSchedule.geometric(d, args.n_max)
    for D in args.D:
        rep = converge_sweep(pr, sched, D)
        print(rep.summary())
        g = np.array(rep.gaps)
        pos = g > 1e-12  # below this the gap is rounding noise
        # decay rate of the gap in the cap, from consecutive positive gaps
        rates = -np.diff(np.log2(g[pos])) / np.diff(np.array(sched.caps[: len(g)])[pos])
        print("log2 gap slope per unit cap:", " ".join(f"{r:.3f}" for r in rates), "\n")


if __name__ == "__main__":
    main()

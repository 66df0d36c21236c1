"""Companion recipe: turn a sweep CSV into the convergence figure.

    truncrd sweep --config configs/erasure_wz_dsbs.ini --out wz.csv
    python scripts/plot_convergence.py wz.csv -o wz.png

Needs matplotlib, which is not a dependency of the package.
"""

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_sweep(path):
    with open(path) as f:
        rows = list(csv.DictReader(ln for ln in f if not ln.startswith("#")))
    blocks = defaultdict(list)
    for r in rows:
        blocks[float(r["D"])].append(r)
    return blocks


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv")
    ap.add_argument("-o", "--out", default="convergence.png")
    args = ap.parse_args()

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for D, rows in sorted(read_sweep(args.csv).items()):
        trunc = [r for r in rows if r["n"] != "inf"]
        caps = [float(r["M_n"]) for r in trunc]
        line, = ax1.semilogx(caps, [float(r["psi_n"]) for r in trunc], "o-", base=2, label=f"D = {D:g}")
        ax1.axhline(float(trunc[0]["psi_inf"]), ls="--", color=line.get_color(), lw=0.8)
        gaps = [max(float(r["gap"]), 1e-16) for r in trunc]
        ax2.loglog(caps, gaps, "o-", base=2, color=line.get_color())
    ax1.set_xlabel("cap M_n")
    ax1.set_ylabel("psi_n (bits)")
    ax1.legend()
    ax2.set_xlabel("cap M_n")
    ax2.set_ylabel("psi_inf - psi_n (bits)")
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()

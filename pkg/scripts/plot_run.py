"""Plot the xy trajectories and error curves written by ``dgvf run --out DIR``.

Usage: python scripts/plot_run.py DIR [--save fig.png]   (needs matplotlib)
"""

import argparse
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib.pyplot as plt


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("run_dir")
    p.add_argument("--save")
    args = p.parse_args()
    d = Path(args.run_dir)

    paths = defaultdict(lambda: ([], []))
    for row in read_csv(d / "trajectory.csv"):
        xs, ys = paths[int(row["robot"])]
        xs.append(float(row["x1"]))
        ys.append(float(row["x2"]))

    series = defaultdict(lambda: defaultdict(lambda: ([], [])))
    for row in read_csv(d / "metrics.csv"):
        ts, vs = series[row["kind"]][int(row["index"])]
        ts.append(float(row["t"]))
        vs.append(abs(float(row["value"])))

    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(11, 4.5))
    for xs, ys in paths.values():
        ax0.plot(xs, ys, lw=0.8)
        ax0.plot(xs[-1], ys[-1], "k.", ms=4)
    ax0.set_aspect("equal")
    ax0.set_title("trajectories (x1, x2)")
    for kind, color in (("phi_norm", "C0"), ("coord_err_w1", "C1"), ("coord_err_w2", "C2")):
        for k, (ts, vs) in enumerate(series[kind].values()):
            ax1.semilogy(ts, [max(v, 1e-16) for v in vs], color=color, lw=0.6, label=kind if k == 0 else None)
    ax1.set_xlabel("t [s]")
    ax1.legend()
    fig.tight_layout()
    if args.save:
        fig.savefig(args.save, dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()

"""Run every builtin scenario at its default settings and print a summary table.

Usage: python scripts/run_all_scenarios.py [--out DIR] [--only NAME ...]
"""

import argparse
import time

from dgvf.cli import evaluate_checks
from dgvf.engine import run, write_outputs
from dgvf.scenario import builtin_names, load_scenario


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", help="write per-scenario logs under this directory")
    p.add_argument("--only", nargs="*", help="subset of builtin names")
    args = p.parse_args()
    print(f"{'scenario':16s} {'N':>3s} {'wall s':>7s} {'max |Phi|':>10s} {'coord err':>10s} {'checks':>7s}")
    for name in args.only or builtin_names():
        sc = load_scenario(name)
        t0 = time.perf_counter()
        res = run(sc)
        wall = time.perf_counter() - t0
        s = res.summary
        rows = evaluate_checks(sc, s)
        verdict = "-" if not rows else ("ok" if all(r[3] for r in rows) else "FAILED")
        print(
            f"{name:16s} {sc.N:3d} {wall:7.1f} {s['final_max_phi_norm']:10.2e} "
            f"{s['final_max_coord_err']:10.2e} {verdict:>7s}"
        )
        if args.out:
            write_outputs(res, f"{args.out}/{name}")


if __name__ == "__main__":
    main()

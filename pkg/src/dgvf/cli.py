"""Command-line entry point: ``dgvf run | validate | scenarios``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from typing import Optional, Sequence

from .engine import Scenario, SimulationError, run, write_outputs
from .scenario import (
    ScenarioError,
    audit_assumptions,
    builtin_names,
    load_scenario,
    select_robots,
)

log = logging.getLogger("dgvf")


def parse_robot_list(text: str, N: int) -> list[int]:
    """``"1-9,12"`` to 0-based indices."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = (int(v) for v in part.split("-", 1))
            out.extend(range(a, b + 1))
        else:
            out.append(int(part))
    if not out or any(not 1 <= i <= N for i in out) or len(set(out)) != len(out):
        raise ValueError(f"robot list {text!r} must name distinct robots in 1..{N}")
    return [i - 1 for i in out]


def evaluate_checks(sc: Scenario, summary: dict) -> list[tuple[str, float, float, bool]]:
    """Compare a run summary with the scenario's ``[check]`` thresholds.

    Returns ``(name, value, threshold, passed)`` rows; ``speed_tail_rel`` yields
    one row per virtual coordinate.
    """
    rows = []
    c = sc.checks
    if "phi_final" in c:
        v = summary["final_max_phi_norm"]
        rows.append(("phi_final", v, c["phi_final"], v < c["phi_final"]))
    if "coord_final" in c:
        v = summary["final_max_coord_err"]
        rows.append(("coord_final", v, c["coord_final"], v < c["coord_final"]))
    if "coord_tail" in c:
        v = summary.get("max_coord_err_tail", float("inf"))
        rows.append(("coord_tail", v, c["coord_tail"], v < c["coord_tail"]))
    if "speed_tail_rel" in c:
        errs = summary.get("max_speed_err_tail") or [float("inf")] * 2
        for name, err, star in zip(("w1dot", "w2dot"), errs, (sc.speeds.w1dot_star, sc.speeds.w2dot_star)):
            tol = c["speed_tail_rel"] * (abs(star) if star else 1.0)
            rows.append((f"{name}_tail", err, tol, err <= tol))
    return rows


def _load(args) -> Scenario:
    overrides = {"seed": args.seed, "dt": args.dt, "duration": args.duration}
    sc = load_scenario(args.scenario, **overrides)
    if getattr(args, "robots", None):
        sc = select_robots(sc, parse_robot_list(args.robots, sc.N))
    return sc


def cmd_run(args) -> int:
    sc = _load(args)
    log.info("running %s: N=%d, %d steps of %g s", sc.name, sc.N, sc.steps, sc.dt)
    t0 = time.perf_counter()
    result = run(sc)
    log.info("finished in %.2f s", time.perf_counter() - t0)
    s = result.summary
    print(f"final_max_phi_norm {s['final_max_phi_norm']:.6e}")
    print(f"final_max_coord_err {s['final_max_coord_err']:.6e}")
    mean = s["mean_speed_err_tail"]
    print(f"mean_speed_err_tail {'n/a' if mean is None else format(mean, '.6e')}")
    if args.out:
        paths = write_outputs(result, args.out, args.stride)
        for p in paths.values():
            log.info("wrote %s", p)
    if args.check:
        rows = evaluate_checks(sc, s)
        if not rows:
            print("check: scenario defines no thresholds")
        for name, value, tol, ok in rows:
            print(f"check {name}: {value:.3e} vs {tol:.3e} {'ok' if ok else 'FAILED'}")
        if not all(r[3] for r in rows):
            return 1
    return 0


def cmd_validate(args) -> int:
    sc = _load(args)
    rep = audit_assumptions(sc)
    verdict = "connected" if rep.connected else f"NOT connected ({rep.components} components)"
    print(f"graph: {verdict}")
    for c in rep.curves:
        flag = "ok" if c["ok"] else "EXCEEDS"
        lo, hi = c["window"]
        print(
            f"{c['label']}: sup|d1|={c['d1']:.4g} sup|d2|={c['d2']:.4g} "
            f"on [{lo:g}, {hi:g}] bound {rep.bound:g} {flag}"
        )
    print("assumptions hold" if rep.ok else "assumptions violated")
    return 0 if rep.ok else 1


def cmd_scenarios(args) -> int:
    for name in builtin_names():
        sc = load_scenario(name)
        print(f"{name:16s} N={sc.N:<3d} {sc.model:10s} {sc.description}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dgvf", description="Distributed guiding-vector-field multi-robot simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp):
        sp.add_argument("--scenario", required=True, help="builtin name or path to a TOML file")
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        sp.add_argument("--dt", type=float, help="override the exchange period in seconds")
        sp.add_argument("--duration", type=float, help="override the simulated duration in seconds")
        sp.add_argument("--robots", help="run a subset, e.g. 1-9 (1-based, inclusive)")

    r = sub.add_parser("run", help="simulate a scenario and write logs")
    scenario_args(r)
    r.add_argument("--out", help="directory for trajectory.csv, metrics.csv and summary.json")
    r.add_argument("--stride", type=int, help="write every k-th record (default from scenario)")
    r.add_argument("--check", action="store_true", help="exit non-zero if the scenario thresholds fail")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="audit graph connectivity and curve derivative bounds")
    scenario_args(v)
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("scenarios", help="list builtin scenarios")
    s.set_defaults(func=cmd_scenarios)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = os.environ.get("GVF_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ScenarioError, SimulationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

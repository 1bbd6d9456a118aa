"""Scenario files (TOML): loading, validation, builtin expansion and dumping.

Robot indices in files are 1-based. Builtin scenarios ship as package data
under ``dgvf/scenarios``; values there that are not taken from published
experiments are marked as artifact defaults in each file's comments.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np
import tomli
import tomli_w

from .engine import InitSpec, Scenario
from .expr import ExprSyntaxError, evaluate, is_constant, parse
from .field import FieldGains, PropagationSpeeds
from .graph import OffsetTable, Topology, is_connected
from .paths import CompositeManifold, ParametricCurve, RealTimeTarget, derivative_bounds
from .robot import Saturation

BUILTIN_DIR = "scenarios"


class ScenarioError(ValueError):
    """Invalid scenario content; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


_SCHEMA: dict[str, Any] = {
    "name": None,
    "description": None,
    "model": None,
    "n": None,
    "robots": None,
    "dt": None,
    "duration": None,
    "seed": None,
    "topology": None,
    "output_stride": None,
    "substeps": None,
    "speeds": {"w1dot_star": None, "w2dot_star": None},
    "gains": {"k": None, "kc1": None, "kc2": None},
    "paths": {"f": None, "g": None, "g_offsets_file": None, "override": None, "robot": None},
    "offsets": {"w1_star": None, "w2_star": None, "w1_star_groups": None, "w2_star_groups": None},
    "init": {
        "box_center": None,
        "box_half_width": None,
        "w1_range": None,
        "w2_range": None,
        "theta_range": None,
        "offset_by_star": None,
    },
    "unicycle": {"k_theta": None},
    "saturation": {"v": None, "uz": None, "utheta": None},
    "target": {
        "trace": None,
        "generator": None,
        "start": None,
        "velocity": None,
        "speed": None,
        "amplitude": None,
        "period": None,
        "sample_rate": None,
        "window": None,
    },
    "check": {"phi_final": None, "coord_tail": None, "coord_final": None, "speed_tail_rel": None},
    "audit": {"w1_window": None, "w2_window": None, "derivative_bound": None},
}

_TABLE_ARRAY_KEYS = {
    "paths.override": {"robots", "f", "g"},
    "paths.robot": {"f", "g"},
}


def _check_keys(data: dict, schema: dict, prefix: str = "") -> None:
    for key, value in data.items():
        path = f"{prefix}{key}"
        if key not in schema:
            raise ScenarioError(path, "unknown key")
        sub = schema[key]
        if isinstance(sub, dict):
            if not isinstance(value, dict):
                raise ScenarioError(path, "expected a table")
            _check_keys(value, sub, path + ".")
        elif path in _TABLE_ARRAY_KEYS:
            if not isinstance(value, list) or not all(isinstance(v, dict) for v in value):
                raise ScenarioError(path, "expected an array of tables")
            for k, entry in enumerate(value):
                extra = set(entry) - _TABLE_ARRAY_KEYS[path]
                if extra:
                    raise ScenarioError(f"{path}[{k}].{sorted(extra)[0]}", "unknown key")


def _number(value, key: str) -> float:
    """Numbers may be written as constant expressions, e.g. ``"2*pi/5"``."""
    if isinstance(value, bool):
        raise ScenarioError(key, "expected a number")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            e = parse(value)
        except ExprSyntaxError as exc:
            raise ScenarioError(key, str(exc)) from None
        if not is_constant(e):
            raise ScenarioError(key, f"expected a constant expression, got {value!r}")
        return evaluate(e, 0.0)
    raise ScenarioError(key, f"expected a number, got {type(value).__name__}")


def _numbers(value, key: str, length: Optional[int] = None) -> np.ndarray:
    if not isinstance(value, list):
        value = [value] * (length or 1)
    arr = np.array([_number(v, f"{key}[{i}]") for i, v in enumerate(value)])
    if length is not None and arr.shape[0] != length:
        raise ScenarioError(key, f"expected {length} entries, got {arr.shape[0]}")
    return arr


def _curve(value, key: str, n: int) -> ParametricCurve:
    if not isinstance(value, list) or len(value) != n:
        raise ScenarioError(key, f"expected a list of {n} expressions")
    comps = []
    for j, text in enumerate(value):
        try:
            comps.append(parse(str(text)))
        except ExprSyntaxError as exc:
            raise ScenarioError(f"{key}[{j}]", str(exc)) from None
    return ParametricCurve(tuple(comps))


def _range(value, key: str, N: int) -> tuple[int, int]:
    if not (isinstance(value, list) and len(value) == 2 and all(isinstance(v, int) for v in value)):
        raise ScenarioError(key, "expected [first, last] robot indices (1-based, inclusive)")
    a, b = value
    if not 1 <= a <= b <= N:
        raise ScenarioError(key, f"robot range {value} outside 1..{N}")
    return a - 1, b


def _topology(value, N: int) -> Topology:
    key = "topology"
    if value is None or value == "ring":
        return Topology.ring(N)
    if value == "complete":
        return Topology.complete(N)
    if isinstance(value, dict):
        if set(value) - {"circulant"}:
            raise ScenarioError(key, "only the 'circulant' table form is supported")
        return Topology.circulant(N, [int(s) for s in value["circulant"]])
    if isinstance(value, list):
        pairs = []
        for k, pair in enumerate(value):
            if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(v, int) for v in pair)):
                raise ScenarioError(f"{key}[{k}]", "expected an [i, j] pair")
            pairs.append((pair[0] - 1, pair[1] - 1))
        try:
            return Topology(N, tuple(pairs))
        except ValueError as exc:
            raise ScenarioError(key, str(exc)) from None
    raise ScenarioError(key, "expected 'ring', 'complete', {circulant=[...]} or a list of pairs")


def _star(table: dict, which: str, N: int) -> np.ndarray:
    key = f"offsets.{which}"
    out = np.zeros(N)
    if which in table:
        out = _numbers(table[which], key, N)
    groups = table.get(f"{which}_groups")
    if groups is not None:
        for k, entry in enumerate(groups):
            gkey = f"{key}_groups[{k}]"
            if not (isinstance(entry, list) and len(entry) == 3):
                raise ScenarioError(gkey, "expected [first, last, value]")
            a, b = _range(entry[:2], gkey, N)
            out[a:b] = _number(entry[2], gkey)
    return out


def _read_offsets_csv(path: Path, N: int, n: int) -> list[ParametricCurve]:
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    if header[0] != "robot" or len(header) != n + 1:
        raise ScenarioError("paths.g_offsets_file", f"{path.name}: header must be robot,g1..g{n}")
    if len(body) != N:
        raise ScenarioError("paths.g_offsets_file", f"{path.name}: expected {N} rows, got {len(body)}")
    body.sort(key=lambda r: int(r[0]))
    return [ParametricCurve.constant([float(v) for v in r[1:]]) for r in body]


def _target(table: dict, base: Path, duration: float, n: int) -> RealTimeTarget:
    window = _number(table.get("window", 0.2), "target.window")
    if "trace" in table:
        path = (base / table["trace"]).resolve()
        if not path.exists():
            raise ScenarioError("target.trace", f"file not found: {path}")
        rt = RealTimeTarget.from_csv(path, window=window)
        if rt.n != n:
            raise ScenarioError("target.trace", f"trace has dimension {rt.n}, expected {n}")
        return rt
    gen = table.get("generator")
    rate = _number(table.get("sample_rate", 200.0), "target.sample_rate")
    ts = np.arange(0.0, duration + 1.0 + 0.5 / rate, 1.0 / rate)
    start = _numbers(table.get("start", [0.0] * n), "target.start", n)
    if gen == "line":
        vel = _numbers(table.get("velocity", [0.01] + [0.0] * (n - 1)), "target.velocity", n)
        pos = start + ts[:, None] * vel
    elif gen == "curve":
        speed = _number(table.get("speed", 0.01), "target.speed")
        amp = _number(table.get("amplitude", 0.1), "target.amplitude")
        period = _number(table.get("period", 120.0), "target.period")
        pos = np.tile(start, (ts.size, 1))
        pos[:, 0] += speed * ts
        pos[:, 1] += amp * np.sin(2.0 * np.pi * ts / period)
    else:
        raise ScenarioError("target.generator", "expected 'line' or 'curve' (or give target.trace)")
    return RealTimeTarget(ts, pos, window=window)


def scenario_from_dict(data: dict, base: Path = Path("."), source: str = "<dict>") -> Scenario:
    """Resolve a parsed scenario table into a :class:`Scenario`."""
    _check_keys(data, _SCHEMA)
    for key in ("model", "n", "robots"):
        if key not in data:
            raise ScenarioError(key, "missing required key")
    n = int(data["n"])
    N = int(data["robots"])
    if n < 1 or N < 1:
        raise ScenarioError("n" if n < 1 else "robots", "must be positive")
    dt = _number(data.get("dt", 0.01), "dt")
    duration = _number(data.get("duration", 10.0), "duration")
    paths = data.get("paths", {})

    target = None
    if "target" in data:
        target = _target(data["target"], base, duration, n)

    def make_f(value, key):
        if value == "target":
            if target is None:
                raise ScenarioError(key, "f = 'target' requires a [target] table")
            return target
        return _curve(value, key, n)

    f_curves: list = [None] * N
    g_curves: list = [None] * N
    if "f" in paths:
        f_curves = [make_f(paths["f"], "paths.f")] * N
    if "g" in paths:
        g_curves = [_curve(paths["g"], "paths.g", n)] * N
    if "g_offsets_file" in paths:
        path = (base / paths["g_offsets_file"]).resolve()
        if not path.exists():
            raise ScenarioError("paths.g_offsets_file", f"file not found: {path}")
        g_curves = _read_offsets_csv(path, N, n)
    for k, entry in enumerate(paths.get("override", [])):
        key = f"paths.override[{k}]"
        a, b = _range(entry.get("robots"), key + ".robots", N)
        if "f" in entry:
            f_curves[a:b] = [make_f(entry["f"], key + ".f")] * (b - a)
        if "g" in entry:
            g_curves[a:b] = [_curve(entry["g"], key + ".g", n)] * (b - a)
    if "robot" in paths:
        if len(paths["robot"]) != N:
            raise ScenarioError("paths.robot", f"expected {N} entries")
        for i, entry in enumerate(paths["robot"]):
            f_curves[i] = make_f(entry["f"], f"paths.robot[{i}].f")
            g_curves[i] = _curve(entry["g"], f"paths.robot[{i}].g", n)
    for i in range(N):
        if f_curves[i] is None or g_curves[i] is None:
            raise ScenarioError("paths", f"robot {i + 1} has no {'f' if f_curves[i] is None else 'g'} curve")
    manifolds = [CompositeManifold(f, g) for f, g in zip(f_curves, g_curves)]

    gt = data.get("gains", {})
    try:
        k = _numbers(gt.get("k", 1.0), "gains.k")
        gains = FieldGains(
            tuple(k) if k.size > 1 else (float(k[0]),) * n,
            _number(gt.get("kc1", 1.0), "gains.kc1"),
            _number(gt.get("kc2", 1.0), "gains.kc2"),
        )
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError("gains", str(exc)) from None
    sp = data.get("speeds", {})
    speeds = PropagationSpeeds(
        _number(sp.get("w1dot_star", 0.0), "speeds.w1dot_star"),
        _number(sp.get("w2dot_star", 0.0), "speeds.w2dot_star"),
    )
    off = data.get("offsets", {})
    offsets = OffsetTable(_star(off, "w1_star", N), _star(off, "w2_star", N))

    it = data.get("init", {})
    init = InitSpec(
        box_center=tuple(_numbers(it.get("box_center", [0.0] * n), "init.box_center", n)),
        box_half_width=_number(it.get("box_half_width", 10.0), "init.box_half_width"),
        w1_range=tuple(_numbers(it.get("w1_range", [-1.0, 1.0]), "init.w1_range", 2)),
        w2_range=tuple(_numbers(it.get("w2_range", [-1.0, 1.0]), "init.w2_range", 2)),
        theta_range=tuple(_numbers(it.get("theta_range", ["-pi", "pi"]), "init.theta_range", 2)),
        offset_by_star=bool(it.get("offset_by_star", False)),
    )
    sat = None
    if "saturation" in data:
        st = data["saturation"]
        try:
            sat = Saturation(
                **{k: _number(v, f"saturation.{k}") for k, v in st.items()}
            )
        except ValueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError("saturation", str(exc)) from None
    k_theta = _number(data.get("unicycle", {}).get("k_theta", 2.0), "unicycle.k_theta")
    checks = {k: _number(v, f"check.{k}") for k, v in data.get("check", {}).items()}
    audit = {}
    for k, v in data.get("audit", {}).items():
        audit[k] = tuple(_numbers(v, f"audit.{k}", 2)) if k.endswith("window") else _number(v, f"audit.{k}")

    try:
        return Scenario(
            name=str(data.get("name", Path(source).stem)),
            model=str(data["model"]),
            manifolds=manifolds,
            topology=_topology(data.get("topology"), N),
            offsets=offsets,
            gains=gains,
            speeds=speeds,
            dt=dt,
            duration=duration,
            seed=int(data.get("seed", 0)),
            init=init,
            target=target,
            target_spec=dict(data["target"]) if "target" in data else None,
            saturation=sat,
            k_theta=k_theta,
            checks=checks,
            audit=audit,
            output_stride=int(data.get("output_stride", 1)),
            substeps=int(data.get("substeps", 1)),
            description=str(data.get("description", "")),
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError("", str(exc)) from None


def builtin_names() -> list[str]:
    root = resources.files("dgvf") / BUILTIN_DIR
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_scenario(name_or_path, **overrides) -> Scenario:
    """Load a builtin by name or a TOML file by path.

    ``overrides`` replace top-level keys before resolution (``seed``, ``dt``,
    ``duration`` and so on).
    """
    text = str(name_or_path)
    if text in builtin_names():
        root = resources.files("dgvf") / BUILTIN_DIR
        with resources.as_file(root / f"{text}.toml") as p:
            return _load_file(Path(p), overrides)
    path = Path(text)
    if not path.exists():
        raise FileNotFoundError(f"no builtin scenario or file named {text!r}")
    return _load_file(path, overrides)


def _load_file(path: Path, overrides: dict) -> Scenario:
    try:
        data = tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError("", f"{path}: {exc}") from None
    data.update({k: v for k, v in overrides.items() if v is not None})
    return scenario_from_dict(data, base=path.parent, source=str(path))


def select_robots(sc: Scenario, indices) -> Scenario:
    """Sub-scenario on robots ``indices`` (0-based), keeping edges inside the subset."""
    idx = [int(i) for i in indices]
    pos = {r: k for k, r in enumerate(idx)}
    edges = tuple((pos[i], pos[j]) for i, j in sc.topology.edges if i in pos and j in pos)
    return Scenario(
        name=f"{sc.name}[{len(idx)}]",
        model=sc.model,
        manifolds=[sc.manifolds[i] for i in idx],
        topology=Topology(len(idx), edges),
        offsets=OffsetTable(sc.offsets.w1_star[idx], sc.offsets.w2_star[idx]),
        gains=sc.gains,
        speeds=sc.speeds,
        dt=sc.dt,
        duration=sc.duration,
        seed=sc.seed,
        init=sc.init,
        target=sc.target,
        target_spec=sc.target_spec,
        saturation=sc.saturation,
        k_theta=sc.k_theta,
        checks=dict(sc.checks),
        audit=dict(sc.audit),
        output_stride=sc.output_stride,
        substeps=sc.substeps,
        description=sc.description,
    )


# ---------------------------------------------------------------------------
# dumping


def scenario_to_dict(sc: Scenario, trace_name: Optional[str] = None) -> dict:
    """Fully resolved table form of ``sc``; robots and edges are listed explicitly."""
    d: dict[str, Any] = {
        "name": sc.name,
        "description": sc.description,
        "model": sc.model,
        "n": sc.n,
        "robots": sc.N,
        "dt": sc.dt,
        "duration": sc.duration,
        "seed": sc.seed,
        "output_stride": sc.output_stride,
        "substeps": sc.substeps,
        "topology": [[i + 1, j + 1] for i, j in sc.topology.edges],
        "speeds": {"w1dot_star": sc.speeds.w1dot_star, "w2dot_star": sc.speeds.w2dot_star},
        "gains": {"k": list(sc.gains.k), "kc1": sc.gains.kc1, "kc2": sc.gains.kc2},
        "offsets": {
            "w1_star": [float(v) for v in sc.offsets.w1_star],
            "w2_star": [float(v) for v in sc.offsets.w2_star],
        },
        "init": {
            "box_center": [float(v) for v in sc.init.box_center],
            "box_half_width": float(sc.init.box_half_width),
            "w1_range": [float(v) for v in sc.init.w1_range],
            "w2_range": [float(v) for v in sc.init.w2_range],
            "theta_range": [float(v) for v in sc.init.theta_range],
            "offset_by_star": sc.init.offset_by_star,
        },
        "unicycle": {"k_theta": sc.k_theta},
    }
    robots = []
    for m in sc.manifolds:
        robots.append({"f": "target" if m.realtime else m.f.strings(), "g": m.g.strings()})
    d["paths"] = {"robot": robots}
    if sc.target is not None:
        if trace_name is None:
            raise ValueError("scenario has a target trace; pass trace_name to dump it")
        d["target"] = {"trace": trace_name, "window": sc.target.window}
    if sc.saturation is not None:
        d["saturation"] = {
            k: getattr(sc.saturation, k) for k in ("v", "uz", "utheta") if getattr(sc.saturation, k) is not None
        }
    if sc.checks:
        d["check"] = dict(sc.checks)
    if sc.audit:
        d["audit"] = {k: list(v) if isinstance(v, tuple) else v for k, v in sc.audit.items()}
    return d


def dump_scenario(sc: Scenario, path) -> Path:
    """Write ``sc`` as TOML (plus ``<stem>_target.csv`` when it tracks a live target)."""
    path = Path(path)
    trace_name = None
    if sc.target is not None:
        trace_name = f"{path.stem}_target.csv"
        sc.target.to_csv(path.parent / trace_name)
    path.write_text(tomli_w.dumps(scenario_to_dict(sc, trace_name)))
    return path


def scenarios_equivalent(a: Scenario, b: Scenario, atol: float = 0.0) -> bool:
    """Semantic equality of resolved scenarios (curves compared by canonical text)."""
    if (a.model, a.n, a.N, a.dt, a.duration, a.seed, a.k_theta, a.substeps) != (
        b.model,
        b.n,
        b.N,
        b.dt,
        b.duration,
        b.seed,
        b.k_theta,
        b.substeps,
    ):
        return False
    if a.topology.edges != b.topology.edges:
        return False
    if a.gains.k_array(a.n).tolist() != b.gains.k_array(b.n).tolist():
        return False
    if (a.gains.kc1, a.gains.kc2, a.speeds, a.saturation) != (b.gains.kc1, b.gains.kc2, b.speeds, b.saturation):
        return False
    for x, y in ((a.offsets.w1_star, b.offsets.w1_star), (a.offsets.w2_star, b.offsets.w2_star)):
        if not np.allclose(x, y, rtol=0, atol=atol):
            return False
    if a.init != b.init or a.checks != b.checks or a.audit != b.audit:
        return False
    for ma, mb in zip(a.manifolds, b.manifolds):
        if ma.realtime != mb.realtime or ma.g.strings() != mb.g.strings():
            return False
        if not ma.realtime and ma.f.strings() != mb.f.strings():
            return False
    if (a.target is None) != (b.target is None):
        return False
    if a.target is not None:
        if a.target.window != b.target.window:
            return False
        if not (
            np.array_equal(a.target.times, b.target.times) and np.array_equal(a.target.positions, b.target.positions)
        ):
            return False
    return True


# ---------------------------------------------------------------------------
# assumption audit


@dataclass
class AuditReport:
    connected: bool
    components: int
    curves: list[dict]
    bound: float

    @property
    def bounded(self) -> bool:
        return all(c["d1"] <= self.bound and c["d2"] <= self.bound for c in self.curves)

    @property
    def ok(self) -> bool:
        return self.connected and self.bounded


def default_windows(sc: Scenario) -> tuple[tuple[float, float], tuple[float, float]]:
    """Parameter ranges a run can visit: initial interval swept at the desired speed."""
    out = []
    for rng, star, speed in (
        (sc.init.w1_range, sc.offsets.w1_star, sc.speeds.w1dot_star),
        (sc.init.w2_range, sc.offsets.w2_star, sc.speeds.w2dot_star),
    ):
        lo, hi = rng
        if sc.init.offset_by_star:
            lo, hi = lo + float(np.min(star)), hi + float(np.max(star))
        sweep = speed * sc.duration
        lo, hi = min(lo, lo + sweep), max(hi, hi + sweep)
        out.append((lo - 1.0, hi + 1.0))
    return out[0], out[1]


def audit_curve(curve: ParametricCurve, window, bound: float, label: str = "") -> dict:
    d1, d2 = derivative_bounds(curve, window)
    return {
        "label": label,
        "curve": curve.strings(),
        "window": [float(window[0]), float(window[1])],
        "d1": d1,
        "d2": d2,
        "ok": d1 <= bound and d2 <= bound,
    }


def audit_assumptions(sc: Scenario) -> AuditReport:
    """Connectivity of the graph and sampled derivative bounds of every distinct curve."""
    w1win, w2win = default_windows(sc)
    w1win = sc.audit.get("w1_window", w1win)
    w2win = sc.audit.get("w2_window", w2win)
    bound = sc.audit.get("derivative_bound", 1e6)
    curves = []
    seen = set()
    for i, m in enumerate(sc.manifolds):
        for which, c, win in (("f", m.f, w1win), ("g", m.g, w2win)):
            if isinstance(c, RealTimeTarget):
                continue
            key = (which, tuple(c.strings()))
            if key in seen:
                continue
            seen.add(key)
            curves.append(audit_curve(c, win, bound, f"{which} (robot {i + 1})"))
    return AuditReport(is_connected(sc.topology), len(sc.topology.components()), curves, bound)

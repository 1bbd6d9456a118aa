"""Fixed-step RK4 simulation of N robots with synchronous neighbor exchange.

Each step snapshots every robot's ``(w1, w2)`` and evaluates the consensus
residuals once from that snapshot. The residuals then stay frozen while the
robots advance through ``substeps`` RK4 steps, so information flows along graph
edges exactly once per round.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .field import FieldGains, PropagationSpeeds, closed_form_field
from .graph import OffsetTable, Topology, edge_errors, is_connected
from .paths import CompositeManifold, CurveBank, RealTimeTarget
from .robot import Saturation, unicycle_controls_batch, wrap_angle

log = logging.getLogger(__name__)

MODELS = ("integrator", "unicycle")


class SimulationError(RuntimeError):
    def __init__(self, message: str, robot: int, step: int):
        super().__init__(f"{message} (robot {robot + 1}, step {step})")
        self.robot = robot
        self.step = step


@dataclass
class InitSpec:
    """Seeded uniform box for positions and intervals for ``w1``, ``w2`` and heading."""

    box_center: tuple[float, ...]
    box_half_width: float = 10.0
    w1_range: tuple[float, float] = (-1.0, 1.0)
    w2_range: tuple[float, float] = (-1.0, 1.0)
    theta_range: tuple[float, float] = (-math.pi, math.pi)
    offset_by_star: bool = False


@dataclass
class Scenario:
    name: str
    model: str
    manifolds: list[CompositeManifold]
    topology: Topology
    offsets: OffsetTable
    gains: FieldGains
    speeds: PropagationSpeeds
    dt: float = 0.01
    duration: float = 10.0
    seed: int = 0
    init: Optional[InitSpec] = None
    target: Optional[RealTimeTarget] = None
    target_spec: Optional[dict] = None
    saturation: Optional[Saturation] = None
    k_theta: float = 2.0
    checks: dict = field(default_factory=dict)
    audit: dict = field(default_factory=dict)
    output_stride: int = 1
    substeps: int = 1
    description: str = ""

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.duration < 0:
            raise ValueError("duration must be non-negative")
        if len(self.manifolds) != self.topology.N:
            raise ValueError("one manifold per robot required")
        if self.offsets.w1_star.shape[0] != self.N:
            raise ValueError("offset table length must equal robot count")
        if len({m.n for m in self.manifolds}) != 1:
            raise ValueError("all manifolds must share the ambient dimension")
        if self.k_theta <= 0:
            raise ValueError("k_theta must be positive")
        if self.substeps < 1:
            raise ValueError("substeps must be at least 1")
        self.gains.k_array(self.n)
        if self.init is None:
            self.init = InitSpec(box_center=(0.0,) * self.n)
        if not is_connected(self.topology):
            log.warning("scenario %s: communication graph is not connected", self.name)

    @property
    def N(self) -> int:
        return self.topology.N

    @property
    def n(self) -> int:
        return self.manifolds[0].n

    @property
    def steps(self) -> int:
        # tolerate representation error in duration/dt
        return int(math.floor(self.duration / self.dt + 1e-9))

    @property
    def state_dim(self) -> int:
        return self.n + (3 if self.model == "unicycle" else 2)

    @cached_property
    def compiled(self) -> "_Compiled":
        return _Compiled(self)


@dataclass
class WorldState:
    t: float
    step: int
    states: np.ndarray  # (N, n+2) integrator, (N, n+3) unicycle: x, theta, w1, w2
    theta_d: Optional[np.ndarray] = None
    degenerate_count: int = 0

    def w(self, n: int) -> np.ndarray:
        return self.states[:, -2:]


class _Compiled:
    """Per-scenario precomputation: curve banks and consensus matrices."""

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.n = sc.n
        self.unicycle = sc.model == "unicycle"
        self.realtime = sc.manifolds[0].realtime
        if any(m.realtime != self.realtime for m in sc.manifolds):
            raise ValueError("either all robots use a live target or none do")
        if self.realtime:
            if any(m.f is not sc.target for m in sc.manifolds):
                raise ValueError("live-target manifolds must reference the scenario target")
            self.fbank = None
        else:
            self.fbank = CurveBank([m.f for m in sc.manifolds])
        self.gbank = CurveBank([m.g for m in sc.manifolds])
        self.k = sc.gains.k_array(self.n)
        self.lw1 = sc.speeds.lambda_w1(self.n)
        self.lw2 = sc.speeds.lambda_w2(self.n)
        top = sc.topology
        self.L = np.diag(top.degree()) - top.adjacency()
        self.Lw = self.L @ np.column_stack([sc.offsets.w1_star, sc.offsets.w2_star])
        self.edges = np.asarray(top.edges, dtype=int).reshape(-1, 2)

    def f_eval(self, t: float, w1: np.ndarray):
        if self.realtime:
            tgt = self.sc.target
            p = np.broadcast_to(tgt.position(t), (w1.shape[0], self.n))
            v = np.broadcast_to(tgt.velocity(t), (w1.shape[0], self.n))
            return p, v
        return self.fbank.points(w1), self.fbank.tangents(w1)

    def phi(self, t: float, S: np.ndarray) -> np.ndarray:
        n = self.n
        fP, _ = self.f_eval(t, S[:, -2])
        return S[:, :n] - fP - self.gbank.points(S[:, -1])

    def residuals(self, w_snap: np.ndarray, residual_fn=None) -> np.ndarray:
        """``(N, 2)`` consensus residuals from one snapshot of every robot's ``w``."""
        if residual_fn is None:
            return -(self.L @ w_snap) + self.Lw
        sc = self.sc
        c = np.empty((sc.N, 2))
        for i in range(sc.N):
            c[i] = residual_fn(sc.topology, sc.offsets, w_snap[:, 0], w_snap[:, 1], i)
        return c

    def field(self, t: float, S: np.ndarray, c: np.ndarray):
        """Composite field for every robot, plus the following error."""
        n = self.n
        w1, w2 = S[:, -2], S[:, -1]
        fP, fT = self.f_eval(t, w1)
        gP = self.gbank.points(w2)
        gT = self.gbank.tangents(w2)
        Phi = S[:, :n] - fP - gP
        X = closed_form_field(Phi, fT, gT, self.k, self.lw1, self.lw2)
        X[:, n] += self.sc.gains.kc1 * c[:, 0]
        X[:, n + 1] += self.sc.gains.kc2 * c[:, 1]
        return X, Phi

    def derivative(self, t, S, c, theta_d_hold):
        X, Phi = self.field(t, S, c)
        if not self.unicycle:
            return X, Phi, None, None
        n = self.n
        theta = S[:, n]
        v, u_z, u_theta, theta_d, degenerate = unicycle_controls_batch(
            X, theta, self.sc.k_theta, self.sc.saturation, theta_d_hold
        )
        dS = np.empty_like(S)
        dS[:, 0] = v * np.cos(theta)
        dS[:, 1] = v * np.sin(theta)
        if n >= 3:
            dS[:, 2] = u_z
            dS[:, 3:n] = X[:, 3:n]
        dS[:, n] = u_theta
        dS[:, n + 1] = X[:, n]
        dS[:, n + 2] = X[:, n + 1]
        return dS, Phi, theta_d, degenerate


def initial_world(scenario: Scenario, seed: Optional[int] = None) -> WorldState:
    """Seeded random initial state inside the scenario's configured boxes."""
    sc = scenario
    rng = np.random.default_rng(sc.seed if seed is None else seed)
    init = sc.init
    n, N = sc.n, sc.N
    center = np.broadcast_to(np.asarray(init.box_center, dtype=float), (n,))
    half = np.broadcast_to(np.asarray(init.box_half_width, dtype=float), (n,))
    x = center + rng.uniform(-1.0, 1.0, size=(N, n)) * half
    w1 = rng.uniform(*init.w1_range, size=N)
    w2 = rng.uniform(*init.w2_range, size=N)
    if init.offset_by_star:
        w1 = w1 + sc.offsets.w1_star
        w2 = w2 + sc.offsets.w2_star
    if sc.model == "unicycle":
        theta = wrap_angle(rng.uniform(*init.theta_range, size=N))
        states = np.column_stack([x, theta, w1, w2])
        return WorldState(0.0, 0, states, theta_d=theta.copy())
    return WorldState(0.0, 0, np.column_stack([x, w1, w2]))


def world_from_states(scenario: Scenario, states, t: float = 0.0) -> WorldState:
    states = np.array(states, dtype=float)
    if states.shape != (scenario.N, scenario.state_dim):
        raise ValueError(f"expected states of shape {(scenario.N, scenario.state_dim)}")
    theta_d = states[:, scenario.n].copy() if scenario.model == "unicycle" else None
    return WorldState(t, 0, states, theta_d=theta_d)


def _rk4(world: WorldState, sc: Scenario, residual_fn=None):
    """One exchange round: ``sc.substeps`` RK4 steps against a single neighbor snapshot."""
    c = sc.compiled
    h = sc.dt / sc.substeps
    t, S = world.t, world.states
    cres = c.residuals(S[:, -2:].copy(), residual_fn)
    hold = world.theta_d
    n_deg = 0
    Phi0 = None
    # overflow is reported as SimulationError below, not as numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for sub in range(sc.substeps):
            ts = t + sub * h
            k1, Phi, theta_d, degenerate = c.derivative(ts, S, cres, hold)
            if Phi0 is None:
                Phi0 = Phi
            k2, _, _, _ = c.derivative(ts + 0.5 * h, S + 0.5 * h * k1, cres, hold)
            k3, _, _, _ = c.derivative(ts + 0.5 * h, S + 0.5 * h * k2, cres, hold)
            k4, _, _, _ = c.derivative(ts + h, S + h * k3, cres, hold)
            S = S + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if c.unicycle:
                S[:, c.n] = wrap_angle(S[:, c.n])
                n_deg += int(np.count_nonzero(degenerate))
                hold = theta_d
    S_new = S
    if not np.all(np.isfinite(S_new)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(S_new), axis=1))[0])
        raise SimulationError("non-finite state", bad, world.step)
    # the step index advances by one and time is recomputed from it to avoid drift
    new = WorldState(
        (world.step + 1) * sc.dt,
        world.step + 1,
        S_new,
        theta_d=theta_d,
        degenerate_count=world.degenerate_count + n_deg,
    )
    return new, Phi0


def step(world: WorldState, scenario: Scenario, residual_fn=None) -> WorldState:
    """Advance all robots by one synchronous round of length ``scenario.dt``."""
    return _rk4(world, scenario, residual_fn)[0]


@dataclass
class MetricsLog:
    t: np.ndarray  # (K,)
    phi_norm: np.ndarray  # (K, N)
    coord_err_w1: np.ndarray  # (K, E)
    coord_err_w2: np.ndarray  # (K, E)
    w: np.ndarray  # (K, N, 2)
    edges: np.ndarray  # (E, 2), 0-based

    @property
    def records(self) -> int:
        return self.t.shape[0]

    @cached_property
    def wdot(self) -> np.ndarray:
        return estimate_parametric_speeds(self)


@dataclass
class RunResult:
    scenario: Scenario
    trajectory: np.ndarray  # (K, N, state_dim)
    metrics: MetricsLog
    summary: dict
    final: WorldState


def estimate_parametric_speeds(log: MetricsLog) -> np.ndarray:
    """Finite-difference ``(w1dot, w2dot)`` per record and robot, shape ``(K, N, 2)``.

    Central differences in the interior, one-sided at both ends.
    """
    if log.records < 2:
        raise ValueError("need at least two records to estimate parametric speeds")
    return np.gradient(log.w, log.t, axis=0, edge_order=1)


def tail_mask(t: np.ndarray, fraction: float = 0.1) -> np.ndarray:
    """Records in the last ``fraction`` of the run (always at least the final one)."""
    T = t[-1]
    mask = t >= t[0] + (1.0 - fraction) * (T - t[0]) - 1e-12
    mask[-1] = True
    return mask


def summarize(sc: Scenario, m: MetricsLog, degenerate_count: int = 0) -> dict:
    final_phi = float(np.max(m.phi_norm[-1]))
    if m.coord_err_w1.shape[1]:
        final_coord = float(max(np.max(np.abs(m.coord_err_w1[-1])), np.max(np.abs(m.coord_err_w2[-1]))))
    else:
        final_coord = 0.0
    summary = {
        "scenario": sc.name,
        "robots": sc.N,
        "steps": m.records - 1,
        "final_max_phi_norm": final_phi,
        "final_max_coord_err": final_coord,
        "mean_speed_err_tail": None,
    }
    if m.records >= 2:
        mask = tail_mask(m.t)
        wd = m.wdot[mask]
        star = np.array([sc.speeds.w1dot_star, sc.speeds.w2dot_star])
        err = np.abs(wd - star)
        summary["mean_speed_err_tail"] = float(np.mean(err))
        summary["max_speed_err_tail"] = [float(np.max(err[..., 0])), float(np.max(err[..., 1]))]
        if m.coord_err_w1.shape[1]:
            summary["max_coord_err_tail"] = float(
                max(np.max(np.abs(m.coord_err_w1[mask])), np.max(np.abs(m.coord_err_w2[mask])))
            )
        else:
            summary["max_coord_err_tail"] = 0.0
    summary["degenerate_field_steps"] = int(degenerate_count)
    return summary


def run(scenario: Scenario, world: Optional[WorldState] = None, residual_fn=None) -> RunResult:
    """Run ``floor(duration/dt)`` steps and collect the trajectory, metrics and summary."""
    sc = scenario
    c = sc.compiled
    world = initial_world(sc) if world is None else world
    K = sc.steps + 1
    N = sc.N
    E = c.edges.shape[0]
    traj = np.empty((K, N, sc.state_dim))
    t = np.empty(K)
    phi_norm = np.empty((K, N))
    e1 = np.empty((K, E))
    e2 = np.empty((K, E))

    def record(k, wld, Phi):
        traj[k] = wld.states
        t[k] = wld.t
        with np.errstate(over="ignore"):  # a diverging run records inf, then aborts on the next step
            phi_norm[k] = np.linalg.norm(Phi, axis=1)
        a, b = edge_errors(sc.topology, sc.offsets, wld.states[:, -2], wld.states[:, -1])
        e1[k] = a
        e2[k] = b

    for k in range(K - 1):
        new, Phi = _rk4(world, sc, residual_fn)
        record(k, world, Phi)
        world = new
    record(K - 1, world, c.phi(world.t, world.states))
    metrics = MetricsLog(t, phi_norm, e1, e2, traj[:, :, -2:].copy(), c.edges.copy())
    return RunResult(sc, traj, metrics, summarize(sc, metrics, world.degenerate_count), world)


# ---------------------------------------------------------------------------
# output


def _g(v: float) -> str:
    return format(float(v), ".17g")


def write_trajectory_csv(result: RunResult, path, stride: int = 1) -> None:
    sc = result.scenario
    n = sc.n
    uni = sc.model == "unicycle"
    lines = ["step,t,robot," + ",".join(f"x{j + 1}" for j in range(n)) + ",theta,w1,w2"]
    for k in range(0, result.trajectory.shape[0], stride):
        tk = _g(result.metrics.t[k])
        for i, row in enumerate(result.trajectory[k]):
            xs = ",".join(_g(v) for v in row[:n])
            theta = _g(row[n]) if uni else ""
            lines.append(f"{k},{tk},{i + 1},{xs},{theta},{_g(row[-2])},{_g(row[-1])}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_metrics_csv(result: RunResult, path, stride: int = 1) -> None:
    m = result.metrics
    wd = m.wdot if m.records >= 2 else np.zeros_like(m.w)
    lines = ["step,t,kind,index,value"]
    for k in range(0, m.records, stride):
        tk = _g(m.t[k])
        pre = f"{k},{tk},"
        lines.extend(f"{pre}phi_norm,{i + 1},{_g(v)}" for i, v in enumerate(m.phi_norm[k]))
        lines.extend(f"{pre}coord_err_w1,{e + 1},{_g(v)}" for e, v in enumerate(m.coord_err_w1[k]))
        lines.extend(f"{pre}coord_err_w2,{e + 1},{_g(v)}" for e, v in enumerate(m.coord_err_w2[k]))
        lines.extend(f"{pre}w1dot,{i + 1},{_g(v)}" for i, v in enumerate(wd[k, :, 0]))
        lines.extend(f"{pre}w2dot,{i + 1},{_g(v)}" for i, v in enumerate(wd[k, :, 1]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_summary_json(result: RunResult, path) -> None:
    Path(path).write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n")


def write_outputs(result: RunResult, out_dir, stride: Optional[int] = None) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stride = result.scenario.output_stride if stride is None else stride
    paths = {
        "trajectory": out / "trajectory.csv",
        "metrics": out / "metrics.csv",
        "summary": out / "summary.json",
    }
    write_trajectory_csv(result, paths["trajectory"], stride)
    write_metrics_csv(result, paths["metrics"], stride)
    write_summary_json(result, paths["summary"])
    return paths

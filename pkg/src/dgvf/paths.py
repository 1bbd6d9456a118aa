"""Interception curves f, enclosing curves g, and the composite-manifold error."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .expr import Expr, compile_numpy, differentiate, evaluate, is_constant, parse, to_string


@dataclass(frozen=True)
class ParametricCurve:
    """A curve ``w -> (c_1(w), ..., c_n(w))`` with exact first and second derivatives."""

    components: tuple[Expr, ...]
    d1: tuple[Expr, ...] = field(init=False, repr=False, compare=False)
    d2: tuple[Expr, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.components) == 0:
            raise ValueError("curve needs at least one component")
        d1 = tuple(differentiate(c) for c in self.components)
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "d1", d1)
        object.__setattr__(self, "d2", tuple(differentiate(c) for c in d1))

    @classmethod
    def from_strings(cls, texts: Sequence[str]) -> "ParametricCurve":
        return cls(tuple(parse(str(t)) for t in texts))

    @classmethod
    def constant(cls, values: Sequence[float]) -> "ParametricCurve":
        return cls.from_strings([repr(float(v)) if v >= 0 else f"-{-float(v)!r}" for v in values])

    @property
    def n(self) -> int:
        return len(self.components)

    def strings(self) -> list[str]:
        return [to_string(c) for c in self.components]

    def point(self, w: float) -> np.ndarray:
        return np.array([evaluate(c, w) for c in self.components])

    def tangent(self, w: float) -> np.ndarray:
        return np.array([evaluate(c, w) for c in self.d1])

    def second(self, w: float) -> np.ndarray:
        return np.array([evaluate(c, w) for c in self.d2])

    @cached_property
    def _vectorised(self):
        return [tuple(compile_numpy(c) for c in comps) for comps in (self.components, self.d1)]

    def points(self, ws) -> np.ndarray:
        """``(K, n)`` curve points for an array of parameters."""
        ws = np.asarray(ws, dtype=float)
        return np.stack([fn(ws) for fn in self._vectorised[0]], axis=-1)

    def tangents(self, ws) -> np.ndarray:
        ws = np.asarray(ws, dtype=float)
        return np.stack([fn(ws) for fn in self._vectorised[1]], axis=-1)


def curve_point(c: ParametricCurve, w: float) -> np.ndarray:
    return c.point(w)


def curve_tangent(c: ParametricCurve, w: float) -> np.ndarray:
    return c.tangent(w)


def derivative_bounds(c: ParametricCurve, window: tuple[float, float], samples: int = 2001) -> tuple[float, float]:
    """Sampled sup-norms of the first and second derivative over ``window``."""
    ws = np.linspace(window[0], window[1], samples)
    with np.errstate(all="ignore"):
        d1 = np.stack([compile_numpy(e)(ws) for e in c.d1], axis=1)
        d2 = np.stack([compile_numpy(e)(ws) for e in c.d2], axis=1)
    b1 = np.linalg.norm(d1, axis=1)
    b2 = np.linalg.norm(d2, axis=1)
    b1 = float(np.max(b1)) if np.all(np.isfinite(b1)) else float("inf")
    b2 = float(np.max(b2)) if np.all(np.isfinite(b2)) else float("inf")
    return b1, b2


class RealTimeTarget:
    """Time-stamped target positions used in place of a parametric interception curve.

    Positions are linearly interpolated (clamped at both ends). The velocity is a
    one-sided three-point difference over the trailing ``window`` seconds, which
    is exact for linear motion and second-order accurate otherwise.
    """

    def __init__(self, times, positions, window: float = 0.2):
        times = np.asarray(times, dtype=float)
        positions = np.asarray(positions, dtype=float)
        if positions.ndim != 2 or positions.shape[0] != times.shape[0]:
            raise ValueError("positions must be (len(times), n)")
        if times.size and np.any(np.diff(times) <= 0):
            raise ValueError("target trace times must be strictly increasing")
        if not np.all(np.isfinite(positions)):
            raise ValueError("target trace positions must be finite")
        if window <= 0:
            raise ValueError("velocity window must be positive")
        self._t = list(times)
        self._p = [row for row in positions]
        self.window = float(window)
        self._n = positions.shape[1] if positions.size else None
        self._cache = None

    @property
    def n(self) -> int:
        return self._n

    def append(self, t: float, position) -> None:
        position = np.asarray(position, dtype=float)
        if self._t and t <= self._t[-1]:
            raise ValueError("target samples must arrive in increasing time")
        if self._n is None:
            self._n = position.shape[0]
        elif position.shape != (self._n,):
            raise ValueError("dimension mismatch in target sample")
        if not np.all(np.isfinite(position)):
            raise ValueError("target trace positions must be finite")
        self._t.append(float(t))
        self._p.append(position)
        self._cache = None

    def _arrays(self):
        if self._cache is None:
            self._cache = (np.asarray(self._t), np.asarray(self._p))
        return self._cache

    @property
    def times(self) -> np.ndarray:
        return self._arrays()[0]

    @property
    def positions(self) -> np.ndarray:
        return self._arrays()[1]

    def position(self, t: float) -> np.ndarray:
        ts, ps = self._arrays()
        if ts.size == 0:
            raise ValueError("empty target trace")
        if t <= ts[0]:
            return ps[0].copy()
        if t >= ts[-1]:
            return ps[-1].copy()
        k = int(np.searchsorted(ts, t, side="right")) - 1
        u = (t - ts[k]) / (ts[k + 1] - ts[k])
        return (1.0 - u) * ps[k] + u * ps[k + 1]

    def velocity(self, t: float) -> np.ndarray:
        ts, ps = self._arrays()
        if ts.size < 2 or t <= ts[1]:
            return np.zeros(ps.shape[1] if ps.size else self._n or 0)
        t = min(t, ts[-1])
        h = min(self.window, t - ts[0])
        if h <= 0:
            return np.zeros(ps.shape[1])
        p0 = self.position(t)
        p1 = self.position(t - 0.5 * h)
        p2 = self.position(t - h)
        return (3.0 * p0 - 4.0 * p1 + p2) / h

    @classmethod
    def from_csv(cls, path, window: float = 0.2) -> "RealTimeTarget":
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header[:1]] != ["t"] or len(header) < 2:
                raise ValueError(f"{path}: trace header must be t,x1,...,xn")
            rows = [[float(v) for v in row] for row in reader if row]
        data = np.asarray(rows, dtype=float).reshape(-1, len(header))
        return cls(data[:, 0], data[:, 1:], window=window)

    def to_csv(self, path) -> None:
        ts, ps = self._arrays()
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{j + 1}" for j in range(ps.shape[1])])
            for t, p in zip(ts, ps):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in p])


def target_velocity(rt: RealTimeTarget, t: float) -> np.ndarray:
    return rt.velocity(t)


Interceptor = Union[ParametricCurve, RealTimeTarget]


@dataclass(frozen=True)
class CompositeManifold:
    """The set ``x = f(w1) + g(w2)``; ``f`` may be a live target trace instead of a curve."""

    f: Interceptor
    g: ParametricCurve

    def __post_init__(self):
        if self.f.n is not None and self.f.n != self.g.n:
            raise ValueError(f"f has dimension {self.f.n} but g has {self.g.n}")

    @property
    def n(self) -> int:
        return self.g.n

    @property
    def realtime(self) -> bool:
        return isinstance(self.f, RealTimeTarget)

    def f_point(self, w1: float, t: float = 0.0) -> np.ndarray:
        return self.f.position(t) if self.realtime else self.f.point(w1)

    def f_tangent(self, w1: float, t: float = 0.0) -> np.ndarray:
        return self.f.velocity(t) if self.realtime else self.f.tangent(w1)


def phi(m: CompositeManifold, xi, t: float = 0.0) -> np.ndarray:
    """Following error ``x - f(w1) - g(w2)`` for a generalized coordinate ``xi``."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (m.n + 2,):
        raise ValueError(f"expected generalized state of length {m.n + 2}, got {xi.shape}")
    x, w1, w2 = xi[: m.n], xi[m.n], xi[m.n + 1]
    return x - m.f_point(w1, t) - m.g.point(w2)


class CurveBank:
    """Vectorised evaluation of one curve per robot.

    Robots whose component expressions print identically share one compiled
    numpy function; constant components collapse to a fixed array.
    """

    def __init__(self, curves: Sequence[ParametricCurve]):
        self.N = len(curves)
        self.n = curves[0].n
        if any(c.n != self.n for c in curves):
            raise ValueError("all curves in a bank must share the ambient dimension")
        self._tables = [self._build([c.components for c in curves]), self._build([c.d1 for c in curves])]

    def _build(self, rows):
        table = []
        for j in range(self.n):
            const = np.zeros(self.N)
            groups: dict[str, tuple] = {}
            for i, comps in enumerate(rows):
                e = comps[j]
                if is_constant(e):
                    const[i] = evaluate(e, 0.0)
                else:
                    key = to_string(e)
                    if key not in groups:
                        groups[key] = (compile_numpy(e), [])
                    groups[key][1].append(i)
            compiled = []
            for fn, idx in groups.values():
                idx = np.asarray(idx)
                full = idx.size == self.N and np.array_equal(idx, np.arange(self.N))
                compiled.append((fn, None if full else idx))
            table.append((const, compiled))
        return table

    def _eval(self, table, w: np.ndarray) -> np.ndarray:
        out = np.empty((self.N, self.n))
        for j, (const, compiled) in enumerate(table):
            col = const.copy()
            for fn, idx in compiled:
                if idx is None:
                    col = fn(w)
                else:
                    col[idx] = fn(w[idx])
            out[:, j] = col
        return out

    def points(self, w: np.ndarray) -> np.ndarray:
        return self._eval(self._tables[0], w)

    def tangents(self, w: np.ndarray) -> np.ndarray:
        return self._eval(self._tables[1], w)

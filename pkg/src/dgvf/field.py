"""Singularity-free navigation field on the composite manifold plus consensus terms.

Generalized coordinates are ``xi = (x_1, ..., x_n, w1, w2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .paths import CompositeManifold, phi


@dataclass(frozen=True)
class GeneralizedState:
    x: np.ndarray
    w1: float
    w2: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        object.__setattr__(self, "x", x)
        if not (np.all(np.isfinite(x)) and np.isfinite(self.w1) and np.isfinite(self.w2)):
            raise ValueError("generalized state must be finite")

    @classmethod
    def from_array(cls, xi) -> "GeneralizedState":
        xi = np.asarray(xi, dtype=float)
        return cls(xi[:-2], float(xi[-2]), float(xi[-1]))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.x, [self.w1, self.w2]])


@dataclass(frozen=True)
class FieldGains:
    k: tuple[float, ...]
    kc1: float = 1.0
    kc2: float = 1.0

    def __post_init__(self):
        k = tuple(float(v) for v in np.atleast_1d(self.k))
        object.__setattr__(self, "k", k)
        if any(not v > 0 for v in k):
            raise ValueError(f"manifold gains k must be positive, got {k}")
        if not (self.kc1 > 0 and self.kc2 > 0):
            raise ValueError("coordination gains kc1, kc2 must be positive")

    @classmethod
    def uniform(cls, n: int, k: float = 1.0, kc1: float = 1.0, kc2: float = 1.0) -> "FieldGains":
        return cls((k,) * n, kc1, kc2)

    def k_array(self, n: int) -> np.ndarray:
        if len(self.k) == 1:
            return np.full(n, self.k[0])
        if len(self.k) != n:
            raise ValueError(f"expected {n} manifold gains, got {len(self.k)}")
        return np.asarray(self.k)


@dataclass(frozen=True)
class PropagationSpeeds:
    """Desired parametric speeds; the wedge-term weights follow from them and ``n``."""

    w1dot_star: float
    w2dot_star: float

    def lambda_w1(self, n: int) -> float:
        return (-1) ** (n + 2) * self.w1dot_star

    def lambda_w2(self, n: int) -> float:
        return (-1) ** (n + 1) * self.w2dot_star

    def lambda_vector(self, n: int) -> np.ndarray:
        # slot n holds lambda_w2 and slot n+1 holds lambda_w1; spatial slots stay zero
        lam = np.zeros(n + 2)
        lam[n] = self.lambda_w2(n)
        lam[n + 1] = self.lambda_w1(n)
        return lam


def wedge(vectors) -> np.ndarray:
    """Generalized cross product of ``m-1`` vectors in ``R^m``.

    Component ``k`` is the cofactor of a formal basis row placed first above the
    stacked inputs, so ``wedge([e1, e2]) == e3`` in ``R^3``. With this
    orientation the wedge route reproduces the closed-form field in every
    dimension, not only odd ones. Leading axes are treated as a batch:
    ``(..., m-1, m) -> (..., m)``.
    """
    V = np.asarray(vectors, dtype=float)
    if V.ndim < 2 or V.shape[-1] != V.shape[-2] + 1:
        raise ValueError(f"wedge needs m-1 vectors of length m, got shape {V.shape}")
    m = V.shape[-1]
    out = np.empty(V.shape[:-2] + (m,))
    cols = np.arange(m)
    for k in range(m):
        out[..., k] = (-1) ** k * np.linalg.det(V[..., cols != k])
    return out


def grad_phi(m: CompositeManifold, xi: GeneralizedState, j: int, t: float = 0.0) -> np.ndarray:
    """Gradient of the ``j``-th error component (0-based) with respect to ``xi``."""
    n = m.n
    if not 0 <= j < n:
        raise IndexError(f"component {j} out of range for n={n}")
    g = np.zeros(n + 2)
    g[j] = 1.0
    g[n] = -m.f_tangent(xi.w1, t)[j]
    g[n + 1] = -m.g.tangent(xi.w2)[j]
    return g


def _check(m: CompositeManifold, xi: GeneralizedState):
    if xi.x.shape != (m.n,):
        raise ValueError(f"state has {xi.x.shape[0]} spatial coordinates, manifold has {m.n}")


def navigation_field(
    m: CompositeManifold,
    xi: GeneralizedState,
    gains: FieldGains,
    speeds: PropagationSpeeds,
    t: float = 0.0,
    method: str = "closed",
) -> np.ndarray:
    """Manifold-navigation field at one state.

    ``method="wedge"`` builds it from the wedge of the error gradients and the
    propagation vector; ``method="closed"`` uses the expanded component formula.
    The two are independent routes to the same vector.
    """
    _check(m, xi)
    n = m.n
    k = gains.k_array(n)
    Phi = phi(m, xi.as_array(), t)
    if method == "wedge":
        grads = [grad_phi(m, xi, j, t) for j in range(n)]
        chi = wedge(grads + [speeds.lambda_vector(n)])
        for j in range(n):
            chi -= k[j] * Phi[j] * grads[j]
        return chi
    if method != "closed":
        raise ValueError(f"unknown method {method!r}")
    fp = m.f_tangent(xi.w1, t)
    gp = m.g.tangent(xi.w2)
    return closed_form_field(Phi[None], fp[None], gp[None], k, speeds.lambda_w1(n), speeds.lambda_w2(n))[0]


def navigation_field_batch(
    m: CompositeManifold,
    states,
    gains: FieldGains,
    speeds: PropagationSpeeds,
    t: float = 0.0,
    method: str = "closed",
) -> np.ndarray:
    """:func:`navigation_field` over a ``(K, n+2)`` stack of generalized states."""
    S = np.asarray(states, dtype=float)
    n = m.n
    if S.ndim != 2 or S.shape[1] != n + 2:
        raise ValueError(f"expected states of shape (K, {n + 2}), got {S.shape}")
    K = S.shape[0]
    w1, w2 = S[:, n], S[:, n + 1]
    if m.realtime:
        fP = np.broadcast_to(m.f.position(t), (K, n))
        fT = np.broadcast_to(m.f.velocity(t), (K, n))
    else:
        fP, fT = m.f.points(w1), m.f.tangents(w1)
    Phi = S[:, :n] - fP - m.g.points(w2)
    gT = m.g.tangents(w2)
    k = gains.k_array(n)
    if method == "closed":
        return closed_form_field(Phi, fT, gT, k, speeds.lambda_w1(n), speeds.lambda_w2(n))
    if method != "wedge":
        raise ValueError(f"unknown method {method!r}")
    rows = np.zeros((K, n + 1, n + 2))
    rows[:, np.arange(n), np.arange(n)] = 1.0
    rows[:, :n, n] = -fT
    rows[:, :n, n + 1] = -gT
    rows[:, n] = speeds.lambda_vector(n)
    chi = wedge(rows)
    chi -= np.einsum("kj,kjc->kc", Phi * k, rows[:, :n])
    return chi


def closed_form_field(Phi, fp, gp, k, lambda_w1: float, lambda_w2: float) -> np.ndarray:
    """Batched closed-form field; ``Phi``, ``fp``, ``gp`` are ``(N, n)`` arrays."""
    N, n = Phi.shape
    s = (-1.0) ** n
    kPhi = Phi * k
    out = np.empty((N, n + 2))
    out[:, :n] = s * (lambda_w1 * fp - lambda_w2 * gp) - kPhi
    out[:, n] = s * lambda_w1 + np.einsum("ij,ij->i", kPhi, fp)
    out[:, n + 1] = -s * lambda_w2 + np.einsum("ij,ij->i", kPhi, gp)
    return out


def composite_field(
    m: CompositeManifold,
    xi: GeneralizedState,
    gains: FieldGains,
    speeds: PropagationSpeeds,
    c1: float,
    c2: float,
    t: float = 0.0,
    method: str = "closed",
) -> np.ndarray:
    """Navigation field plus weighted consensus terms on the ``w1`` and ``w2`` rows."""
    chi = navigation_field(m, xi, gains, speeds, t, method)
    n = m.n
    chi[n] += gains.kc1 * c1
    chi[n + 1] += gains.kc2 * c2
    return chi

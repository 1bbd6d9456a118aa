import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgvf.field import (
    FieldGains,
    GeneralizedState,
    PropagationSpeeds,
    composite_field,
    grad_phi,
    navigation_field,
    navigation_field_batch,
    wedge,
)
from dgvf.paths import CompositeManifold, ParametricCurve, phi
from support import builtin_manifolds

CIRCLE30 = ParametricCurve.from_strings(["30*cos(w)", "30*sin(w)", "0"])
ELLIPSE = ParametricCurve.from_strings(["10*sin(w)*atan(w)", "0", "10*cos(w)"])
SIM2 = CompositeManifold(CIRCLE30, ELLIPSE)
GAINS = FieldGains.uniform(3, 1.0)


def test_wedge_is_cross_product_in_r3():
    np.testing.assert_array_equal(wedge([[1, 0, 0], [0, 1, 0]]), [0, 0, 1])
    a, b = np.array([1.0, 2.0, -0.5]), np.array([0.3, -1.0, 4.0])
    np.testing.assert_allclose(wedge([a, b]), np.cross(a, b), atol=1e-14)


def test_wedge_repeated_vector_vanishes():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(4, 5))
    v[2] = v[0]
    np.testing.assert_allclose(wedge(v), 0.0, atol=1e-12)


def test_wedge_rejects_bad_shape():
    with pytest.raises(ValueError):
        wedge(np.ones((3, 3)))


def test_wedge_orthogonal_and_antisymmetric():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        V = rng.normal(size=(4, 5)) * rng.uniform(0.1, 10)
        out = wedge(V)
        scale = np.prod(np.linalg.norm(V, axis=1))
        assert np.max(np.abs(V @ out)) < 1e-9 * scale * np.max(np.linalg.norm(V, axis=1))
        k = rng.integers(0, 3)
        Vs = V.copy()
        Vs[[k, k + 1]] = Vs[[k + 1, k]]
        np.testing.assert_array_equal(wedge(Vs), -out)


def test_grad_phi_examples():
    const = CompositeManifold(ParametricCurve.constant([1, 2, 3]), ParametricCurve.constant([0, 0, 0]))
    xi = GeneralizedState(np.zeros(3), 0.4, -2.0)
    for j in range(3):
        np.testing.assert_array_equal(grad_phi(const, xi, j), np.eye(5)[j])
    g = grad_phi(SIM2, GeneralizedState(np.zeros(3), 0.0, 0.7), 0)
    np.testing.assert_allclose(g, [1, 0, 0, 0.0, -ELLIPSE.tangent(0.7)[0]])


@pytest.mark.parametrize("label, m, sc", builtin_manifolds()[:6] + builtin_manifolds()[-4:], ids=lambda v: str(v)[:30])
def test_grad_phi_matches_differences(label, m, sc):
    rng = np.random.default_rng(2)
    h = 1e-6
    for _ in range(20):
        xi = rng.uniform(-5, 5, size=m.n + 2)
        for j in range(m.n):
            g = grad_phi(m, GeneralizedState.from_array(xi), j, t=3.0)
            fd = np.empty(m.n + 2)
            for s in range(m.n + 2):
                e = np.zeros(m.n + 2)
                e[s] = h
                fd[s] = (phi(m, xi + e, 3.0)[j] - phi(m, xi - e, 3.0)[j]) / (2 * h)
            if m.realtime:
                fd[m.n] = -m.f_tangent(0.0, 3.0)[j]  # live target: f' is the velocity estimate
            np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-5)


def test_on_manifold_field_is_propagation():
    speeds = PropagationSpeeds(3.0, -2.0)
    for w1, w2 in [(0.0, 0.0), (1.1, -0.4), (-3.0, 2.5)]:
        x = CIRCLE30.point(w1) + ELLIPSE.point(w2)
        chi = navigation_field(SIM2, GeneralizedState(x, w1, w2), GAINS, speeds)
        expected = np.r_[3.0 * CIRCLE30.tangent(w1) - 2.0 * ELLIPSE.tangent(w2), 3.0, -2.0]
        np.testing.assert_allclose(chi, expected, atol=1e-12)
        zero = navigation_field(SIM2, GeneralizedState(x, w1, w2), GAINS, PropagationSpeeds(0, 0))
        np.testing.assert_allclose(zero, 0.0, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_wedge_matches_closed_form_for_every_dimension(n):
    rng = np.random.default_rng(n)
    f = ParametricCurve.from_strings([f"{j + 1}*cos(w + {j})" for j in range(n)])
    g = ParametricCurve.from_strings([f"sin({j + 2}*w)*atan(w)" for j in range(n)])
    m = CompositeManifold(f, g)
    gains = FieldGains(tuple(rng.uniform(0.5, 2, size=n)), 1.0, 1.0)
    speeds = PropagationSpeeds(1.7, -0.6)
    S = rng.uniform(-4, 4, size=(200, n + 2))
    a = navigation_field_batch(m, S, gains, speeds, method="wedge")
    b = navigation_field_batch(m, S, gains, speeds, method="closed")
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-10 * np.abs(b).max())


def test_single_state_routes_agree_with_batch():
    rng = np.random.default_rng(4)
    speeds = PropagationSpeeds(3.0, 3.0)
    S = rng.uniform(-20, 20, size=(10, 5))
    batch = navigation_field_batch(SIM2, S, GAINS, speeds)
    for row, expected in zip(S, batch):
        xi = GeneralizedState.from_array(row)
        np.testing.assert_allclose(navigation_field(SIM2, xi, GAINS, speeds, method="wedge"), expected, rtol=1e-12)
        np.testing.assert_allclose(navigation_field(SIM2, xi, GAINS, speeds), expected, rtol=1e-14)


@given(
    st.lists(st.floats(-100, 100), min_size=5, max_size=5),
    st.floats(-5, 5),
    st.floats(-5, 5),
)
@settings(max_examples=300, deadline=None)
def test_nonvanishing_and_descent(xi, s1, s2):
    speeds = PropagationSpeeds(s1, s2)
    state = GeneralizedState.from_array(xi)
    chi = navigation_field(SIM2, state, GAINS, speeds)
    if (s1, s2) != (0.0, 0.0):
        assert np.linalg.norm(chi) >= 0.5 * min(abs(s1), abs(s2)) and np.linalg.norm(chi) > 0
    Phi = phi(SIM2, np.asarray(xi))
    k = GAINS.k_array(3)
    dV = sum(k[j] * Phi[j] * grad_phi(SIM2, state, j) @ chi for j in range(3))
    assert dV <= 1e-9 * (1 + np.linalg.norm(chi) ** 2)
    if np.linalg.norm(Phi) > 1e-6:
        assert dV < 0


def test_composite_field_adds_weighted_residuals_only_to_w_rows():
    rng = np.random.default_rng(9)
    gains = FieldGains.uniform(3, 1.0, kc1=2.5, kc2=0.4)
    speeds = PropagationSpeeds(3.0, 3.0)
    for _ in range(50):
        xi = GeneralizedState.from_array(rng.uniform(-10, 10, size=5))
        c1, c2 = rng.normal(size=2)
        base = navigation_field(SIM2, xi, gains, speeds)
        comp = composite_field(SIM2, xi, gains, speeds, c1, c2)
        np.testing.assert_array_equal(comp[:3], base[:3])
        assert comp[3] == pytest.approx(base[3] + 2.5 * c1, abs=1e-12)
        assert comp[4] == pytest.approx(base[4] + 0.4 * c2, abs=1e-12)
    xi = GeneralizedState.from_array(rng.uniform(-10, 10, size=5))
    np.testing.assert_array_equal(composite_field(SIM2, xi, gains, speeds, 0.0, 0.0), navigation_field(SIM2, xi, gains, speeds))


def test_lambda_signs_follow_dimension():
    sp = PropagationSpeeds(3.0, 2.0)
    assert (sp.lambda_w1(3), sp.lambda_w2(3)) == (-3.0, 2.0)
    assert (sp.lambda_w1(2), sp.lambda_w2(2)) == (3.0, -2.0)
    np.testing.assert_array_equal(sp.lambda_vector(3), [0, 0, 0, 2.0, -3.0])


@pytest.mark.parametrize("bad", [dict(k=(1.0, -1.0, 1.0)), dict(k=(1.0,), kc1=0.0), dict(k=(0.0,))])
def test_gain_positivity(bad):
    with pytest.raises(ValueError):
        FieldGains(**bad)


def test_state_must_be_finite():
    with pytest.raises(ValueError):
        GeneralizedState(np.array([0.0, np.inf, 0.0]), 0.0, 0.0)

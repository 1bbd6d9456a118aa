"""Independent reference implementations used as test oracles."""

from __future__ import annotations

import math

import mpmath
import numpy as np
from hypothesis import strategies as st

from dgvf.expr import Binary, Constant, Unary, Variable, W

mpmath.mp.dps = 40


def random_expr(rng: np.random.Generator, depth: int = 6):
    """Random expression tree of at most ``depth`` levels."""
    if depth <= 1 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.45:
            return W
        if r < 0.55:
            return Constant(math.pi, "pi")
        return Constant(float(np.round(rng.uniform(-3, 3), 3)))
    r = rng.random()
    if r < 0.3:
        return Unary(str(rng.choice(["neg", "sin", "cos", "atan"])), random_expr(rng, depth - 1))
    op = str(rng.choice(["add", "sub", "mul", "div", "pow"]))
    if op == "pow":
        return Binary("pow", random_expr(rng, depth - 1), Constant(float(rng.integers(0, 4))))
    return Binary(op, random_expr(rng, depth - 1), random_expr(rng, depth - 1))


def expr_strategy(max_depth: int = 6):
    leaves = st.one_of(
        st.just(W),
        st.just(Constant(math.pi, "pi")),
        st.floats(-5, 5, allow_nan=False).map(lambda v: Constant(round(v, 3))),
    )

    def extend(children):
        return st.one_of(
            st.builds(Unary, st.sampled_from(["neg", "sin", "cos", "atan"]), children),
            st.builds(Binary, st.sampled_from(["add", "sub", "mul", "div"]), children, children),
            st.builds(lambda c, k: Binary("pow", c, Constant(float(k))), children, st.integers(0, 4)),
        )

    return st.recursive(leaves, extend, max_leaves=2 ** (max_depth - 1))


class Singular(ArithmeticError):
    pass


def mp_eval(e, w):
    """High-precision evaluation with mpmath, written without reusing dgvf code."""
    if isinstance(e, Constant):
        return mpmath.mpf(e.value) if e.name != "pi" else +mpmath.pi
    if isinstance(e, Variable):
        return mpmath.mpf(w)
    if isinstance(e, Unary):
        a = mp_eval(e.child, w)
        return {"neg": lambda v: -v, "sin": mpmath.sin, "cos": mpmath.cos, "atan": mpmath.atan}[e.op](a)
    a, b = mp_eval(e.left, w), mp_eval(e.right, w)
    if e.op == "add":
        return a + b
    if e.op == "sub":
        return a - b
    if e.op == "mul":
        return a * b
    if e.op == "div":
        if abs(b) < mpmath.mpf("1e-3"):
            raise Singular
        return a / b
    return a ** int(e.right.value)


def mp_central_diff(e, w, h=1e-6):
    w = mpmath.mpf(w)
    return (mp_eval(e, w + h) - mp_eval(e, w - h)) / (2 * h)


def components_union_find(N, edges):
    parent = list(range(N))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
    return len({find(i) for i in range(N)})


def brute_force_wrap(a: float) -> float:
    """Representative of ``a`` modulo 2*pi with the least magnitude, ties to +pi."""
    best = None
    for k in range(-50, 51):
        c = a + 2 * math.pi * k
        if best is None or abs(c) < abs(best) - 1e-12 or (abs(abs(c) - abs(best)) <= 1e-12 and c > best):
            best = c
    return best

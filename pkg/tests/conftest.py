"""Shared fixtures and independent oracles for the test suite."""

import numpy as np
import pytest
import scipy.integrate
import scipy.linalg

from cqlqg.io import random_plant
from cqlqg.lyapunov import StateSpaceTriple
from cqlqg.model import ControllerParams, closed_loop


def stable_matrix(rng, n, abscissa=-0.5):
    """Random n x n matrix shifted so that its spectral abscissa is ``abscissa``."""
    a = rng.standard_normal((n, n))
    return a - (np.max(np.linalg.eigvals(a).real) - abscissa) * np.eye(n)


def random_triple(rng, n=4, m=3, p=2, abscissa=None):
    if abscissa is None:
        abscissa = -rng.uniform(0.3, 1.0)
    return StateSpaceTriple(stable_matrix(rng, n, abscissa), rng.standard_normal((n, m)),
                            rng.standard_normal((p, n)))


def simpson_nodes(a, horizon=None, nodes=4000, step_scale=0.005):
    """Matrix exponentials exp(A t_k) on a uniform grid for composite Simpson.

    The horizon defaults to 40/|spectral abscissa|. At least ``nodes`` nodes
    are used, more when needed to keep dt |A|_2 <= step_scale. The
    exponentials come from repeated squaring of exp(A dt).
    """
    if horizon is None:
        horizon = 40.0 / abs(np.max(np.linalg.eigvals(a).real))
    nodes = max(nodes, int(np.ceil(horizon * np.linalg.norm(a, 2) / step_scale)) + 1)
    if nodes % 2 == 0:
        nodes += 1
    t = np.linspace(0.0, horizon, nodes)
    out = np.empty((nodes,) + a.shape)
    out[0] = np.eye(a.shape[0])
    jump = scipy.linalg.expm(a * (t[1] - t[0]))
    k = 1
    while k < nodes:
        # nodes k..2k-1 from nodes 0..k-1 and exp(A k dt)
        m = min(k, nodes - k)
        out[k:k + m] = out[:m] @ jump
        jump = jump @ jump
        k += m
    return t, out


def quadrature_lyap(a, m, nodes=4000):
    """Oracle for the integral of exp(At) M exp(A^T t) over the half-line."""
    t, e = simpson_nodes(a, nodes=nodes)
    vals = e @ m @ e.transpose(0, 2, 1)
    return scipy.integrate.simpson(vals, x=t, axis=0)


def quadrature_cost(sys, nodes=4000):
    """Oracle for the integral of |C exp(At) B|_F^2 (impulse-response energy)."""
    a, b, c = sys
    t, e = simpson_nodes(a, nodes=nodes)
    vals = np.sum((c @ e @ b) ** 2, axis=(1, 2))
    return scipy.integrate.simpson(vals, x=t)


def random_params(rng, plant, scale=0.3):
    n = plant.n
    r = rng.standard_normal((n, n))
    return ControllerParams(scale * (r + r.T) / 2, scale * rng.standard_normal((n, plant.m2)),
                            scale * rng.standard_normal((n, plant.p)))


def stable_instance(rng, scale=0.3, abscissa=-0.5, tries=200):
    """Random stable plant with random (R, b) giving a stable closed loop."""
    for _ in range(tries):
        plant = random_plant(int(rng.integers(2 ** 31)), abscissa=abscissa).plant()
        params = random_params(rng, plant, scale)
        cls = closed_loop(plant, params)
        if cls.stable and cls.abscissa < -0.05:
            return plant, params
    raise RuntimeError("no stable instance found")


def central(f, h=1e-4):
    """Fourth-order central first difference of a scalar function at 0."""
    return (8 * (f(h) - f(-h)) - (f(2 * h) - f(-2 * h))) / (12 * h)


def second(f, h=1e-3):
    """Fourth-order central second difference of a scalar function at 0."""
    return (16 * (f(h) + f(-h)) - (f(2 * h) + f(-2 * h)) - 30 * f(0.0)) / (12 * h * h)


def dir_rel(analytic, fd):
    return abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-12)


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def separation_defects(plant, cls):
    """Quasi-separation checks at a frozen closed loop.

    Returns (block, commute, res1, res2): the relative mismatch between
    M(b) and [M1(b1) M2(b2)] for a random b, the difference between the
    joint solve of M(b) + F = 0 and the two separate gain solves, and the
    relative residuals of the two gain equations after their updates.
    """
    from cqlqg.derivatives import build_M_operators
    from cqlqg.operators import apply, invert_apply

    ops = build_M_operators(plant, cls)
    m2 = plant.m2
    rng = np.random.default_rng(0)
    b = rng.standard_normal(cls.ctrl.b.shape)
    whole = apply(ops.M, b)
    split = np.hstack([apply(ops.M1, b[:, :m2]), apply(ops.M2, b[:, m2:])])
    block = np.linalg.norm(whole - split) / np.linalg.norm(whole)
    b1 = -invert_apply(ops.M1, ops.forcing1)
    b2 = -invert_apply(ops.M2, ops.forcing2)
    forcing = np.hstack([ops.forcing1, ops.forcing2])
    joint = -invert_apply(ops.M, forcing)
    commute = np.linalg.norm(joint - np.hstack([b1, b2])) / max(np.linalg.norm(joint), 1e-300)
    res1 = np.linalg.norm(apply(ops.M1, b1) + ops.forcing1) / max(np.linalg.norm(ops.forcing1), 1e-300)
    res2 = np.linalg.norm(apply(ops.M2, b2) + ops.forcing2) / max(np.linalg.norm(ops.forcing2), 1e-300)
    return float(block), float(commute), float(res1), float(res2)

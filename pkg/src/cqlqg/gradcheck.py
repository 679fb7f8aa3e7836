"""Finite-difference audit of the analytic cost derivatives.

Each derivative is compared with central differences along random
directions. The reported error for a direction is
|analytic - fd| / max(|analytic|, |fd|, atol) with atol tied to the cost
scale, so that vanishing directional derivatives do not blow up the ratio.
"""

from typing import NamedTuple

import numpy as np

from .derivatives import d_Gamma_E, default_step, grad_R_b, hessian_R_apply
from .lyapunov import StateSpaceTriple, lqg_cost
from .model import ControllerParams, ControllerRealization, assemble_closed_loop, closed_loop
from .linalg import symmetrize

DERIVATIVES = ("dGammaE", "dgammaE", "dRE", "dEdb", "d2RE")
GRADCHECK_TOL = 1e-4


class CheckRow(NamedTuple):
    name: str
    directions: int
    max_rel_error: float
    tol: float

    @property
    def passed(self):
        return self.max_rel_error <= self.tol


class GradcheckResult(NamedTuple):
    rows: list
    cost: float

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    @property
    def worst(self):
        if not self.rows:
            return None
        return max(self.rows, key=lambda r: r.max_rel_error / r.tol)


def _rel(a, b, atol):
    return abs(a - b) / max(abs(a), abs(b), atol)


def _central(f, h):
    return (f(h) - f(-h)) / (2 * h)


def gradient_check(plant, params, directions=20, h=None, rng=None, corrupt_b=False,
                   tol=GRADCHECK_TOL):
    """Compare the analytic derivatives at ``params`` with central differences.

    Parameters
    ----------
    plant : PlantModel
    params : ControllerParams
        Must give a stable closed loop.
    directions : int
        Random directions per derivative. Zero yields an empty table.
    h : float, optional
        Absolute difference step; by default 1e-5 relative to the entries.
    corrupt_b : bool
        Flip the sign of the analytic dE/db (mutation test of the checker).

    Returns
    -------
    GradcheckResult
    """
    rng = np.random.default_rng(0) if rng is None else rng
    cls = closed_loop(plant, params)
    cost = cls.cost
    first = grad_R_b(plant, cls)
    atol = 1e-8 * max(1.0, abs(cost))
    rows = []
    if directions <= 0:
        return GradcheckResult(rows, float(cost))

    def step(x):
        return default_step(x) if h is None else h

    # closed-loop Gamma, restricted to its (A, B, C) pattern
    g = d_Gamma_E(cls)
    tri = cls.triple
    nc, mc = tri.A.shape[0], tri.B.shape[1]
    errs = []
    for _ in range(directions):
        d = rng.standard_normal(g.shape)
        d[nc:, nc:] = 0.0
        dt = StateSpaceTriple.from_gamma(d, nc, mc)
        hh = step(tri.gamma())

        def f(t):
            return lqg_cost(StateSpaceTriple(tri.A + t * dt.A, tri.B + t * dt.B, tri.C + t * dt.C))
        errs.append(_rel(float(np.sum(g * d)), _central(f, hh), atol))
    rows.append(CheckRow("dGammaE", directions, max(errs), tol))

    # controller gamma with (a, b, c) independent
    ctrl = cls.ctrl
    dg = first.dgammaE
    n, m2 = plant.n, plant.m2
    errs = []
    for _ in range(directions):
        da, db, dc = (rng.standard_normal(ctrl.a.shape), rng.standard_normal(ctrl.b.shape),
                      rng.standard_normal(ctrl.c.shape))
        hh = step(ctrl.gamma)

        def f(t):
            b = ctrl.b + t * db
            pert = ControllerRealization(ctrl.a + t * da, b[:, :m2], b[:, m2:], ctrl.c + t * dc)
            return assemble_closed_loop(plant, pert).cost
        analytic = np.sum(dg[:n, :n] * da) + np.sum(dg[:n, n:] * db) + np.sum(dg[n:, :n] * dc)
        errs.append(_rel(float(analytic), _central(f, hh), atol))
    rows.append(CheckRow("dgammaE", directions, max(errs), tol))

    # R along symmetric directions
    errs = []
    for _ in range(directions):
        m = symmetrize(rng.standard_normal((n, n)))
        hh = step(params.R)

        def f(t):
            return closed_loop(plant, params.replace(R=params.R + t * m)).cost
        errs.append(_rel(float(np.sum(first.dRE * m)), _central(f, hh), atol))
    rows.append(CheckRow("dRE", directions, max(errs), tol))

    # b = [b1 b2]
    dedb = -first.dEdb if corrupt_b else first.dEdb
    errs = []
    for _ in range(directions):
        d = rng.standard_normal(params.b.shape)
        hh = step(params.b)

        def f(t):
            return closed_loop(plant, ControllerParams.from_b(params.R, params.b + t * d, m2)).cost
        errs.append(_rel(float(np.sum(dedb * d)), _central(f, hh), atol))
    rows.append(CheckRow("dEdb", directions, max(errs), tol))

    # second derivative in R: <M, d2E(M)> against differences of the analytic gradient
    errs = []
    for _ in range(directions):
        m = symmetrize(rng.standard_normal((n, n)))
        hh = step(params.R)

        def f(t):
            return float(np.sum(grad_R_b(plant, params.replace(R=params.R + t * m), check=False).dRE * m))
        analytic = float(np.sum(m * hessian_R_apply(plant, cls, m)))
        errs.append(_rel(analytic, _central(f, hh), atol))
    rows.append(CheckRow("d2RE", directions, max(errs), tol))
    return GradcheckResult(rows, float(cost))

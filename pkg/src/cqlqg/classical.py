"""Classical LQG baseline: control and filter Riccati equations and gains."""

from typing import NamedTuple

import numpy as np

from .errors import NoStabilizingSolution, NotHurwitz
from .linalg import is_hurwitz, symmetrize
from .lyapunov import TOL_SOLVE, lyap_solve
from .model import ControllerRealization, assemble_closed_loop

MAX_KLEINMAN_ITERS = 100


def care_residual(x, a, b, q, s, r):
    k = np.linalg.solve(r, b.T @ x + s.T)
    return a.T @ x + x @ a + q - (x @ b + s) @ k


def _initial_gain(a, b, r):
    """A gain K with A - B K Hurwitz, from a shifted Lyapunov equation."""
    if is_hurwitz(a)[0]:
        return np.zeros((b.shape[1], a.shape[0]))
    shift = max(0.0, -np.min(np.linalg.eigvals(a).real)) + 1.0
    try:
        # -(A + shift I) is Hurwitz; Z > 0 when (A, B) is controllable
        z = lyap_solve(-(a + shift * np.eye(a.shape[0])), 2 * b @ b.T)
        return b.T @ np.linalg.inv(z)
    except (NotHurwitz, np.linalg.LinAlgError) as exc:
        raise NoStabilizingSolution(f"could not find an initial stabilizing gain: {exc}") from exc


def solve_care(a, b, q, s=None, r=None, tol=TOL_SOLVE, max_iters=MAX_KLEINMAN_ITERS):
    """Stabilizing solution of A^T X + X A + Q = (X B + S) R^{-1} (X B + S)^T.

    Newton-Kleinman iteration: each step solves one Lyapunov equation for
    the closed loop under the current gain.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    q = symmetrize(np.asarray(q, dtype=float))
    n, m = b.shape
    s = np.zeros((n, m)) if s is None else np.asarray(s, dtype=float)
    r = np.eye(m) if r is None else symmetrize(np.asarray(r, dtype=float))
    if np.linalg.eigvalsh(r)[0] <= 0:
        raise NoStabilizingSolution("control weight must be positive definite")
    k = _initial_gain(a, b, r)
    x = None
    for _ in range(max_iters):
        ak = a - b @ k
        if not is_hurwitz(ak)[0]:
            raise NoStabilizingSolution("Newton-Kleinman iterate lost stability")
        weight = q - s @ k - k.T @ s.T + k.T @ r @ k
        x_new = lyap_solve(ak.T, weight, check_stability=False)
        k = np.linalg.solve(r, b.T @ x_new + s.T)
        if x is not None and np.linalg.norm(x_new - x) <= 1e-14 * (1 + np.linalg.norm(x_new)):
            x = x_new
            break
        x = x_new
    scale = 1 + np.linalg.norm(a) * np.linalg.norm(x) + np.linalg.norm(q) + np.linalg.norm(x @ b) ** 2
    resid = np.linalg.norm(care_residual(x, a, b, q, s, r))
    if resid > tol * scale or not is_hurwitz(a - b @ k)[0]:
        raise NoStabilizingSolution(f"no stabilizing solution found (residual {resid:.3e})")
    return x


class ClassicalController(NamedTuple):
    Q1: np.ndarray
    P1: np.ndarray
    c: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    a: np.ndarray
    cost: float
    control_residual: float
    filter_residual: float

    @property
    def realization(self):
        return ControllerRealization(self.a, self.b1, self.b2, self.c)


def classical_controller(plant):
    """Optimal classical controller for the equivalent classical plant.

    That plant measures the controller noise omega directly, so the optimal
    classical gain on that channel is b1 = B2, which cancels omega in the
    estimation error.
    """
    a, b1p, b2p, c, d, c0, d0 = (plant.A, plant.B1, plant.B2, plant.C, plant.D, plant.C0, plant.D0)
    r0 = d0.T @ d0
    q1 = solve_care(a, b2p, c0.T @ c0, c0.T @ d0, r0)
    ddt = d @ d.T
    p1 = solve_care(a.T, c.T, b1p @ b1p.T, b1p @ d.T, ddt)
    c_hat = -np.linalg.solve(r0, b2p.T @ q1 + d0.T @ c0)
    b2_hat = np.linalg.solve(ddt, (p1 @ c.T + b1p @ d.T).T).T
    a_hat = a - b2_hat @ c + b2p @ c_hat
    ctrl = ControllerRealization(a_hat, b2p.copy(), b2_hat, c_hat)
    cls = assemble_closed_loop(plant, ctrl)
    if not cls.stable:
        raise NoStabilizingSolution("classical closed loop is not Hurwitz")
    res_c = float(np.linalg.norm(care_residual(q1, a, b2p, c0.T @ c0, c0.T @ d0, r0)))
    res_f = float(np.linalg.norm(care_residual(p1, a.T, c.T, b1p @ b1p.T, b1p @ d.T, ddt)))
    return ClassicalController(q1, p1, c_hat, b2p.copy(), b2_hat, a_hat, cls.cost, res_c, res_f)


def classical_cost_formula(plant, ctrl):
    """Riccati-based cost Tr(B^T Q1 B) + Tr(c^T D0^T D0 c P1).

    Independent of the Gramian route; used as a cross-check.
    """
    b = plant.B
    gain = ctrl.c
    return float(np.trace(b.T @ ctrl.Q1 @ b)
                 + np.trace(gain.T @ plant.D0.T @ plant.D0 @ gain @ ctrl.P1))


class GapRecord(NamedTuple):
    classical_cost: float
    quantum_cost: float
    gap: float
    anomaly: bool


def compare(classical_cost, quantum_cost, tol=1e-8):
    gap = quantum_cost - classical_cost
    return GapRecord(float(classical_cost), float(quantum_cost), float(gap), bool(gap < -tol))

"""Inverse Lyapunov operator, Gramians, H2 cost and Gramian derivatives."""

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import CostFormMismatch, NotHurwitz, ShapeError, SingularLyapunov
from .linalg import HURWITZ_MARGIN, frobenius_inner, is_hurwitz, symmetrize, unvec, vec

TOL_SOLVE = 1e-10
COST_FORM_TOL = 1e-9
COST_FORM_FLOOR = 1e-12
# vectorized (Kronecker) solves up to this order, Bartels-Stewart beyond
KRON_MAX_ORDER = 20


class StateSpaceTriple(NamedTuple):
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    @property
    def order(self):
        return self.A.shape[0]

    def gamma(self):
        """The block matrix [[A, B], [C, 0]]."""
        p, m = self.C.shape[0], self.B.shape[1]
        return np.block([[self.A, self.B], [self.C, np.zeros((p, m))]])

    @classmethod
    def from_gamma(cls, g, order, n_inputs):
        g = np.asarray(g, dtype=float)
        return cls(g[:order, :order], g[:order, order:order + n_inputs], g[order:, :order])


class GramianPair(NamedTuple):
    P: np.ndarray
    Q: np.ndarray
    H: np.ndarray


def lyapunov_operator_matrix(a):
    """Matrix of N -> A N + N A^T acting on vec(N)."""
    n = a.shape[0]
    eye = np.eye(n)
    return np.kron(eye, a) + np.kron(a, eye)


def lyap_solve(a, m, check_stability=True):
    """Solve A N + N A^T + M = 0 for a Hurwitz A.

    This is the inverse Lyapunov operator applied to M, i.e. the integral
    of exp(At) M exp(A^T t) over the half-line.
    """
    a = np.asarray(a, dtype=float)
    m = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"A must be square, got {a.shape}")
    if m.shape != a.shape:
        raise ShapeError(f"M must have shape {a.shape}, got {m.shape}")
    if check_stability:
        stable, abscissa = is_hurwitz(a)
        if not stable:
            raise NotHurwitz(f"matrix is not Hurwitz (spectral abscissa {abscissa:.3e})")
    n = a.shape[0]
    try:
        if n <= KRON_MAX_ORDER:
            x = unvec(np.linalg.solve(lyapunov_operator_matrix(a), -vec(m)), (n, n))
        else:
            x = scipy.linalg.solve_continuous_lyapunov(a, -m)
    except np.linalg.LinAlgError as exc:
        raise SingularLyapunov(str(exc)) from exc
    if np.allclose(m, m.T, rtol=0, atol=0):
        x = symmetrize(x)
    resid = np.linalg.norm(a @ x + x @ a.T + m)
    scale = np.linalg.norm(a) * np.linalg.norm(x) + np.linalg.norm(m)
    if not np.isfinite(resid) or resid > TOL_SOLVE * scale:
        raise SingularLyapunov(f"Lyapunov residual {resid:.3e} exceeds tolerance (scale {scale:.3e})")
    return x


def gramians(sys):
    """Controllability and observability Gramians and the Hankelian QP."""
    a, b, c = sys
    p = lyap_solve(a, b @ b.T)
    q = lyap_solve(a.T, c.T @ c, check_stability=False)
    return GramianPair(p, q, q @ p)


def cost_forms(sys, grams=None):
    """The three equal expressions Tr(CPC^T), Tr(B^T Q B), -2<A, QP>."""
    a, b, c = sys
    g = gramians(sys) if grams is None else grams
    return (float(np.trace(c @ g.P @ c.T)),
            float(np.trace(b.T @ g.Q @ b)),
            -2.0 * frobenius_inner(a, g.H))


def lqg_cost(sys, grams=None, tol=COST_FORM_TOL, floor=COST_FORM_FLOOR):
    """Squared H2 norm of the stable triple (A, B, C).

    The three cost expressions must agree to ``tol`` relative, with an
    absolute ``floor`` for costs near zero, and the cost must not be
    negative beyond that floor.
    """
    g = gramians(sys) if grams is None else grams
    forms = cost_forms(sys, g)
    spread = max(forms) - min(forms)
    if spread > tol * max(abs(f) for f in forms) + floor or min(forms) < -floor:
        raise CostFormMismatch(f"cost expressions disagree: {forms}")
    return forms[0]


def _split_direction(sys, direction):
    a, b, c = sys
    if isinstance(direction, tuple):
        da, db, dc = (np.asarray(d, dtype=float) for d in direction)
    else:
        d = StateSpaceTriple.from_gamma(direction, a.shape[0], b.shape[1])
        da, db, dc = d
    if da.shape != a.shape or db.shape != b.shape or dc.shape != c.shape:
        raise ShapeError("perturbation does not conform with the system matrices")
    return da, db, dc


def gramian_derivative_P(sys, direction, grams=None):
    """Directional derivative of the controllability Gramian.

    ``direction`` is either a Gamma-shaped matrix [[dA, dB], [dC, 0]] or a
    tuple (dA, dB, dC).
    """
    a, b, _ = sys
    da, db, _ = _split_direction(sys, direction)
    p = (gramians(sys) if grams is None else grams).P
    return lyap_solve(a, 2 * symmetrize(da @ p + db @ b.T), check_stability=False)


def gramian_derivative_Q(sys, direction, grams=None):
    """Directional derivative of the observability Gramian."""
    a, _, c = sys
    da, _, dc = _split_direction(sys, direction)
    q = (gramians(sys) if grams is None else grams).Q
    return lyap_solve(a.T, 2 * symmetrize(q @ da + c.T @ dc), check_stability=False)


def check_stable(a):
    stable, abscissa = is_hurwitz(a, HURWITZ_MARGIN)
    if not stable:
        raise NotHurwitz(f"matrix is not Hurwitz (spectral abscissa {abscissa:.3e})")
    return abscissa

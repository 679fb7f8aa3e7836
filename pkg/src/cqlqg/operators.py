"""Linear operators on matrices of the form X -> sum_k alpha_k X beta_k.

Everything beyond application goes through the explicit Kronecker matrix
``Xi = sum_k kron(beta_k.T, alpha_k)``, which is fine for the desk-scale
problems this package targets (pq up to a few hundred).
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (CQLQGError, GradeMismatch, NotSelfAdjointPair, ShapeError,
                     SingularLeadingPair, SingularOperator)
from .linalg import TOL_PR, unvec, vec

KAPPA_MIN = 1e-12
TOL_EIG = 1e-9
IMAG_TOL = 1e-9

SYMMETRIC = "symmetric"
ANTISYMMETRIC = "antisymmetric"


@dataclass(frozen=True, eq=False)
class GradeROperator:
    """The operator [[alpha_1, beta_1 | ... | alpha_r, beta_r]]."""

    pairs: tuple

    def __post_init__(self):
        pairs = tuple((np.asarray(a, dtype=float), np.asarray(b, dtype=float))
                      for a, b in self.pairs)
        if not pairs:
            raise ShapeError("an operator needs at least one pair")
        a0, b0 = pairs[0]
        for k, (a, b) in enumerate(pairs):
            if a.ndim != 2 or b.ndim != 2:
                raise ShapeError(f"pair {k} is not a pair of matrices")
            if a.shape != a0.shape or b.shape != b0.shape:
                raise ShapeError(
                    f"pair {k} has shapes {a.shape}, {b.shape}; expected {a0.shape}, {b0.shape}")
        object.__setattr__(self, "pairs", pairs)

    @property
    def grade(self):
        return len(self.pairs)

    @property
    def in_shape(self):
        a, b = self.pairs[0]
        return a.shape[1], b.shape[0]

    @property
    def out_shape(self):
        a, b = self.pairs[0]
        return a.shape[0], b.shape[1]

    def __call__(self, x):
        return apply(self, x)

    def __add__(self, other):
        if self.in_shape != other.in_shape or self.out_shape != other.out_shape:
            raise ShapeError("cannot add operators with different shapes")
        return GradeROperator(self.pairs + other.pairs)


def operator(*pairs):
    """Shorthand: ``operator((a1, b1), (a2, b2))``."""
    return GradeROperator(tuple(pairs))


def apply(op, x):
    x = np.asarray(x, dtype=float)
    if x.shape != op.in_shape:
        raise ShapeError(f"operator expects input of shape {op.in_shape}, got {x.shape}")
    out = np.zeros(op.out_shape)
    for a, b in op.pairs:
        out += a @ x @ b
    return out


def adjoint(op):
    return GradeROperator(tuple((a.T, b.T) for a, b in op.pairs))


def op_matrix(op):
    """Kronecker matrix Xi with vec(op(X)) = Xi @ vec(X)."""
    return sum(np.kron(b.T, a) for a, b in op.pairs)


def _require_endomorphism(op):
    if op.in_shape != op.out_shape:
        raise ShapeError(
            f"operator maps {op.in_shape} to {op.out_shape}; a square operator is required")


def reciprocal_condition(xi):
    s = np.linalg.svd(xi, compute_uv=False)
    if s[0] == 0:
        return 0.0
    return float(s[-1] / s[0])


def invert_apply(op, y, kappa_min=KAPPA_MIN):
    """Solve op(X) = Y for X through the vectorized system."""
    _require_endomorphism(op)
    y = np.asarray(y, dtype=float)
    if y.shape != op.out_shape:
        raise ShapeError(f"right-hand side must have shape {op.out_shape}, got {y.shape}")
    xi = op_matrix(op)
    rcond = reciprocal_condition(xi)
    if rcond < kappa_min:
        raise SingularOperator(f"operator matrix is numerically singular (rcond={rcond:.3e})")
    return unvec(np.linalg.solve(xi, vec(y)), op.in_shape)


def check_self_adjoint(op, tol=TOL_PR):
    """Classify each pair as jointly symmetric or jointly antisymmetric.

    Returns the list of parities; raises NotSelfAdjointPair naming the first
    pair that is neither.
    """
    _require_endomorphism(op)
    tags = []
    for k, (a, b) in enumerate(op.pairs):
        if a.shape[0] != a.shape[1] or b.shape[0] != b.shape[1]:
            raise NotSelfAdjointPair(k, f"pair {k} has non-square blocks")
        sa = 1 + np.linalg.norm(a)
        sb = 1 + np.linalg.norm(b)
        if np.linalg.norm(a - a.T) <= tol * sa and np.linalg.norm(b - b.T) <= tol * sb:
            tags.append(SYMMETRIC)
        elif np.linalg.norm(a + a.T) <= tol * sa and np.linalg.norm(b + b.T) <= tol * sb:
            tags.append(ANTISYMMETRIC)
        else:
            raise NotSelfAdjointPair(k)
    return tags


def _is_self_adjoint(op):
    try:
        check_self_adjoint(op)
    except (NotSelfAdjointPair, ShapeError):
        return False
    return True


def op_spectrum(op):
    """Eigenvalues of the operator.

    Grade one: all products of eigenvalues of alpha and beta. Otherwise the
    eigenvalues of Xi. Self-adjoint operators get a real spectrum.
    """
    _require_endomorphism(op)
    if op.grade == 1:
        a, b = op.pairs[0]
        lam = scipy.linalg.eigvals(a)
        mu = scipy.linalg.eigvals(b)
        eigs = np.outer(lam, mu).ravel()
    else:
        eigs = scipy.linalg.eigvals(op_matrix(op))
    if _is_self_adjoint(op):
        scale = 1 + np.max(np.abs(eigs))
        if np.max(np.abs(eigs.imag)) > IMAG_TOL * scale:
            raise CQLQGError("self-adjoint operator produced a complex spectrum")
        return np.sort(eigs.real)
    return eigs


def spectral_radius(m):
    return float(np.max(np.abs(scipy.linalg.eigvals(m))))


def grade_two_invertible(op, tol=TOL_EIG):
    """Invertibility test for [[a1, b1 | a2, b2]] with nonsingular a1, b1.

    The operator is invertible iff no product of an eigenvalue of
    inv(a1) a2 and an eigenvalue of b2 inv(b1) equals -1. Returns
    ``(invertible, witness)``, the witness being the product closest to -1.
    """
    if op.grade != 2:
        raise GradeMismatch(f"grade two operator required, got grade {op.grade}")
    _require_endomorphism(op)
    (a1, b1), (a2, b2) = op.pairs
    try:
        if np.linalg.cond(a1) > 1 / np.finfo(float).eps or np.linalg.cond(b1) > 1 / np.finfo(float).eps:
            raise np.linalg.LinAlgError
        lam = scipy.linalg.eigvals(np.linalg.solve(a1, a2))
        mu = scipy.linalg.eigvals(np.linalg.solve(b1.T, b2.T).T)
    except np.linalg.LinAlgError as exc:
        raise SingularLeadingPair("leading pair (alpha_1, beta_1) must be nonsingular") from exc
    prods = np.outer(lam, mu).ravel()
    k = int(np.argmin(np.abs(prods + 1)))
    return bool(abs(prods[k] + 1) > tol), complex(prods[k])

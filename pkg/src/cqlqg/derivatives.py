"""Frechet derivatives of the LQG cost and the operators built from them.

Gradients are with respect to the Frobenius inner product. Derivatives in
R live in the space of symmetric matrices.
"""

from typing import NamedTuple, Optional

import numpy as np

from .errors import ChainRuleMismatch, ParityViolation, NotSelfAdjointPair
from .linalg import (antisymmetrize, duplication_matrix, symmetrize, symmetrizer_matrix,
                     unvech, vech)
from .lyapunov import lyap_solve, lyapunov_operator_matrix
from .model import ClosedLoopSystem, closed_loop, project_gamma
from .operators import (ANTISYMMETRIC, SYMMETRIC, GradeROperator, apply, check_self_adjoint,
                        op_matrix)

CHAIN_RULE_TOL = 1e-12


def _cls(plant, point):
    if isinstance(point, ClosedLoopSystem):
        return point
    return closed_loop(plant, point)


def d_Gamma_E(cls):
    """Gradient of the cost in Gamma = [[A, B], [C, 0]]."""
    g = cls.require_stable()
    return 2 * np.block([[g.H, g.Q @ cls.B],
                         [cls.C @ g.P, np.zeros((cls.C.shape[0], cls.B.shape[1]))]])


def d_gamma_E(cls, check=True):
    """Gradient of the cost in gamma = [[a, b], [c, 0]] with (a, b, c) independent.

    With ``check`` the block formula is compared with the chain rule
    Pi(Gamma1^T dE/dGamma Gamma2^T).
    """
    plant = cls.plant
    cls.require_stable()
    n, m2, p = plant.n, plant.m2, plant.p
    h22 = cls.Hb(2, 2)
    da = 2 * h22
    db = 2 * (cls.Hb(2, 1) @ plant.Cbar.T + cls.Qb(2, None) @ cls.B @ plant.Dbar.T)
    dc = 2 * (plant.B2.T @ cls.Hb(1, 2) + plant.D0.T @ cls.C @ cls.Pb(None, 2))
    grad = np.block([[da, db], [dc, np.zeros((m2, m2 + p))]])
    if check:
        _, g1, g2 = plant.gamma_maps
        chain = project_gamma(g1.T @ d_Gamma_E(cls) @ g2.T, n, m2 + p, m2)
        gap = np.max(np.abs(chain - grad))
        if gap > CHAIN_RULE_TOL * (1 + np.max(np.abs(grad))):
            raise ChainRuleMismatch(f"block formula and chain rule differ by {gap:.3e}")
    return grad


def split_gamma_grad(plant, grad):
    n = plant.n
    return grad[:n, :n], grad[:n, n:], grad[n:, :n]


class FirstOrderData(NamedTuple):
    dGammaE: np.ndarray
    dgammaE: np.ndarray
    dRE: np.ndarray
    Psi: np.ndarray
    Phi: np.ndarray
    dEdb: np.ndarray
    m2: int

    @property
    def dEdb1(self):
        return self.dEdb[:, :self.m2]

    @property
    def dEdb2(self):
        return self.dEdb[:, self.m2:]


def psi_phi(h22, j0):
    """Symmetric Psi and antisymmetric Phi with H22 = (Psi - Phi) J0."""
    phi = (h22 @ j0 + j0 @ h22.T) / 2
    psi = (j0 @ h22.T - h22 @ j0) / 2
    return symmetrize(psi), antisymmetrize(phi)


def grad_R_b(plant, point, check=True):
    """First-order data at the Hamiltonian parameters (or closed loop) ``point``."""
    cls = _cls(plant, point)
    j0, _, j2, j = plant.comm
    dgamma = d_gamma_E(cls, check=check)
    da, db, dc = split_gamma_grad(plant, dgamma)
    b = cls.ctrl.b
    h22 = cls.Hb(2, 2)
    d_r = symmetrize(h22.T @ j0 - j0 @ h22)
    psi, phi = psi_phi(h22, j0)
    dedb = (da @ j0 + j0 @ da.T) @ b @ j / 2 + db + j0 @ dc.T @ j2 @ plant.Ibar.T
    return FirstOrderData(d_Gamma_E(cls), dgamma, d_r, psi, phi, dedb, plant.m2)


def gradient_R(plant, point):
    cls = _cls(plant, point)
    h22 = cls.Hb(2, 2)
    j0 = plant.comm.J0
    return symmetrize(h22.T @ j0 - j0 @ h22)


class SeparatedOperators(NamedTuple):
    M: GradeROperator
    M1: GradeROperator
    M2: GradeROperator
    M1_anti: GradeROperator
    M1_plus: GradeROperator
    M2_anti: GradeROperator
    M2_plus: GradeROperator
    forcing1: np.ndarray
    forcing2: np.ndarray


def build_M_operators(plant, cls, phi=None, check=True):
    """Self-adjoint gain operators and forcing terms at the current closed loop.

    dE/db1 = 2 (M1(b1) + forcing1) and dE/db2 = 2 (M2(b2) + forcing2).
    """
    j0, j1, j2, j = plant.comm
    if phi is None:
        _, phi = psi_phi(cls.Hb(2, 2), j0)
    q22 = cls.Qb(2, 2)
    p22 = cls.Pb(2, 2)
    d, d0 = plant.D, plant.D0
    left3 = j0 @ p22 @ j0
    right3_1 = j2 @ d0.T @ d0 @ j2
    ibar = plant.Ibar
    big = GradeROperator(((phi, j), (q22, plant.Dbar @ plant.Dbar.T),
                          (left3, ibar @ right3_1 @ ibar.T)))
    m1_anti = GradeROperator(((phi, j2),))
    m1_plus = GradeROperator(((q22, np.eye(plant.m2)), (left3, right3_1)))
    m2_anti = GradeROperator(((phi, d @ j1 @ d.T),))
    m2_plus = GradeROperator(((q22, d @ d.T),))
    m1 = m1_anti + m1_plus
    m2 = m2_anti + m2_plus
    if check:
        expected = {id(m1): [ANTISYMMETRIC, SYMMETRIC, SYMMETRIC],
                    id(m2): [ANTISYMMETRIC, SYMMETRIC],
                    id(big): [ANTISYMMETRIC, SYMMETRIC, SYMMETRIC]}
        for op in (m1, m2, big):
            try:
                tags = check_self_adjoint(op, tol=1e-8)
            except NotSelfAdjointPair as exc:
                raise ParityViolation(str(exc)) from exc
            if tags != expected[id(op)] and np.linalg.norm(phi) > 0:
                raise ParityViolation(f"unexpected pair parities {tags}")
    h12 = cls.Hb(1, 2)
    f1 = cls.Qb(2, 1) @ plant.B2 + j0 @ (h12.T @ plant.B2 + cls.Pb(2, 1) @ plant.C0.T @ d0) @ j2
    f2 = cls.Hb(2, 1) @ plant.C.T + cls.Qb(2, 1) @ plant.B1 @ d.T
    return SeparatedOperators(big, m1, m2, m1_anti, m1_plus, m2_anti, m2_plus, f1, f2)


def dEdb_from_operators(plant, cls, ops=None):
    """dE/db assembled from the gain operator form (independent of grad_R_b)."""
    ops = build_M_operators(plant, cls) if ops is None else ops
    j0, _, j2, _ = plant.comm
    b = cls.ctrl.b
    forcing = (cls.Hb(2, 1) @ plant.Cbar.T + cls.Qb(2, 1) @ plant.B @ plant.Dbar.T
               + j0 @ (cls.Hb(1, 2).T @ plant.B2 + cls.Pb(2, 1) @ plant.C0.T @ plant.D0)
               @ j2 @ plant.Ibar.T)
    return 2 * (apply(ops.M, b) + forcing)


class DominationResult(NamedTuple):
    radius: Optional[float]
    status: str
    eigenvalues: Optional[np.ndarray]


def domination_radius(cls, phi):
    """Spectral radius of inv(Q22) Phi, when Q22 is positive definite."""
    q22 = cls.Qb(2, 2)
    w = np.linalg.eigvalsh(symmetrize(q22))
    if w[0] <= 1e-12 * max(1.0, w[-1]):
        return DominationResult(None, "not_applicable", None)
    delta = np.linalg.solve(q22, phi)
    eigs = np.linalg.eigvals(delta)
    return DominationResult(float(np.max(np.abs(eigs))), "ok", eigs)


# second order

def lyapunov_core(triple, grams):
    """The operator X -> Q L_A(S(X P)) + L_{A^T}(S(Q X)) P (a quarter of d2E/dA2)."""
    a = triple.A
    p, q = grams.P, grams.Q

    def core(x):
        return (q @ lyap_solve(a, symmetrize(x @ p), check_stability=False)
                + lyap_solve(a.T, symmetrize(q @ x), check_stability=False) @ p)
    return core


def j_embed(m, j0):
    """Closed-loop perturbation of A caused by the perturbation m of R."""
    n = j0.shape[0]
    out = np.zeros((2 * n, 2 * n))
    out[n:, n:] = j0 @ m
    return out


def j_adjoint(y, j0):
    n = j0.shape[0]
    return -symmetrize(j0 @ y[n:, n:])


def hessian_R_apply(plant, point, m):
    """Second derivative of the cost in R applied to the symmetric direction m."""
    cls = _cls(plant, point)
    grams = cls.require_stable()
    j0 = plant.comm.J0
    core = lyapunov_core(cls.triple, grams)
    return 4 * j_adjoint(core(j_embed(np.asarray(m, dtype=float), j0)), j0)


def hessian_R_operator_vech(plant, point):
    """Exact matrix T with vech(d2E(M)) = T vech(M), built column by column."""
    cls = _cls(plant, point)
    n = plant.n
    k = n * (n + 1) // 2
    cols = []
    for i in range(k):
        e = np.zeros(k)
        e[i] = 1.0
        cols.append(vech(hessian_R_apply(plant, cls, unvech(e, n))))
    return np.column_stack(cols)


class HessianMatrix(NamedTuple):
    matrix: np.ndarray
    min_eig: float
    symmetry_defect: float
    reconciliation: np.ndarray
    raw_discrepancy: float
    reconciled_discrepancy: float


def vech_weights(n):
    """Diagonal of Lambda^T Lambda: 1 on diagonal coordinates, 2 off the diagonal."""
    dup = duplication_matrix(n)
    return np.sum(dup, axis=0)


def hessian_R_matrix(plant, point, diagnostics=True):
    """Kronecker assembly 4 U^T (W + W^T) U of the second derivative in R.

    Here W = -(I x Q)(I x A + A x I)^{-1} Sym (P x I) represents the map
    X -> Q L_A(S(X P)) and U = (E2 x [0; J0]) Lambda represents
    M -> [0; J0] M [0 I] restricted to symmetric M, with E2 = [0; I].

    The result satisfies vech(M1)^T matrix vech(M2) = <M1, d2E(M2)>, i.e.
    it is the Gram representation. It differs from the vech-to-vech
    representation T by the diagonal weights ``vech_weights``; the
    diagnostics report that reconciliation explicitly.
    """
    cls = _cls(plant, point)
    grams = cls.require_stable()
    n = plant.n
    a_cl, p, q = cls.A, grams.P, grams.Q
    eye2n = np.eye(2 * n)
    omega = -(np.kron(eye2n, q) @ np.linalg.solve(lyapunov_operator_matrix(a_cl),
                                                  symmetrizer_matrix(2 * n) @ np.kron(p, eye2n)))
    e2 = np.vstack([np.zeros((n, n)), np.eye(n)])
    left = np.vstack([np.zeros((n, n)), plant.comm.J0])
    ups = np.kron(e2, left) @ duplication_matrix(n)
    mat = 4 * ups.T @ (omega + omega.T) @ ups
    defect = float(np.linalg.norm(mat - mat.T) / max(np.linalg.norm(mat), 1e-300))
    mat = symmetrize(mat)
    min_eig = float(np.linalg.eigvalsh(mat)[0])
    if not diagnostics:
        return HessianMatrix(mat, min_eig, defect, np.ones(mat.shape[0]), float("nan"), float("nan"))
    exact = hessian_R_operator_vech(plant, cls)
    scale = max(np.max(np.abs(exact)), 1e-300)
    raw = float(np.max(np.abs(mat - exact)) / scale)
    # per-row least-squares factor w_k with mat[k] ~ w_k * exact[k]
    num = np.sum(mat * exact, axis=1)
    den = np.sum(exact * exact, axis=1)
    w = np.where(den > 0, num / np.where(den > 0, den, 1.0), 1.0)
    reconciled = float(np.max(np.abs(mat - w[:, None] * exact)) / scale)
    return HessianMatrix(mat, min_eig, defect, w, raw, reconciled)


# finite-difference oracles

def default_step(x0, rel=1e-5):
    return rel * (1 + np.max(np.abs(x0))) if np.size(x0) else rel


def _central(f, x0, e, h, order):
    if order == 2:
        return (f(x0 + h * e) - f(x0 - h * e)) / (2 * h)
    return (8 * (f(x0 + h * e) - f(x0 - h * e)) - (f(x0 + 2 * h * e) - f(x0 - 2 * h * e))) / (12 * h)


def fd_gradient(f, x0, h=None, symmetric=False, order=2):
    """Central-difference gradient of a scalar function of a matrix.

    With ``symmetric`` the argument is constrained to symmetric matrices and
    the returned gradient is the symmetric matrix G with df = <G, dX>.
    ``order`` is 2 or 4; the fourth-order stencil keeps the truncation error
    small at points of high curvature.
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    x0 = np.asarray(x0, dtype=float)
    h = default_step(x0) if h is None else h
    grad = np.zeros_like(x0)
    if symmetric:
        n = x0.shape[0]
        for i in range(n):
            for j in range(i + 1):
                e = np.zeros_like(x0)
                e[i, j] = e[j, i] = 1.0
                d = _central(f, x0, e, h, order)
                if i == j:
                    grad[i, i] = d
                else:
                    grad[i, j] = grad[j, i] = d / 2
        return grad
    for idx in np.ndindex(x0.shape):
        e = np.zeros_like(x0)
        e[idx] = 1.0
        grad[idx] = _central(f, x0, e, h, order)
    return grad


def fd_directional(f, x0, direction, h=None):
    x0 = np.asarray(x0, dtype=float)
    h = default_step(x0) if h is None else h
    return (f(x0 + h * direction) - f(x0 - h * direction)) / (2 * h)


def fd_second(f, x0, direction, h=None):
    """Second central difference of f along ``direction``."""
    x0 = np.asarray(x0, dtype=float)
    h = default_step(x0, 1e-3) if h is None else h
    return (f(x0 + h * direction) - 2 * f(x0) + f(x0 - h * direction)) / h ** 2


def operator_min_eig(op):
    """Smallest eigenvalue of the symmetric Kronecker matrix of a self-adjoint operator."""
    return float(np.linalg.eigvalsh(symmetrize(op_matrix(op)))[0])

"""Plant, physically realizable controller and closed-loop data model.

Closed-loop state is ordered (plant, controller); 2x2 block views of the
Gramians index plant blocks with 1 and controller blocks with 2.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg

from .errors import (AffineMismatch, NotSymplectic, OddDimension, RankDeficientD,
                     RankDeficientD0, ShapeError, SingularLyapunov, Unstable)
from .linalg import (INTERLEAVED, LAYOUTS, TOL_PR, antisymmetrize, as_matrix, canonical_J,
                     is_hurwitz, is_symplectic, symmetrize)
from .lyapunov import GramianPair, StateSpaceTriple, gramians, lqg_cost

AFFINE_TOL = 1e-12


class CommutationData(NamedTuple):
    J0: np.ndarray
    J1: np.ndarray
    J2: np.ndarray
    J: np.ndarray


@dataclass(frozen=True, eq=False)
class PlantModel:
    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C: np.ndarray
    D: np.ndarray
    C0: np.ndarray
    D0: np.ndarray
    layout: str = INTERLEAVED

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m1(self):
        return self.B1.shape[1]

    @property
    def m2(self):
        return self.B2.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    @property
    def p0(self):
        return self.C0.shape[0]

    @property
    def dims(self):
        return {"n": self.n, "m1": self.m1, "m2": self.m2, "p": self.p, "p0": self.p0}

    @cached_property
    def comm(self):
        j0 = canonical_J(self.n, self.layout)
        j1 = canonical_J(self.m1, self.layout)
        j2 = canonical_J(self.m2, self.layout)
        j = scipy.linalg.block_diag(j2, self.D @ j1 @ self.D.T)
        return CommutationData(j0, j1, j2, j)

    @cached_property
    def B(self):
        return np.hstack([self.B1, self.B2])

    @cached_property
    def Cbar(self):
        return np.vstack([np.zeros((self.m2, self.n)), self.C])

    @cached_property
    def Dbar(self):
        return np.block([[np.zeros((self.m2, self.m1)), np.eye(self.m2)],
                         [self.D, np.zeros((self.p, self.m2))]])

    @cached_property
    def Ibar(self):
        return np.vstack([np.eye(self.m2), np.zeros((self.p, self.m2))])

    @cached_property
    def gamma_maps(self):
        """The constant matrices (Gamma0, Gamma1, Gamma2) of the affine map."""
        n, m1, m2, p, p0 = self.n, self.m1, self.m2, self.p, self.p0
        z = np.zeros
        g0 = np.block([[self.A, z((n, n)), self.B],
                       [z((n, n)), z((n, n)), z((n, m1 + m2))],
                       [self.C0, z((p0, n)), z((p0, m1 + m2))]])
        g1 = np.block([[z((n, n)), self.B2],
                       [np.eye(n), z((n, m2))],
                       [z((p0, n)), self.D0]])
        g2 = np.block([[z((n, n)), np.eye(n), z((n, m1 + m2))],
                       [self.Cbar, z((m2 + p, n)), self.Dbar]])
        return g0, g1, g2

    def matrices(self):
        return {"A": self.A, "B1": self.B1, "B2": self.B2, "C": self.C,
                "D": self.D, "C0": self.C0, "D0": self.D0}


def validate_plant(A, B1, B2, C, D, C0, D0, layout=INTERLEAVED):
    """Check dimensions and rank conditions and build a PlantModel."""
    mats = {}
    for name, m in (("A", A), ("B1", B1), ("B2", B2), ("C", C), ("D", D), ("C0", C0), ("D0", D0)):
        mats[name] = as_matrix(m, name)
    if layout not in LAYOUTS:
        raise ShapeError(f"unknown canonical layout {layout!r}")
    a = mats["A"]
    n = a.shape[0]
    if a.shape != (n, n):
        raise ShapeError(f"A must be square, got {a.shape}")
    m1 = mats["B1"].shape[1]
    m2 = mats["B2"].shape[1]
    p = mats["C"].shape[0]
    p0 = mats["C0"].shape[0]
    expected = {"B1": (n, m1), "B2": (n, m2), "C": (p, n), "D": (p, m1),
                "C0": (p0, n), "D0": (p0, m2)}
    for name, shape in expected.items():
        if mats[name].shape != shape:
            raise ShapeError(f"{name} has shape {mats[name].shape}, expected {shape}")
    for name, dim in (("n", n), ("m1", m1), ("m2", m2)):
        if dim == 0 or dim % 2:
            raise OddDimension(f"dimension {name}={dim} must be even and positive")
    if np.linalg.matrix_rank(mats["D"]) < p:
        raise RankDeficientD(f"D must have full row rank {p} (rank condition on D)")
    if np.linalg.matrix_rank(mats["D0"]) < m2:
        raise RankDeficientD0(f"D0 must have full column rank {m2} (rank condition on D0)")
    return PlantModel(layout=layout, **mats)


@dataclass(frozen=True, eq=False)
class ControllerParams:
    """Hamiltonian parameterization (R, b) with b = [b1 b2]."""

    R: np.ndarray
    b1: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.R, dtype=float)
        if np.linalg.norm(r - r.T) > TOL_PR * (1 + np.linalg.norm(r)):
            raise ShapeError("R must be symmetric")
        object.__setattr__(self, "R", symmetrize(r))
        object.__setattr__(self, "b1", np.asarray(self.b1, dtype=float))
        object.__setattr__(self, "b2", np.asarray(self.b2, dtype=float))

    @property
    def b(self):
        return np.hstack([self.b1, self.b2])

    @classmethod
    def from_b(cls, R, b, m2):
        b = np.asarray(b, dtype=float)
        return cls(R, b[:, :m2], b[:, m2:])

    def replace(self, R=None, b1=None, b2=None):
        return ControllerParams(self.R if R is None else R,
                                self.b1 if b1 is None else b1,
                                self.b2 if b2 is None else b2)

    @classmethod
    def zeros(cls, plant):
        n = plant.n
        return cls(np.zeros((n, n)), np.zeros((n, plant.m2)), np.zeros((n, plant.p)))


@dataclass(frozen=True, eq=False)
class ControllerRealization:
    a: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    c: np.ndarray

    @property
    def b(self):
        return np.hstack([self.b1, self.b2])

    @property
    def gamma(self):
        m2 = self.c.shape[0]
        return np.block([[self.a, self.b], [self.c, np.zeros((m2, self.b.shape[1]))]])


def _comm(source):
    return source.comm if isinstance(source, PlantModel) else source


def realize_controller(params, comm):
    """State-space matrices (a, b1, b2, c) of the controller with parameters (R, b).

    ``comm`` is a CommutationData or a PlantModel.
    """
    j0, _, j2, j = _comm(comm)
    n = j0.shape[0]
    b = params.b
    if params.R.shape != (n, n) or b.shape != (n, j.shape[0]):
        raise ShapeError("controller parameters do not conform with the commutation matrices")
    a = j0 @ params.R + b @ j @ b.T @ j0 / 2
    c = j2 @ params.b1.T @ j0
    return ControllerRealization(a, params.b1, params.b2, c)


def recover_R(a, b, comm):
    """Hamiltonian matrix R of a controller; returns (R, defect).

    The defect is the norm of the antisymmetric part discarded, which is
    zero exactly when ``a`` satisfies the first realizability condition.
    """
    j0, _, _, j = _comm(comm)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x = -j0 @ (a - b @ j @ b.T @ j0 / 2)
    return symmetrize(x), float(np.linalg.norm(antisymmetrize(x)))


class PRReport(NamedTuple):
    residual1: float
    residual2: float
    passed: bool


def check_physical_realizability(ctrl, comm, tol=TOL_PR):
    j0, _, j2, j = _comm(comm)
    b = ctrl.b
    r1 = float(np.linalg.norm(ctrl.a @ j0 + j0 @ ctrl.a.T + b @ j @ b.T))
    r2 = float(np.linalg.norm(ctrl.b1 - j0 @ ctrl.c.T @ j2))
    scale = 1 + np.linalg.norm(ctrl.a) + np.linalg.norm(b) ** 2 + np.linalg.norm(ctrl.c)
    return PRReport(r1, r2, bool(r1 <= tol * scale and r2 <= tol * scale))


def symplectic_transform(ctrl, params, sigma, comm):
    """Apply the canonical state change xi -> sigma xi.

    Returns the transformed (ControllerRealization, ControllerParams).
    """
    j0 = _comm(comm).J0
    sigma = np.asarray(sigma, dtype=float)
    if not is_symplectic(sigma, j0):
        raise NotSymplectic("sigma does not preserve J0")
    inv = np.linalg.inv(sigma)
    new_ctrl = ControllerRealization(sigma @ ctrl.a @ inv, sigma @ ctrl.b1, sigma @ ctrl.b2,
                                     ctrl.c @ inv)
    new_params = ControllerParams(symmetrize(inv.T @ params.R @ inv), sigma @ params.b1,
                                  sigma @ params.b2)
    return new_ctrl, new_params


def project_gamma(m, r, m_in, p_out):
    """Zero the bottom-right (p_out x m_in) block of an (r+p_out) x (r+m_in) matrix."""
    m = np.asarray(m, dtype=float)
    if m.shape != (r + p_out, r + m_in):
        raise ShapeError(f"matrix of shape {m.shape} does not match partition "
                         f"({r}+{p_out}) x ({r}+{m_in})")
    out = m.copy()
    out[r:, r:] = 0.0
    return out


def blk(m, j, k, n):
    """Block (j, k) of a 2n x 2n matrix; j or k may be None for a full block row/column."""
    rows = slice(None) if j is None else slice((j - 1) * n, j * n)
    cols = slice(None) if k is None else slice((k - 1) * n, k * n)
    return m[rows, cols]


@dataclass(frozen=True, eq=False)
class ClosedLoopSystem:
    plant: PlantModel
    ctrl: ControllerRealization
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    stable: bool
    abscissa: float
    grams: Optional[GramianPair] = field(default=None)

    @property
    def triple(self):
        return StateSpaceTriple(self.A, self.B, self.C)

    @property
    def Gamma(self):
        return self.triple.gamma()

    def require_stable(self):
        if not self.stable or self.grams is None:
            raise Unstable(f"closed loop is not Hurwitz (abscissa {self.abscissa:.3e})")
        return self.grams

    @property
    def P(self):
        return self.require_stable().P

    @property
    def Q(self):
        return self.require_stable().Q

    @property
    def H(self):
        return self.require_stable().H

    def Pb(self, j, k):
        return blk(self.P, j, k, self.plant.n)

    def Qb(self, j, k):
        return blk(self.Q, j, k, self.plant.n)

    def Hb(self, j, k):
        return blk(self.H, j, k, self.plant.n)

    @cached_property
    def cost(self):
        return lqg_cost(self.triple, self.require_stable())


def closed_loop_blocks(plant, ctrl):
    """Closed-loop (A, B, C) from the block formula."""
    a_cl = np.block([[plant.A, plant.B2 @ ctrl.c],
                     [ctrl.b2 @ plant.C, ctrl.a]])
    b_cl = np.block([[plant.B1, plant.B2],
                     [ctrl.b2 @ plant.D, ctrl.b1]])
    c_cl = np.hstack([plant.C0, plant.D0 @ ctrl.c])
    return a_cl, b_cl, c_cl


def closed_loop_affine(plant, ctrl):
    """Closed-loop Gamma = Gamma0 + Gamma1 gamma Gamma2."""
    g0, g1, g2 = plant.gamma_maps
    return g0 + g1 @ ctrl.gamma @ g2


def assemble_closed_loop(plant, ctrl, with_gramians=True):
    n = plant.n
    if ctrl.a.shape != (n, n):
        raise ShapeError(f"controller order {ctrl.a.shape[0]} differs from plant order {n}")
    a_cl, b_cl, c_cl = closed_loop_blocks(plant, ctrl)
    direct = StateSpaceTriple(a_cl, b_cl, c_cl).gamma()
    affine = closed_loop_affine(plant, ctrl)
    gap = np.max(np.abs(direct - affine)) if direct.size else 0.0
    if gap > AFFINE_TOL * (1 + np.max(np.abs(direct))):
        raise AffineMismatch(f"direct and affine closed-loop assemblies differ by {gap:.3e}")
    stable, abscissa = is_hurwitz(a_cl)
    grams = None
    if stable and with_gramians:
        try:
            grams = gramians(StateSpaceTriple(a_cl, b_cl, c_cl))
        except SingularLyapunov:
            # numerically marginal: treated as unusable, like an unstable loop
            stable = False
    return ClosedLoopSystem(plant, ctrl, a_cl, b_cl, c_cl, stable, abscissa, grams)


def closed_loop(plant, params, with_gramians=True):
    """Closed loop for Hamiltonian parameters (R, b)."""
    return assemble_closed_loop(plant, realize_controller(params, plant), with_gramians)


def cost_of(plant, params):
    """LQG cost at (R, b), or +inf when the closed loop is not Hurwitz."""
    cls = closed_loop(plant, params)
    return cls.cost if cls.stable else float("inf")

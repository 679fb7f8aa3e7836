"""Newton-like synthesis of the optimal coherent quantum LQG controller.

One outer iteration runs the configured sequence of updates: the two gain
assignments (frozen-Gramian linear equations for b1 and b2) and a
regularized Newton step on R. Every candidate goes through a backtracking
stability-recovery block that accepts only stable, strictly cost-reducing
steps, and the Gramians are refreshed after each accepted step.
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import scipy.optimize

from .classical import classical_controller
from .derivatives import (build_M_operators, domination_radius, fd_gradient, grad_R_b,
                          hessian_R_matrix, vech_weights)
from .errors import CQLQGError, InitializationFailed, SingularOperator, Unstable
from .linalg import unvech, vech, williamson
from .model import (ControllerParams, check_physical_realizability, closed_loop, cost_of,
                    realize_controller, recover_R, symplectic_transform)
from .operators import apply, invert_apply

log = logging.getLogger(__name__)

UPDATE_B1 = "update_b1"
UPDATE_B2 = "update_b2"
NEWTON_R = "newton_R"
JOINT = "joint_newton"
STEP_KINDS = (UPDATE_B1, UPDATE_B2, NEWTON_R, JOINT)
ORDERS = {
    "filter-first": (UPDATE_B2, UPDATE_B1, NEWTON_R),
    "control-first": (UPDATE_B1, UPDATE_B2, NEWTON_R),
    "newton-first": (NEWTON_R, UPDATE_B2, UPDATE_B1),
}

CONVERGED = "converged"
MAX_ITERS = "max_iters"
STALLED = "stalled"
LOST_STABILITY = "lost_stability_unrecoverable"
DEGENERATE = "degenerate"
STAGNATED = "stagnated"

# stability margin sought for starting points
INIT_MARGIN = 0.05
# a critical point whose closed loop is this close to marginal stability,
# relative to its size, is the decoupled limit rather than a usable optimum
DEGENERACY_MARGIN = 1e-6


@dataclass(frozen=True)
class SolveConfig:
    order: tuple = ORDERS["filter-first"]
    max_iters: int = 200
    tol_grad: float = 1e-7
    tol_psi: float = 1e-7
    backtrack: float = 0.5
    max_backtracks: int = 30
    lambda_min: float = 1e-8
    init: str = "classical-seed"
    seed: int = 0
    init_draws: int = 50
    refresh_phi: bool = True
    identity_hessian: bool = False
    # full (R, b) Newton step appended to every outer iteration
    joint_newton: bool = True
    # Williamson normalization of the controller covariance between iterations
    gauge_fix: bool = True
    # extra starts from perturbed seeds; all attempts share max_iters
    restarts: int = 8
    attempt_iters: int = 80
    # an attempt is abandoned when, over this many iterations, the gradient
    # has not dropped tenfold and the cost has not dropped by stall_rel
    patience: int = 20
    stall_rel: float = 1e-3
    restart_spread: float = 0.3

    def __post_init__(self):
        if self.tol_grad <= 0 or self.tol_psi <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")
        if self.max_iters < 0 or self.max_backtracks < 0 or self.restarts < 0:
            raise ValueError("iteration limits must be nonnegative")
        order = tuple(self.order)
        for kind in order:
            if kind not in STEP_KINDS:
                raise ValueError(f"unknown step kind {kind!r}")
        object.__setattr__(self, "order", order)

    def to_dict(self):
        d = dict(self.__dict__)
        d["order"] = list(self.order)
        return d


class State(NamedTuple):
    params: ControllerParams
    cls: object
    first: object

    @property
    def cost(self):
        return self.cls.cost


def make_state(plant, params):
    cls = closed_loop(plant, params)
    if not cls.stable:
        raise Unstable(f"closed loop is not Hurwitz (abscissa {cls.abscissa:.3e})")
    return State(params, cls, grad_R_b(plant, cls, check=False))


@dataclass
class IterationRecord:
    iteration: int
    cost: float
    psi_norm: float
    dedb_norm: float
    abscissa: float
    domination: Optional[float]
    damping: dict = field(default_factory=dict)

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class SynthesisReport:
    status: str
    iterations: list
    params: ControllerParams
    realization: object
    cost: float
    initial_cost: float
    outer_iterations: int
    diagnostics: list = field(default_factory=list)
    attempts: list = field(default_factory=list)

    @property
    def costs(self):
        return [r.cost for r in self.iterations]


class StepResult(NamedTuple):
    state: Optional[State]
    damping: Optional[float]
    accepted: bool
    stalled: bool


# gain assignments

def gain_update_b1(plant, state, phi=None):
    """Solve M1(b1) + forcing1 = 0 with the Gramians of ``state`` frozen."""
    ops = build_M_operators(plant, state.cls, phi, check=False)
    return -invert_apply(ops.M1, ops.forcing1)


def gain_update_b2(plant, state, phi=None):
    """Solve M2(b2) + forcing2 = 0 with the Gramians of ``state`` frozen."""
    ops = build_M_operators(plant, state.cls, phi, check=False)
    return -invert_apply(ops.M2, ops.forcing2)


def gain_residuals(plant, cls, b1=None, b2=None, phi=None):
    """Residuals of the two frozen-coefficient gain equations."""
    ops = build_M_operators(plant, cls, phi, check=False)
    b1 = cls.ctrl.b1 if b1 is None else b1
    b2 = cls.ctrl.b2 if b2 is None else b2
    return apply(ops.M1, b1) + ops.forcing1, apply(ops.M2, b2) + ops.forcing2


def newton_direction(plant, state, config=None):
    """Regularized Newton step Delta R for the cost as a function of R.

    Works in half-vectorized coordinates with the Gram form of the second
    derivative, so that the linear system is symmetric. Returns
    ``(delta_R, shift)``.
    """
    config = SolveConfig() if config is None else config
    n = plant.n
    grad = state.first.dRE
    rhs = -vech_weights(n) * vech(grad)
    if config.identity_hessian:
        # identity in the Gram metric: the step is minus the gradient
        return unvech(rhs / vech_weights(n), n), 0.0
    hess = hessian_R_matrix(plant, state.cls, diagnostics=False).matrix
    w, v = np.linalg.eigh(hess)
    floor = config.lambda_min * max(1.0, abs(w[-1]))
    shift = 0.0 if w[0] >= floor else floor - w[0]
    try:
        step = v @ ((v.T @ rhs) / (w + shift))
    except FloatingPointError:
        return -grad, float("nan")
    if not np.all(np.isfinite(step)):
        return -grad, float("nan")
    return unvech(step, n), shift


def resolution(cost):
    """Smallest cost change the floating-point cost evaluation can resolve."""
    return 64 * np.finfo(float).eps * max(abs(cost), 1.0)


def path_decrease(plant, params, trial):
    """E(trial) - E(params) by two-point Gauss quadrature of the gradient.

    Used when the change is below the resolution of the cost itself; the
    gradient keeps its relative accuracy where the cost difference does not.
    """
    theta0 = pack(params)
    delta = pack(trial) - theta0
    total = 0.0
    for node in (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)):
        cls = closed_loop(plant, unpack(theta0 + node * delta, plant))
        if not cls.stable:
            return float("inf")
        total += 0.5 * float(theta_gradient(plant, grad_R_b(plant, cls, check=False)) @ delta)
    return total


def _acceptable(plant, state, params, cost):
    change = cost - state.cost
    if change < -resolution(state.cost):
        return True
    if change > resolution(state.cost) or not np.isfinite(cost):
        return False
    return path_decrease(plant, state.params, params) < 0


def is_monotone(costs):
    """Non-increasing up to the resolution of the cost evaluation."""
    return all(b <= a + resolution(a) for a, b in zip(costs, costs[1:]))


def stability_recovery(plant, state, candidate, config=None):
    """Backtrack along ``candidate(t)`` for t = factor**k, k = 0..max_backtracks.

    ``candidate`` maps a damping factor to ControllerParams. The first
    stable point with a lower cost is accepted. Decreases too small for the
    cost to resolve are judged by integrating the gradient along the step.
    """
    config = SolveConfig() if config is None else config
    t = 1.0
    for _ in range(config.max_backtracks + 1):
        params = candidate(t)
        cls = closed_loop(plant, params)
        if cls.stable:
            try:
                cost = cls.cost
                ok = _acceptable(plant, state, params, cost)
            except CQLQGError:
                ok = False
            if ok:
                return StepResult(State(params, cls, grad_R_b(plant, cls, check=False)), t, True, False)
        t *= config.backtrack
    return StepResult(None, None, False, True)


# joint Newton step over all of (R, b)

def pack(params):
    """Coordinates theta = (vech R, vec b) of a parameter point."""
    return np.concatenate([vech(params.R), params.b.ravel(order="F")])


def unpack(theta, plant):
    k = plant.n * (plant.n + 1) // 2
    b = theta[k:].reshape((plant.n, plant.m2 + plant.p), order="F")
    return ControllerParams.from_b(unvech(theta[:k], plant.n), b, plant.m2)


def theta_gradient(plant, first):
    w = vech_weights(plant.n)
    return np.concatenate([w * vech(first.dRE), first.dEdb.ravel(order="F")])


def joint_hessian(plant, params, rel=1e-5):
    """Central differences of the analytic gradient in theta coordinates."""
    theta = pack(params)
    h = rel * max(1.0, np.linalg.norm(theta))
    hess = np.empty((theta.size, theta.size))
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        cols = []
        for sign in (1.0, -1.0):
            cls = closed_loop(plant, unpack(theta + sign * e, plant))
            if not cls.stable:
                raise Unstable("finite-difference stencil left the stability region")
            cols.append(theta_gradient(plant, grad_R_b(plant, cls, check=False)))
        hess[:, i] = (cols[0] - cols[1]) / (2 * h)
    return (hess + hess.T) / 2


def orbit_tangents(plant, params):
    """Columns spanning the directions of canonical state changes in theta.

    The cost is constant along these directions, so the joint Hessian is
    singular there at critical points.
    """
    n = plant.n
    j0 = plant.comm.J0
    cols = []
    for k in range(n * (n + 1) // 2):
        e = np.zeros(n * (n + 1) // 2)
        e[k] = 1.0
        x = j0 @ unvech(e, n)
        d_r = -(x.T @ params.R + params.R @ x)
        cols.append(np.concatenate([vech(d_r), (x @ params.b).ravel(order="F")]))
    return np.column_stack(cols)


def joint_model(plant, state):
    """Quadratic model of the cost transverse to the canonical-change orbit.

    Returns the theta gradient, an orthonormal basis of the transverse
    directions, and the eigendecomposition of the reduced Hessian.
    """
    grad = theta_gradient(plant, state.first)
    hess = joint_hessian(plant, state.params)
    u, sv, _ = np.linalg.svd(orbit_tangents(plant, state.params))
    rank = int(np.sum(sv > 1e-10 * max(sv[0], 1.0)))
    basis = u[:, rank:]
    h = basis.T @ hess @ basis
    w, v = np.linalg.eigh((h + h.T) / 2)
    return grad, basis, w, v


def trust_region_solve(w, g, radius):
    """Minimize g.p + p.diag(w).p/2 subject to |p| <= radius.

    Coordinates are those of the eigenbasis, so the secular equation in the
    shift mu is solved by bisection.
    """
    if w[0] > 0:
        p = -g / w
        if np.linalg.norm(p) <= radius:
            return p
    lo = max(0.0, -w[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        p_lo = np.where(g == 0, 0.0, -g / (w + lo))
    if not np.all(np.isfinite(p_lo)) or np.linalg.norm(p_lo) > radius:
        hi = lo + np.linalg.norm(g) / radius
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.linalg.norm(g / (w + mid)) > radius:
                lo = mid
            else:
                hi = mid
        return -g / (w + hi)
    # hard case: fill the remaining length along the lowest-curvature direction
    p = np.where(np.isfinite(p_lo), p_lo, 0.0)
    p[0] -= np.sqrt(max(radius ** 2 - p @ p, 0.0))
    return p


class TrustRegion:
    """Radius of the joint step, carried from one iteration to the next."""

    def __init__(self, radius):
        self.radius = float(radius)


def joint_step(plant, state, config, region):
    """Trust-region step on all of (R, b), transverse to the orbit."""
    grad, basis, w, v = joint_model(plant, state)
    g = v.T @ (basis.T @ grad)
    theta = pack(state.params)
    for _ in range(config.max_backtracks + 1):
        p = trust_region_solve(w, g, region.radius)
        predicted = -(g @ p + 0.5 * p @ (w * p))
        step_norm = float(np.linalg.norm(p))
        params = unpack(theta + basis @ (v @ p), plant)
        cls = closed_loop(plant, params)
        ok = False
        if cls.stable and predicted > 0:
            try:
                cost = cls.cost
                ok = _acceptable(plant, state, params, cost)
            except CQLQGError:
                ok = False
        if ok:
            actual = state.cost - cost
            if abs(actual) <= resolution(state.cost):
                actual = -path_decrease(plant, state.params, params)
            ratio = actual / predicted
            if ratio > 0.75 and step_norm >= 0.99 * region.radius:
                region.radius *= 2.0
            elif ratio < 0.25:
                region.radius = 0.25 * step_norm
            return StepResult(State(params, cls, grad_R_b(plant, cls, check=False)),
                              step_norm, True, False)
        region.radius = 0.25 * min(region.radius, step_norm)
    return StepResult(None, None, False, True)


def take_step(plant, state, kind, config, phi=None, region=None):
    params = state.params
    try:
        if kind == JOINT:
            return joint_step(plant, state, config, region)
        if kind == UPDATE_B1:
            target = gain_update_b1(plant, state, phi)
            delta = target - params.b1

            def candidate(t):
                return params.replace(b1=params.b1 + t * delta)
        elif kind == UPDATE_B2:
            target = gain_update_b2(plant, state, phi)
            delta = target - params.b2

            def candidate(t):
                return params.replace(b2=params.b2 + t * delta)
        else:
            delta, _ = newton_direction(plant, state, config)

            def candidate(t):
                return params.replace(R=params.R + t * delta)
    except (SingularOperator, Unstable) as exc:
        log.debug("%s skipped: %s", kind, exc)
        return StepResult(None, None, False, True)
    if not np.any(delta):
        return StepResult(state, 0.0, True, True)
    result = stability_recovery(plant, state, candidate, config)
    if not result.accepted and kind == NEWTON_R:
        # steepest descent with a unit trust step as the fallback direction
        grad = state.first.dRE
        norm = np.linalg.norm(grad)
        if norm > 0:
            result = stability_recovery(
                plant, state, lambda t: params.replace(R=params.R - t * grad / norm), config)
    return result


def fix_gauge(plant, state):
    """Move to the symplectically equivalent controller whose covariance is diagonal.

    The cost is invariant under canonical state changes, so without this the
    iterates can drift along a non-compact family of equivalent controllers.
    The move is kept only if rounding does not raise the cost.
    """
    try:
        sigma, _ = williamson(state.cls.Pb(2, 2), plant.comm.J0)
        _, params = symplectic_transform(state.cls.ctrl, state.params, sigma, plant.comm)
        cls = closed_loop(plant, params)
        if not cls.stable or not cls.cost <= state.cost:
            return state
    except (ValueError, np.linalg.LinAlgError, CQLQGError):
        return state
    return State(params, cls, grad_R_b(plant, cls, check=False))


def _record(plant, state, iteration, damping):
    first = state.first
    dom = domination_radius(state.cls, first.Phi)
    return IterationRecord(iteration, float(state.cost), float(np.linalg.norm(first.Psi)),
                           float(np.linalg.norm(first.dEdb)), float(state.cls.abscissa),
                           dom.radius, dict(damping))


def is_converged(state, config):
    return (np.linalg.norm(state.first.Psi) <= config.tol_psi
            and np.linalg.norm(state.first.dEdb) <= config.tol_grad)


def is_degenerate(state):
    cls = state.cls
    return cls.abscissa > -DEGENERACY_MARGIN * (1.0 + np.linalg.norm(cls.A))


# initialization

def _backtrack_to_stable(plant, params, config):
    t = 1.0
    for _ in range(config.max_backtracks + 1):
        trial = ControllerParams(t * params.R, t * params.b1, t * params.b2)
        cls = closed_loop(plant, trial, with_gramians=False)
        if cls.stable:
            return trial
        t *= config.backtrack
    return None


def stabilize(plant, params, margin=INIT_MARGIN):
    """Bring the closed-loop spectral abscissa below -margin by Nelder-Mead.

    The objective is flat once the target is met, so the search stops there
    instead of chasing ever larger gains. Returns None on failure.
    """
    def objective(theta):
        return max(closed_loop(plant, unpack(theta, plant), with_gramians=False).abscissa, -margin)

    theta = pack(params)
    for _ in range(3):
        res = scipy.optimize.minimize(objective, theta, method="Nelder-Mead",
                                      options={"maxfev": 4000, "fatol": 0.0})
        theta = res.x
        if res.fun <= -margin:
            return unpack(theta, plant)
    return None


def classical_seed(plant, rng, jitter=1e-2):
    """PR parameters whose output matrix matches the classical control gain."""
    cc = classical_controller(plant)
    j0, _, j2, _ = plant.comm
    scale = jitter * max(np.linalg.norm(cc.b2), 1e-12)
    b1 = j0 @ cc.c.T @ j2 + scale * rng.standard_normal((plant.n, plant.m2))
    r, _ = recover_R(cc.a, np.hstack([b1, cc.b2]), plant.comm)
    return ControllerParams(r, b1, cc.b2)


def _usable(plant, params):
    try:
        return np.isfinite(cost_of(plant, params))
    except CQLQGError:
        return False


def _stable_start(plant, params, config):
    start = _backtrack_to_stable(plant, params, config)
    if start is None or not _usable(plant, start):
        start = stabilize(plant, params)
    if start is None or not _usable(plant, start):
        return None
    return start


def initial_params(plant, config, rng=None, user_params=None):
    """Stabilizing starting point according to ``config.init``."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    if config.init == "user":
        if user_params is None:
            raise InitializationFailed("user initialization requested without parameters")
        if closed_loop(plant, user_params, with_gramians=False).stable:
            return user_params
        raise InitializationFailed("user-supplied parameters do not stabilize the plant")
    if config.init == "classical-seed":
        start = _stable_start(plant, classical_seed(plant, rng), config)
        if start is not None:
            return start
    elif config.init != "random":
        raise ValueError(f"unknown initialization {config.init!r}")
    start = random_start(plant, config, rng)
    if start is not None:
        return start
    raise InitializationFailed("no stabilizing starting controller found")


def random_start(plant, config, rng):
    """First stabilizable draw of standard normal (R, b), or None."""
    for _ in range(config.init_draws):
        r = rng.standard_normal((plant.n, plant.n))
        params = ControllerParams((r + r.T) / 2, rng.standard_normal((plant.n, plant.m2)),
                                  rng.standard_normal((plant.n, plant.p)))
        start = _stable_start(plant, params, config)
        if start is not None:
            return start
    return None


def perturbed_start(plant, base, config, rng):
    """``base`` with relative Gaussian noise, made stable."""
    theta = pack(base)
    noise = rng.standard_normal(theta.size)
    theta = theta + config.restart_spread * np.linalg.norm(theta) / np.sqrt(theta.size) * noise
    return _stable_start(plant, unpack(theta, plant), config)


def restart_point(plant, base, config, rng, k):
    """Odd restarts draw afresh, even ones perturb the first starting point."""
    if k % 2:
        return random_start(plant, config, rng)
    return perturbed_start(plant, base, config, rng)


class Attempt(NamedTuple):
    status: str
    state: State
    records: list
    diagnostics: list
    iterations: int


def _run(plant, state, config, budget, callback, offset, kinds, monitor=None):
    records = [_record(plant, state, offset, {})]
    if callback:
        callback(records[-1])
    if monitor:
        monitor(state)
    status = MAX_ITERS
    if is_converged(state, config):
        status = DEGENERATE if is_degenerate(state) else CONVERGED
    diagnostics = []
    region = TrustRegion(0.1 * max(1.0, np.linalg.norm(pack(state.params))))
    it = 0
    while status == MAX_ITERS and it < budget:
        it += 1
        damping = {}
        phi_frozen = None if config.refresh_phi else state.first.Phi
        any_accepted = False
        for kind in kinds:
            if kind == JOINT and is_converged(state, config):
                break
            result = take_step(plant, state, kind, config, phi_frozen, region)
            if result.accepted and result.state is not None:
                if result.damping:
                    any_accepted = True
                state = result.state
            damping[kind] = result.damping
        if config.gauge_fix:
            state = fix_gauge(plant, state)
        pr = check_physical_realizability(state.cls.ctrl, plant.comm)
        if not pr.passed:
            diagnostics.append(f"iteration {offset + it}: realizability residuals "
                               f"{pr.residual1:.2e}, {pr.residual2:.2e}")
        records.append(_record(plant, state, offset + it, damping))
        if callback:
            callback(records[-1])
        if monitor:
            monitor(state)
        if is_converged(state, config):
            status = DEGENERATE if is_degenerate(state) else CONVERGED
        elif not any_accepted:
            status = STALLED
        elif _stagnating(records, config):
            status = STAGNATED
    costs = [r.cost for r in records]
    if not is_monotone(costs):
        diagnostics.append("cost trace is not monotone")
    return Attempt(status, state, records, diagnostics, it)


def _stagnating(records, config):
    if config.patience <= 0 or len(records) <= config.patience:
        return False
    old, new = records[-1 - config.patience], records[-1]
    grad_old = old.psi_norm + old.dedb_norm
    grad_new = new.psi_norm + new.dedb_norm
    return grad_new > 0.1 * grad_old and old.cost - new.cost < config.stall_rel * abs(old.cost)


def _better(a, b):
    """Whether attempt ``a`` should replace the incumbent ``b``."""
    if b is None:
        return True
    if (a.status == CONVERGED) != (b.status == CONVERGED):
        return a.status == CONVERGED
    return a.state.cost < b.state.cost


def synthesize(plant, config=None, user_params=None, callback=None, monitor=None):
    """Run the alternating scheme and return a SynthesisReport.

    ``callback`` receives each IterationRecord and ``monitor`` the State
    after each outer iteration, for progress output and external checks.

    An attempt that stalls or exhausts its share of the iteration budget is
    followed by a restart from a perturbed starting point, up to
    ``config.restarts`` times. The best attempt is reported; converged
    attempts beat unconverged ones, then lower cost wins.
    """
    config = SolveConfig() if config is None else config
    rng = np.random.default_rng(config.seed)
    start = initial_params(plant, config, rng, user_params)
    state = make_state(plant, start)
    best = None
    used = 0
    attempts = []
    for k in range(config.restarts + 1):
        last = k == config.restarts
        budget = config.max_iters - used if last else min(config.attempt_iters, config.max_iters - used)
        if k > 0:
            params = restart_point(plant, start, config, rng, k)
            if params is None:
                continue
            try:
                state = make_state(plant, params)
            except CQLQGError:
                continue
        kinds = config.order
        if config.joint_newton and JOINT not in kinds:
            # odd restarts drop the gain assignments, whose frozen-Gramian
            # steps tend to follow the high-gain drift when it is present
            kinds = (JOINT,) if k % 2 else kinds + (JOINT,)
        attempt = _run(plant, state, config, budget, callback, used, kinds, monitor)
        used += attempt.iterations
        attempts.append({"start_cost": float(attempt.records[0].cost), "status": attempt.status,
                         "cost": float(attempt.state.cost), "iterations": attempt.iterations})
        if _better(attempt, best):
            best = attempt
        if attempt.status == CONVERGED or used >= config.max_iters:
            break
    diagnostics = list(best.diagnostics)
    status = best.status
    if status == DEGENERATE:
        diagnostics.append("critical point at the decoupling boundary")
    if status != CONVERGED:
        status = MAX_ITERS if used >= config.max_iters else STALLED
    state = best.state
    return SynthesisReport(status, best.records, state.params,
                           realize_controller(state.params, plant), float(state.cost),
                           float(best.records[0].cost), used, diagnostics, attempts)


# certification

class Certificate(NamedTuple):
    cost: float
    psi_norm: float
    dedb_norm: float
    h22_residual: float
    hessian_min_eig: float
    fd_grad_R: float
    fd_grad_b: float
    gain_residual_b1: float
    gain_residual_b2: float
    pr_residuals: tuple
    stable: bool


def check_criticality(plant, params, fd=True, h=None):
    """First- and second-order optimality diagnostics at (R, b)."""
    state = make_state(plant, params)
    first = state.first
    j0 = plant.comm.J0
    h22 = state.cls.Hb(2, 2)
    h22_res = float(np.linalg.norm(h22 + first.Phi @ j0))
    hmin = hessian_R_matrix(plant, state.cls, diagnostics=False).min_eig
    r1, r2 = gain_residuals(plant, state.cls)
    fd_r = fd_b = float("nan")
    if fd:
        def cost_R(r):
            return closed_loop(plant, params.replace(R=r)).cost

        def cost_b(b):
            return closed_loop(plant, ControllerParams.from_b(params.R, b, plant.m2)).cost
        fd_r = float(np.linalg.norm(fd_gradient(cost_R, params.R, h, symmetric=True, order=4)))
        fd_b = float(np.linalg.norm(fd_gradient(cost_b, params.b, h, order=4)))
    pr = check_physical_realizability(state.cls.ctrl, plant.comm)
    return Certificate(float(state.cost), float(np.linalg.norm(first.Psi)),
                       float(np.linalg.norm(first.dEdb)), h22_res, float(hmin), fd_r, fd_b,
                       float(np.linalg.norm(r1)), float(np.linalg.norm(r2)),
                       (pr.residual1, pr.residual2), True)

import numpy as np
import pytest

from cqlqg.classical import classical_controller
from cqlqg.errors import InitializationFailed, Unstable
from cqlqg.io import random_plant
from cqlqg.linalg import symmetrize
from cqlqg.model import ControllerParams, closed_loop, realize_controller
from cqlqg.optimizer import (CONVERGED, JOINT, MAX_ITERS, NEWTON_R, ORDERS, UPDATE_B1, UPDATE_B2,
                             SolveConfig, check_criticality, classical_seed, fix_gauge,
                             gain_residuals, gain_update_b1, gain_update_b2, initial_params,
                             is_monotone, make_state, newton_direction, orbit_tangents, pack,
                             path_decrease, resolution, stability_recovery, synthesize,
                             theta_gradient, trust_region_solve, unpack)

from conftest import stable_instance


@pytest.fixture(scope="module")
def converged():
    plant = random_plant(3, abscissa=0.3).plant()
    return plant, synthesize(plant, SolveConfig(seed=0))


class TestConfig:
    def test_defaults(self):
        cfg = SolveConfig()
        assert cfg.max_iters == 200 and cfg.order == ORDERS["filter-first"]
        assert cfg.to_dict()["order"] == list(cfg.order)

    @pytest.mark.parametrize("kw", [dict(tol_grad=0), dict(backtrack=1.0), dict(max_iters=-1),
                                    dict(order=("bogus",))])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SolveConfig(**kw)


class TestTrustRegion:
    def test_interior_newton(self):
        w = np.array([1.0, 2.0])
        g = np.array([0.1, 0.2])
        assert np.allclose(trust_region_solve(w, g, 10.0), -g / w)

    def test_boundary(self, rng):
        for _ in range(50):
            w = rng.standard_normal(5)
            w.sort()
            g = rng.standard_normal(5)
            radius = rng.uniform(0.01, 1.0)
            p = trust_region_solve(w, g, radius)
            assert np.linalg.norm(p) <= radius * (1 + 1e-8)
            model = g @ p + 0.5 * p @ (w * p)
            # no random feasible point does better
            for _ in range(50):
                q = rng.standard_normal(5)
                q *= radius * rng.uniform() / np.linalg.norm(q)
                assert model <= g @ q + 0.5 * q @ (w * q) + 1e-9

    def test_hard_case(self):
        w = np.array([-1.0, 2.0])
        g = np.array([0.0, 0.1])
        p = trust_region_solve(w, g, 1.0)
        assert np.linalg.norm(p) == pytest.approx(1.0)


class TestMonotone:
    def test_examples(self):
        assert is_monotone([3.0, 2.0, 2.0, 1.0])
        assert not is_monotone([1.0, 2.0])
        assert is_monotone([1.0, 1.0 + 10 * np.finfo(float).eps])
        assert resolution(0.0) == resolution(1.0)


class TestCoordinates:
    def test_pack_round_trip(self, rng):
        plant, params = stable_instance(rng)
        back = unpack(pack(params), plant)
        assert np.array_equal(back.R, params.R) and np.array_equal(back.b, params.b)

    def test_orbit_directions_leave_cost_unchanged(self, rng):
        plant, params = stable_instance(rng)
        state = make_state(plant, params)
        grad = theta_gradient(plant, state.first)
        tangents = orbit_tangents(plant, params)
        assert np.max(np.abs(grad @ tangents)) <= 1e-8 * (1 + np.linalg.norm(grad))

    def test_path_decrease_matches_difference(self, rng):
        plant, params = stable_instance(rng)
        trial = params.replace(R=params.R + 1e-3 * symmetrize(rng.standard_normal((2, 2))))
        diff = closed_loop(plant, trial).cost - closed_loop(plant, params).cost
        assert path_decrease(plant, params, trial) == pytest.approx(diff, rel=1e-5)


class TestSteps:
    def test_identity_hessian_is_minus_gradient(self, rng):
        plant, params = stable_instance(rng)
        state = make_state(plant, params)
        step, shift = newton_direction(plant, state, SolveConfig(identity_hessian=True))
        assert np.allclose(step, -state.first.dRE) and shift == 0

    def test_newton_step_is_descent(self, rng):
        for _ in range(10):
            plant, params = stable_instance(rng)
            state = make_state(plant, params)
            step, _ = newton_direction(plant, state)
            assert np.sum(step * state.first.dRE) < 0

    def test_gain_updates_solve_frozen_equations(self, rng):
        plant, params = stable_instance(rng)
        state = make_state(plant, params)
        b1 = gain_update_b1(plant, state)
        b2 = gain_update_b2(plant, state)
        r1, r2 = gain_residuals(plant, state.cls, b1, b2)
        assert np.linalg.norm(r1) <= 1e-10 * (1 + np.linalg.norm(b1))
        assert np.linalg.norm(r2) <= 1e-10 * (1 + np.linalg.norm(b2))

    def test_stability_recovery_backtracks(self, rng):
        plant, params = stable_instance(rng)
        state = make_state(plant, params)
        grad = state.first.dRE
        huge = 1e6 * grad / np.linalg.norm(grad)
        result = stability_recovery(plant, state, lambda t: params.replace(R=params.R - t * huge))
        assert result.accepted and result.damping < 1
        assert result.state.cost < state.cost

    def test_stability_recovery_gives_up(self, rng):
        plant, params = stable_instance(rng)
        state = make_state(plant, params)
        up = state.first.dRE
        result = stability_recovery(plant, state, lambda t: params.replace(R=params.R + t * up),
                                    SolveConfig(max_backtracks=3))
        assert not result.accepted and result.stalled

    def test_gauge_fix_keeps_cost(self, rng):
        plant, params = stable_instance(rng)
        state = make_state(plant, params)
        fixed = fix_gauge(plant, state)
        assert fixed.cost <= state.cost
        assert fixed.cost == pytest.approx(state.cost, rel=1e-9)
        pbb = fixed.cls.Pb(2, 2)
        assert np.allclose(pbb, np.diag(np.diag(pbb)), atol=1e-9 * np.linalg.norm(pbb)) \
            or fixed is state


class TestInitialization:
    def test_classical_seed_matches_gain(self):
        plant = random_plant(3, abscissa=0.3).plant()
        seed = classical_seed(plant, np.random.default_rng(0), jitter=0.0)
        ctrl = realize_controller(seed, plant)
        assert np.allclose(ctrl.c, classical_controller(plant).c)

    def test_user_params_must_stabilize(self):
        plant = random_plant(1, abscissa=0.5).plant()
        with pytest.raises(InitializationFailed):
            initial_params(plant, SolveConfig(init="user"),
                           user_params=ControllerParams.zeros(plant))
        with pytest.raises(InitializationFailed):
            initial_params(plant, SolveConfig(init="user"))

    def test_random_init_is_stable(self):
        plant = random_plant(2, abscissa=0.3).plant()
        params = initial_params(plant, SolveConfig(init="random", seed=5))
        assert closed_loop(plant, params).stable

    def test_make_state_rejects_unstable(self):
        plant = random_plant(1, abscissa=0.5).plant()
        with pytest.raises(Unstable):
            make_state(plant, ControllerParams.zeros(plant))


class TestSynthesis:
    def test_converges(self, converged):
        plant, report = converged
        assert report.status == CONVERGED
        assert report.outer_iterations <= 200
        assert is_monotone(report.costs)
        last = report.iterations[-1]
        assert last.psi_norm <= 1e-7 and last.dedb_norm <= 1e-7
        assert report.cost <= report.initial_cost

    def test_certificate(self, converged):
        plant, report = converged
        cert = check_criticality(plant, report.params)
        assert cert.fd_grad_R <= 1e-4 and cert.fd_grad_b <= 1e-4
        assert cert.h22_residual <= 1e-6
        assert max(cert.pr_residuals) <= 1e-10
        assert cert.cost >= classical_controller(plant).cost - 1e-8

    def test_deterministic(self, converged):
        plant, report = converged
        again = synthesize(plant, SolveConfig(seed=0))
        assert again.costs == report.costs

    def test_zero_iterations(self):
        plant = random_plant(3, abscissa=0.3).plant()
        report = synthesize(plant, SolveConfig(max_iters=0))
        assert report.status == MAX_ITERS and len(report.iterations) == 1

    def test_callback_and_monitor(self):
        plant = random_plant(3, abscissa=0.3).plant()
        seen, states = [], []
        synthesize(plant, SolveConfig(max_iters=3, restarts=0), callback=seen.append,
                   monitor=states.append)
        assert len(seen) == len(states) == 4
        assert [r.iteration for r in seen] == [0, 1, 2, 3]

    @pytest.mark.parametrize("order", [(UPDATE_B2, UPDATE_B1, NEWTON_R), (JOINT,)])
    def test_orders(self, order):
        plant = random_plant(3, abscissa=0.3).plant()
        report = synthesize(plant, SolveConfig(order=order, max_iters=5, restarts=0))
        assert is_monotone(report.costs)


def test_restart_at_optimum_is_fixed_point(converged):
    plant, report = converged
    again = synthesize(plant, SolveConfig(init="user"), user_params=report.params)
    assert again.status == CONVERGED and again.outer_iterations <= 2
    assert abs(again.cost - report.cost) <= 1e-10 * max(1.0, report.cost)

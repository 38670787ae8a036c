import numpy as np
import pytest

from dropflow import field as F
from dropflow import flow, metrics
from dropflow.radial import VolumePreserving, radial_ode
from dropflow.shapes import RadialShape, check_rho_reflection, star_radius
from dropflow.velocity import VelocityLaw

RS = F.equilibrium_radius(1.0)


def params(**kw):
    base = dict(h=0.02, M=5.0, r0=0.5, V=1.0, m=64, n_s=16, rho=0.1)
    base.update(kw)
    return flow.SchemeParams(**base)


class TestParams:
    @pytest.mark.parametrize("bad", [{"h": 0}, {"M": -1}, {"r0": 0}, {"V": 0}, {"rho": 0.2}, {"rho": -0.1}])
    def test_validation(self, bad):
        with pytest.raises(ValueError):
            params(**bad)

    def test_opt_from_dict(self):
        p = params(opt={"max_iter": 7})
        assert p.opt.max_iter == 7 and p.to_dict()["opt"]["max_iter"] == 7


class TestStep:
    def test_equilibrium_is_stationary(self):
        p = params(m=128, n_s=32)
        ball = RadialShape.ball(RS, 128)
        out = flow.jko_step(ball, p)
        assert metrics.hausdorff(out, ball) <= 1e-3 * RS

    def test_no_admissible_improvement_near_equilibrium(self, rng):
        # multi-start: random admissible perturbations never beat the returned minimiser
        p = params(m=64, n_s=16)
        ball = RadialShape.ball(RS, 64)
        out = flow.jko_step(ball, p)
        obj = flow._Objective(ball, p)
        f = obj.value(out.radii)
        for _ in range(10):
            pert = out.radii + 1e-3 * rng.standard_normal(64)
            assert obj.value(pert) >= f - 1e-10

    def test_shrinking_ball_matches_implicit_euler(self):
        h = 0.01
        p = params(h=h, m=128, n_s=32)
        start = RadialShape.ball(1.3 * RS, 128)
        out = flow.jko_step(start, p)
        sol = radial_ode(1.3 * RS, VelocityLaw.power(2), VolumePreserving(1.0), h, h / 100)
        assert np.ptp(out.radii) < 1e-6
        assert out.radii.mean() < 1.3 * RS
        assert abs(out.radii.mean() - sol.r[-1]) < 5 * h * h + 2e-3

    def test_objective_decreases_and_cap_holds(self):
        p = params()
        start = RadialShape.perturbed_ball(1.1 * RS, 0.15, 3, 64)
        out, info = flow.jko_step(start, p, return_info=True)
        assert info["objective"] <= info["objective0"]
        assert np.max(np.abs(out.radii - start.radii)) <= p.M * p.h + 1e-15
        assert star_radius(out) >= p.r0

    def test_infeasible_class(self):
        with pytest.raises(flow.InfeasibleStep, match="infeasible admissible class"):
            flow.jko_step(RadialShape.ball(0.4, 64), params(r0=0.5))

    def test_star_constraint_is_enforced(self):
        # r0 right at the current star radius: the step must keep it
        start = RadialShape.perturbed_ball(1.1 * RS, 0.2, 3, 64)
        p = params(r0=star_radius(start) - 1e-9)
        out = flow.jko_step(start, p)
        assert star_radius(out) >= p.r0


@pytest.fixture(scope="module")
def traj():
    p = params(h=0.02)
    init = RadialShape.perturbed_ball(1.1 * RS, 0.02, 3, 64)
    return flow.run_flow(init, p, 0.3, n_dir=64)


class TestRun:
    def test_invariants(self, traj):
        p = traj.params
        E0 = traj.steps[0].energy
        assert not traj.aborted
        assert len(traj.steps) == 16
        assert np.all(traj.decay_slacks() >= -1e-9 * E0)
        assert all(s.hausdorff_step <= p.M * p.h + 2 * (2 * np.pi / p.m) * s.max_radius for s in traj.steps)
        assert all(s.star_radius >= p.r0 for s in traj.steps)
        assert all(abs(s.volume - 1.0) < 1e-3 for s in traj.steps)
        assert np.allclose(traj.times, 0.02 * np.arange(16))

    def test_reflection_preserved_for_small_data(self, traj):
        assert traj.initial_reflection_ok
        for s in traj.steps:
            assert s.rho_sup_smin <= traj.params.rho + 0.01 and s.min_radius >= traj.params.rho

    def test_chain_estimates(self, traj):
        slack, C = flow.chain_estimate(traj)
        assert slack >= -1e-9 * traj.steps[0].energy and 0 < C < 1
        r = min(s.star_radius for s in traj.steps)
        R = max(s.max_radius for s in traj.steps)
        assert flow.square_triangle_chain(traj.shapes, r, R) >= 0

    def test_records_serialise(self, traj):
        rec = traj.steps[3].to_json()
        assert set(rec) == {"k", "t", "lambda", "energy", "pseudo_step_sq", "hausdorff_step", "rho_sup_smin",
                            "min_radius", "max_radius", "grad_min", "grad_max"}

    def test_requires_reflection_by_default(self):
        init = RadialShape.perturbed_ball(1.1 * RS, 0.15, 3, 64)
        with pytest.raises(ValueError, match="rho-reflection"):
            flow.run_flow(init, params(), 0.02, n_dir=32)
        traj = flow.run_flow(init, params(), 0.02, n_dir=32, require_reflection=False)
        assert traj.initial_reflection_ok is False

    def test_abort_when_reflection_ball_exits(self, monkeypatch):
        # a step that shrinks the base below rho must stop the run with a flag
        tiny = lambda cur, p, return_info=False: (RadialShape(np.full(cur.m, 0.05)), {"objective": 0.0, "objective0": 0.0, "n_evals": 0})
        monkeypatch.setattr(flow, "jko_step", tiny)
        traj = flow.run_flow(RadialShape.ball(RS, 64), params(r0=0.01), 0.1, monitor_rho=False)
        assert traj.aborted and "reflection ball" in traj.reason and len(traj.steps) == 2


def test_radial_dissipation_matches_closed_form():
    p = params(h=0.005, m=128, n_s=32, rho=None)
    traj = flow.run_flow(RadialShape.ball(1.2, 128), p, 0.02)
    for rep in flow.dissipation_check(traj):
        assert rep["rel_discrepancy"] < 0.05
        assert rep["predicted"] == pytest.approx(rep["radial_reference"], rel=0.02)


def test_dissipation_zero_at_equilibrium():
    traj = flow.run_flow(RadialShape.ball(RS, 128), params(m=128, n_s=32, rho=None), 0.04)
    assert all(abs(r["predicted"]) < 1e-5 and abs(r["rate"]) < 1e-5 for r in flow.dissipation_check(traj))


def test_dissipation_needs_two_steps():
    traj = flow.FlowTrajectory(params=params())
    with pytest.raises(ValueError):
        flow.dissipation_check(traj)


def test_best_fit_ball_recovers_centre():
    s = RadialShape.offset_ball(RS, (0.05, -0.03), 256)
    d, c = flow.best_fit_ball(s, RS, 0.1)
    assert d < 1e-3 and np.allclose(c, [0.05, -0.03], atol=1e-3)
    d2, c2 = flow.best_fit_ball(s, RS, 0.02)
    assert np.linalg.norm(c2) <= 0.02 + 1e-12 and d2 > d


def test_h_refinement_and_m_sweep():
    p = params(h=0.04, rho=None)
    init = RadialShape.perturbed_ball(1.1 * RS, 0.1, 3, 64)
    trajs, devs = flow.convergence_study(init, p, 0.16, levels=3)
    assert len(trajs) == 3 and devs[1] < devs[0]
    trajs, gaps = flow.m_sweep(init, p, 0.08, [1.0, 5.0, 25.0])
    assert gaps[1] <= gaps[0] + 1e-12

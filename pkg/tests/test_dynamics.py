import math
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import expm

import ltvbench as lb
from ltvbench.dynamics import (
    Kind,
    ScenarioSpec,
    Trajectory,
    _kick_step_indices,
    derivative,
    discretize,
    ground_truth_ltv,
    linearized_rates,
    load_scenario,
    params_at,
    sat,
    save_scenario,
    scenario,
    simulate,
    step_param_time,
    step_rk4,
)
from ltvbench.exceptions import DataFormatError
from ltvbench.ident import predict_rollout


def two_frame_spec(kind, frames):
    return ScenarioSpec(kind=kind, frames=frames, dt=0.02, horizon=4.0)


class TestParamsAt:
    def test_ltv_at_zero(self):
        spec = scenario("ltv")
        m, cs, cd = params_at(spec, 0.0)
        assert m == spec.mass
        assert cs == pytest.approx(0.5 * spec.spring)
        assert cd == pytest.approx(2.5 * spec.damping)

    def test_inst_reconfig_frame_lookup(self):
        spec = two_frame_spec(Kind.INST_RECONFIG, ((1.0, 1.0, 1.0), (2.0, 3.0, 4.0)))
        assert params_at(spec, 2.0) == (2.0, 3.0, 4.0)
        assert params_at(spec, 1.99) == (1.0, 1.0, 1.0)

    def test_mixed_reconfig_modulates_frame_bases(self):
        spec = two_frame_spec(Kind.MIXED_RECONFIG, ((1.0, 1.0, 1.0), (2.0, 3.0, 4.0)))
        w = spec.param_freq
        m, cs, cd = params_at(spec, 2.0)
        assert m == 2.0
        assert cs == pytest.approx(math.cos(3.0 * w + math.pi / 4) ** 2 * 3.0)
        assert cd == pytest.approx((1.5 + math.cos(2.0 * w)) * 4.0)

    def test_outside_horizon_raises(self):
        spec = scenario("ltv")
        with pytest.raises(ValueError):
            params_at(spec, -0.5)
        with pytest.raises(ValueError):
            params_at(spec, spec.horizon + 1.0)

    def test_horizon_end_uses_last_frame(self):
        spec = two_frame_spec(Kind.INST_RECONFIG, ((1.0, 1.0, 1.0), (2.0, 3.0, 4.0)))
        assert params_at(spec, 4.0) == (2.0, 3.0, 4.0)


class TestSat:
    @pytest.mark.parametrize("u,limit,expected", [(3, 5, 3), (7, 5, 5), (-9, 5, -5)])
    def test_clamp(self, u, limit, expected):
        assert sat(u, limit) == expected

    def test_limit_must_be_positive(self):
        with pytest.raises(ValueError):
            sat(1.0, 0.0)


class TestDerivative:
    def test_equilibrium(self):
        spec = scenario("ltv")
        assert_allclose(derivative(spec, 0.0, np.zeros(2), 0.0), np.zeros(2))

    def test_saturation_clips_input_term(self):
        spec = scenario("nl")
        d_big = derivative(spec, 0.0, np.zeros(2), 10.0)
        d_lim = derivative(spec, 0.0, np.zeros(2), spec.sat_limit)
        assert d_big[1] == pytest.approx(d_lim[1])
        assert d_big[1] == pytest.approx(spec.sat_limit / spec.mass)

    def test_undamped_spring(self):
        # bases chosen so the modulated constants are C_s(t)=1, C_d(t)=0
        spec = ScenarioSpec(kind=Kind.LTV, spring=2.0, damping=0.0, param_freq=0.0)
        assert_allclose(derivative(spec, 0.0, np.array([1.0, 0.0]), 0.0), [0.0, -1.0])

    def test_nld_kick_fires_near_center(self):
        spec = scenario("nld")

        def kick_contribution(x1):
            x = np.array([x1, 0.0])
            return derivative(spec, 0.0, x, 0.0, kick=1.0)[1] - derivative(spec, 0.0, x, 0.0)[1]

        assert kick_contribution(spec.dist_center) == pytest.approx(1.0)
        assert abs(kick_contribution(0.0)) < 1e-10


class TestStepRk4:
    def test_fixed_point_at_equilibrium(self):
        spec = scenario("ltv")
        out = step_rk4(spec, 0.0, np.zeros(2), 0.0, spec.dt)
        assert_allclose(out, np.zeros(2))

    def test_matches_matrix_exponential_on_frozen_plant(self):
        # frozen-parameter linear plant: one step against the expm oracle
        spec = replace(scenario("ltv"), param_freq=0.0, dt=1e-3)
        A_c, _ = linearized_rates(spec, 0.0)
        x0 = np.array([0.7, -0.4])
        expected = expm(A_c * 1e-3) @ x0
        out = step_rk4(spec, 0.0, x0, 0.0, 1e-3)
        assert np.max(np.abs(out - expected)) <= 1e-8

    def test_identical_seeds_identical_output(self):
        spec = scenario("nld")
        x0 = np.array([1.9, 0.3])
        a = step_rk4(spec, 0.0, x0, 0.5, spec.dt, np.random.default_rng(5))
        b = step_rk4(spec, 0.0, x0, 0.5, spec.dt, np.random.default_rng(5))
        assert np.array_equal(a, b)


class TestSimulate:
    def test_zero_everything_stays_at_origin(self):
        traj = simulate(scenario("ltv"), np.zeros(2), lambda t: 0.0)
        assert_allclose(traj.states, 0.0)
        assert traj.n_steps == 500

    def test_damped_plant_dissipates(self):
        spec = scenario("ltv")
        traj = simulate(spec, np.array([1.0, 0.0]), lambda t: 0.0)

        def energy(t, x):
            m, cs, _ = params_at(spec, t)
            return 0.5 * m * x[1] ** 2 + 0.5 * cs * x[0] ** 2

        e_first = energy(traj.times[0], traj.states[0])
        e_last = energy(traj.times[-1], traj.states[-1])
        assert e_last < 0.01 * e_first

    def test_interior_kick_schedule_count(self):
        spec = scenario("inst-reconfig")
        kicks = _kick_step_indices(spec)
        assert kicks == {100, 200, 300, 400}
        assert len(kicks) == math.ceil(spec.horizon / 2.0) - 1

    def test_kicks_perturb_only_after_first_boundary(self):
        spec = scenario("inst-reconfig")
        quiet = replace(spec, kick_sigma=0.0)
        a = simulate(spec, np.array([1.0, 0.0]), lambda t: 0.0, seed=11)
        b = simulate(quiet, np.array([1.0, 0.0]), lambda t: 0.0, seed=11)
        assert np.array_equal(a.states[:100], b.states[:100])
        assert not np.array_equal(a.states[100], b.states[100])

    def test_bitwise_deterministic_under_seed(self):
        spec = scenario("mixed-reconfig")
        a = simulate(spec, np.array([0.4, -0.2]), lambda t: math.sin(t), seed=21)
        b = simulate(spec, np.array([0.4, -0.2]), lambda t: math.sin(t), seed=21)
        assert a == b


class TestDiscretize:
    def test_zero_rate_matrix(self):
        pair = discretize(np.zeros((2, 2)), np.array([[1.0], [2.0]]), 0.5)
        assert_allclose(pair.A, np.eye(2))
        assert_allclose(pair.B, 0.5 * np.array([[1.0], [2.0]]))

    def test_rotation_generator_closed_form(self):
        dt = 0.3
        pair = discretize(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.zeros((2, 1)), dt)
        expected = np.array(
            [[math.cos(dt), math.sin(dt)], [-math.sin(dt), math.cos(dt)]]
        )
        assert_allclose(pair.A, expected, atol=1e-12)

    def test_diagonal_decay(self):
        pair = discretize(np.diag([-1.0, -2.0]), np.zeros((2, 1)), math.log(2.0))
        assert_allclose(pair.A, np.diag([0.5, 0.25]), atol=1e-12)

    def test_semigroup_property(self):
        rng = np.random.default_rng(3)
        A_c = rng.normal(size=(2, 2))
        B_c = rng.normal(size=(2, 1))
        dt1, dt2 = 0.13, 0.24
        whole = discretize(A_c, B_c, dt1 + dt2).A
        parts = discretize(A_c, B_c, dt2).A @ discretize(A_c, B_c, dt1).A
        assert_allclose(whole, parts, atol=1e-12)

    def test_invalid_dt(self):
        with pytest.raises(ValueError):
            discretize(np.zeros((2, 2)), np.zeros((2, 1)), 0.0)


class TestGroundTruthLtv:
    def test_constant_parameters_give_constant_pairs(self):
        spec = replace(scenario("ltv"), param_freq=0.0)
        model = ground_truth_ltv(spec)
        assert np.max(np.abs(model.A - model.A[0])) <= 1e-14
        assert np.max(np.abs(model.B - model.B[0])) <= 1e-14

    def test_zoh_rollout_matches_fine_step_integration(self):
        spec = scenario("ltv")
        traj = simulate(spec, np.array([1.0, 0.0]), lambda t: 0.0)
        model = ground_truth_ltv(spec)
        predicted = predict_rollout(model, traj.states[0], traj.inputs)
        assert np.max(np.abs(predicted - traj.states)) <= 1e-4

    def test_inst_reconfig_blocks_constant_within_frames(self):
        spec = scenario("inst-reconfig")
        model = ground_truth_ltv(spec)
        for start in range(0, 500, 100):
            block = model.A[start : start + 100]
            assert np.max(np.abs(block - model.A[start])) <= 1e-14
        for boundary in (100, 200, 300, 400):
            assert np.max(np.abs(model.A[boundary] - model.A[boundary - 1])) > 1e-4

    def test_transition_is_matrix_exponential(self):
        # integrator consistency: every A(k) equals expm of the frozen rates
        spec = scenario("ltv")
        model = ground_truth_ltv(spec)
        for k in (0, 7, 123, 499):
            A_c, _ = linearized_rates(spec, step_param_time(spec, k))
            assert_allclose(model.A[k], expm(A_c * spec.dt), atol=1e-13)


class TestSpecValidation:
    def test_builtins(self):
        for name in lb.BUILTIN_SCENARIOS:
            spec = scenario(name)
            assert spec.n_steps == 500
        with pytest.raises(ValueError):
            scenario("banana")

    def test_bad_mass(self):
        with pytest.raises(ValueError):
            ScenarioSpec(kind=Kind.LTV, mass=0.0)

    def test_frames_rejected_for_continuous_kinds(self):
        with pytest.raises(ValueError):
            ScenarioSpec(kind=Kind.LTV, frames=((1.0, 1.0, 1.0),))

    def test_frame_count_must_cover_horizon(self):
        with pytest.raises(ValueError):
            ScenarioSpec(kind=Kind.INST_RECONFIG, frames=((1.0, 1.0, 1.0),), horizon=10.0)

    def test_roundtrip(self, tmp_path):
        spec = scenario("mixed-reconfig")
        save_scenario(spec, tmp_path / "spec.json")
        assert load_scenario(tmp_path / "spec.json") == spec

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(DataFormatError):
            load_scenario(tmp_path / "nope.json")


class TestTrajectoryType:
    def test_length_invariant(self):
        with pytest.raises(ValueError):
            Trajectory(times=np.arange(3.0), states=np.zeros((3, 2)), inputs=np.zeros((3, 1)))

    def test_input_vector_promoted_to_column(self):
        traj = Trajectory(times=np.arange(3.0), states=np.zeros((3, 2)), inputs=np.zeros(2))
        assert traj.inputs.shape == (2, 1)
        assert traj.q == 1

"""Engine-level tests on small synthetic systems and the kick pendulum."""

from __future__ import annotations

import numpy as np
import pytest

from pulsepend.errors import (
    ConfigError,
    InitialStateOutsideCD,
    StagnationError,
    TimeOutsideDomain,
)
from pulsepend.hybrid_core import (
    HybridSystemDef,
    HybridTime,
    JumpChannel,
    SolverConfig,
    arc_eval,
    domain_check,
    run_hybrid,
    sample_arc,
)
from pulsepend.pendulum_model import SystemParams, build_hybrid_system


def _sawtooth_system():
    """1-D descent: flow dx/dt = -1 on x >= 0, reset x -> 1 when x hits 0.

    From x0 = 1 the resets land at t = 1, 2, 3, ... exactly, which makes
    segment and jump bookkeeping easy to assert.
    """
    channel = JumpChannel(
        label="reset",
        guard=lambda x: x[0],
        member=lambda x, tol: x[0] <= tol,
        apply=lambda x, zero_choice: (np.array([1.0]), False, None),
    )
    return HybridSystemDef(
        name="sawtooth",
        dim=1,
        flow=lambda x: np.array([-1.0]),
        in_flow_set=lambda x, tol: x[0] >= -tol,
        channels=(channel,),
        state_names=("x",),
    )


def _stagnant_system():
    """Jump set covers everything and the reset is the identity."""
    channel = JumpChannel(
        label="noop",
        guard=lambda x: 1.0,
        member=lambda x, tol: True,
        apply=lambda x, zero_choice: (x.copy(), False, None),
    )
    return HybridSystemDef(
        name="stagnant",
        dim=1,
        flow=lambda x: np.array([0.0]),
        in_flow_set=lambda x, tol: True,
        channels=(channel,),
        state_names=("x",),
    )


class TestSolverConfig:
    def test_defaults(self):
        cfg = SolverConfig()
        assert cfg.method == "dop853"
        assert cfg.event_tol == 1e-12
        assert cfg.jump_policy == "jump-priority"

    def test_unknown_method_rejected(self):
        with pytest.raises(ConfigError):
            SolverConfig(method="euler")

    def test_rk4_needs_step(self):
        with pytest.raises(ConfigError):
            SolverConfig(method="rk4")
        SolverConfig(method="rk4", h=0.01)

    def test_bad_tolerances_rejected(self):
        with pytest.raises(ConfigError):
            SolverConfig(event_tol=0.0)
        with pytest.raises(ConfigError):
            SolverConfig(abs_tol=-1e-9)

    def test_sigma_zero_choice_restricted(self):
        with pytest.raises(ConfigError):
            SolverConfig(sgn_zero_choice=0)

    def test_hybrid_time_validation(self):
        HybridTime(1.0, 0)
        with pytest.raises(ConfigError):
            HybridTime(1.0, -1)
        with pytest.raises(ConfigError):
            HybridTime(float("nan"), 0)


class TestSawtooth:
    def test_segment_and_jump_counts(self):
        cfg = SolverConfig(t_max=4.5, j_max=50)
        arc = run_hybrid(_sawtooth_system(), np.array([1.0]), cfg)
        assert arc.jump_count == 4
        assert len(arc.segments) == arc.jump_count + 1

    def test_reset_times(self):
        cfg = SolverConfig(t_max=4.5, j_max=50)
        arc = run_hybrid(_sawtooth_system(), np.array([1.0]), cfg)
        assert np.allclose(arc.jump_times, [1.0, 2.0, 3.0, 4.0], atol=1e-10)

    def test_jump_limit_terminates_with_marker_segment(self):
        cfg = SolverConfig(t_max=100.0, j_max=3)
        arc = run_hybrid(_sawtooth_system(), np.array([1.0]), cfg)
        assert arc.jump_count == 3
        assert len(arc.segments) == 4
        last = arc.segments[-1]
        assert last.t_start == last.t_end

    def test_initial_state_in_jump_set_gives_zero_length_segment(self):
        cfg = SolverConfig(t_max=2.5, j_max=50)
        arc = run_hybrid(_sawtooth_system(), np.array([0.0]), cfg)
        first = arc.segments[0]
        assert first.t_start == first.t_end == 0.0
        assert arc.jumps[0].time == 0.0
        # after the instantaneous reset the run proceeds normally
        assert arc.jump_count == 3

    def test_domain_is_ordered(self):
        cfg = SolverConfig(t_max=4.5, j_max=50)
        arc = run_hybrid(_sawtooth_system(), np.array([1.0]), cfg)
        for (t0, t1, j), (u0, u1, k) in zip(arc.domain[:-1], arc.domain[1:]):
            assert t1 == u0
            assert k == j + 1


class TestStagnationGuard:
    def test_identity_reset_loop_raises(self):
        cfg = SolverConfig(t_max=1.0, j_max=500)
        with pytest.raises(StagnationError):
            run_hybrid(_stagnant_system(), np.array([0.3]), cfg)


class TestPendulumRuns:
    def test_outside_both_sets_raises(self, params, cfg):
        with pytest.raises(InitialStateOutsideCD):
            run_hybrid(build_hybrid_system(params), np.array([0.5, 1.0, -1.0]), cfg)

    def test_segments_exceed_jumps_by_one(self, params, cfg, start_state):
        arc = run_hybrid(build_hybrid_system(params), start_state, cfg)
        assert len(arc.segments) == arc.jump_count + 1
        assert arc.t_end == cfg.t_max

    def test_jump_boundary_states_touch_angle_zero(self, params, cfg, start_state):
        arc = run_hybrid(build_hybrid_system(params), start_state, cfg)
        for rec in arc.jumps:
            assert abs(rec.pre_state[0]) < 1e-9
            assert rec.post_state[0] == 0.0
            assert rec.label == "torque"

    def test_metadata_reflects_config(self, params, cfg, start_state):
        arc = run_hybrid(build_hybrid_system(params), start_state, cfg)
        assert arc.metadata["config"]["method"] == "dop853"
        assert arc.metadata["interpolation"] == "cubic-hermite"

    def test_rk4_matches_adaptive_coarsely(self, params, start_state):
        fine = run_hybrid(build_hybrid_system(params), start_state,
                          SolverConfig(t_max=10.0))
        fixed = run_hybrid(build_hybrid_system(params), start_state,
                           SolverConfig(method="rk4", h=0.001, t_max=10.0))
        assert fixed.jump_count == fine.jump_count
        gap = np.abs(np.array(fixed.jump_times) - np.array(fine.jump_times))
        assert gap.max() < 1e-8

    def test_sample_grid_spacing_capped(self, params, start_state):
        cfg = SolverConfig(t_max=10.0, max_sample_dt=0.02)
        arc = run_hybrid(build_hybrid_system(params), start_state, cfg)
        for seg in arc.segments:
            if len(seg.times) > 1:
                assert np.max(np.diff(seg.times)) <= cfg.max_sample_dt + 1e-12


class TestArcEval:
    def test_exact_at_sample_nodes(self, params, cfg, start_state):
        arc = run_hybrid(build_hybrid_system(params), start_state, cfg)
        seg = arc.segments[1]
        mid = len(seg.times) // 2
        got = arc_eval(arc, HybridTime(seg.times[mid], seg.j))
        assert np.array_equal(got, seg.states[mid])

    def test_interpolation_accuracy_between_nodes(self, params, cfg, start_state):
        from pulsepend.closed_form import ClosedFormTrajectory

        arc = run_hybrid(build_hybrid_system(params), start_state, cfg)
        ct = ClosedFormTrajectory(start_state, params, cfg.t_max + 1.0)
        seg = arc.segments[2]
        ts = np.linspace(seg.t_start, seg.t_end, 37)
        for t in ts:
            got = arc_eval(arc, HybridTime(float(t), seg.j))
            want = ct.state(float(t), seg.j)
            assert np.allclose(got[:2], want[:2], atol=1e-9)

    def test_accepts_tuple_argument(self, params, cfg, start_state):
        arc = run_hybrid(build_hybrid_system(params), start_state, cfg)
        seg = arc.segments[0]
        got = arc_eval(arc, (seg.t_start, 0))
        assert np.array_equal(got, seg.states[0])

    def test_time_outside_segment_raises(self, params, cfg, start_state):
        arc = run_hybrid(build_hybrid_system(params), start_state, cfg)
        with pytest.raises(TimeOutsideDomain):
            arc_eval(arc, HybridTime(arc.segments[0].t_end + 1.0, 0))
        with pytest.raises(TimeOutsideDomain):
            arc_eval(arc, HybridTime(0.0, 99))

    def test_sample_arc_vectorizes(self, params, cfg, start_state):
        arc = run_hybrid(build_hybrid_system(params), start_state, cfg)
        seg = arc.segments[1]
        ts = np.linspace(seg.t_start, seg.t_end, 13)
        block = sample_arc(arc, seg.j, ts)
        assert block.shape == (13, 3)
        single = arc_eval(arc, HybridTime(float(ts[4]), seg.j))
        assert np.allclose(block[4], single, atol=0.0)


class TestDomainCheck:
    def test_solver_output_is_clean(self, params, cfg, start_state):
        system = build_hybrid_system(params)
        arc = run_hybrid(system, start_state, cfg)
        report = domain_check(arc, system=system)
        assert report.ok, report.issues

    def test_detects_time_disorder(self, params, cfg, start_state):
        arc = run_hybrid(build_hybrid_system(params), start_state, cfg)
        arc.segments[1].times = arc.segments[1].times[::-1].copy()
        report = domain_check(arc)
        assert not report.ok

"""Augmented system: peak-triggered pulse-amplitude adaptation."""

from __future__ import annotations

import math

import numpy as np
import pytest

from pulsepend.adaptation import (
    AdaptationParams,
    AugmentedState,
    amplitude_trace,
    in_D1,
    in_D2,
    in_flow_set_aug,
    jump_G1,
    jump_G2,
    simulate_adaptive,
    summarize_adaptation,
)
from pulsepend.errors import AmplitudeCollapse, ParamOutOfRange
from pulsepend.hybrid_core import SolverConfig, run_hybrid, sample_arc
from pulsepend.pendulum_model import SystemParams, build_hybrid_system


def _ap(**kw) -> AdaptationParams:
    base = dict(alpha=0.5, epsilon=0.02, q1_star=math.pi / 6, dynamics="nonlinear")
    base.update(kw)
    return AdaptationParams(**base)


class TestParams:
    def test_validation(self):
        _ap(epsilon=0.0)  # adaptation disabled is allowed
        with pytest.raises(ParamOutOfRange):
            _ap(epsilon=-0.01)
        with pytest.raises(ParamOutOfRange):
            _ap(q1_star=0.0)
        with pytest.raises(ParamOutOfRange):
            _ap(q1_star=math.pi)

    def test_state_round_trip(self):
        st = AugmentedState(q1=0.3, q2=-1.2, sigma1=1, sigma2=-1, I=0.1)
        assert AugmentedState.from_array(st.as_array()) == st
        with pytest.raises(ParamOutOfRange):
            AugmentedState(q1=0.3, q2=0.0, sigma1=1, sigma2=1, I=-0.5)


class TestSets:
    def test_flow_set_needs_both_half_planes(self):
        assert in_flow_set_aug(np.array([0.3, 0.5, 1.0, 1.0, 0.1]))
        assert not in_flow_set_aug(np.array([0.3, -0.5, 1.0, 1.0, 0.1]))
        assert not in_flow_set_aug(np.array([-0.3, 0.5, 1.0, 1.0, 0.1]))
        assert in_flow_set_aug(np.array([-0.3, 0.5, -1.0, 1.0, 0.1]))

    def test_kick_set(self):
        assert in_D1(np.array([0.0, -0.5, 1.0, -1.0, 0.1]))
        assert in_D1(np.array([0.0, 0.5, -1.0, 1.0, 0.1]))
        # ascending through the bottom: wrong side of the velocity tracker
        assert not in_D1(np.array([0.0, 0.5, 1.0, 1.0, 0.1]))
        assert not in_D1(np.array([0.0, -0.5, 1.0, 1.0, 0.1]))
        assert not in_D1(np.array([0.2, -0.5, 1.0, -1.0, 0.1]))

    def test_peak_set(self):
        # a genuine rising peak: angle in the gravity-restoring range
        assert in_D2(np.array([0.3, 0.0, 1.0, 1.0, 0.1]))
        assert in_D2(np.array([-0.3, 0.0, -1.0, -1.0, 0.1]))
        # sigma2 opposing the restoring direction is not a capture point
        assert not in_D2(np.array([0.3, 0.0, 1.0, -1.0, 0.1]))
        assert not in_D2(np.array([0.3, 0.1, 1.0, 1.0, 0.1]))

    def test_peak_set_boundary_cases(self):
        assert in_D2(np.array([0.0, 0.0, 1.0, 1.0, 0.1]))
        assert not in_D2(np.array([-0.1, 0.0, 1.0, 1.0, 0.1]))


class TestKickReset:
    def test_descending_crossing(self):
        (post,) = jump_G1(AugmentedState(0.0, -0.5, 1, -1, 0.1))
        assert post == AugmentedState(0.0, -0.6, -1, -1, 0.1)

    def test_ascending_crossing(self):
        (post,) = jump_G1(AugmentedState(0.0, 0.2, -1, 1, 0.15))
        assert post.q2 == pytest.approx(0.35, rel=1e-15)
        assert post.sigma1 == 1

    def test_preserves_peak_tracker_and_amplitude(self):
        (post,) = jump_G1(AugmentedState(0.0, -1.3, 1, -1, 0.271))
        assert post.sigma2 == -1
        assert post.I == 0.271

    def test_zero_velocity_branches(self):
        branches = jump_G1(AugmentedState(0.0, 0.0, 1, 1, 0.1))
        assert len(branches) == 2
        assert {b.sigma1 for b in branches} == {-1, 1}


class TestPeakReset:
    def test_peak_below_target_raises_amplitude(self):
        (post,) = jump_G2(AugmentedState(0.3, 0.0, 1, -1, 0.1), _ap())
        assert post.I == pytest.approx(0.12, rel=1e-15)
        assert post.sigma2 == 1

    def test_peak_above_target_lowers_amplitude(self):
        (post,) = jump_G2(AugmentedState(0.7, 0.0, 1, 1, 0.1), _ap())
        assert post.I == pytest.approx(0.08, rel=1e-15)
        assert post.sigma2 == -1

    def test_preserves_plant_state(self):
        (post,) = jump_G2(AugmentedState(0.7, 0.0, 1, 1, 0.1), _ap())
        assert post.q1 == 0.7
        assert post.q2 == 0.0
        assert post.sigma1 == 1

    def test_exact_target_is_set_valued(self):
        branches = jump_G2(AugmentedState(math.pi / 6, 0.0, 1, 1, 0.1), _ap())
        assert len(branches) == 2
        amps = sorted(b.I for b in branches)
        assert amps[0] == pytest.approx(0.08)
        assert amps[1] == pytest.approx(0.12)

    def test_amplitude_floor_warns_and_clamps(self):
        with pytest.warns(AmplitudeCollapse):
            (post,) = jump_G2(AugmentedState(0.7, 0.0, 1, 1, 0.01), _ap())
        assert post.I == 0.0


class TestAdaptiveRuns:
    def test_jump_kinds_alternate(self):
        cfg = SolverConfig(t_max=25.0, j_max=100)
        arc = simulate_adaptive(np.array([0.5, 0.8, 1.0, 1.0, 0.15]), _ap(), cfg)
        labels = [rec.label for rec in arc.jumps]
        assert set(labels) <= {"torque", "adapt"}
        assert all(l0 != l1 for l0, l1 in zip(labels[:-1], labels[1:]))

    def test_kick_preserves_trackers_and_peaks_preserve_plant(self):
        cfg = SolverConfig(t_max=25.0, j_max=100)
        arc = simulate_adaptive(np.array([0.5, 0.8, 1.0, 1.0, 0.15]), _ap(), cfg)
        for rec in arc.jumps:
            if rec.label == "torque":
                assert rec.post_state[3] == rec.pre_state[3]
                assert rec.post_state[4] == rec.pre_state[4]
            else:
                assert rec.post_state[0] == rec.pre_state[0]
                assert rec.post_state[1] == rec.pre_state[1]
                assert rec.post_state[2] == rec.pre_state[2]
                assert rec.post_state[3] == -rec.pre_state[3]

    def test_amplitude_steps_are_exactly_epsilon(self):
        ap = _ap()
        cfg = SolverConfig(t_max=40.0, j_max=150)
        arc = simulate_adaptive(np.array([0.5, 0.8, 1.0, 1.0, 0.15]), ap, cfg)
        steps = [abs(rec.post_state[4] - rec.pre_state[4])
                 for rec in arc.jumps if rec.label == "adapt"]
        assert steps
        assert all(abs(s - ap.epsilon) <= 1e-15 for s in steps)

    def test_amplitude_trace_shape(self):
        cfg = SolverConfig(t_max=25.0, j_max=100)
        arc = simulate_adaptive(np.array([0.5, 0.8, 1.0, 1.0, 0.15]), _ap(), cfg)
        trace = amplitude_trace(arc)
        n_adapt = sum(1 for rec in arc.jumps if rec.label == "adapt")
        assert trace.shape == (n_adapt, 3)
        assert np.all(np.diff(trace[:, 0]) > 0)
        assert np.all(trace[:, 1] > 0)

    def test_amplitude_trace_empty_before_first_peak(self):
        cfg = SolverConfig(t_max=0.1, j_max=10)
        arc = simulate_adaptive(np.array([0.5, 1.0, 1.0, 1.0, 0.1]), _ap(), cfg)
        assert amplitude_trace(arc).shape == (0, 3)

    def test_alternate_target_is_reached(self):
        ap = _ap(q1_star=0.9)
        cfg = SolverConfig(t_max=80.0, j_max=300)
        arc = simulate_adaptive(np.array([0.9, 0.1, 1.0, 1.0, 0.6]), ap, cfg)
        trace = amplitude_trace(arc)
        late = trace[trace[:, 0] > 55.0]
        assert len(late) >= 5
        assert np.max(np.abs(late[:, 1] - 0.9)) < 0.08

    def test_summary_structure(self):
        ap = _ap()
        cfg = SolverConfig(t_max=30.0, j_max=120)
        arc = simulate_adaptive(np.array([0.5, 0.8, 1.0, 1.0, 0.15]), ap, cfg)
        summary = summarize_adaptation(arc, ap, band=0.05)
        assert summary["q1_star"] == ap.q1_star
        assert summary["peaks"] == amplitude_trace(arc).shape[0]
        assert isinstance(summary["converged"], bool)

    def test_collapse_warning_in_run(self):
        ap = _ap(q1_star=0.1)
        cfg = SolverConfig(t_max=10.0, j_max=60)
        with pytest.warns(AmplitudeCollapse):
            arc = simulate_adaptive(np.array([0.5, 1.5, 1.0, 1.0, 0.01]), ap, cfg)
        summary = summarize_adaptation(arc, ap, band=0.05)
        assert summary["amplitude_clamped"]


class TestDisabledAdaptation:
    def test_matches_basic_nonlinear_run(self):
        """epsilon = 0 leaves the plant on the basic system's trajectory."""
        ap = _ap(epsilon=0.0)
        cfg = SolverConfig(t_max=20.0, j_max=100)
        x0 = np.array([0.5, 0.8, 1.0, 1.0, 0.15])
        adaptive = simulate_adaptive(x0, ap, cfg)

        basic_p = SystemParams(alpha=0.5, I=0.15, dynamics="nonlinear")
        basic = run_hybrid(build_hybrid_system(basic_p), np.array([0.5, 0.8, 1.0]), cfg)

        def eval_flow(arc, t):
            for seg in arc.segments:
                if seg.t_start <= t <= seg.t_end and seg.t_start < seg.t_end:
                    return sample_arc(arc, seg.j, np.array([t]))[0, :2]
            raise AssertionError("time %r not inside any flow segment" % t)

        jump_ts = np.array(adaptive.jump_times + basic.jump_times)
        for t in np.linspace(0.3, 19.7, 60):
            if np.min(np.abs(jump_ts - t)) < 0.05:
                continue
            got = eval_flow(adaptive, t)
            want = eval_flow(basic, t)
            assert np.allclose(got, want, atol=1e-8)

    def test_amplitude_never_changes(self):
        ap = _ap(epsilon=0.0)
        cfg = SolverConfig(t_max=20.0, j_max=100)
        arc = simulate_adaptive(np.array([0.5, 0.8, 1.0, 1.0, 0.15]), ap, cfg)
        for seg in arc.segments:
            assert np.all(seg.states[:, 4] == 0.15)

"""Flow map, set membership, and the kick reset for the basic system."""

from __future__ import annotations

import math

import numpy as np
import pytest

from pulsepend.errors import ParamOutOfRange
from pulsepend.pendulum_model import (
    PendulumState,
    SystemParams,
    flow_map,
    in_flow_set,
    in_jump_set,
    jump_map,
    sanitize_initial_state,
    sgn_set,
)


def test_sgn_set():
    assert sgn_set(2.5) == (1,)
    assert sgn_set(-0.1) == (-1,)
    assert sgn_set(0.0) == (-1, 1)


class TestParams:
    def test_validation(self):
        with pytest.raises(ParamOutOfRange):
            SystemParams(alpha=2.0, I=0.1, dynamics="linear")
        with pytest.raises(ParamOutOfRange):
            SystemParams(alpha=0.5, I=0.0, dynamics="linear")
        with pytest.raises(ParamOutOfRange):
            SystemParams(alpha=0.5, I=0.1, dynamics="chaotic")

    def test_state_round_trip(self):
        st = PendulumState(q1=0.3, q2=-1.2, sigma=1)
        assert PendulumState.from_array(st.as_array()) == st


class TestFlowMap:
    def test_linear(self):
        p = SystemParams(alpha=0.5, I=0.1, dynamics="linear")
        dx = flow_map(np.array([0.3, -1.2, 1.0]), p)
        assert dx[0] == -1.2
        assert dx[1] == pytest.approx(-0.3 - 0.5 * (-1.2), rel=1e-15)
        assert dx[2] == 0.0

    def test_nonlinear(self):
        p = SystemParams(alpha=0.5, I=0.1, dynamics="nonlinear")
        dx = flow_map(np.array([0.3, -1.2, 1.0]), p)
        assert dx[1] == pytest.approx(-math.sin(0.3) - 0.5 * (-1.2), rel=1e-15)

    def test_modes_agree_at_small_angle(self):
        lin = SystemParams(alpha=0.5, I=0.1, dynamics="linear")
        non = SystemParams(alpha=0.5, I=0.1, dynamics="nonlinear")
        x = np.array([1e-5, 0.7, -1.0])
        assert flow_map(x, lin)[1] == pytest.approx(flow_map(x, non)[1], abs=1e-14)


class TestSets:
    def test_flow_set_half_plane(self):
        assert in_flow_set(np.array([0.4, -2.0, 1.0]))
        assert in_flow_set(np.array([-0.4, 2.0, -1.0]))
        assert not in_flow_set(np.array([-0.4, 2.0, 1.0]))
        assert in_flow_set(np.array([0.0, 5.0, 1.0]))  # boundary included

    def test_jump_set_needs_descent(self):
        assert in_jump_set(np.array([0.0, -0.3, 1.0]))
        assert in_jump_set(np.array([0.0, 0.3, -1.0]))
        assert not in_jump_set(np.array([0.0, 0.3, 1.0]))
        assert not in_jump_set(np.array([0.2, -0.3, 1.0]))

    def test_jump_set_tolerance(self):
        assert in_jump_set(np.array([5e-11, -0.3, 1.0]), tol=1e-10)
        assert not in_jump_set(np.array([5e-9, -0.3, 1.0]), tol=1e-10)


class TestKick:
    def setup_method(self):
        self.p = SystemParams(alpha=0.5, I=0.1, dynamics="linear")

    def test_downward_arrival(self):
        (post,) = jump_map(np.array([0.0, -1.0, 1.0]), self.p)
        assert post[0] == 0.0
        assert post[1] == pytest.approx(-1.1, rel=1e-15)
        assert post[2] == -1.0

    def test_upward_arrival(self):
        (post,) = jump_map(np.array([0.0, 0.04443, -1.0]), self.p)
        assert post[1] == pytest.approx(0.14443, rel=1e-12)
        assert post[2] == 1.0

    def test_speed_grows_by_exactly_the_pulse(self):
        for v in (-2.0, -0.5, 0.01, 3.0):
            (post,) = jump_map(np.array([0.0, v, 1.0]), self.p)
            assert abs(post[1]) == abs(v) + self.p.I

    def test_zero_velocity_is_set_valued(self):
        branches = jump_map(np.array([0.0, 0.0, 1.0]), self.p, zero_choice=1)
        assert len(branches) == 2
        assert branches[0][1] == pytest.approx(0.1)
        assert branches[0][2] == 1.0
        assert branches[1][1] == pytest.approx(-0.1)
        assert branches[1][2] == -1.0

    def test_zero_velocity_other_branch_first(self):
        branches = jump_map(np.array([0.0, 0.0, 1.0]), self.p, zero_choice=-1)
        assert branches[0][2] == -1.0

    def test_image_lies_in_flow_set(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            v = rng.uniform(-3.0, 3.0)
            sigma = 1.0 if v <= 0 else -1.0
            for post in jump_map(np.array([0.0, v, sigma]), self.p):
                assert in_flow_set(post, tol=0.0)


class TestSanitize:
    def test_passthrough_when_consistent(self):
        fixed, corrected = sanitize_initial_state(np.array([0.2, 0.0, 1.0]))
        assert not corrected
        assert fixed[2] == 1.0

    def test_flips_opposed_tracker(self):
        fixed, corrected = sanitize_initial_state(np.array([math.pi / 3, 2.0, -1.0]))
        assert corrected
        assert fixed[2] == 1.0
        assert fixed[0] == math.pi / 3

    def test_negative_angle(self):
        fixed, corrected = sanitize_initial_state(np.array([-0.5, 1.0, 1.0]))
        assert corrected
        assert fixed[2] == -1.0

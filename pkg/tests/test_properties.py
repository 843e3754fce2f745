"""Property-based checks of the model algebra and solver invariants."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pulsepend.closed_form import (
    mode_constants,
    mu_star,
    pre_jump_velocity_step,
    time_to_impact,
)
from pulsepend.hybrid_core import SolverConfig, run_hybrid
from pulsepend.pendulum_model import (
    SystemParams,
    build_hybrid_system,
    in_flow_set,
    jump_map,
    sgn_set,
)
from pulsepend.traceio import _fmt

alphas = st.floats(min_value=1e-6, max_value=2.0, exclude_max=True)
pulses = st.floats(min_value=1e-4, max_value=10.0)
velocities = st.floats(min_value=-50.0, max_value=50.0,
                       allow_nan=False, allow_infinity=False)


@given(alphas)
def test_mode_constants_unit_circle(alpha):
    mc = mode_constants(alpha)
    assert abs(mc.a * mc.a + mc.b * mc.b - 1.0) <= 1e-15
    assert 0.0 <= mc.contraction < 1.0
    # Within a few ulps of critical damping the ring map exp(a*pi/b)
    # underflows to exactly 0.0; everywhere else it must be positive.
    if mc.a * math.pi / mc.b > -700.0:
        assert mc.contraction > 0.0


@given(alphas, pulses)
def test_fixed_point_identity_everywhere(alpha, amp):
    p = SystemParams(alpha=alpha, I=amp, dynamics="linear")
    mc = mode_constants(alpha)
    mu = mu_star(p).mu_star
    if mc.contraction > 0.0:
        assert mu < 0.0
    else:
        # Underflowed contraction collapses the fixed point onto the origin.
        assert mu == 0.0
    residual = -(mu - amp) * mc.contraction + mu
    assert abs(residual) <= 1e-13 * max(1.0, abs(mu))


@given(velocities, pulses)
def test_kick_changes_speed_by_exactly_the_pulse(v, amp):
    p = SystemParams(alpha=0.5, I=amp, dynamics="linear")
    sigma = 1.0 if v <= 0 else -1.0
    for post in jump_map(np.array([0.0, v, sigma]), p):
        assert abs(post[1]) == abs(v) + amp
        assert post[0] == 0.0
        assert post[2] == math.copysign(1.0, post[1])


@given(velocities, pulses)
def test_kick_image_lies_in_flow_set(v, amp):
    p = SystemParams(alpha=0.5, I=amp, dynamics="linear")
    sigma = 1.0 if v <= 0 else -1.0
    for post in jump_map(np.array([0.0, v, sigma]), p):
        assert in_flow_set(post, tol=0.0)


@given(st.floats(min_value=-10.0, max_value=10.0, allow_nan=False))
def test_sgn_set_covers_reals(v):
    s = sgn_set(v)
    if v == 0.0:
        assert s == (-1, 1)
    else:
        assert s == (int(math.copysign(1.0, v)),)


@given(st.floats(min_value=0.01, max_value=2.0),
       st.floats(min_value=-3.0, max_value=3.0))
@settings(max_examples=60)
def test_time_to_impact_bounded_by_half_ring(q1, q2):
    mc = mode_constants(0.5)
    tau = time_to_impact((q1, q2, 1.0), mc)
    assert 0.0 <= tau <= mc.inter_jump_time


@given(st.floats(min_value=-100.0, max_value=100.0, allow_nan=False))
def test_csv_float_format_round_trips(x):
    assert float(_fmt(x)) == x


@pytest.mark.parametrize("v0", [-0.01, -0.5, -2.0, -10.0, 0.3, 5.0])
def test_velocity_error_contracts_geometrically(v0, params, mc):
    mu = mu_star(params).mu_star
    target = mu if v0 < 0 else -mu
    err = abs(v0 - target)
    v = v0
    for _ in range(12):
        v = pre_jump_velocity_step(v, params, mc)
        target = -target
        err_next = abs(v - target)
        assert err_next == pytest.approx(mc.contraction * err, rel=1e-10, abs=1e-15)
        err = err_next


@pytest.mark.parametrize("x0", [
    (0.9, 0.0, 1.0),
    (0.0, -2.0, 1.0),
    (-0.3, 0.4, -1.0),
])
class TestRunInvariants:
    def test_sigma_constant_along_flow(self, params, x0):
        arc = run_hybrid(build_hybrid_system(params), np.array(x0),
                         SolverConfig(t_max=20.0))
        for seg in arc.segments:
            assert np.all(seg.states[:, 2] == seg.states[0, 2])

    def test_energy_never_increases_along_flow(self, params, x0):
        arc = run_hybrid(build_hybrid_system(params), np.array(x0),
                         SolverConfig(t_max=20.0))
        for seg in arc.segments:
            v = seg.states[:, 0] ** 2 + seg.states[:, 1] ** 2
            assert np.all(np.diff(v) <= 1e-12)

    def test_kick_gaps_equal_half_ring(self, params, mc, x0):
        arc = run_hybrid(build_hybrid_system(params), np.array(x0),
                         SolverConfig(t_max=20.0))
        gaps = np.diff(arc.jump_times)
        assert np.max(np.abs(gaps - mc.inter_jump_time)) < 1e-9

    def test_mirror_symmetry(self, params, x0):
        cfg = SolverConfig(t_max=20.0)
        arc = run_hybrid(build_hybrid_system(params), np.array(x0), cfg)
        mirrored = run_hybrid(build_hybrid_system(params), -np.array(x0), cfg)
        assert mirrored.jump_count == arc.jump_count
        assert np.allclose(mirrored.jump_times, arc.jump_times, atol=1e-9)
        for seg_a, seg_b in zip(arc.segments, mirrored.segments):
            n = min(len(seg_a.times), len(seg_b.times))
            assert np.allclose(seg_b.states[:n], -seg_a.states[:n], atol=1e-8)


def test_flow_set_is_positively_invariant_between_kicks(params):
    arc = run_hybrid(build_hybrid_system(params), np.array([0.9, 0.0, 1.0]),
                     SolverConfig(t_max=20.0))
    for seg in arc.segments:
        prod = seg.states[:, 2] * seg.states[:, 0]
        assert np.all(prod >= -1e-9)

"""Exact linear-mode solutions: flow formulas, fixed point, impact times.

With linear gravity the flow is q1'' = -q1 - alpha*q1', whose solutions
are damped sinusoids with rate a = -alpha/2 and frequency
b = sqrt(4 - alpha^2)/2 (so a^2 + b^2 = 1).  Everything downstream of
that one ODE is exact: the time between consecutive kicks is pi/b, the
pre-kick velocity magnitude evolves by an affine contraction with factor
exp(a*pi/b), and the sustained oscillation has a unique velocity fixed
point mu_star.  These formulas are the reference the numerical solver is
verified against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateVelocity,
    InitialStateOutsideCD,
    OriginState,
    ParamOutOfRange,
    TimeOutsideDomain,
)
from .pendulum_model import PendulumState, SystemParams


@dataclass(frozen=True)
class ModeConstants:
    """Linear-mode constants derived from the damping alpha.

    a is the decay rate, b the ringing frequency, inter_jump_time the
    exact flow time between consecutive kicks (pi/b), and contraction
    the per-kick decay factor exp(a*pi/b) of the velocity recursion.
    """

    a: float
    b: float
    inter_jump_time: float
    contraction: float


@dataclass(frozen=True)
class CycleFixedPoint:
    """Pre-kick angular velocity on the sustained oscillation (negative)."""

    mu_star: float


def mode_constants(alpha: float) -> ModeConstants:
    """Constants of the damped linear mode for alpha in (0, 2)."""
    if not 0.0 < alpha < 2.0:
        raise ParamOutOfRange("alpha must lie in (0, 2), got %r" % (alpha,))
    a = -alpha / 2.0
    b = math.sqrt(4.0 - alpha * alpha) / 2.0
    gap = math.pi / b
    return ModeConstants(a=a, b=b, inter_jump_time=gap, contraction=math.exp(a * gap))


def _q1q2(x0) -> tuple[float, float]:
    if isinstance(x0, PendulumState):
        return x0.q1, x0.q2
    return float(x0[0]), float(x0[1])


def flow_solution_initial(x0, s, mc: ModeConstants):
    """Exact linear flow from (q1, q2) at elapsed time s (scalar or array).

    q1(s) = exp(a s) (q1(0) cos(b s) + c0 sin(b s)) with
    c0 = (q2(0) - a q1(0)) / b; q2 is its s-derivative.  Valid on any
    flow interval; callers keep s inside the interval that ends at the
    first kick.
    """
    q10, q20 = _q1q2(x0)
    a, b = mc.a, mc.b
    c0 = (q20 - q10 * a) / b
    s = np.asarray(s, dtype=float) if np.ndim(s) else float(s)
    e = np.exp(a * s)
    cs = np.cos(b * s)
    sn = np.sin(b * s)
    q1 = e * (q10 * cs + c0 * sn)
    q2 = e * (q20 * cs + (a * c0 - b * q10) * sn)
    return q1, q2


def flow_solution_post_jump(q2_pre_jump: float, s_since_jump, p: SystemParams, mc: ModeConstants):
    """Exact linear flow on the interval after a kick.

    The kick maps a pre-kick velocity z to z + I*sign(z) at angle zero,
    and the subsequent flow is q1(s) = c exp(a s) sin(b s) with
    c = (z + I*sign(z)) / b.  s may be a scalar or an array.
    """
    if q2_pre_jump == 0.0:
        raise DegenerateVelocity("post-kick flow needs a nonzero pre-kick velocity")
    a, b = mc.a, mc.b
    z = float(q2_pre_jump)
    c = (z + p.I * math.copysign(1.0, z)) / b
    s = np.asarray(s_since_jump, dtype=float) if np.ndim(s_since_jump) else float(s_since_jump)
    e = np.exp(a * s)
    sn = np.sin(b * s)
    cs = np.cos(b * s)
    q1 = c * e * sn
    q2 = c * e * (a * sn + b * cs)
    return q1, q2


def mu_star(p: SystemParams) -> CycleFixedPoint:
    """Velocity fixed point of the kick-to-kick recursion (always negative).

    mu = I*r/(r - 1) with r = exp(a*pi/b); it satisfies
    -(mu + I*sign(mu))*r = -mu, which makes the oscillation that starts
    at (0, mu, 1) repeat after two kicks.
    """
    mc = mode_constants(p.alpha)
    r = mc.contraction
    return CycleFixedPoint(mu_star=p.I * r / (r - 1.0))


def time_to_impact(x0, mc: ModeConstants) -> float:
    """First time the flow from x0 reaches the kick condition.

    Works in the half-plane coordinates (u1, u2) = (sigma*q1, sigma*q2),
    where the kick condition reads u1 = 0 with u2 < 0.  The zeros of u1
    are isolated and exactly pi/b apart, so the first downward crossing
    lies in [0, pi/b]; it is bracketed on a fixed grid and bisected to
    machine precision.  Returns 0 when x0 already satisfies the
    condition.  Raises OriginState at the equilibrium, where no impact
    ever occurs.
    """
    if isinstance(x0, PendulumState):
        q1, q2, sigma = x0.q1, x0.q2, float(x0.sigma)
    else:
        q1, q2, sigma = float(x0[0]), float(x0[1]), float(x0[2])
    if q1 == 0.0 and q2 == 0.0:
        raise OriginState("time to impact is undefined at the origin")
    u1, u2 = sigma * q1, sigma * q2
    if u1 < 0:
        raise InitialStateOutsideCD("state lies outside the flow half-plane sigma*q1 >= 0")
    if u1 == 0.0:
        if u2 <= 0.0:
            return 0.0
        # leaves the boundary into the half plane; next angle zero is half a ring later
        return mc.inter_jump_time

    b = mc.b
    gap = mc.inter_jump_time

    def w(s: float) -> float:
        # sign-carrying factor of u1(s); shares its zeros, drops exp(a s) > 0
        c0 = (u2 - u1 * mc.a) / b
        return u1 * math.cos(b * s) + c0 * math.sin(b * s)

    n = 129
    grid = [gap * k / (n - 1) for k in range(n)]
    lo = None
    for s_prev, s_next in zip(grid[:-1], grid[1:]):
        if w(s_prev) > 0.0 and w(s_next) <= 0.0:
            lo, hi = s_prev, s_next
            break
    if lo is None:
        raise TimeOutsideDomain("no impact found in [0, pi/b]; state may be inconsistent")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if w(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    tau = hi
    _, u2_tau = flow_solution_initial((u1, u2), tau, mc)
    if u2_tau >= 0.0:
        raise TimeOutsideDomain("located angle zero is not a downward crossing")
    return tau


def flow_matrix(s: float, mc: ModeConstants) -> np.ndarray:
    """Scaled fundamental matrix of the linear mode at elapsed time s.

    Returned exactly in the published scaling, whose determinant is b
    (constant in s), not 1; M(0) = [[1, 0], [0, b]].  Kept verbatim
    because downstream identities use this scaling.  The exponential
    envelope exp(a s) is deliberately not included.
    """
    a, b = mc.a, mc.b
    cs = math.cos(b * s)
    sn = math.sin(b * s)
    return np.array([
        [cs + (a / b) * sn, -sn],
        [(a * a / b + b) * sn, b * cs - a * sn],
    ])


def pre_jump_velocity_step(q2_pre: float, p: SystemParams, mc: ModeConstants) -> float:
    """Pre-kick velocity at the next kick given the current one.

    q2_next = -(q2_pre + I*sign(q2_pre)) * exp(a*pi/b).  The magnitude
    map m -> (m + I)*exp(a*pi/b) is an affine contraction whose fixed
    point is |mu_star|.
    """
    if q2_pre == 0.0:
        raise DegenerateVelocity("velocity recursion needs a nonzero pre-kick velocity")
    z = float(q2_pre)
    return -(z + p.I * math.copysign(1.0, z)) * mc.contraction


def peak_angle_after_jump(q2_pre: float, p: SystemParams, mc: ModeConstants) -> tuple[float, float]:
    """Stationary point of q1 on the post-kick interval: (s_peak, |q1_peak|).

    q1'(s) = 0 at b*s = atan2(b, -a), which lands in (pi/2b, pi/b)
    because a < 0; the angle magnitude there is the swing's amplitude.
    """
    if q2_pre == 0.0:
        raise DegenerateVelocity("peak angle needs a nonzero pre-kick velocity")
    a, b = mc.a, mc.b
    s_peak = math.atan2(b, -a) / b
    q1_peak, _ = flow_solution_post_jump(q2_pre, s_peak, p, mc)
    return s_peak, abs(float(q1_peak))


class ClosedFormTrajectory:
    """Piecewise-exact reference solution of the linear kick system.

    Precomputes the kick times (first impact, then spaced exactly pi/b)
    and the pre-kick velocity chain up to t_max, then evaluates the
    matching flow formula at any hybrid time (t, j).  j selects the
    branch when t is a kick time: j = k-1 gives the pre-kick state of
    kick k, j = k the post-kick state.
    """

    def __init__(self, x0, p: SystemParams, t_max: float):
        if p.dynamics != "linear":
            raise ParamOutOfRange("closed-form trajectories exist only for linear dynamics")
        x = np.asarray(x0, dtype=float)
        self.x0 = x.copy()
        self.params = p
        self.mc = mode_constants(p.alpha)
        self.t_max = float(t_max)
        self.sigma0 = int(round(x[2]))

        tau = time_to_impact(x, self.mc)
        jump_times: list[float] = []
        pre_velocities: list[float] = []
        sigmas_post: list[int] = []
        slack = 1e-9
        if tau <= self.t_max + slack:
            t_k = tau
            _, v = flow_solution_initial(x, tau, self.mc)
            v = float(v)
            while t_k <= self.t_max + slack:
                if v == 0.0:
                    raise DegenerateVelocity("pre-kick velocity chain hit zero")
                jump_times.append(t_k)
                pre_velocities.append(v)
                sigmas_post.append(1 if v > 0 else -1)
                v = pre_jump_velocity_step(v, p, self.mc)
                t_k += self.mc.inter_jump_time
        self.jump_times = jump_times
        self.pre_jump_velocities = pre_velocities
        self.sigmas_post = sigmas_post

    def state(self, t: float, j: int) -> np.ndarray:
        """Exact state at hybrid time (t, j) as an array (q1, q2, sigma)."""
        if j < 0 or j > len(self.jump_times):
            raise TimeOutsideDomain("jump index %d outside [0, %d]" % (j, len(self.jump_times)))
        if j == 0:
            q1, q2 = flow_solution_initial(self.x0, t, self.mc)
            return np.array([float(q1), float(q2), float(self.sigma0)])
        s = t - self.jump_times[j - 1]
        q1, q2 = flow_solution_post_jump(self.pre_jump_velocities[j - 1], s, self.params, self.mc)
        return np.array([float(q1), float(q2), float(self.sigmas_post[j - 1])])

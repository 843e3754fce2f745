"""Pendulum with impulsive torque kicks at angle zero crossings.

State x = (q1, q2, sigma): angle, angular velocity, and a half-plane
marker sigma in {-1, +1}.  Flow is the damped pendulum (linearized or
full sine gravity) restricted to the half plane sigma * q1 >= 0.  When
the angle returns to zero with the velocity leaving the half plane
(sigma * q2 <= 0), a torque pulse of magnitude I kicks the velocity
further along its current direction and sigma flips to track the new
swing, producing sustained oscillation against damping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParamOutOfRange
from .hybrid_core import HybridSystemDef, JumpChannel

_DYNAMICS = ("linear", "nonlinear")


@dataclass(frozen=True)
class PendulumState:
    """A point (q1, q2, sigma) with sigma coded as an integer in {-1, +1}."""

    q1: float
    q2: float
    sigma: int

    def __post_init__(self):
        if self.sigma not in (-1, 1):
            raise ParamOutOfRange("sigma must be -1 or +1, got %r" % (self.sigma,))

    def as_array(self) -> np.ndarray:
        return np.array([self.q1, self.q2, float(self.sigma)])

    @classmethod
    def from_array(cls, x) -> "PendulumState":
        return cls(float(x[0]), float(x[1]), int(round(float(x[2]))))


@dataclass(frozen=True)
class SystemParams:
    """Damping alpha in (0, 2), pulse amplitude I > 0, and the flow model."""

    alpha: float
    I: float
    dynamics: str = "linear"

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise ParamOutOfRange("alpha must lie in (0, 2), got %r" % (self.alpha,))
        if self.I <= 0.0:
            raise ParamOutOfRange("pulse amplitude I must be positive, got %r" % (self.I,))
        if self.dynamics not in _DYNAMICS:
            raise ParamOutOfRange("dynamics must be one of %s, got %r" % (", ".join(_DYNAMICS), self.dynamics))


def sgn_set(v: float) -> tuple[int, ...]:
    """Set-valued sign: {-1} below zero, {+1} above, both at exactly zero."""
    if v > 0:
        return (1,)
    if v < 0:
        return (-1,)
    return (-1, 1)


def flow_map(x: np.ndarray, p: SystemParams) -> np.ndarray:
    """Continuous dynamics (q1' , q2', sigma') with sigma constant in flow."""
    q1, q2 = x[0], x[1]
    if p.dynamics == "linear":
        acc = -q1 - p.alpha * q2
    else:
        acc = -math.sin(q1) - p.alpha * q2
    return np.array([q2, acc, 0.0])


def in_flow_set(x: np.ndarray, tol: float = 0.0) -> bool:
    """Half-plane membership sigma * q1 >= 0 (within tol)."""
    return x[2] * x[0] >= -tol


def in_jump_set(x: np.ndarray, tol: float = 1e-10) -> bool:
    """Kick condition: angle at zero and velocity not entering the half plane."""
    return abs(x[2] * x[0]) <= tol and x[2] * x[1] <= tol


def jump_map(x: np.ndarray, p: SystemParams, zero_choice: int = 1) -> tuple[np.ndarray, ...]:
    """All post-jump states (0, q2 + I*z, z) for z in sgn_set(q2).

    The selected branch (per zero_choice when q2 == 0) comes first, so
    callers that need single-valued behaviour can take element 0.
    """
    q2 = float(x[1])
    branches = sgn_set(q2)
    if len(branches) == 2 and zero_choice == -1:
        branches = (-1, 1)
    elif len(branches) == 2:
        branches = (1, -1)
    return tuple(np.array([0.0, q2 + p.I * z, float(z)]) for z in branches)


def _apply_kick(p: SystemParams):
    def apply(x: np.ndarray, zero_choice: int):
        branches = jump_map(x, p, zero_choice)
        selected = len(branches) > 1
        warn = None
        if selected:
            warn = "velocity exactly zero at a kick; sign resolved to %+d" % zero_choice
        return branches[0], selected, warn

    return apply


def build_hybrid_system(p: SystemParams) -> HybridSystemDef:
    """Wire the pendulum into the generic solver."""
    channel = JumpChannel(
        label="torque",
        guard=lambda x: x[2] * x[0],
        member=lambda x, tol: in_jump_set(x, tol),
        apply=_apply_kick(p),
    )
    return HybridSystemDef(
        name="pulse-pendulum",
        dim=3,
        flow=lambda x: flow_map(x, p),
        in_flow_set=in_flow_set,
        channels=(channel,),
        state_names=("q1", "q2", "sigma"),
        params={"alpha": p.alpha, "I": p.I, "dynamics": p.dynamics},
    )


def sanitize_initial_state(x0) -> tuple[np.ndarray, bool]:
    """Flip sigma to match the sign of q1 when x0 is in neither set.

    Returns (state, corrected).  States already in the flow or jump set
    pass through unchanged.  Useful for configs written with sigma
    opposing the angle, which no solution can start from.
    """
    x = np.array(x0, dtype=float)
    if in_flow_set(x) or in_jump_set(x):
        return x, False
    fixed = x.copy()
    fixed[2] = 1.0 if x[0] > 0 else -1.0
    return fixed, True

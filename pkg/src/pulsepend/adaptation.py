"""Amplitude-adaptive kick system: five-dimensional augmented dynamics.

The augmented state (q1, q2, sigma1, sigma2, I) carries two sign
trackers and makes the pulse amplitude part of the state.  sigma1
tracks the angle half-plane exactly as in the basic system; sigma2
tracks the velocity sign so that velocity peaks become detectable jump
events.  At every peak the pulse amplitude I takes a step of size
epsilon toward the amplitude target: up while the swing falls short of
q1_star, down while it overshoots.  The result converges practically: the
peak amplitude ends up oscillating inside a band around q1_star while I
hops between neighbouring quantization levels.

Peak-jump condition
-------------------
A peak jump must fire exactly when flow can no longer continue with the
current velocity tracker, i.e. when the acceleration at the velocity
zero, q2' = -sin(q1), opposes sigma2.  That is sigma2*sin(q1) >= 0, and
that is the condition implemented here.  (Written with the opposite
inequality the system would stall at its first peak: neither flowing
nor jumping would be possible.)
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import AmplitudeCollapse, ParamOutOfRange
from .hybrid_core import HybridArc, HybridSystemDef, JumpChannel, SolverConfig, run_hybrid

_DYNAMICS = ("linear", "nonlinear")


@dataclass(frozen=True)
class AugmentedState:
    """State (q1, q2, sigma1, sigma2, I) with integer-coded sign trackers."""

    q1: float
    q2: float
    sigma1: int
    sigma2: int
    I: float

    def __post_init__(self):
        if self.sigma1 not in (-1, 1) or self.sigma2 not in (-1, 1):
            raise ParamOutOfRange("sign trackers must be -1 or +1")
        if self.I < 0:
            raise ParamOutOfRange("pulse amplitude I must be nonnegative, got %r" % (self.I,))

    def as_array(self) -> np.ndarray:
        return np.array([self.q1, self.q2, float(self.sigma1), float(self.sigma2), self.I])

    @classmethod
    def from_array(cls, x) -> "AugmentedState":
        return cls(float(x[0]), float(x[1]), int(round(float(x[2]))),
                   int(round(float(x[3]))), float(x[4]))


@dataclass(frozen=True)
class AdaptationParams:
    """Damping, adaptation step, amplitude target, and the flow model.

    epsilon = 0 is accepted (it disables adaptation, which is useful for
    regression against the basic system); q1_star must lie in (0, pi).
    """

    alpha: float
    epsilon: float
    q1_star: float
    dynamics: str = "nonlinear"

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise ParamOutOfRange("alpha must lie in (0, 2), got %r" % (self.alpha,))
        if self.epsilon < 0.0:
            raise ParamOutOfRange("epsilon must be nonnegative, got %r" % (self.epsilon,))
        if not 0.0 < self.q1_star < math.pi:
            raise ParamOutOfRange("q1_star must lie in (0, pi), got %r" % (self.q1_star,))
        if self.dynamics not in _DYNAMICS:
            raise ParamOutOfRange("dynamics must be one of %s, got %r" % (", ".join(_DYNAMICS), self.dynamics))


def in_flow_set_aug(x, tol: float = 0.0) -> bool:
    """Both trackers consistent: sigma1*q1 >= 0 and sigma2*q2 >= 0."""
    arr = x.as_array() if isinstance(x, AugmentedState) else np.asarray(x, dtype=float)
    return arr[2] * arr[0] >= -tol and arr[3] * arr[1] >= -tol


def in_D1(x, tol: float = 1e-10) -> bool:
    """Kick condition: angle at zero, velocity leaving the half plane."""
    arr = x.as_array() if isinstance(x, AugmentedState) else np.asarray(x, dtype=float)
    return (abs(arr[2] * arr[0]) <= tol and arr[2] * arr[1] <= tol
            and arr[3] * arr[1] >= -tol)


def in_D2(x, tol: float = 1e-10) -> bool:
    """Peak condition: velocity at zero and acceleration opposing sigma2.

    sigma2*sin(q1) >= 0 means the flow would immediately push q2 against
    the tracker, so sigma2 must flip (and I adapt) for the solution to
    continue.
    """
    arr = x.as_array() if isinstance(x, AugmentedState) else np.asarray(x, dtype=float)
    return (arr[2] * arr[0] >= -tol and abs(arr[3] * arr[1]) <= tol
            and arr[3] * math.sin(arr[0]) >= -tol)


def _g1_branches(arr: np.ndarray, zero_choice: int) -> tuple[tuple[np.ndarray, ...], bool]:
    q2, amp = arr[1], arr[4]
    if q2 > 0:
        signs: tuple[int, ...] = (1,)
    elif q2 < 0:
        signs = (-1,)
    else:
        signs = (zero_choice, -zero_choice)
    out = tuple(np.array([arr[0], q2 + amp * z, float(z), arr[3], amp]) for z in signs)
    return out, len(signs) > 1


def _g2_branches(arr: np.ndarray, p: AdaptationParams, zero_choice: int):
    gap = arr[2] * arr[0] - p.q1_star
    if gap > 0:
        ws: tuple[int, ...] = (1,)
    elif gap < 0:
        ws = (-1,)
    else:
        ws = (zero_choice, -zero_choice)
    branches = []
    clamped = False
    for w in ws:
        amp = arr[4] - p.epsilon * w
        if amp < 0.0:
            amp = 0.0
            clamped = True
        branches.append(np.array([arr[0], arr[1], arr[2], -arr[3], amp]))
    return tuple(branches), len(ws) > 1, clamped


def jump_G1(x: AugmentedState, zero_choice: int = 1) -> tuple[AugmentedState, ...]:
    """Torque kick: velocity gains I in its own direction, sigma1 follows.

    sigma2 and I are unchanged.  Returns both branches (selected one
    first) when q2 is exactly zero.
    """
    branches, _ = _g1_branches(x.as_array(), zero_choice)
    return tuple(AugmentedState.from_array(b) for b in branches)


def jump_G2(x: AugmentedState, p: AdaptationParams, zero_choice: int = 1) -> tuple[AugmentedState, ...]:
    """Peak adaptation: sigma2 flips and I steps by epsilon toward the target.

    I decreases when the peak amplitude sigma1*q1 exceeds q1_star and
    increases when it falls short; at exact equality both branches are
    returned with the zero_choice branch first.  I is clamped at zero.
    """
    branches, _, clamped = _g2_branches(x.as_array(), p, zero_choice)
    if clamped:
        warnings.warn("adaptation drove the pulse amplitude to the zero clamp",
                      AmplitudeCollapse, stacklevel=2)
    return tuple(AugmentedState.from_array(b) for b in branches)


def build_adaptive_system(p: AdaptationParams) -> HybridSystemDef:
    """Wire the augmented dynamics into the generic solver.

    Two jump channels, checked in order: the torque kick at angle zero
    first, then the peak adaptation, so a state in both sets takes the
    kick (the order is recorded here once and applies everywhere).
    """
    if p.dynamics == "linear":
        def flow(x):
            return np.array([x[1], -x[0] - p.alpha * x[1], 0.0, 0.0, 0.0])
    else:
        def flow(x):
            return np.array([x[1], -math.sin(x[0]) - p.alpha * x[1], 0.0, 0.0, 0.0])

    def apply_torque(x, zero_choice):
        branches, selected = _g1_branches(x, zero_choice)
        warn = "velocity exactly zero at a kick; sign resolved to %+d" % zero_choice if selected else None
        return branches[0], selected, warn

    def apply_adapt(x, zero_choice):
        branches, selected, clamped = _g2_branches(x, p, zero_choice)
        warn = None
        if clamped:
            warnings.warn("adaptation drove the pulse amplitude to the zero clamp",
                          AmplitudeCollapse, stacklevel=2)
            warn = "pulse amplitude clamped at zero during adaptation"
        elif selected:
            warn = "peak exactly at target; adaptation direction resolved to %+d" % zero_choice
        return branches[0], selected, warn

    torque = JumpChannel(
        label="torque",
        guard=lambda x: x[2] * x[0],
        member=lambda x, tol: in_D1(x, tol),
        apply=apply_torque,
    )
    adapt = JumpChannel(
        label="adapt",
        guard=lambda x: x[3] * x[1],
        member=lambda x, tol: in_D2(x, tol),
        apply=apply_adapt,
    )
    return HybridSystemDef(
        name="adaptive-pulse-pendulum",
        dim=5,
        flow=flow,
        in_flow_set=in_flow_set_aug,
        channels=(torque, adapt),
        state_names=("q1", "q2", "sigma1", "sigma2", "I"),
        params={"alpha": p.alpha, "epsilon": p.epsilon, "q1_star": p.q1_star,
                "dynamics": p.dynamics},
    )


def simulate_adaptive(x0, p: AdaptationParams, cfg: SolverConfig) -> HybridArc:
    """Run the augmented system from x0 (AugmentedState or length-5 array)."""
    arr = x0.as_array() if isinstance(x0, AugmentedState) else np.asarray(x0, dtype=float)
    system = build_adaptive_system(p)
    return run_hybrid(system, arr, cfg)


def amplitude_trace(arc: HybridArc) -> np.ndarray:
    """Peak amplitudes over time: one row (t, sigma1*q1, post-jump I) per peak.

    Empty (0, 3) array when the arc contains no adaptation jumps.
    """
    rows = [(rec.time, rec.pre_state[2] * rec.pre_state[0], rec.post_state[4])
            for rec in arc.jumps if rec.label == "adapt"]
    if not rows:
        return np.empty((0, 3))
    return np.array(rows)


def summarize_adaptation(arc: HybridArc, p: AdaptationParams, band: float) -> dict:
    """Convergence diagnostics for an adaptive run.

    Reports when the peak amplitude enters the band [q1_star - band,
    q1_star + band] for good (never leaving it again within the run) and
    whether the run converged in that practical sense.  Counts jumps of
    each kind and flags amplitude clamping.
    """
    trace = amplitude_trace(arc)
    n_torque = sum(1 for rec in arc.jumps if rec.label == "torque")
    n_adapt = trace.shape[0]
    summary = {
        "q1_star": p.q1_star,
        "band_halfwidth": band,
        "peaks": n_adapt,
        "torque_jumps": n_torque,
        "final_I": float(arc.final_state()[4]),
        "amplitude_clamped": any("clamped" in w for w in arc.metadata.get("warnings", [])),
        "converged": False,
        "band_entry_time": None,
        "max_late_error": None,
    }
    if n_adapt == 0:
        return summary
    errors = np.abs(trace[:, 1] - p.q1_star)
    inside = errors <= band
    if inside[-1]:
        k = n_adapt
        while k > 0 and inside[k - 1]:
            k -= 1
        # k is the first index of the trailing all-inside run
        summary["converged"] = True
        summary["band_entry_time"] = float(trace[k, 0])
        summary["max_late_error"] = float(errors[k:].max())
    return summary

"""Hybrid time, hybrid arcs, and the generic flow-then-jump solver loop.

A hybrid system alternates continuous flow (an ODE restricted to a flow
set) with instantaneous jumps (a reset map on a jump set).  Solutions are
parametrized by hybrid time (t, j): continuous time t and jump count j.
The solver here is generic over a :class:`HybridSystemDef`; the concrete
pendulum systems live in :mod:`pulsepend.pendulum_model` and
:mod:`pulsepend.adaptation`.

Solver policy
-------------
Jumps have priority: whenever the current state is in a jump set, a jump
is taken before any further flow.  Set-valued selections at exact zeros
are resolved by the configured ``sgn_zero_choice`` and recorded on the
jump.  Guards are scalar functions monitored along flow; a sign change is
bracketed on the sample grid and refined by bisection on the stepper's
dense output until the guard residual is below ``event_tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import DOP853, RK45

from .errors import (
    EventLocalizationFailure,
    InitialStateOutsideCD,
    IntegrationFailure,
    ParamOutOfRange,
    StagnationError,
    TimeOutsideDomain,
)

_METHODS = ("rk45", "dop853", "rk4")


@dataclass(frozen=True)
class HybridTime:
    """A point (t, j) in hybrid time."""

    t: float
    j: int

    def __post_init__(self):
        if not self.t >= 0:  # also rejects NaN
            raise ParamOutOfRange("hybrid time requires t >= 0, got %r" % (self.t,))
        if self.j < 0:
            raise ParamOutOfRange("hybrid time requires j >= 0, got %r" % (self.j,))


@dataclass(frozen=True)
class SolverConfig:
    """Numerical settings for a hybrid simulation run.

    method is one of "rk45", "dop853" (adaptive, scipy steppers) or "rk4"
    (fixed step, requires h).  The adaptive methods use (abs_tol, rel_tol);
    event_tol bounds the guard residual at localized events; zero_tol is
    the membership tolerance for set predicates.  The horizon is
    (t_max, j_max), whichever is reached first.  max_sample_dt bounds the
    spacing of stored samples (and of the guard scan grid) so that cubic
    interpolation between samples stays well below the event tolerances.
    """

    method: str = "dop853"
    h: float | None = None
    abs_tol: float = 1e-11
    rel_tol: float = 1e-11
    event_tol: float = 1e-12
    zero_tol: float = 1e-10
    t_max: float = 30.0
    j_max: int = 50
    jump_policy: str = "jump-priority"
    sgn_zero_choice: int = 1
    max_sample_dt: float = 0.02
    stagnation_cap: int = 8

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ParamOutOfRange("unknown method %r (choose from %s)" % (self.method, ", ".join(_METHODS)))
        if self.method == "rk4":
            if self.h is None or self.h <= 0:
                raise ParamOutOfRange("fixed-step rk4 requires a positive step h")
        for name in ("abs_tol", "rel_tol", "event_tol", "zero_tol", "max_sample_dt"):
            if getattr(self, name) <= 0:
                raise ParamOutOfRange("%s must be positive" % name)
        if self.t_max <= 0:
            raise ParamOutOfRange("t_max must be positive")
        if self.j_max < 1:
            raise ParamOutOfRange("j_max must be at least 1")
        if self.jump_policy != "jump-priority":
            raise ParamOutOfRange("unsupported jump policy %r" % (self.jump_policy,))
        if self.sgn_zero_choice not in (-1, 1):
            raise ParamOutOfRange("sgn_zero_choice must be -1 or +1")
        if self.stagnation_cap < 1:
            raise ParamOutOfRange("stagnation_cap must be at least 1")


@dataclass(frozen=True)
class JumpChannel:
    """One guarded reset: a scalar guard, a membership predicate, and a map.

    guard(x) is monitored along flow; it must be positive while flow away
    from this channel's jump set is intended and reach zero on it.
    member(x, tol) is the authoritative set predicate checked before the
    jump fires.  apply(x, zero_choice) returns (post_state, selected,
    warning) where selected records that a set-valued branch was resolved
    and warning is an optional message to attach to the arc.
    """

    label: str
    guard: Callable[[np.ndarray], float]
    member: Callable[[np.ndarray, float], bool]
    apply: Callable[[np.ndarray, int], tuple[np.ndarray, bool, str | None]]


@dataclass(frozen=True)
class HybridSystemDef:
    """Everything the solver needs to run one hybrid system."""

    name: str
    dim: int
    flow: Callable[[np.ndarray], np.ndarray]
    in_flow_set: Callable[[np.ndarray, float], bool]
    channels: tuple[JumpChannel, ...]
    state_names: tuple[str, ...]
    params: dict = field(default_factory=dict)


class FlowSegment:
    """Sampled flow over one interval [t_start, t_end] x {j}.

    times is strictly increasing; states holds one row per sample;
    derivs holds the flow map evaluated at each sample (used for cubic
    Hermite interpolation) and may be None for arcs rebuilt from CSV.
    """

    __slots__ = ("j", "times", "states", "derivs")

    def __init__(self, j: int, times: np.ndarray, states: np.ndarray, derivs: np.ndarray | None):
        self.j = int(j)
        self.times = np.asarray(times, dtype=float)
        self.states = np.asarray(states, dtype=float)
        self.derivs = None if derivs is None else np.asarray(derivs, dtype=float)

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def __repr__(self):
        return "FlowSegment(j=%d, [%.6g, %.6g], %d samples)" % (
            self.j, self.t_start, self.t_end, len(self.times))


@dataclass(frozen=True)
class JumpRecord:
    """One recorded jump: segment index, time, states, and provenance."""

    time: float
    index: int
    label: str
    pre_state: np.ndarray
    post_state: np.ndarray
    selected: bool = False


class HybridArc:
    """A hybrid solution: ordered flow segments joined by jumps.

    Segment k carries jump index j = k; jump k maps segment k's terminal
    state to segment k+1's initial state.  The hybrid time domain is the
    list of (t_start, t_end, j) triples, one per segment.
    """

    def __init__(self, segments: Sequence[FlowSegment], jumps: Sequence[JumpRecord],
                 state_names: Sequence[str], metadata: dict | None = None):
        self.segments = list(segments)
        self.jumps = list(jumps)
        self.state_names = tuple(state_names)
        self.metadata = dict(metadata or {})

    @property
    def domain(self) -> list[tuple[float, float, int]]:
        return [(seg.t_start, seg.t_end, seg.j) for seg in self.segments]

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    @property
    def jump_count(self) -> int:
        return len(self.jumps)

    @property
    def jump_times(self) -> list[float]:
        return [rec.time for rec in self.jumps]

    def initial_state(self) -> np.ndarray:
        return self.segments[0].states[0].copy()

    def final_state(self) -> np.ndarray:
        return self.segments[-1].states[-1].copy()

    def __repr__(self):
        return "HybridArc(%s, t_end=%.6g, jumps=%d)" % (
            self.metadata.get("system", "?"), self.t_end, self.jump_count)


@dataclass
class ValidationReport:
    """Outcome of domain_check: a list of violated invariants."""

    issues: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues


class _RK4Stepper:
    """Minimal fixed-step RK4 with cubic Hermite dense output.

    Duck-types the slice of the scipy stepper API the segment driver
    uses: .t, .y, .status, .step(), .dense_output().
    """

    def __init__(self, fun, t0, y0, t_bound, h):
        self.fun = fun
        self.t = float(t0)
        self.y = np.asarray(y0, dtype=float)
        self.t_bound = float(t_bound)
        self.h = float(h)
        self.status = "running"
        self._t_old = self.t
        self._y_old = self.y
        self._f_old = fun(self.t, self.y)
        self._f_new = self._f_old

    def step(self):
        if self.status != "running":
            raise RuntimeError("attempted to step a finished integrator")
        h = min(self.h, self.t_bound - self.t)
        t, y = self.t, self.y
        f = self.fun
        k1 = self._f_new
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        self._t_old, self._y_old, self._f_old = t, y, k1
        self.t = t + h
        self.y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        self._f_new = f(self.t, self.y)
        if self.t >= self.t_bound:
            self.status = "finished"

    def dense_output(self):
        return _HermiteDense(self._t_old, self.t, self._y_old, self.y, self._f_old, self._f_new)


class _HermiteDense:
    """Cubic Hermite interpolant over one step, vectorized over t."""

    def __init__(self, t0, t1, y0, y1, f0, f1):
        self.t0, self.t1 = t0, t1
        self.y0, self.y1 = y0, y1
        self.f0, self.f1 = f0, f1

    def __call__(self, t):
        h = self.t1 - self.t0
        if h == 0:
            t = np.asarray(t)
            out = np.broadcast_to(self.y0[:, None], (len(self.y0),) + t.shape) if t.ndim else self.y0
            return np.array(out, dtype=float)
        s = (np.asarray(t, dtype=float) - self.t0) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s ** 2 * (3 - 2 * s)
        h11 = s ** 2 * (s - 1)
        if np.ndim(s) == 0:
            return h00 * self.y0 + h10 * h * self.f0 + h01 * self.y1 + h11 * h * self.f1
        return (h00 * self.y0[:, None] + h10 * h * self.f0[:, None]
                + h01 * self.y1[:, None] + h11 * h * self.f1[:, None])


def hermite_eval(t, t0, t1, y0, y1, f0, f1):
    """Cubic Hermite interpolation between two stored samples."""
    return _HermiteDense(t0, t1, y0, y1, f0, f1)(t)


def _make_stepper(system: HybridSystemDef, x: np.ndarray, t: float, cfg: SolverConfig):
    fun = lambda _t, y: system.flow(y)
    if cfg.method == "rk45":
        return RK45(fun, t, x, t_bound=cfg.t_max, rtol=cfg.rel_tol, atol=cfg.abs_tol)
    if cfg.method == "dop853":
        return DOP853(fun, t, x, t_bound=cfg.t_max, rtol=cfg.rel_tol, atol=cfg.abs_tol)
    return _RK4Stepper(fun, t, x, cfg.t_max, cfg.h)


def _zero_length_segment(system: HybridSystemDef, j: int, t: float, x: np.ndarray) -> FlowSegment:
    return FlowSegment(j, np.array([t]), np.array([x]), np.array([system.flow(x)]))


def _first_member(system: HybridSystemDef, x: np.ndarray, tol: float) -> JumpChannel | None:
    for ch in system.channels:
        if ch.member(x, tol):
            return ch
    return None


def _bisect_event(dense, guard, t_lo: float, t_hi: float, event_tol: float) -> float:
    """Refine a bracketed downward guard crossing on a dense-output step.

    Requires guard(dense(t_lo)) > 0 >= guard(dense(t_hi)).  Bisects until
    the guard residual at the midpoint is within event_tol, then keeps
    shrinking the bracket near machine precision so the localized time is
    as sharp as the interpolant allows.
    """
    g_hi = guard(dense(t_hi))
    if g_hi > 0:
        raise EventLocalizationFailure("bracket does not straddle the guard zero")
    t_mid = t_hi
    for _ in range(200):
        t_mid = 0.5 * (t_lo + t_hi)
        if t_mid == t_lo or t_mid == t_hi:
            break
        g_mid = guard(dense(t_mid))
        if g_mid > 0:
            t_lo = t_mid
        else:
            t_hi = t_mid
    t_event = t_hi
    if abs(guard(dense(t_event))) > event_tol and abs(guard(dense(t_lo))) > event_tol:
        raise EventLocalizationFailure(
            "guard residual %.3e still above event_tol %.3e at bracket collapse"
            % (abs(guard(dense(t_event))), event_tol))
    # prefer the side that satisfies the residual while staying in the jump set
    if abs(guard(dense(t_lo))) <= event_tol and guard(dense(t_event)) < -event_tol:
        return t_lo
    return t_event


def _flow_segment(system: HybridSystemDef, x0: np.ndarray, t0: float, j: int, cfg: SolverConfig):
    """Integrate one flow interval until a guard event or the horizon.

    Returns (segment, channel or None, x_end).  The guard scan runs on a
    sample grid no coarser than max_sample_dt inside every accepted step,
    so events cannot hide between step endpoints.  A channel is armed only
    after its guard has been strictly above zero_tol, which skips the
    guard zeros every post-jump state starts on.
    """
    stepper = _make_stepper(system, x0, t0, cfg)
    times = [t0]
    states = [np.array(x0, dtype=float)]
    derivs = [system.flow(x0)]
    guards_prev = [ch.guard(x0) for ch in system.channels]
    armed = [g > cfg.zero_tol for g in guards_prev]

    while stepper.status == "running":
        try:
            stepper.step()
        except Exception as exc:  # scipy raises RuntimeError on failed steps
            raise IntegrationFailure("integrator step failed at t=%.6g: %s" % (stepper.t, exc)) from exc
        if stepper.status == "failed":
            raise IntegrationFailure("integrator reported failure at t=%.6g" % stepper.t)
        dense = stepper.dense_output()
        t_prev = times[-1]
        t_new = float(stepper.t)
        n_sub = max(1, int(math.ceil((t_new - t_prev) / cfg.max_sample_dt)))
        grid = np.linspace(t_prev, t_new, n_sub + 1)[1:]
        grid_states = dense(grid)  # shape (dim, n)

        event_t = None
        event_channel = None
        g_prev = guards_prev
        t_left = t_prev
        for col in range(grid.shape[0]):
            xg = grid_states[:, col]
            tg = float(grid[col])
            g_now = [ch.guard(xg) for ch in system.channels]
            for ci, ch in enumerate(system.channels):
                if armed[ci] and g_prev[ci] > 0 and g_now[ci] <= 0:
                    te = _bisect_event(dense, ch.guard, t_left, tg, cfg.event_tol)
                    if event_t is None or te < event_t - 1e-15:
                        xe = np.asarray(dense(te), dtype=float)
                        if ch.member(xe, cfg.zero_tol):
                            event_t = te
                            event_channel = ch
                        else:
                            armed[ci] = False
                if not armed[ci] and g_now[ci] > cfg.zero_tol:
                    armed[ci] = True
            if event_t is not None:
                break
            g_prev = g_now
            t_left = tg

        if event_t is not None:
            keep = grid < event_t - 1e-15
            for col in np.nonzero(keep)[0]:
                times.append(float(grid[col]))
                states.append(np.array(grid_states[:, col]))
                derivs.append(system.flow(states[-1]))
            x_event = np.asarray(dense(event_t), dtype=float)
            times.append(float(event_t))
            states.append(x_event)
            derivs.append(system.flow(x_event))
            seg = FlowSegment(j, np.array(times), np.array(states), np.array(derivs))
            return seg, event_channel, x_event

        for col in range(grid.shape[0]):
            times.append(float(grid[col]))
            states.append(np.array(grid_states[:, col]))
            derivs.append(system.flow(states[-1]))
        guards_prev = g_prev

    seg = FlowSegment(j, np.array(times), np.array(states), np.array(derivs))
    return seg, None, states[-1]


def run_hybrid(system: HybridSystemDef, x0, cfg: SolverConfig) -> HybridArc:
    """Simulate a hybrid system from x0 until the (t_max, j_max) horizon.

    The returned arc always has one segment per jump index, so the number
    of segments is the number of jumps plus one; segments can have zero
    length when jumps chain without intervening flow (capped by the
    stagnation guard) or when the horizon is hit at a jump.

    Raises InitialStateOutsideCD when x0 fails both set predicates,
    EventLocalizationFailure when a guard crossing cannot be refined, and
    StagnationError after stagnation_cap consecutive zero-flow jumps.
    """
    x = np.array(x0, dtype=float)
    if x.shape != (system.dim,):
        raise ParamOutOfRange("state must have dimension %d, got %r" % (system.dim, x.shape))
    if not (system.in_flow_set(x, cfg.zero_tol) or _first_member(system, x, cfg.zero_tol)):
        raise InitialStateOutsideCD(
            "initial state %s is in neither the flow set nor the jump set" % (np.array2string(x),))

    segments: list[FlowSegment] = []
    jumps: list[JumpRecord] = []
    warnings: list[str] = []
    t = 0.0
    j = 0
    zero_flow_run = 0

    while True:
        if j >= cfg.j_max or t >= cfg.t_max:
            segments.append(_zero_length_segment(system, j, t, x))
            break

        ch = _first_member(system, x, cfg.zero_tol)
        if ch is not None:
            segments.append(_zero_length_segment(system, j, t, x))
            post, selected, warn = ch.apply(x, cfg.sgn_zero_choice)
            jumps.append(JumpRecord(t, j, ch.label, x.copy(), np.array(post, dtype=float), selected))
            if warn:
                warnings.append(warn)
            x = np.array(post, dtype=float)
            j += 1
            zero_flow_run += 1
            if zero_flow_run > cfg.stagnation_cap:
                raise StagnationError(
                    "%d consecutive jumps with no flow time at t=%.6g" % (zero_flow_run, t))
            continue

        seg, event_channel, x_end = _flow_segment(system, x, t, j, cfg)
        segments.append(seg)
        if seg.t_end > seg.t_start:
            zero_flow_run = 0
        t = seg.t_end
        x = np.array(x_end, dtype=float)
        if event_channel is None:
            break
        post, selected, warn = event_channel.apply(x, cfg.sgn_zero_choice)
        jumps.append(JumpRecord(t, j, event_channel.label, x.copy(), np.array(post, dtype=float), selected))
        if warn:
            warnings.append(warn)
        x = np.array(post, dtype=float)
        j += 1

    metadata = {
        "system": system.name,
        "params": dict(system.params),
        "config": config_dict(cfg),
        "interpolation": "cubic-hermite",
        "warnings": warnings,
    }
    return HybridArc(segments, jumps, system.state_names, metadata)


def config_dict(cfg: SolverConfig) -> dict:
    return {
        "method": cfg.method,
        "h": cfg.h,
        "abs_tol": cfg.abs_tol,
        "rel_tol": cfg.rel_tol,
        "event_tol": cfg.event_tol,
        "zero_tol": cfg.zero_tol,
        "t_max": cfg.t_max,
        "j_max": cfg.j_max,
        "jump_policy": cfg.jump_policy,
        "sgn_zero_choice": cfg.sgn_zero_choice,
        "max_sample_dt": cfg.max_sample_dt,
        "stagnation_cap": cfg.stagnation_cap,
    }


def arc_eval(arc: HybridArc, at) -> np.ndarray:
    """State of the arc at hybrid time (t, j).

    Stored sample times are returned exactly; between samples the value
    is cubic Hermite (or linear when the arc carries no derivatives, e.g.
    after a CSV round trip).  Raises TimeOutsideDomain when (t, j) is not
    in the arc's domain.
    """
    if isinstance(at, HybridTime):
        t, j = at.t, at.j
    else:
        t, j = float(at[0]), int(at[1])
    if j < 0 or j >= len(arc.segments):
        raise TimeOutsideDomain("jump index %d outside [0, %d]" % (j, len(arc.segments) - 1))
    seg = arc.segments[j]
    slack = 1e-12 * max(1.0, abs(seg.t_end))
    if t < seg.t_start - slack or t > seg.t_end + slack:
        raise TimeOutsideDomain(
            "t=%r outside segment %d interval [%r, %r]" % (t, j, seg.t_start, seg.t_end))
    t = min(max(t, seg.t_start), seg.t_end)
    idx = int(np.searchsorted(seg.times, t))
    if idx < len(seg.times) and seg.times[idx] == t:
        return seg.states[idx].copy()
    lo = idx - 1
    hi = idx
    t0, t1 = seg.times[lo], seg.times[hi]
    if seg.derivs is None:
        w = (t - t0) / (t1 - t0)
        return (1 - w) * seg.states[lo] + w * seg.states[hi]
    return np.asarray(hermite_eval(t, t0, t1, seg.states[lo], seg.states[hi],
                                   seg.derivs[lo], seg.derivs[hi]), dtype=float)


def sample_arc(arc: HybridArc, j: int, ts: np.ndarray) -> np.ndarray:
    """Vectorized arc_eval over many times within one segment."""
    seg = arc.segments[j]
    ts = np.asarray(ts, dtype=float)
    out = np.empty((ts.size, seg.states.shape[1]))
    idx = np.searchsorted(seg.times, ts)
    for k, (t, i) in enumerate(zip(ts, idx)):
        if i < len(seg.times) and seg.times[i] == t:
            out[k] = seg.states[i]
        elif seg.derivs is None:
            w = (t - seg.times[i - 1]) / (seg.times[i] - seg.times[i - 1])
            out[k] = (1 - w) * seg.states[i - 1] + w * seg.states[i]
        else:
            out[k] = hermite_eval(t, seg.times[i - 1], seg.times[i],
                                  seg.states[i - 1], seg.states[i],
                                  seg.derivs[i - 1], seg.derivs[i])
    return out


def domain_check(arc: HybridArc, system: HybridSystemDef | None = None,
                 tol: float | None = None) -> ValidationReport:
    """Validate the structural invariants of a hybrid arc.

    With a system supplied, additionally checks that every stored sample
    satisfies the flow-set predicate and that each jump's pre-state lies
    in a jump set and its post-state matches the jump map's image set
    membership (post-state in the flow set).  tol defaults to the
    zero_tol recorded in the arc metadata.
    """
    report = ValidationReport()
    if tol is None:
        tol = float(arc.metadata.get("config", {}).get("zero_tol", 1e-10))

    if not arc.segments:
        report.issues.append("arc has no segments")
        return report

    for k, seg in enumerate(arc.segments):
        if seg.j != k:
            report.issues.append("segment %d carries jump index %d" % (k, seg.j))
        if len(seg.times) == 0:
            report.issues.append("segment %d has no samples" % k)
            continue
        if np.any(np.diff(seg.times) <= 0):
            report.issues.append("segment %d sample times are not strictly increasing" % k)
        if seg.t_start > seg.t_end:
            report.issues.append("segment %d has t_start > t_end (domain monotonicity)" % k)
        if k > 0 and seg.t_start < arc.segments[k - 1].t_end:
            report.issues.append("segment %d starts before segment %d ends (domain monotonicity)" % (k, k - 1))

    if len(arc.jumps) != len(arc.segments) - 1:
        report.issues.append("jump count %d does not match segment count %d" %
                             (len(arc.jumps), len(arc.segments)))
    else:
        for k, rec in enumerate(arc.jumps):
            pre_seg = arc.segments[k]
            post_seg = arc.segments[k + 1]
            if rec.time != pre_seg.t_end or rec.time != post_seg.t_start:
                report.issues.append("jump %d time is not shared by its segments" % k)
            if not np.array_equal(rec.pre_state, pre_seg.states[-1]):
                report.issues.append("jump %d pre-state does not match segment %d terminal sample" % (k, k))
            if not np.array_equal(rec.post_state, post_seg.states[0]):
                report.issues.append("jump %d post-state does not match segment %d initial sample" % (k, k + 1))

    if system is not None:
        for k, seg in enumerate(arc.segments):
            for row in seg.states:
                if not system.in_flow_set(row, tol) and not _first_member(system, row, tol):
                    report.issues.append(
                        "segment %d sample at t=%.6g violates flow-set membership" % (k, seg.t_start))
                    break
        labels = {ch.label: ch for ch in system.channels}
        for k, rec in enumerate(arc.jumps):
            ch = labels.get(rec.label)
            if ch is None:
                report.issues.append("jump %d label %r is not a channel of %s" % (k, rec.label, system.name))
                continue
            if not ch.member(rec.pre_state, tol):
                report.issues.append("jump %d pre-state not in jump set %r" % (k, rec.label))
            if not system.in_flow_set(rec.post_state, 0.0) and not _first_member(system, rec.post_state, tol):
                report.issues.append("jump %d post-state outside the flow set" % k)

    return report

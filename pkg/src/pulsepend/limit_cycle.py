"""Limit-cycle construction, distance-to-cycle, and stability estimation.

For the linear kick system the sustained oscillation is known in closed
form: it is the pair of half-swings generated by the velocity fixed
point mu_star, repeating every two kicks.  This module materializes that
curve as a sampled descriptor, measures distances from arbitrary states
to it (exactly, by refining on the continuous phase), and extracts
empirical convergence evidence from simulated arcs: a fitted decay rate
of the log-distance and the observed per-kick contraction of the
pre-kick velocity error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .closed_form import (
    ModeConstants,
    flow_solution_post_jump,
    mode_constants,
    mu_star,
    peak_angle_after_jump,
)
from .errors import DomainTooShort, InsufficientData, ParamOutOfRange
from .hybrid_core import HybridArc, sample_arc
from .pendulum_model import PendulumState, SystemParams

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class LimitCycleDescriptor:
    """The sustained oscillation as a sampled closed curve.

    orbit_samples has one row per sample: (phase, q1, q2, sigma) with
    phase in [0, period_T).  The first half carries sigma = -1 (the
    swing that follows a kick at velocity mu_star), the second half is
    its mirror image under (q1, q2, sigma) -> (-q1, -q2, -sigma).
    """

    params: SystemParams
    mu_star: float
    period_T: float
    period_N: int
    orbit_samples: np.ndarray
    max_amplitude: float
    mc: ModeConstants = field(repr=False, default=None)


@dataclass(frozen=True)
class StabilityReport:
    """Empirical convergence evidence extracted from one arc."""

    decay_rate_estimate: float
    fit_residual: float
    per_jump_contraction_observed: float
    samples_used: int


@dataclass(frozen=True)
class PeriodicityReport:
    """Worst deviation between states one period apart along an arc."""

    max_deviation: float
    tol: float
    passed: bool
    pairs_checked: int


@dataclass(frozen=True)
class InvarianceEntry:
    index: int
    min_radius: float
    threshold: float
    initial_radius: float
    passed: bool


@dataclass(frozen=True)
class InvarianceReport:
    """Per-arc confirmation that no sampled state approaches the origin."""

    entries: tuple[InvarianceEntry, ...]

    @property
    def ok(self) -> bool:
        return all(e.passed for e in self.entries)


def _half_pre_velocity(cycle_mu: float, half: int) -> float:
    # half 0 follows the kick taken at velocity mu_star (sigma -1 swing);
    # half 1 follows the mirror kick at -mu_star (sigma +1 swing)
    return cycle_mu if half == 0 else -cycle_mu


def compute_cycle(p: SystemParams, resolution: int = 256) -> LimitCycleDescriptor:
    """Sample the sustained oscillation at `resolution` points per half."""
    if p.dynamics != "linear":
        raise ParamOutOfRange("the cycle descriptor exists only for linear dynamics")
    if resolution < 64:
        raise ParamOutOfRange("resolution must be at least 64 samples per half-cycle")
    mc = mode_constants(p.alpha)
    mu = mu_star(p).mu_star
    gap = mc.inter_jump_time
    s_local = np.arange(resolution) * (gap / resolution)
    rows = []
    for half, sigma in ((0, -1.0), (1, 1.0)):
        q1, q2 = flow_solution_post_jump(_half_pre_velocity(mu, half), s_local, p, mc)
        phase = s_local + half * gap
        rows.append(np.column_stack([phase, q1, q2, np.full(resolution, sigma)]))
    samples = np.vstack(rows)
    _, amp = peak_angle_after_jump(mu, p, mc)
    return LimitCycleDescriptor(
        params=p,
        mu_star=mu,
        period_T=2.0 * gap,
        period_N=2,
        orbit_samples=samples,
        max_amplitude=amp,
        mc=mc,
    )


def _min_planar_dist2(pts: np.ndarray, v_pre: float, cycle: LimitCycleDescriptor,
                      n_iter: int = 72) -> np.ndarray:
    """Min squared (q1, q2)-distance from each point to one half-swing.

    Coarse pass over the sampled phases, then vectorized golden-section
    refinement of the phase on the closed-form curve, so the result is
    limited by float precision rather than the sample spacing.
    """
    p, mc = cycle.params, cycle.mc
    gap = mc.inter_jump_time
    n_grid = max(64, cycle.orbit_samples.shape[0] // 2)
    s_grid = np.linspace(0.0, gap, n_grid + 1)
    q1g, q2g = flow_solution_post_jump(v_pre, s_grid, p, mc)

    out = np.empty(pts.shape[0])
    step = max(1, 2_000_000 // (n_grid + 1))
    for start in range(0, pts.shape[0], step):
        chunk = pts[start:start + step]
        d2 = (chunk[:, 0:1] - q1g) ** 2 + (chunk[:, 1:2] - q2g) ** 2
        idx = np.argmin(d2, axis=1)
        lo = s_grid[np.maximum(idx - 1, 0)]
        hi = s_grid[np.minimum(idx + 1, n_grid)]

        def f(s):
            q1, q2 = flow_solution_post_jump(v_pre, s, p, mc)
            return (chunk[:, 0] - q1) ** 2 + (chunk[:, 1] - q2) ** 2

        for _ in range(n_iter):
            width = hi - lo
            x1 = hi - _INVPHI * width
            x2 = lo + _INVPHI * width
            take_left = f(x1) < f(x2)
            hi = np.where(take_left, x2, hi)
            lo = np.where(take_left, lo, x1)
        out[start:start + step] = f(0.5 * (lo + hi))
    return out


def distance_to_cycle_batch(states: np.ndarray, cycle: LimitCycleDescriptor,
                            projected: bool = False) -> np.ndarray:
    """Distance from each state row (q1, q2, sigma) to the cycle.

    The sigma component participates in the ambient Euclidean norm by
    default; projected=True measures in the (q1, q2) plane only.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    pts = states[:, :2]
    best = None
    for half, sigma in ((0, -1.0), (1, 1.0)):
        d2 = _min_planar_dist2(pts, _half_pre_velocity(cycle.mu_star, half), cycle)
        if not projected:
            d2 = d2 + (states[:, 2] - sigma) ** 2
        best = d2 if best is None else np.minimum(best, d2)
    return np.sqrt(best)


def distance_to_cycle(x, cycle: LimitCycleDescriptor, projected: bool = False) -> float:
    """Distance from one state to the cycle (see distance_to_cycle_batch)."""
    if isinstance(x, PendulumState):
        row = x.as_array()
    else:
        row = np.asarray(x, dtype=float)
    return float(distance_to_cycle_batch(row[None, :], cycle, projected=projected)[0])


def verify_periodicity(arc: HybridArc, cycle: LimitCycleDescriptor, tol: float,
                       samples_per_segment: int = 17) -> PeriodicityReport:
    """Compare arc states against themselves one period later.

    Checks every sampled (t, j) whose shifted partner (t + T, j + N)
    still lies in the arc's domain and reports the worst Euclidean
    deviation.  Raises DomainTooShort when no such pair exists.
    """
    T, N = cycle.period_T, cycle.period_N
    if len(arc.segments) <= N:
        raise DomainTooShort("periodicity needs at least %d jumps, arc has %d" %
                             (N, len(arc.jumps)))
    max_dev = 0.0
    pairs = 0
    slack = 1e-9
    for j in range(len(arc.segments) - N):
        seg = arc.segments[j]
        target = arc.segments[j + N]
        ts = np.linspace(seg.t_start, seg.t_end, samples_per_segment)
        keep = (ts + T >= target.t_start - slack) & (ts + T <= target.t_end + slack)
        if not np.any(keep):
            continue
        ts = ts[keep]
        here = sample_arc(arc, j, ts)
        there = sample_arc(arc, j + N, np.clip(ts + T, target.t_start, target.t_end))
        dev = np.sqrt(np.sum((there - here) ** 2, axis=1))
        max_dev = max(max_dev, float(dev.max()))
        pairs += len(ts)
    if pairs == 0:
        raise DomainTooShort("arc does not span a full period beyond its start")
    return PeriodicityReport(max_deviation=max_dev, tol=tol, passed=max_dev <= tol,
                             pairs_checked=pairs)


def pre_jump_error_ratios(arc: HybridArc, cycle: LimitCycleDescriptor,
                          noise_floor: float) -> list[float]:
    """Ratios of consecutive pre-kick velocity errors (skipping the floor)."""
    target = abs(cycle.mu_star)
    errors = [abs(abs(rec.pre_state[1]) - target) for rec in arc.jumps]
    ratios = []
    for e0, e1 in zip(errors[:-1], errors[1:]):
        if e0 > noise_floor and e1 > noise_floor:
            ratios.append(e1 / e0)
    return ratios


def estimate_decay_rate(arc: HybridArc, cycle: LimitCycleDescriptor) -> StabilityReport:
    """Fit an exponential decay of distance-to-cycle over hybrid time.

    Least squares of log distance against t + j over the arc's stored
    samples, excluding points already at the event-localization noise
    floor (100x the configured event tolerance).  Also reports the
    median contraction ratio of the pre-kick velocity error.  Raises
    InsufficientData when the arc has fewer than 6 kicks or nearly all
    samples sit at the noise floor (an arc already on the cycle).
    """
    if arc.jump_count < 6:
        raise InsufficientData("decay estimation needs at least 6 jumps, got %d" % arc.jump_count)
    event_tol = float(arc.metadata.get("config", {}).get("event_tol", 1e-12))
    floor = 100.0 * event_tol

    states = np.vstack([seg.states for seg in arc.segments])
    hybrid_t = np.concatenate([seg.times + seg.j for seg in arc.segments])
    dist = distance_to_cycle_batch(states, cycle)
    mask = dist > floor
    if int(mask.sum()) < 8:
        raise InsufficientData("all but %d samples are at the noise floor" % int(mask.sum()))

    ratios = pre_jump_error_ratios(arc, cycle, floor)
    if len(ratios) < 2:
        raise InsufficientData("fewer than 2 usable consecutive-kick error pairs")

    h = hybrid_t[mask]
    y = np.log(dist[mask])
    coeffs = np.polyfit(h, y, 1)
    fitted = np.polyval(coeffs, h)
    residual = float(np.sqrt(np.mean((y - fitted) ** 2)))
    return StabilityReport(
        decay_rate_estimate=float(-coeffs[0]),
        fit_residual=residual,
        per_jump_contraction_observed=float(np.median(ratios)),
        samples_used=int(mask.sum()),
    )


def verify_forward_invariance(arcs: list[HybridArc]) -> InvarianceReport:
    """Confirm no arc's samples enter the origin ball of radius 100*event_tol.

    Arcs whose initial condition already sits inside the ball are exempt
    (they cannot certify anything about staying away from it).
    """
    entries = []
    for k, arc in enumerate(arcs):
        event_tol = float(arc.metadata.get("config", {}).get("event_tol", 1e-12))
        threshold = 100.0 * event_tol
        min_r = math.inf
        for seg in arc.segments:
            r = np.hypot(seg.states[:, 0], seg.states[:, 1])
            min_r = min(min_r, float(r.min()))
        x0 = arc.initial_state()
        r0 = math.hypot(float(x0[0]), float(x0[1]))
        passed = (min_r > threshold) or (r0 <= threshold)
        entries.append(InvarianceEntry(index=k, min_radius=min_r, threshold=threshold,
                                       initial_radius=r0, passed=passed))
    return InvarianceReport(entries=tuple(entries))


def _late_polyline(arc: HybridArc, t_cut: float, dt: float) -> list[np.ndarray]:
    """Per-segment resampled points (q1, q2, sigma) for t >= t_cut."""
    chains = []
    for seg in arc.segments:
        if seg.t_end < t_cut:
            continue
        t0 = max(seg.t_start, t_cut)
        if seg.t_end == t0:
            ts = np.array([t0])
        else:
            n = max(2, int(math.ceil((seg.t_end - t0) / dt)) + 1)
            ts = np.linspace(t0, seg.t_end, n)
        chains.append(sample_arc(arc, seg.j, ts)[:, :3])
    return chains


def _directed_hausdorff(points: np.ndarray, chains: list[np.ndarray]) -> float:
    """Max over points of min distance to the other polyline's chords."""
    p0_list, d_list = [], []
    for rows in chains:
        if len(rows) == 1:
            p0_list.append(rows)
            d_list.append(np.zeros_like(rows))
        else:
            p0_list.append(rows[:-1])
            d_list.append(rows[1:] - rows[:-1])
    p0 = np.vstack(p0_list)
    d = np.vstack(d_list)
    dd = np.einsum("ij,ij->i", d, d)
    dd[dd == 0.0] = 1.0

    worst = 0.0
    step = max(1, 2_000_000 // max(1, p0.shape[0]))
    for start in range(0, points.shape[0], step):
        x = points[start:start + step]
        diff = x[:, None, :] - p0[None, :, :]
        tproj = np.einsum("pcd,cd->pc", diff, d) / dd
        np.clip(tproj, 0.0, 1.0, out=tproj)
        nearest = diff - tproj[:, :, None] * d[None, :, :]
        d2 = np.einsum("pcd,pcd->pc", nearest, nearest)
        worst = max(worst, float(np.sqrt(d2.min(axis=1).max())))
    return worst


def late_orbit_hausdorff(arc_a: HybridArc, arc_b: HybridArc, t_cut: float,
                         dt: float = 0.0025) -> float:
    """Symmetric Hausdorff distance between two arcs' tails (t >= t_cut).

    Each tail is resampled to a polyline in (q1, q2, sigma)-space; the
    point-to-polyline distances use chord projections that never cross
    segment boundaries, so kick discontinuities contribute no spurious
    shortcuts.
    """
    chains_a = _late_polyline(arc_a, t_cut, dt)
    chains_b = _late_polyline(arc_b, t_cut, dt)
    if not chains_a or not chains_b:
        raise DomainTooShort("one of the arcs has no samples past t_cut=%g" % t_cut)
    pts_a = np.vstack(chains_a)
    pts_b = np.vstack(chains_b)
    return max(_directed_hausdorff(pts_a, chains_b),
               _directed_hausdorff(pts_b, chains_a))

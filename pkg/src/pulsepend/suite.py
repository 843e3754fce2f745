"""Seeded verification suite: every advertised guarantee as one check.

The suite simulates a seeded corpus of initial conditions plus a few
fixed benchmark states, compares everything against the closed-form
machinery, and returns a deterministic report: same seed, same report
bytes.  Wall-clock timings are returned separately so they never leak
into the report.

Checks, numbered as in the README acceptance table:

1  closed_form_equivalence   integrator vs exact solution, 20 seeded runs
2  inter_jump_gap            kick spacing equals pi/b
3  cycle_periodicity         the cycle repeats over (2*pi/b, 2)
4  fixed_point_identity      mu_star satisfies its defining identity
5  cycle_attractivity        benchmark runs land on the cycle (terminal
                             distance + pairwise tail Hausdorff)
6  contraction_and_decay     observed per-kick contraction and fitted
                             decay rate
7  forward_invariance        no run approaches the origin
8  nonlinear_convergence     benchmark runs share a late amplitude
9  adaptation_band           adaptive peaks settle in the target band,
                             I steps by exactly epsilon
(10 determinism is checked from the outside: rerun and compare bytes.)
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .adaptation import AdaptationParams, amplitude_trace, simulate_adaptive
from .closed_form import ClosedFormTrajectory, flow_solution_initial, flow_solution_post_jump, mode_constants, mu_star
from .hybrid_core import HybridArc, SolverConfig, arc_eval, run_hybrid
from .limit_cycle import (
    LimitCycleDescriptor,
    compute_cycle,
    distance_to_cycle,
    estimate_decay_rate,
    late_orbit_hausdorff,
    verify_forward_invariance,
    verify_periodicity,
)
from .pendulum_model import SystemParams, build_hybrid_system, sanitize_initial_state

DEFAULT_ALPHA = 0.5
DEFAULT_I = 0.1

# Three benchmark starts exercising both half-planes and both velocity
# signs.  The first is written with the sign tracker opposing the angle;
# the suite sanitizes it (and records that) before simulating.
BENCHMARK_STATES = (
    (math.pi / 3, 2.0, -1),
    (math.pi / 4, -2.0, 1),
    (-math.pi / 6, 1.0, -1),
)

# Adaptation settings for check 9: target pi/6, step 0.02, the benchmark
# start augmented with both trackers up and the initial pulse amplitude.
ADAPTATION_X0 = (math.pi / 3, 2.0, 1, 1, 0.1)
ADAPTATION_EPSILON = 0.02
ADAPTATION_Q1_STAR = math.pi / 6
ADAPTATION_T_MAX = 100.0
ADAPTATION_LATE_T = 60.0
# Required band half-width for check 9.  The reference run does not quite
# meet it: the amplitude walk enters the band at t ~= 64.8 and stays within
# ~0.030 of the target from then on, but one earlier peak (t ~= 61.5, value
# ~0.4678) still misses the target by ~0.0558, so the check reports a
# failure honestly.  The miss is a property of the quantized walk itself
# (step 0.02 from the pinned start), not of integration accuracy: the peak
# value is stable to ten digits across methods and tolerances.
ADAPTATION_BAND_HALFWIDTH = 0.05

EQUIVALENCE_RUNS = 20
INVARIANCE_RUNS = 50
EQUIVALENCE_T_MAX = 30.0
INVARIANCE_T_MAX = 20.0
ATTRACTIVITY_T_MAX = 60.0
NONLINEAR_T_MAX = 75.0
NONLINEAR_LATE_T = 60.0


@dataclass(frozen=True)
class CheckResult:
    """One verified guarantee: a measured value against its bound."""

    check_id: str
    criterion: int
    description: str
    measured: float
    tolerance: float
    bound: str  # "upper": measured <= tolerance; "lower": measured > tolerance
    passed: bool

    def as_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "criterion": self.criterion,
            "description": self.description,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "bound": self.bound,
            "passed": self.passed,
        }


def _upper(check_id, criterion, description, measured, tolerance) -> CheckResult:
    return CheckResult(check_id, criterion, description, float(measured), float(tolerance),
                       "upper", bool(measured <= tolerance))


def _lower(check_id, criterion, description, measured, tolerance) -> CheckResult:
    return CheckResult(check_id, criterion, description, float(measured), float(tolerance),
                       "lower", bool(measured > tolerance))


def default_config(t_max: float, j_max: int = 60, **overrides) -> SolverConfig:
    base = dict(method="dop853", abs_tol=1e-11, rel_tol=1e-11, event_tol=1e-12,
                zero_tol=1e-10, t_max=t_max, j_max=j_max)
    base.update(overrides)
    return SolverConfig(**base)


def corpus_states(seed: int, n: int) -> np.ndarray:
    """Seeded initial conditions inside the flow half-plane, off-origin."""
    rng = np.random.default_rng(seed)
    out = np.empty((n, 3))
    for k in range(n):
        sigma = 1.0 if rng.integers(0, 2) else -1.0
        out[k, 0] = sigma * rng.uniform(0.2, 1.2)
        out[k, 1] = rng.uniform(-2.0, 2.0)
        out[k, 2] = sigma
    return out


def closed_form_discrepancy(arc: HybridArc, ct: ClosedFormTrajectory) -> float:
    """Max per-component gap between an arc and its exact counterpart."""
    worst = 0.0
    for seg in arc.segments:
        j = seg.j
        if j > len(ct.jump_times):
            return math.inf
        if j == 0:
            q1, q2 = flow_solution_initial(ct.x0, seg.times, ct.mc)
            sig = float(ct.sigma0)
        else:
            s = seg.times - ct.jump_times[j - 1]
            q1, q2 = flow_solution_post_jump(ct.pre_jump_velocities[j - 1], s, ct.params, ct.mc)
            sig = float(ct.sigmas_post[j - 1])
        gap = max(
            float(np.max(np.abs(seg.states[:, 0] - q1))),
            float(np.max(np.abs(seg.states[:, 1] - q2))),
            float(np.max(np.abs(seg.states[:, 2] - sig))),
        )
        worst = max(worst, gap)
    return worst


def jump_time_discrepancy(arc: HybridArc, ct: ClosedFormTrajectory) -> float:
    """Worst gap between localized and exact kick times."""
    n = min(arc.jump_count, len(ct.jump_times))
    if n == 0:
        return 0.0
    measured = np.array(arc.jump_times[:n])
    exact = np.array(ct.jump_times[:n])
    return float(np.max(np.abs(measured - exact)))


def segment_peak_amplitudes(arc: HybridArc, t_min: float) -> list[float]:
    """|q1| at the interior velocity zero of each full segment past t_min.

    Segments truncated by the horizon (no interior sign change of q2)
    are skipped: their largest sample is not a swing peak.
    """
    peaks = []
    for seg in arc.segments:
        if seg.t_start < t_min or len(seg.times) < 3:
            continue
        q2 = seg.states[:, 1]
        crossings = np.nonzero(np.sign(q2[:-1]) * np.sign(q2[1:]) < 0)[0]
        if len(crossings) != 1:
            continue
        i = int(crossings[0])
        lo, hi = seg.times[i], seg.times[i + 1]
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if arc_eval(arc, (mid, seg.j))[1] * q2[i] > 0:
                lo = mid
            else:
                hi = mid
        peaks.append(abs(float(arc_eval(arc, (0.5 * (lo + hi), seg.j))[0])))
    return peaks


def run_verification(seed: int = 7, solver_overrides: dict | None = None,
                     include_adaptation: bool = True):
    """Run every check; returns (report, timings, artifacts).

    report is a plain deterministic dict (no wall-clock content);
    timings maps stage names to seconds; artifacts carries objects a
    caller may want to render (cycle descriptor, example arcs).
    """
    overrides = dict(solver_overrides or {})
    p = SystemParams(alpha=DEFAULT_ALPHA, I=DEFAULT_I, dynamics="linear")
    p_nl = SystemParams(alpha=DEFAULT_ALPHA, I=DEFAULT_I, dynamics="nonlinear")
    system = build_hybrid_system(p)
    system_nl = build_hybrid_system(p_nl)
    mc = mode_constants(p.alpha)
    cycle = compute_cycle(p)
    checks: list[CheckResult] = []
    timings: dict[str, float] = {}
    corrected_states: list[int] = []

    # -- checks 1 and 2: seeded corpus vs the exact solution ------------
    t0 = time.perf_counter()
    corpus = corpus_states(seed, EQUIVALENCE_RUNS)
    cfg_eq = default_config(EQUIVALENCE_T_MAX, **overrides)
    corpus_arcs = []
    worst_state_gap = 0.0
    for x0 in corpus:
        arc = run_hybrid(system, x0, cfg_eq)
        ct = ClosedFormTrajectory(x0, p, EQUIVALENCE_T_MAX + 1.0)
        worst_state_gap = max(worst_state_gap, closed_form_discrepancy(arc, ct))
        corpus_arcs.append(arc)
    timings["equivalence_s"] = time.perf_counter() - t0
    checks.append(_upper(
        "closed_form_equivalence", 1,
        "max state gap between integrator and exact solution, %d seeded runs, t in [0, %g]"
        % (EQUIVALENCE_RUNS, EQUIVALENCE_T_MAX),
        worst_state_gap, 1e-8))

    gap_target = mc.inter_jump_time
    worst_gap = 0.0
    for arc in corpus_arcs:
        jt = np.array(arc.jump_times)
        if len(jt) >= 2:
            worst_gap = max(worst_gap, float(np.max(np.abs(np.diff(jt) - gap_target))))
    checks.append(_upper(
        "inter_jump_gap", 2,
        "max |kick spacing - pi/b| over every kick after the first",
        worst_gap, 1e-8))

    # -- check 3: periodicity of the cycle arc ---------------------------
    t0 = time.perf_counter()
    mu = cycle.mu_star
    cfg_cycle = default_config(3.0 * cycle.period_T + 0.2, **overrides)
    cycle_arc = run_hybrid(system, np.array([0.0, mu, 1.0]), cfg_cycle)
    periodicity = verify_periodicity(cycle_arc, cycle, tol=1e-7)
    timings["periodicity_s"] = time.perf_counter() - t0
    checks.append(_upper(
        "cycle_periodicity", 3,
        "max |x(t + T, j + 2) - x(t, j)| over three periods from the fixed point",
        periodicity.max_deviation, 1e-7))

    # -- check 4: fixed-point identity on a parameter grid ---------------
    worst_resid = 0.0
    for alpha in np.linspace(0.2, 1.8, 5):
        mck = mode_constants(float(alpha))
        for amp in np.linspace(0.01, 0.5, 5):
            pk = SystemParams(alpha=float(alpha), I=float(amp), dynamics="linear")
            muk = mu_star(pk).mu_star
            worst_resid = max(worst_resid, abs(-(muk - pk.I) * mck.contraction + muk))
    checks.append(_upper(
        "fixed_point_identity", 4,
        "max |-(mu* - I) e^{a pi/b} + mu*| over a 5x5 (alpha, I) grid",
        worst_resid, 1e-14))

    # -- check 5: benchmark runs land on the cycle -----------------------
    t0 = time.perf_counter()
    cfg_att = default_config(ATTRACTIVITY_T_MAX, **overrides)
    bench_arcs = []
    worst_terminal = 0.0
    for raw in BENCHMARK_STATES:
        x0, corrected = sanitize_initial_state(np.array(raw, dtype=float))
        if corrected:
            corrected_states.append(len(bench_arcs))
        arc = run_hybrid(system, x0, cfg_att)
        worst_terminal = max(worst_terminal, distance_to_cycle(arc.final_state(), cycle))
        bench_arcs.append(arc)
    checks.append(_upper(
        "cycle_attractivity_terminal", 5,
        "max distance to the cycle at t = %g over the benchmark starts" % ATTRACTIVITY_T_MAX,
        worst_terminal, 1e-6))

    t_cut = ATTRACTIVITY_T_MAX - cycle.period_T - 0.11
    worst_hd = 0.0
    for i in range(len(bench_arcs)):
        for k in range(i + 1, len(bench_arcs)):
            worst_hd = max(worst_hd, late_orbit_hausdorff(bench_arcs[i], bench_arcs[k], t_cut))
    timings["attractivity_s"] = time.perf_counter() - t0
    checks.append(_upper(
        "cycle_attractivity_hausdorff", 5,
        "max pairwise Hausdorff distance between benchmark tails (t >= %.2f)" % t_cut,
        worst_hd, 1e-5))

    # -- check 6: contraction ratio and decay rate -----------------------
    t0 = time.perf_counter()
    worst_contr = 0.0
    min_decay = math.inf
    for arc in corpus_arcs:
        stab = estimate_decay_rate(arc, cycle)
        worst_contr = max(worst_contr, abs(stab.per_jump_contraction_observed - mc.contraction))
        min_decay = min(min_decay, stab.decay_rate_estimate)
    timings["decay_s"] = time.perf_counter() - t0
    checks.append(_upper(
        "per_jump_contraction", 6,
        "max |observed per-kick contraction - e^{a pi/b}| over the corpus",
        worst_contr, 1e-6))
    checks.append(_lower(
        "decay_rate_positive", 6,
        "min fitted decay rate over the corpus",
        min_decay, 0.0))

    # -- check 7: forward invariance --------------------------------------
    t0 = time.perf_counter()
    extra = corpus_states(seed + 1, INVARIANCE_RUNS - EQUIVALENCE_RUNS)
    cfg_inv = default_config(INVARIANCE_T_MAX, **overrides)
    invariance_arcs = list(corpus_arcs)
    for x0 in extra:
        invariance_arcs.append(run_hybrid(system, x0, cfg_inv))
    inv = verify_forward_invariance(invariance_arcs)
    min_radius = min(e.min_radius for e in inv.entries)
    threshold = max(e.threshold for e in inv.entries)
    timings["invariance_s"] = time.perf_counter() - t0
    checks.append(_lower(
        "forward_invariance", 7,
        "min origin distance over %d runs (threshold 100 * event_tol)" % INVARIANCE_RUNS,
        min_radius, threshold))

    # -- check 8: nonlinear runs share a late amplitude -------------------
    t0 = time.perf_counter()
    cfg_nl = default_config(NONLINEAR_T_MAX, **overrides)
    late_means = []
    nl_arcs = []
    for raw in BENCHMARK_STATES:
        x0, _ = sanitize_initial_state(np.array(raw, dtype=float))
        arc = run_hybrid(system_nl, x0, cfg_nl)
        peaks = segment_peak_amplitudes(arc, NONLINEAR_LATE_T)
        late_means.append(float(np.mean(peaks)) if peaks else math.inf)
        nl_arcs.append(arc)
    worst_amp_gap = 0.0
    for i in range(len(late_means)):
        for k in range(i + 1, len(late_means)):
            worst_amp_gap = max(worst_amp_gap, abs(late_means[i] - late_means[k]))
    timings["nonlinear_s"] = time.perf_counter() - t0
    checks.append(_upper(
        "nonlinear_convergence", 8,
        "max pairwise gap between mean peak amplitudes after t = %g" % NONLINEAR_LATE_T,
        worst_amp_gap, 1e-3))

    # -- check 9: adaptation settles in the band --------------------------
    adaptive_arc = None
    if include_adaptation:
        t0 = time.perf_counter()
        ap = AdaptationParams(alpha=DEFAULT_ALPHA, epsilon=ADAPTATION_EPSILON,
                              q1_star=ADAPTATION_Q1_STAR, dynamics="nonlinear")
        cfg_ad = default_config(ADAPTATION_T_MAX, j_max=300, **overrides)
        adaptive_arc = simulate_adaptive(np.array(ADAPTATION_X0, dtype=float), ap, cfg_ad)
        trace = amplitude_trace(adaptive_arc)
        late = trace[trace[:, 0] > ADAPTATION_LATE_T] if trace.size else trace
        band_err = float(np.max(np.abs(late[:, 1] - ap.q1_star))) if late.size else math.inf
        timings["adaptation_s"] = time.perf_counter() - t0
        checks.append(_upper(
            "adaptation_band", 9,
            "max |peak amplitude - q1*| over peaks after t = %g" % ADAPTATION_LATE_T,
            band_err, ADAPTATION_BAND_HALFWIDTH))

        adapt_steps = [rec for rec in adaptive_arc.jumps
                       if rec.label == "adapt" and rec.time > ADAPTATION_LATE_T]
        if adapt_steps:
            step_err = max(abs(abs(rec.post_state[4] - rec.pre_state[4]) - ap.epsilon)
                           for rec in adapt_steps)
        else:
            step_err = math.inf
        checks.append(_upper(
            "adaptation_step_exactness", 9,
            "max ||I step| - epsilon| over adaptation kicks after t = %g" % ADAPTATION_LATE_T,
            step_err, 1e-15))

    report = {
        "tool": "pulsepend",
        "version": __version__,
        "seed": seed,
        "params": {"alpha": DEFAULT_ALPHA, "I": DEFAULT_I},
        "solver": {
            "method": cfg_eq.method,
            "abs_tol": cfg_eq.abs_tol,
            "rel_tol": cfg_eq.rel_tol,
            "event_tol": cfg_eq.event_tol,
            "zero_tol": cfg_eq.zero_tol,
        },
        "corpus": {
            "equivalence_runs": EQUIVALENCE_RUNS,
            "invariance_runs": INVARIANCE_RUNS,
            "benchmark_states": [list(map(float, s)) for s in BENCHMARK_STATES],
            "sanitized_benchmark_indices": corrected_states,
        },
        "checks": [c.as_dict() for c in checks],
        "all_passed": all(c.passed for c in checks),
    }
    artifacts = {
        "cycle": cycle,
        "corpus_arc": corpus_arcs[0],
        "benchmark_arcs": bench_arcs,
        "nonlinear_arcs": nl_arcs,
        "adaptive_arc": adaptive_arc,
    }
    return report, timings, artifacts


def report_csv_lines(report: dict) -> list[str]:
    """The per-check table as delimited text."""
    lines = ["check_id,criterion,measured,tolerance,bound,passed"]
    for c in report["checks"]:
        lines.append("%s,%d,%s,%s,%s,%s" % (
            c["check_id"], c["criterion"], repr(float(c["measured"])),
            repr(float(c["tolerance"])), c["bound"], c["passed"]))
    return lines


def format_check_lines(report: dict) -> list[str]:
    """Human-readable PASS/FAIL lines, one per check."""
    lines = []
    for c in report["checks"]:
        rel = "<=" if c["bound"] == "upper" else ">"
        lines.append("%s criterion %d %s: measured %.6g %s %.6g" % (
            "PASS" if c["passed"] else "FAIL", c["criterion"], c["check_id"],
            c["measured"], rel, c["tolerance"]))
    return lines

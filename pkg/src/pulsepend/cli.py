"""Command-line front end.

Subcommands: simulate | cycle | verify | adapt | sweep | compare.
Shared flags: --config (JSON file of defaults; explicit flags win),
--out (output directory), --format csv|json|both, --svg, --seed.
Exit codes: 0 ok, 1 verification failure, 2 config error, 3 solver
error.  Every command that writes files also writes a manifest echoing
the fully resolved configuration, so a run can be reproduced exactly.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .adaptation import AdaptationParams, amplitude_trace, simulate_adaptive, summarize_adaptation
from .closed_form import ClosedFormTrajectory, mode_constants, mu_star, peak_angle_after_jump
from .errors import (
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    EXIT_SOLVER_ERROR,
    EXIT_VERIFICATION_FAILED,
    ConfigError,
    InitialStateOutsideCD,
    SolverError,
    ToolkitError,
)
from .hybrid_core import SolverConfig, run_hybrid
from .limit_cycle import compute_cycle
from .pendulum_model import SystemParams, build_hybrid_system, sanitize_initial_state
from .suite import (
    ADAPTATION_BAND_HALFWIDTH,
    closed_form_discrepancy,
    format_check_lines,
    jump_time_discrepancy,
    report_csv_lines,
    run_verification,
)
from .traceio import dump_json, write_arc_csv, write_arc_json, write_manifest


@dataclass
class RunConfig:
    """Resolved common options shared by all subcommands."""

    out_dir: Path
    fmt: str
    svg: bool
    seed: int
    file_defaults: dict


def _parse_x0(text: str, dim: int, sigma_slots: tuple[int, ...]) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != dim:
        raise ConfigError("expected %d comma-separated values for --x0, got %d" % (dim, len(parts)))
    try:
        values = [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError("could not parse --x0 %r: %s" % (text, exc)) from None
    for slot in sigma_slots:
        if values[slot] not in (-1.0, 1.0):
            raise ConfigError("sign tracker component %d must be exactly 1 or -1, got %r"
                              % (slot, parts[slot]))
    return np.array(values)


def _parse_floats(text: str, flag: str) -> list[float]:
    if not text.strip():
        return []
    try:
        return [float(p) for p in text.split(",")]
    except ValueError as exc:
        raise ConfigError("could not parse %s %r: %s" % (flag, text, exc)) from None


def _resolve(args, defaults: dict, key: str, fallback):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in defaults:
        return defaults[key]
    return fallback


def _solver_config(args, defaults: dict, t_max_default: float, j_max_default: int = 60) -> SolverConfig:
    return SolverConfig(
        method=_resolve(args, defaults, "method", "dop853"),
        h=_resolve(args, defaults, "h", None),
        abs_tol=float(_resolve(args, defaults, "abs_tol", 1e-11)),
        rel_tol=float(_resolve(args, defaults, "rel_tol", 1e-11)),
        event_tol=float(_resolve(args, defaults, "event_tol", 1e-12)),
        zero_tol=float(_resolve(args, defaults, "zero_tol", 1e-10)),
        t_max=float(_resolve(args, defaults, "tmax", t_max_default)),
        j_max=int(_resolve(args, defaults, "jmax", j_max_default)),
    )


def _manifest(rc: RunConfig, command: str, resolved: dict, outputs: list[str],
              warnings: list[str]) -> None:
    payload = {
        "command": command,
        "version": __version__,
        "resolved": resolved,
        "outputs": sorted(outputs),
        "warnings": warnings,
    }
    write_manifest(rc.out_dir / ("%s_manifest.json" % command), payload)


def _write_trace(rc: RunConfig, stem: str, arc) -> list[str]:
    written = []
    if rc.fmt in ("csv", "both"):
        name = "%s.csv" % stem
        write_arc_csv(arc, rc.out_dir / name)
        written.append(name)
    if rc.fmt in ("json", "both"):
        name = "%s.json" % stem
        write_arc_json(arc, rc.out_dir / name)
        written.append(name)
    return written


def _prepare_initial_state(x0: np.ndarray, strict: bool, warnings: list[str]) -> np.ndarray:
    fixed, corrected = sanitize_initial_state(x0)
    if corrected:
        if strict:
            raise InitialStateOutsideCD(
                "initial state %s is in neither the flow set nor the jump set "
                "(rerun without --strict-sets to auto-correct sigma)" % (x0.tolist(),))
        warnings.append("initial sign tracker opposed the angle; sigma corrected to %d"
                        % int(fixed[2]))
    return fixed


def cmd_simulate(args, rc: RunConfig) -> int:
    d = rc.file_defaults
    p = SystemParams(alpha=float(_resolve(args, d, "alpha", 0.5)),
                     I=float(_resolve(args, d, "I", 0.1)),
                     dynamics=_resolve(args, d, "dynamics", "linear"))
    cfg = _solver_config(args, d, t_max_default=30.0)
    x0 = _parse_x0(_resolve(args, d, "x0", "0.2,0,1"), 3, (2,))
    warnings: list[str] = []
    x0 = _prepare_initial_state(x0, args.strict_sets, warnings)

    arc = run_hybrid(build_hybrid_system(p), x0, cfg)
    warnings.extend(arc.metadata.get("warnings", []))
    outputs = _write_trace(rc, "simulate_trace", arc)
    if rc.svg:
        from .figures import plot_phase_portrait, plot_time_series

        cycle = compute_cycle(p) if p.dynamics == "linear" else None
        plot_phase_portrait(arc, rc.out_dir / "simulate_phase.svg", cycle=cycle)
        plot_time_series(arc, rc.out_dir / "simulate_timeseries.svg")
        outputs += ["simulate_phase.svg", "simulate_timeseries.svg"]
    resolved = {
        "alpha": p.alpha, "I": p.I, "dynamics": p.dynamics,
        "x0": [float(v) for v in x0], "solver": _cfg_dict(cfg), "format": rc.fmt,
    }
    _manifest(rc, "simulate", resolved, outputs, warnings)
    print("simulate: t_end=%.6g jumps=%d files=%s" % (arc.t_end, arc.jump_count, ", ".join(sorted(outputs))))
    return EXIT_OK


def _cfg_dict(cfg: SolverConfig) -> dict:
    return {
        "method": cfg.method, "h": cfg.h, "abs_tol": cfg.abs_tol, "rel_tol": cfg.rel_tol,
        "event_tol": cfg.event_tol, "zero_tol": cfg.zero_tol, "t_max": cfg.t_max,
        "j_max": cfg.j_max,
    }


def _cycle_row(alpha: float, amp: float) -> dict:
    p = SystemParams(alpha=alpha, I=amp, dynamics="linear")
    mc = mode_constants(alpha)
    mu = mu_star(p).mu_star
    _, peak = peak_angle_after_jump(mu, p, mc)
    return {
        "alpha": alpha,
        "I": amp,
        "a": mc.a,
        "b": mc.b,
        "inter_jump_time": mc.inter_jump_time,
        "contraction": mc.contraction,
        "mu_star": mu,
        "period_T": 2.0 * mc.inter_jump_time,
        "period_N": 2,
        "max_amplitude": peak,
    }


def cmd_cycle(args, rc: RunConfig) -> int:
    d = rc.file_defaults
    alpha = float(_resolve(args, d, "alpha", 0.5))
    amp = float(_resolve(args, d, "I", 0.1))
    row = _cycle_row(alpha, amp)
    if args.info:
        print(json.dumps(row, sort_keys=True, indent=2))
        return EXIT_OK
    outputs = ["cycle_summary.json"]
    dump_json(row, rc.out_dir / "cycle_summary.json")
    if rc.svg:
        from .figures import plot_phase_portrait

        p = SystemParams(alpha=alpha, I=amp, dynamics="linear")
        cycle = compute_cycle(p, resolution=int(_resolve(args, d, "resolution", 256)))
        cfg = _solver_config(args, d, t_max_default=3.0 * row["period_T"])
        arc = run_hybrid(build_hybrid_system(p), np.array([0.0, row["mu_star"], 1.0]), cfg)
        plot_phase_portrait(arc, rc.out_dir / "cycle_phase.svg", cycle=cycle)
        outputs.append("cycle_phase.svg")
    _manifest(rc, "cycle", {"alpha": alpha, "I": amp}, outputs, [])
    print(json.dumps(row, sort_keys=True, indent=2))
    return EXIT_OK


def cmd_verify(args, rc: RunConfig) -> int:
    overrides = {}
    if args.method is not None:
        overrides["method"] = args.method
    if args.h is not None:
        overrides["h"] = args.h
    if args.abs_tol is not None:
        overrides["abs_tol"] = args.abs_tol
    if args.rel_tol is not None:
        overrides["rel_tol"] = args.rel_tol

    report, timings, artifacts = run_verification(seed=rc.seed, solver_overrides=overrides)

    report_name = "verify_report.json"
    checks_name = "verify_checks.csv"
    dump_json(report, rc.out_dir / report_name)
    (rc.out_dir / checks_name).write_text("\n".join(report_csv_lines(report)) + "\n")
    outputs = [report_name, checks_name]

    from .figures import plot_adaptation, plot_phase_portrait

    plot_phase_portrait(artifacts["benchmark_arcs"][0], rc.out_dir / "verify_phase.svg",
                        cycle=artifacts["cycle"])
    outputs.append("verify_phase.svg")
    if artifacts["adaptive_arc"] is not None:
        plot_adaptation(artifacts["adaptive_arc"], rc.out_dir / "verify_adaptation.svg",
                        q1_star=math.pi / 6, band=ADAPTATION_BAND_HALFWIDTH)
        outputs.append("verify_adaptation.svg")

    _manifest(rc, "verify", {"seed": rc.seed, "solver_overrides": overrides}, outputs, [])
    for line in format_check_lines(report):
        print(line)
    print("report: %s" % (rc.out_dir / report_name))
    print("timings (s): %s" % " ".join("%s=%.2f" % (k, v) for k, v in sorted(timings.items())))
    return EXIT_OK if report["all_passed"] else EXIT_VERIFICATION_FAILED


def cmd_adapt(args, rc: RunConfig) -> int:
    d = rc.file_defaults
    ap = AdaptationParams(
        alpha=float(_resolve(args, d, "alpha", 0.5)),
        epsilon=float(_resolve(args, d, "epsilon", 0.02)),
        q1_star=float(_resolve(args, d, "q1star", math.pi / 6)),
        dynamics=_resolve(args, d, "dynamics", "nonlinear"),
    )
    cfg = _solver_config(args, d, t_max_default=100.0, j_max_default=300)
    x0 = _parse_x0(_resolve(args, d, "x0", "1.0471975511965976,2,1,1,0.1"), 5, (2, 3))
    if x0[2] * x0[0] < 0 or x0[3] * x0[1] < 0:
        if args.strict_sets:
            raise InitialStateOutsideCD("initial state %s violates both tracker half-planes"
                                        % (x0.tolist(),))
    warnings: list[str] = []
    arc = simulate_adaptive(x0, ap, cfg)
    warnings.extend(arc.metadata.get("warnings", []))

    baseline_params = AdaptationParams(alpha=ap.alpha, epsilon=0.0, q1_star=ap.q1_star,
                                       dynamics=ap.dynamics)
    baseline = simulate_adaptive(x0, baseline_params, cfg)

    outputs = _write_trace(rc, "adapt_trace", arc)
    outputs += _write_trace(rc, "adapt_baseline", baseline)
    trace = amplitude_trace(arc)
    amp_name = "adapt_amplitude.csv"
    lines = ["t,peak_amplitude,I"]
    for t, peak, amp in trace:
        lines.append("%s,%s,%s" % (repr(float(t)), repr(float(peak)), repr(float(amp))))
    (rc.out_dir / amp_name).write_text("\n".join(lines) + "\n")
    outputs.append(amp_name)

    band = float(_resolve(args, d, "band", ADAPTATION_BAND_HALFWIDTH))
    summary = summarize_adaptation(arc, ap, band)
    if rc.svg:
        from .figures import plot_adaptation

        plot_adaptation(arc, rc.out_dir / "adapt_overview.svg", q1_star=ap.q1_star,
                        band=band, baseline=baseline)
        outputs.append("adapt_overview.svg")

    resolved = {
        "alpha": ap.alpha, "epsilon": ap.epsilon, "q1_star": ap.q1_star,
        "dynamics": ap.dynamics, "x0": [float(v) for v in x0],
        "solver": _cfg_dict(cfg), "band": band,
    }
    _manifest(rc, "adapt", resolved, outputs, warnings)
    print(json.dumps(summary, sort_keys=True, indent=2))
    return EXIT_OK


def cmd_sweep(args, rc: RunConfig) -> int:
    d = rc.file_defaults
    alphas = _parse_floats(_resolve(args, d, "alphas", "0.25,0.5,1.0"), "--alphas")
    amplitudes = _parse_floats(_resolve(args, d, "amplitudes", "0.05,0.1,0.2"), "--amplitudes")
    if not alphas or not amplitudes:
        raise ConfigError("sweep grid is empty: need at least one alpha and one amplitude")
    cells = sorted((a, i) for a in alphas for i in amplitudes)

    jobs = int(_resolve(args, d, "jobs", 1))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_cycle_cell, cells))
    else:
        rows = [_cycle_cell(c) for c in cells]

    columns = ("alpha", "I", "mu_star", "period_T", "contraction", "max_amplitude")
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(repr(float(row[c])) for c in columns))
    table_name = "sweep_table.csv"
    (rc.out_dir / table_name).write_text("\n".join(lines) + "\n")
    _manifest(rc, "sweep", {"alphas": alphas, "amplitudes": amplitudes, "jobs": jobs},
              [table_name], [])
    print("sweep: %d cells -> %s" % (len(rows), rc.out_dir / table_name))
    return EXIT_OK


def _cycle_cell(cell: tuple[float, float]) -> dict:
    return _cycle_row(cell[0], cell[1])


def cmd_compare(args, rc: RunConfig) -> int:
    d = rc.file_defaults
    p = SystemParams(alpha=float(_resolve(args, d, "alpha", 0.5)),
                     I=float(_resolve(args, d, "I", 0.1)), dynamics="linear")
    cfg = _solver_config(args, d, t_max_default=30.0)
    x0 = _parse_x0(_resolve(args, d, "x0", "0,2,1"), 3, (2,))
    warnings: list[str] = []
    x0 = _prepare_initial_state(x0, args.strict_sets, warnings)

    arc = run_hybrid(build_hybrid_system(p), x0, cfg)
    ct = ClosedFormTrajectory(x0, p, cfg.t_max + 1.0)
    state_gap = closed_form_discrepancy(arc, ct)
    time_gap = jump_time_discrepancy(arc, ct)
    state_budget = 1e-8
    time_budget = 1e-9
    report = {
        "alpha": p.alpha, "I": p.I, "x0": [float(v) for v in x0],
        "t_max": cfg.t_max, "jumps": arc.jump_count,
        "max_state_gap": state_gap, "state_budget": state_budget,
        "max_jump_time_gap": time_gap, "jump_time_budget": time_budget,
        "within_budget": bool(state_gap <= state_budget and time_gap <= time_budget),
        "solver": _cfg_dict(cfg),
    }
    name = "compare_report.json"
    dump_json(report, rc.out_dir / name)
    _manifest(rc, "compare", report["solver"] | {"x0": report["x0"]}, [name], warnings)
    print("compare: max state gap %.3e (budget %.0e), max kick-time gap %.3e (budget %.0e)"
          % (state_gap, state_budget, time_gap, time_budget))
    if not report["within_budget"]:
        print("warning: discrepancy exceeds the accuracy budget for this solver setup")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="JSON file of option defaults; explicit flags win")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--format", choices=("csv", "json", "both"), default="csv",
                        dest="fmt", help="trace file format")
    common.add_argument("--svg", action="store_true", help="also render SVG figures")
    common.add_argument("--seed", type=int, default=7, help="corpus seed")
    common.add_argument("--strict-sets", action="store_true",
                        help="reject initial states outside the flow and jump sets")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--method", choices=("rk45", "dop853", "rk4"), default=None)
    solver.add_argument("--h", type=float, default=None, help="fixed step for rk4")
    solver.add_argument("--abs-tol", type=float, default=None, dest="abs_tol")
    solver.add_argument("--rel-tol", type=float, default=None, dest="rel_tol")
    solver.add_argument("--tmax", type=float, default=None)
    solver.add_argument("--jmax", type=int, default=None)

    parser = argparse.ArgumentParser(
        prog="pulsepend",
        description="Simulation and verification toolkit for a pendulum driven by "
                    "spiking torque pulses.")
    parser.add_argument("--version", action="version", version="pulsepend %s" % __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common, solver],
                         help="simulate the kick pendulum and write a trace")
    sim.add_argument("--alpha", type=float, default=None)
    sim.add_argument("--I", type=float, default=None, dest="I")
    sim.add_argument("--dynamics", choices=("linear", "nonlinear"), default=None)
    sim.add_argument("--x0", type=str, default=None, help="q1,q2,sigma")
    sim.set_defaults(func=cmd_simulate)

    cyc = sub.add_parser("cycle", parents=[common, solver],
                         help="limit-cycle constants and descriptor")
    cyc.add_argument("--alpha", type=float, default=None)
    cyc.add_argument("--I", type=float, default=None, dest="I")
    cyc.add_argument("--resolution", type=int, default=None)
    cyc.add_argument("--info", action="store_true",
                     help="print the constants as JSON and write nothing")
    cyc.set_defaults(func=cmd_cycle)

    ver = sub.add_parser("verify", parents=[common, solver],
                         help="run the full verification suite")
    ver.set_defaults(func=cmd_verify)

    ada = sub.add_parser("adapt", parents=[common, solver],
                         help="run the amplitude-adaptive system")
    ada.add_argument("--alpha", type=float, default=None)
    ada.add_argument("--epsilon", type=float, default=None)
    ada.add_argument("--q1star", type=float, default=None, dest="q1star")
    ada.add_argument("--dynamics", choices=("linear", "nonlinear"), default=None)
    ada.add_argument("--x0", type=str, default=None, help="q1,q2,sigma1,sigma2,I")
    ada.add_argument("--band", type=float, default=None,
                     help="band half-width used in the convergence summary")
    ada.set_defaults(func=cmd_adapt)

    swp = sub.add_parser("sweep", parents=[common],
                         help="tabulate cycle constants over a parameter grid")
    swp.add_argument("--alphas", type=str, default=None, help="comma-separated damping values")
    swp.add_argument("--amplitudes", type=str, default=None, help="comma-separated pulse amplitudes")
    swp.add_argument("--jobs", type=int, default=None, help="parallel worker processes")
    swp.set_defaults(func=cmd_sweep)

    cmp_ = sub.add_parser("compare", parents=[common, solver],
                          help="integrator vs closed form from one start")
    cmp_.add_argument("--alpha", type=float, default=None)
    cmp_.add_argument("--I", type=float, default=None, dest="I")
    cmp_.add_argument("--x0", type=str, default=None, help="q1,q2,sigma")
    cmp_.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_defaults = {}
        if args.config is not None:
            try:
                file_defaults = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError("could not read config file %s: %s" % (args.config, exc)) from None
            if not isinstance(file_defaults, dict):
                raise ConfigError("config file must hold a JSON object of option defaults")
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        rc = RunConfig(out_dir=out_dir, fmt=args.fmt, svg=args.svg, seed=args.seed,
                       file_defaults=file_defaults)
        return args.func(args, rc)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except SolverError as exc:
        print("solver error: %s" % exc, file=sys.stderr)
        return EXIT_SOLVER_ERROR
    except ToolkitError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_SOLVER_ERROR

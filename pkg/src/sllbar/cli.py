"""Command-line interface.

Subcommands::

    sllbar simulate  --config run.cfg --output-dir out/   one trajectory
    sllbar ensemble  --config run.cfg --output-dir out/   Monte Carlo stats
    sllbar invariant --config run.cfg --output-dir out/   ergodic averages + tightness
    sllbar converge  --config run.cfg --output-dir out/   dt-halving + refinement study
    sllbar check     --config run.cfg --output-dir out/   identity suite + noise condition

Exit codes: 0 success, 2 configuration error, 3 fatal blow-up inside a
study, 4 I/O error. For ``simulate`` a blow-up stop is data, not an error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, parse_config
from .diagnostics import (
    energy_balance_l2,
    identity_cross,
    identity_cubic_gradient,
    identity_cubic_ibp,
    refinement_gap,
    states_from_trajectory,
    strong_convergence_gaps,
)
from .ensemble import (
    h2_time_average,
    invariant_average,
    moment_estimates,
    run_ensemble,
    tightness_statistic,
)
from .grid import random_field
from .integrator import ConfigurationError, run_trajectory
from .io import (
    report_skeleton,
    write_ensemble_csv,
    write_observables_csv,
    write_report_json,
    write_residual_csv,
    write_snapshot,
    write_trajectory_csv,
)
from .noise import NoiseModel, check_noise_condition


class BlowupAbort(RuntimeError):
    """A study that needs the full horizon lost paths to early stops."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sllbar",
        description="Spectral Galerkin simulator for the stochastic "
        "Landau-Lifshitz-Baryakhtar equation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "run one trajectory"),
        ("ensemble", "run a Monte Carlo ensemble"),
        ("invariant", "ergodic window averages and tightness statistics"),
        ("converge", "dt-halving and Galerkin refinement studies"),
        ("check", "identity residual suite and noise condition"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--output-dir", required=True, help="directory for outputs")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        p.add_argument("--force", action="store_true",
                       help="allow writing into a non-empty output directory")
    return parser


def _prepare_output_dir(path: str, force: bool) -> Path:
    out = Path(path)
    if out.exists() and any(out.iterdir()) and not force:
        raise OSError(f"output directory {out} is not empty (use --force)")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _say(quiet: bool, message: str) -> None:
    if not quiet:
        print(message)


def _stop_events(records_or_stats) -> list[dict]:
    reasons = records_or_stats.stop_reasons
    times = records_or_stats.stop_times
    return [
        {"path": p, "stop_reason": r, "stop_time": t}
        for p, (r, t) in enumerate(zip(reasons, times))
    ]


def _cmd_simulate(cfg: RunConfig, out: Path, quiet: bool) -> int:
    noise = cfg.build_noise()
    u0 = cfg.build_initial()
    record = run_trajectory(u0, cfg.params, noise, cfg.solver, path=0)
    write_trajectory_csv(record, out / "trajectory.csv")
    write_snapshot(record.final, out / "final_state.snap")
    report = report_skeleton(cfg.echo())
    report["stop_events"] = [{
        "path": 0, "stop_reason": record.stop_reason,
        "stop_time": record.stop_time,
    }]
    report["final_norms"] = {k: float(v[-1]) for k, v in record.norms.items()}
    write_report_json(report, out / "report.json")
    _say(quiet, f"simulate: {record.stop_reason} at t={record.stop_time:g}, "
                f"outputs in {out}")
    return 0


def _cmd_ensemble(cfg: RunConfig, out: Path, quiet: bool) -> int:
    noise = cfg.build_noise()
    u0 = cfg.build_initial()
    exp = cfg.experiment
    try:
        stats = run_ensemble(u0, cfg.params, noise, cfg.solver, exp.ensemble_m,
                             observables=exp.observables, workers=exp.workers)
    except RuntimeError as exc:
        raise BlowupAbort(str(exc)) from exc
    write_ensemble_csv(stats, out / "ensemble_norms.csv")
    if stats.obs:
        write_observables_csv(stats, out / "observables.csv")
    report = report_skeleton(cfg.echo())
    report["paths"] = stats.M
    report["blowup_count"] = stats.blowup_count
    report["stop_events"] = _stop_events(stats)
    report["moments"] = {
        f"p={p:g}": {k: {"estimate": v[0], "se": v[1]}
                     for k, v in moment_estimates(stats, p).items()}
        for p in exp.moment_powers
    }
    if len(stats.times) >= 20:
        growth = h2_time_average(stats)
        report["h2_growth"] = {
            "a": growth.a, "b": growth.b, "c": growth.c,
            "curvature_ratio": growth.curvature_ratio,
        }
    write_report_json(report, out / "report.json")
    _say(quiet, f"ensemble: M={stats.M}, blowups={stats.blowup_count}, "
                f"outputs in {out}")
    return 0


def _cmd_invariant(cfg: RunConfig, out: Path, quiet: bool) -> int:
    noise = cfg.build_noise()
    u0 = cfg.build_initial()
    exp = cfg.experiment
    try:
        stats = run_ensemble(u0, cfg.params, noise, cfg.solver, exp.ensemble_m,
                             observables=exp.observables, workers=exp.workers)
    except RuntimeError as exc:
        raise BlowupAbort(str(exc)) from exc
    if stats.blowup_count:
        raise BlowupAbort(
            f"{stats.blowup_count} of {stats.M} paths stopped early; "
            "invariant averages need the full horizon"
        )
    report = report_skeleton(cfg.echo())
    report["paths"] = stats.M
    windows = list(exp.windows) if exp.windows else None
    report["window_averages"] = {}
    for psi in exp.observables:
        wrep = invariant_average(stats, psi.name, exp.burn_in, windows)
        report["window_averages"][psi.name] = {
            "windows": [list(w) for w in wrep.windows],
            "means": wrep.window_means,
            "ses": wrep.window_ses,
        }
    report["tightness"] = {
        space: {f"R={r:g}": tightness_statistic(stats, r, space)
                for r in exp.tightness_r}
        for space in ("H1", "L2")
    }
    if stats.obs:
        write_observables_csv(stats, out / "observables.csv")
    write_ensemble_csv(stats, out / "ensemble_norms.csv")
    write_report_json(report, out / "report.json")
    _say(quiet, f"invariant: M={stats.M}, outputs in {out}")
    return 0


def _cmd_converge(cfg: RunConfig, out: Path, quiet: bool) -> int:
    exp = cfg.experiment
    report = report_skeleton(cfg.echo())

    # dt-halving self-convergence with one shared Brownian path per MC path
    halvings = exp.dt_halvings
    noise = cfg.build_noise()
    u0 = cfg.build_initial()
    try:
        diffs = strong_convergence_gaps(
            u0, cfg.params, noise, cfg.solver, halvings=halvings,
            paths=max(1, exp.ensemble_m),
        )
    except RuntimeError as exc:
        raise BlowupAbort(str(exc)) from exc
    report["dt_study"] = {
        "dts": [cfg.solver.dt / 2**k for k in range(halvings)],
        "mean_l2_gap_to_next_level": diffs,
        "base_dt": cfg.solver.dt / (2**halvings),
        "paths": max(1, exp.ensemble_m),
    }

    # Galerkin refinement gaps with frozen noise keys
    gaps = {}
    levels = list(exp.refine_levels)
    for nc, nf in zip(levels[:-1], levels[1:]):
        gaps[f"{nc}->{nf}"] = refinement_gap(
            cfg.build_initial, cfg.params, cfg.build_noise, cfg.solver,
            cfg.grid, nc, nf,
        )
    report["refinement_gaps"] = gaps
    write_report_json(report, out / "report.json")
    _say(quiet, f"converge: dt gaps {['%.3e' % d for d in diffs]}, "
                f"refinement {gaps}, outputs in {out}")
    return 0


def _cmd_check(cfg: RunConfig, out: Path, quiet: bool) -> int:
    noise = cfg.build_noise()
    rng = np.random.default_rng(cfg.solver.seed)
    rows = []
    for i in range(20):
        u = random_field(cfg.grid, rng)
        _, _, grad_res = identity_cubic_gradient(u)
        _, _, ibp_res = identity_cubic_ibp(u)
        rows.append((i, identity_cross(u), grad_res, ibp_res))
    lines = ["field,cross_identity,cubic_gradient_residual,cubic_ibp_residual"]
    for i, a, b, c in rows:
        lines.append(f"{i},{a:.17g},{b:.17g},{c:.17g}")
    (out / "identities.csv").write_text("\n".join(lines) + "\n")

    # short noise-off run: energy-balance residual series as CSV
    steps = max(2, min(50, int(round(cfg.solver.t_end / cfg.solver.dt))))
    balance_cfg = replace(cfg.solver, t_end=steps * cfg.solver.dt,
                          snapshot_every=1, record_every=max(1, steps // 10))
    traj = run_trajectory(cfg.build_initial(), cfg.params,
                          NoiseModel.empty(cfg.grid), balance_cfg)
    series = energy_balance_l2(states_from_trajectory(traj), cfg.params,
                               balance_cfg.dt, balance_cfg.truncation)
    write_residual_csv(series, out / "energy_residuals.csv",
                       name="energy_balance_residual")

    report = report_skeleton(cfg.echo())
    report["energy_balance_max_residual"] = float(np.abs(series.values).max())
    report["identity_max"] = {
        "cross": max(abs(r[1]) for r in rows),
        "cubic_gradient": max(abs(r[2]) for r in rows),
        "cubic_ibp": max(abs(r[3]) for r in rows),
    }
    c_h = check_noise_condition(noise)
    report["noise_condition"] = {
        "C_h": c_h,
        "bound": noise.c_h_bound,
        "tail_estimate": noise.tail_estimate,
        "bound_exceeded": bool(noise.c_h_bound is not None and c_h > noise.c_h_bound),
    }
    write_report_json(report, out / "report.json")
    _say(quiet, f"check: identity maxima {report['identity_max']}, C_h={c_h:g}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "ensemble": _cmd_ensemble,
    "invariant": _cmd_invariant,
    "converge": _cmd_converge,
    "check": _cmd_check,
}


def run_command(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out = _prepare_output_dir(args.output_dir, args.force)
        return _COMMANDS[args.command](cfg, out, args.quiet)
    except (ConfigError, ConfigurationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except BlowupAbort as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()

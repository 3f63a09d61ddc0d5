"""Command-line entry point: threshold, simulate, ensemble, verify."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .config import ConfigError, RunConfig, load_config
from .engine import resolve_workers, run_ensemble, simulate_path
from .model import check_assumptions, compute_moment_constants
from .thresholds import threshold_report
from .verify import VerifyPlan, run_verification

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGENCE = 2
MAX_EXIT = 125


def _out_dir(config: RunConfig) -> Path:
    path = Path(config.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _threshold_lines(config: RunConfig, verbose: bool) -> list[str]:
    report = threshold_report(config.params, config.noise)
    constants = compute_moment_constants(config.params, config.noise, config.p)
    assumptions = check_assumptions(config.params, config.noise, config.p)
    lines = [
        f"r0 = {report.r0:.6f}",
        f"t0s = {report.t0s:.6f}",
        f"extinction_exponent = {report.extinction_exponent:.6f}",
        f"regime = {report.regime}",
        f"p = {constants.p:.6f}",
        f"jump_moment = {constants.jump_moment:.6f}",
        f"moment_decay_rate = {constants.moment_decay_rate:.6f}",
        f"envelope_peak = {constants.envelope_peak:.6f}",
        f"log_jump_variance = {constants.log_jump_variance:.6f}",
        f"stationary_moment_bound = {constants.stationary_bound:.6f}",
    ]
    for i, penalty in enumerate(assumptions.jump_penalties, start=1):
        lines.append(f"jump_penalty_{i} = {penalty:.6f}")
    if verbose:
        lines.append(
            f"extinction_exponent_alt = {report.extinction_exponent_alt:.6f}"
        )
        lines.append(f"admissible = {str(assumptions.ok).lower()}")
    return lines


def cmd_threshold(config: RunConfig, verbose: bool = False) -> int:
    lines = _threshold_lines(config, verbose)
    print("\n".join(lines))
    csv = "key,value\n" + "\n".join(
        line.replace(" = ", ",", 1) for line in lines
    ) + "\n"
    (_out_dir(config) / "threshold.csv").write_text(csv)
    return EXIT_OK


def _svg_trajectory(record, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(record.times, record.S, label="S", lw=0.8)
    ax.plot(record.times, record.I, label="I", lw=0.8)
    ax.plot(record.times, record.R, label="R", lw=0.8)
    if record.psi is not None:
        ax.plot(record.times, record.psi, label="psi", lw=0.8, ls="--")
    ax.set_xlabel("t")
    ax.set_ylabel("population")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _svg_histogram(hist: diag.Histogram, component: str, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    widths = np.diff(hist.edges)
    ax.bar(hist.edges[:-1], hist.counts, width=widths, align="edge")
    ax.set_xlabel(component)
    ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def cmd_simulate(config: RunConfig, svg: bool = False) -> int:
    record = simulate_path(config.sim_config())
    out = _out_dir(config)
    record.to_csv(out / "trajectory.csv")
    if svg or config.svg:
        _svg_trajectory(record, out / "trajectory.svg")
    if record.diverged_at is not None:
        print(
            f"divergence at step {record.diverged_at}; "
            f"partial trajectory written to {out / 'trajectory.csv'}"
        )
        return EXIT_DIVERGENCE
    print(f"trajectory written to {out / 'trajectory.csv'}")
    return EXIT_OK


def cmd_ensemble(config: RunConfig, svg: bool = False) -> int:
    workers = resolve_workers(config.workers)
    ensemble = run_ensemble(config.sim_config(), config.n_paths, workers)
    if config.checkpoint_dt is not None:
        checkpoints = np.arange(
            0.0, config.t_end + config.checkpoint_dt / 2, config.checkpoint_dt
        )
    else:
        checkpoints = ensemble.times
    summary = diag.build_summary(
        ensemble,
        n_bins=config.histogram_bins,
        p=config.p,
        checkpoints=checkpoints,
    )
    out = _out_dir(config)
    (out / "summary.csv").write_text(summary.summary_csv())
    (out / "moments.csv").write_text(summary.moments_csv())
    for component, hist in summary.histograms.items():
        (out / f"histogram_{component}.csv").write_text(hist.to_csv())
        if svg or config.svg:
            _svg_histogram(hist, component, out / f"histogram_{component}.svg")
    frac_diverged = ensemble.n_diverged / ensemble.n_paths
    print(
        f"{ensemble.n_paths} paths, {ensemble.n_diverged} diverged "
        f"({frac_diverged:.2%}); outputs in {out}"
    )
    if frac_diverged > 0.01:
        return EXIT_DIVERGENCE
    return EXIT_OK


def cmd_verify(config: RunConfig, plan: VerifyPlan | None = None) -> int:
    workers = resolve_workers(config.workers)
    report = run_verification(config.sim_config(), plan or VerifyPlan(), workers)
    print(report.to_text())
    (_out_dir(config) / "verdicts.csv").write_text(report.to_csv())
    if report.n_failed == 0:
        return EXIT_OK
    return min(EXIT_DIVERGENCE + report.n_failed, MAX_EXIT)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levysir",
        description="Jump-diffusion SIR simulation and threshold analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to a run configuration file")
        p.add_argument("--seed", type=int, default=None, help="override scheme.seed")
        return p

    p = add("threshold", "print threshold analytics")
    p.add_argument("--verbose", action="store_true")
    p = add("simulate", "integrate one trajectory and write CSV")
    p.add_argument("--svg", action="store_true", help="also write a line plot")
    p = add("ensemble", "run many paths and write summary CSVs")
    p.add_argument("--svg", action="store_true", help="also write histogram plots")
    p = add("verify", "run the verification suite")
    p.add_argument(
        "--smoke",
        action="store_true",
        help="reduced scales for a quick plumbing run (tolerances not meaningful)",
    )
    return parser


def _smoke_plan() -> VerifyPlan:
    return VerifyPlan(
        long_t_end=50.0,
        avg_paths=4,
        ergodic_paths=8,
        moment_paths=8,
        moment_t_end=20.0,
        moment_checkpoint_dt=5.0,
        comparison_paths=4,
        comparison_t_end=10.0,
        avg_burn_in=5.0,
        avg_rel_tol=1.0,
        ks_max=1.0,
        se_mult=50.0,
        survival_min_frac=0.0,
        slope_window=(-10.0, 10.0),
        extinct_min_frac=0.0,
        sublinear_tol=10.0,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        config = config.with_seed(args.seed)
    if args.command == "threshold":
        return cmd_threshold(config, verbose=args.verbose)
    if args.command == "simulate":
        return cmd_simulate(config, svg=args.svg)
    if args.command == "ensemble":
        return cmd_ensemble(config, svg=args.svg)
    if args.command == "verify":
        return cmd_verify(config, plan=_smoke_plan() if args.smoke else None)
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())

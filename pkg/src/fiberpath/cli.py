"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 deadlock or unresolved replacement,
4 verification failure, 5 I/O failure.
"""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np

from .campaign import (
    CampaignSpec,
    aggregate,
    assign_targets_retry,
    campaign_to_csv,
    summary_to_csv,
)
from .geometry import (
    AngularPose,
    ArmGeometry,
    InfeasibleGeometryError,
    safe_beta_threshold,
)
from .grid import (
    HexCountError,
    build_hex_grid,
    hex_count,
    load_layout,
    save_layout,
    set_folded_destination,
)
from .pathgen import (
    FORWARD,
    REVERSE,
    SolveConfig,
    load_trajectory,
    save_trajectory,
    solve,
)
from .postprocess import (
    default_window,
    simplify_rdp,
    smooth_velocity,
    verify_trajectory,
)
from .resolver import efficiency, solve_with_replacement

EXIT_DEADLOCK = 3
EXIT_VERIFY = 4
EXIT_IO = 5


def _echo_json(doc):
    click.echo(json.dumps(doc, indent=2, sort_keys=True))


def _parse_dest(text):
    try:
        a, b = (float(x) for x in text.split(","))
        return AngularPose(a, b)
    except ValueError as exc:
        raise click.UsageError(f"--dest expects 'ALPHA,BETA' degrees: {exc}")


def _build(robots, pitch, alpha_len, beta_len, cbuff):
    try:
        return build_hex_grid(robots, pitch, ArmGeometry(alpha_len, beta_len), cbuff)
    except (HexCountError, ValueError) as exc:
        raise click.UsageError(str(exc))


def geometry_options(f):
    f = click.option("--alpha-len", default=7.4, show_default=True,
                     help="Alpha arm length, mm.")(f)
    f = click.option("--beta-len", default=15.0, show_default=True,
                     help="Beta arm length, mm.")(f)
    f = click.option("--pitch", default=22.4, show_default=True,
                     help="Robot center spacing, mm.")(f)
    f = click.option("--cbuff", default=2.5, show_default=True,
                     help="Collision buffer (envelope half-width), mm.")(f)
    return f


def solver_options(f):
    f = click.option("--robots", default=547, show_default=True,
                     help="Robot count (centered hexagonal number).")(f)
    f = click.option("--step", default=0.5, show_default=True,
                     help="Angular step per sweep, deg.")(f)
    f = click.option("--greed", default=1.0, show_default=True)(f)
    f = click.option("--phobia", default=0.0, show_default=True)(f)
    f = click.option("--direction", type=click.Choice(["fwd", "rev"]),
                     default="rev", show_default=True)(f)
    f = click.option("--seed", default=0, show_default=True,
                     help="Base RNG seed (64-bit).")(f)
    f = click.option("--dest", default="10,170", show_default=True,
                     help="Common destination pose 'ALPHA,BETA' deg.")(f)
    f = click.option("--speed", default=30.0, show_default=True,
                     help="Axis speed, deg/s.")(f)
    f = click.option("--max-steps", default=None, type=int,
                     help="Sweep budget (default 1000deg / step).")(f)
    return f


@click.group()
@click.version_option(package_name="fiberpath")
def main():
    """Collision-free trajectory planning for fiber positioner arrays."""


def _prepare(robots, pitch, alpha_len, beta_len, cbuff, seed, dest, direction):
    layout = _build(robots, pitch, alpha_len, beta_len, cbuff)
    config, retries = assign_targets_retry(layout, seed)
    set_folded_destination(config, dest)
    if direction == "fwd":
        config.swap_endpoints()
    return layout, config, retries


def _write(path, writer):
    try:
        writer(path)
    except OSError as exc:
        click.echo(f"I/O error writing {path}: {exc}", err=True)
        sys.exit(EXIT_IO)


@main.command("solve")
@solver_options
@geometry_options
@click.option("--out", type=click.Path(), default=None,
              help="Trajectory JSON output path.")
@click.option("--layout-out", type=click.Path(), default=None,
              help="Layout JSON output path.")
def solve_cmd(robots, step, greed, phobia, direction, seed, dest, speed,
              max_steps, alpha_len, beta_len, pitch, cbuff, out, layout_out):
    """Random targets, one stepper run, no replacement."""
    pose = _parse_dest(dest)
    layout, config, retries = _prepare(
        robots, pitch, alpha_len, beta_len, cbuff, seed, pose, direction)
    cfg = SolveConfig(
        step_deg=step, greed=greed, phobia=phobia,
        direction=REVERSE if direction == "rev" else FORWARD,
        rng_seed=seed, max_steps=max_steps, axis_speed=speed,
    )
    outcome = solve(config, cfg)
    if out:
        _write(out, lambda p: save_trajectory(outcome.trajectories, p))
    if layout_out:
        _write(layout_out, lambda p: save_layout(layout, p))
    _echo_json({
        "converged": outcome.converged,
        "deadlocked_robots": [int(i) for i in outcome.deadlocked_robots],
        "steps_used": outcome.steps_used,
        "fold_time_s": outcome.fold_time,
        "wall_time_s": outcome.wall_time,
        "field_retries": retries,
        "n_robots": robots,
        "targets": {
            str(i): [float(config.alpha_init[i]), float(config.beta_init[i])]
            for i in range(robots)
        } if direction == "rev" else {
            str(i): [float(config.alpha_dest[i]), float(config.beta_dest[i])]
            for i in range(robots)
        },
    })
    if not outcome.converged:
        sys.exit(EXIT_DEADLOCK)


@main.command("plan")
@solver_options
@geometry_options
@click.option("--max-rounds", default=100, show_default=True,
              help="Replacement rounds before giving up.")
@click.option("--window", default=None, type=int,
              help="Velocity smoothing window (odd; default from accel limit).")
@click.option("--accel-limit", default=3000.0, show_default=True,
              help="Angular acceleration ceiling used to size the window, deg/s^2.")
@click.option("--epsilon", default=0.05, show_default=True,
              help="Polyline simplification tolerance, deg.")
@click.option("--smooth-margin", default=0.03, show_default=True,
              help="Buffer spent on smoothing; verification runs at cbuff minus this.")
@click.option("--verify-dt", default=None, type=float,
              help="Verification lattice spacing, s (default step/speed/4).")
@click.option("--out", type=click.Path(), required=True,
              help="Simplified trajectory JSON output path.")
@click.option("--layout-out", type=click.Path(), default=None)
@click.option("--report-out", type=click.Path(), default=None,
              help="Combined replacement + verification report JSON path.")
def plan_cmd(robots, step, greed, phobia, direction, seed, dest, speed,
             max_steps, alpha_len, beta_len, pitch, cbuff, max_rounds,
             window, accel_limit, epsilon, smooth_margin, verify_dt,
             out, layout_out, report_out):
    """Full pipeline: replacement solve, smooth, simplify, re-verify."""
    if direction == "fwd":
        raise click.UsageError("plan uses the reverse strategy; --direction rev")
    pose = _parse_dest(dest)
    layout, config, retries = _prepare(
        robots, pitch, alpha_len, beta_len, cbuff, seed, pose, "rev")
    cfg = SolveConfig(step_deg=step, greed=greed, phobia=phobia,
                      direction=REVERSE, rng_seed=seed,
                      max_steps=max_steps, axis_speed=speed)
    report = solve_with_replacement(config, cfg, max_rounds=max_rounds)
    summary = {
        "replacement": report.to_dict(),
        "efficiency": efficiency(report, robots),
        "field_retries": retries,
        "fold_time_s": report.final_outcome.fold_time,
    }
    if not report.converged:
        _echo_json(summary)
        sys.exit(EXIT_DEADLOCK)

    if window is None:
        window = default_window(step, speed, accel_limit)
    smoothed = smooth_velocity(report.final_outcome.trajectories, window)
    simplified = simplify_rdp(smoothed, epsilon)
    dt = verify_dt if verify_dt is not None else step / speed / 4.0
    verification = verify_trajectory(simplified, layout, cbuff - smooth_margin, dt)
    summary["window"] = window
    summary["epsilon_deg"] = epsilon
    summary["verify_cbuff_mm"] = cbuff - smooth_margin
    summary["verification"] = verification.to_dict()

    _write(out, lambda p: save_trajectory(simplified, p))
    if layout_out:
        _write(layout_out, lambda p: save_layout(layout, p))
    if report_out:
        _write(report_out, lambda p: json.dump(summary, open(p, "w"), indent=2))
    _echo_json(summary)
    if not verification.clean:
        sys.exit(EXIT_VERIFY)


@main.command("campaign")
@click.option("--config", "config_path", type=click.Path(exists=True),
              required=True, help="CampaignSpec JSON or TOML file.")
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--workers", default=None, type=int,
              help="Worker processes (default $FIBERPATH_WORKERS or 1).")
@click.option("--resume", is_flag=True,
              help="Keep completed rows in trials.csv, run only missing ones.")
def campaign_cmd(config_path, out_dir, workers, resume):
    """Run a campaign config: writes trials.csv, summary.csv, summary.json."""
    try:
        spec = CampaignSpec.from_file(config_path)
    except (ValueError, KeyError, TypeError) as exc:
        raise click.UsageError(f"bad campaign config {config_path}: {exc}")
    except OSError as exc:
        click.echo(f"I/O error reading {config_path}: {exc}", err=True)
        sys.exit(EXIT_IO)
    if workers is None:
        workers = int(os.environ.get("FIBERPATH_WORKERS", "1"))
    os.makedirs(out_dir, exist_ok=True)
    trials_csv = os.path.join(out_dir, "trials.csv")
    done = 0

    def progress(rec):
        nonlocal done
        done += 1
        click.echo(f"[{done}] {rec.algorithm} n={rec.n_robots} cb={rec.cbuff_mm} "
                   f"dt={rec.step_deg} trial={rec.trial} eff={rec.efficiency:.4f} "
                   f"{'ERR ' + rec.error if rec.error else ''}", err=True)

    records = campaign_to_csv(spec, trials_csv, workers=workers,
                              resume=resume, progress=progress)
    summary = aggregate(records)
    summary_to_csv(summary, os.path.join(out_dir, "summary.csv"))
    with open(os.path.join(out_dir, "summary.json"), "w") as f:
        json.dump(summary, f, indent=2)
    click.echo(f"{len(records)} trials -> {out_dir}")


@main.command("verify")
@click.option("--trajectory", "traj_path", type=click.Path(exists=True), required=True)
@click.option("--layout", "layout_path", type=click.Path(exists=True), required=True)
@click.option("--cbuff", required=True, type=float,
              help="Buffer to verify against, mm.")
@click.option("--dt", default=0.01, show_default=True,
              help="Verification lattice spacing, s.")
def verify_cmd(traj_path, layout_path, cbuff, dt):
    """Replay a trajectory file against a layout at a given buffer."""
    try:
        traj = load_trajectory(traj_path)
        layout = load_layout(layout_path)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        sys.exit(EXIT_IO)
    report = verify_trajectory(traj, layout, cbuff, dt)
    _echo_json(report.to_dict())
    if not report.clean:
        sys.exit(EXIT_VERIFY)


@main.command("grid-info")
@click.option("--robots", default=547, show_default=True)
@geometry_options
def grid_info_cmd(robots, alpha_len, beta_len, pitch, cbuff):
    """Neighbor statistics and the safe fold threshold for a layout."""
    layout = _build(robots, pitch, alpha_len, beta_len, cbuff)
    counts = np.array([len(nb) for nb in layout.neighbors])
    geom = ArmGeometry(alpha_len, beta_len)
    try:
        beta_min = safe_beta_threshold(geom, pitch, cbuff)
    except InfeasibleGeometryError:
        beta_min = None
    _echo_json({
        "n_robots": robots,
        "pitch_mm": pitch,
        "cbuff_mm": cbuff,
        "neighbor_threshold_mm": 2 * (alpha_len + beta_len + cbuff),
        "neighbors_min": int(counts.min()),
        "neighbors_max": int(counts.max()),
        "neighbors_mean": float(counts.mean()),
        "interior_neighbor_count": int(counts.max()),
        "safe_beta_threshold_deg": beta_min,
        "patrol_annulus_mm": [geom.inner_radius, geom.outer_radius],
        "nearest_valid_counts": [hex_count(k) for k in range(0, 6)],
    })


if __name__ == "__main__":
    main()

"""Monte Carlo experiment harness: cells x trials, CSV records, summaries.

A campaign spec names grid sizes, buffers, step sizes, and algorithm arms;
every (cell, trial) pair gets an independent seed derived from the base seed,
so campaigns are reproducible, resumable, and embarrassingly parallel.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field, asdict
from functools import lru_cache
from itertools import product
from multiprocessing import get_context

import numpy as np
from scipy import stats

from .geometry import AngularPose, ArmGeometry
from .grid import (
    GridLayout,
    InfeasibleDensityError,
    assign_random_targets,
    build_hex_grid,
    set_folded_destination,
)
from .pathgen import REVERSE, SolveConfig, solve
from .postprocess import verify_trajectory
from .resolver import efficiency, solve_with_replacement
from .seeding import derive_seed

__all__ = [
    "AlgorithmArm",
    "CampaignSpec",
    "Cell",
    "TrialRecord",
    "TRIAL_COLUMNS",
    "TIMING_COLUMNS",
    "assign_targets_retry",
    "run_trial",
    "run_campaign",
    "campaign_to_csv",
    "aggregate",
    "summary_to_csv",
    "load_records",
]

#: Wall-clock measurement columns; all other columns are seed-deterministic.
TIMING_COLUMNS = ("tau_pg_s", "tau_sr_s")

FIELD_RETRY_CAP = 50


@dataclass(frozen=True)
class AlgorithmArm:
    """One algorithm setting in a campaign (a named greed/phobia pair)."""

    name: str
    greed: float
    phobia: float

    @staticmethod
    def gc() -> "AlgorithmArm":
        return AlgorithmArm("GC", 1.0, 0.0)

    @staticmethod
    def mc(greed: float = 0.9, phobia: float = 0.3) -> "AlgorithmArm":
        return AlgorithmArm("MC", greed, phobia)


@dataclass(frozen=True)
class Cell:
    n_robots: int
    cbuff: float
    step_deg: float
    algorithm: AlgorithmArm

    @property
    def key(self) -> str:
        return (
            f"n{self.n_robots}-cb{self.cbuff:g}-dt{self.step_deg:g}-"
            f"{self.algorithm.name}-g{self.algorithm.greed:g}-p{self.algorithm.phobia:g}"
        )


@dataclass
class CampaignSpec:
    """Parameter grid plus shared physics for a simulation campaign."""

    grid_sizes: list
    cbuffs: list
    step_degs: list
    algorithms: list
    trials: int
    base_seed: int
    destination: tuple = (10.0, 170.0)
    direction: str = REVERSE
    pitch: float = 22.4
    alpha_len: float = 7.4
    beta_len: float = 15.0
    axis_speed: float = 30.0
    max_rounds: int = 100
    max_steps: int | None = None
    safety_check: bool = True

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        self.algorithms = [
            a if isinstance(a, AlgorithmArm) else AlgorithmArm(**a)
            for a in self.algorithms
        ]
        self.destination = tuple(self.destination)

    def cells(self) -> list[Cell]:
        return [
            Cell(n, cb, st, arm)
            for n, cb, st, arm in product(
                self.grid_sizes, self.cbuffs, self.step_degs, self.algorithms
            )
        ]

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["destination"] = list(self.destination)
        return doc

    @staticmethod
    def from_dict(doc: dict) -> "CampaignSpec":
        known = {f for f in CampaignSpec.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown campaign keys: {sorted(unknown)}")
        missing = {"grid_sizes", "cbuffs", "step_degs", "algorithms",
                   "trials", "base_seed"} - set(doc)
        if missing:
            raise ValueError(f"missing campaign keys: {sorted(missing)}")
        return CampaignSpec(**doc)

    @staticmethod
    def from_file(path) -> "CampaignSpec":
        text = open(path, "rb").read()
        if str(path).endswith((".toml", ".tml")):
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            doc = tomllib.loads(text.decode())
        else:
            doc = json.loads(text.decode())
        return CampaignSpec.from_dict(doc)


TRIAL_COLUMNS = [
    "n_robots",          # robots in the hexagonal grid
    "cbuff_mm",          # collision buffer
    "step_deg",          # angular step per sweep
    "algorithm",         # arm name (GC / MC / custom)
    "greed",
    "phobia",
    "direction",
    "trial",             # trial index within the cell
    "seed",              # derived 64-bit seed for this trial
    "field_retries",     # source fields redrawn before one was feasible
    "efficiency",        # (n - replaced) / n; for forward runs, converged / n
    "converged_first_pass",
    "n_replaced",
    "generator_passes",
    "steps_used",        # sweeps of the final converging pass
    "fold_time_s",       # steps_used * step_deg / axis_speed
    "tau_pg_s",          # wall time of the final generator pass
    "tau_sr_s",          # wall time of the whole replacement loop
    "deadlock_group_sizes",  # sizes on the first deadlocked pass, ';'-joined
    "safety_proximity_events",  # recorded states with a pair at or under 2*cbuff
    "safety_max_step_delta_deg",  # largest per-axis waypoint-to-waypoint delta
    "error",
]


@dataclass
class TrialRecord:
    n_robots: int
    cbuff_mm: float
    step_deg: float
    algorithm: str
    greed: float
    phobia: float
    direction: str
    trial: int
    seed: int
    field_retries: int = 0
    efficiency: float = math.nan
    converged_first_pass: bool = False
    n_replaced: int = 0
    generator_passes: int = 0
    steps_used: int = 0
    fold_time_s: float = math.nan
    tau_pg_s: float = math.nan
    tau_sr_s: float = math.nan
    deadlock_group_sizes: str = ""
    safety_proximity_events: int = -1
    safety_max_step_delta_deg: float = math.nan
    error: str = ""

    @property
    def key(self) -> tuple:
        return (self.n_robots, self.cbuff_mm, self.step_deg, self.algorithm,
                self.greed, self.phobia, self.trial)

    def row(self) -> list:
        d = asdict(self)
        return [d[c] for c in TRIAL_COLUMNS]


@lru_cache(maxsize=8)
def _layout(n_robots, pitch, alpha_len, beta_len, cbuff) -> GridLayout:
    return build_hex_grid(n_robots, pitch, ArmGeometry(alpha_len, beta_len), cbuff)


def assign_targets_retry(
    layout: GridLayout, seed: int, max_retries: int = FIELD_RETRY_CAP
):
    """Assignment with a deterministic field-level retry.

    At extreme crowding a rare field leaves some robot no collision-free
    draw; the whole field is then redrawn under a seed derived from the
    original, keeping trials reproducible.  Returns (config, retries).
    """
    for k in range(max_retries):
        s = seed if k == 0 else derive_seed(seed, "field-retry", k)
        try:
            return assign_random_targets(layout, s), k
        except InfeasibleDensityError:
            continue
    raise InfeasibleDensityError(
        f"no feasible source field in {max_retries} attempts for seed {seed}"
    )


def run_trial(spec: CampaignSpec, cell: Cell, trial: int) -> TrialRecord:
    """One (cell, trial) simulation; failures land in record.error."""
    seed = derive_seed(spec.base_seed, cell.key, trial)
    rec = TrialRecord(
        n_robots=cell.n_robots, cbuff_mm=cell.cbuff, step_deg=cell.step_deg,
        algorithm=cell.algorithm.name, greed=cell.algorithm.greed,
        phobia=cell.algorithm.phobia, direction=spec.direction,
        trial=trial, seed=seed,
    )
    try:
        layout = _layout(cell.n_robots, spec.pitch, spec.alpha_len,
                         spec.beta_len, cell.cbuff)
        config, retries = assign_targets_retry(layout, seed)
        rec.field_retries = retries
        set_folded_destination(config, AngularPose(*spec.destination))
        solve_cfg = SolveConfig(
            step_deg=cell.step_deg, greed=cell.algorithm.greed,
            phobia=cell.algorithm.phobia, direction=REVERSE,
            rng_seed=seed, max_steps=spec.max_steps,
            axis_speed=spec.axis_speed,
        )
        if spec.direction == REVERSE:
            report = solve_with_replacement(config, solve_cfg, spec.max_rounds)
            outcome = report.final_outcome
            rec.efficiency = efficiency(report, cell.n_robots)
            rec.converged_first_pass = report.generator_passes == 1 and outcome.converged
            rec.n_replaced = len(report.replaced_robot_indices)
            rec.generator_passes = report.generator_passes
            rec.tau_sr_s = report.total_wall_time
            if report.deadlock_history:
                rec.deadlock_group_sizes = ";".join(
                    str(len(g)) for g in report.deadlock_history[0]
                )
        else:
            fwd_cfg = SolveConfig(
                step_deg=cell.step_deg, greed=cell.algorithm.greed,
                phobia=cell.algorithm.phobia, direction="forward",
                rng_seed=seed, max_steps=spec.max_steps,
                axis_speed=spec.axis_speed,
            )
            config.swap_endpoints()
            outcome = solve(config, fwd_cfg)
            rec.efficiency = (
                cell.n_robots - len(outcome.deadlocked_robots)
            ) / cell.n_robots
            rec.converged_first_pass = outcome.converged
            rec.generator_passes = 1
            rec.tau_sr_s = outcome.wall_time
            if not outcome.converged:
                rec.deadlock_group_sizes = str(len(outcome.deadlocked_robots))
        rec.steps_used = outcome.steps_used
        rec.fold_time_s = outcome.fold_time
        rec.tau_pg_s = outcome.wall_time
        if spec.safety_check:
            traj = outcome.trajectories
            report = verify_trajectory(
                traj, layout, layout.cbuff, traj.step_deg / traj.axis_speed
            )
            rec.safety_proximity_events = report.total_proximity_events
            worst = 0.0
            for rp in traj.robots:
                if rp.alpha.shape[0] > 1:
                    worst = max(worst, float(np.abs(np.diff(rp.alpha[:, 1])).max()),
                                float(np.abs(np.diff(rp.beta[:, 1])).max()))
            rec.safety_max_step_delta_deg = worst
    except Exception as exc:  # per-trial failures must not kill the campaign
        rec.error = f"{type(exc).__name__}: {exc}"
    return rec


def _worker(args):
    spec_doc, cell_idx, trial = args
    spec = CampaignSpec.from_dict(spec_doc)
    return run_trial(spec, spec.cells()[cell_idx], trial)


def run_campaign(spec: CampaignSpec, workers: int = 1, skip_keys=None):
    """Yield a TrialRecord per (cell, trial), optionally in parallel.

    Record order is deterministic for workers == 1 and arbitrary otherwise;
    records carry their (cell, trial) keys either way.
    """
    cells = spec.cells()
    tasks = [
        (ci, t)
        for ci in range(len(cells))
        for t in range(spec.trials)
        if not (skip_keys and _task_key(cells[ci], t) in skip_keys)
    ]
    if workers <= 1:
        for ci, t in tasks:
            yield run_trial(spec, cells[ci], t)
        return
    doc = spec.to_dict()
    ctx = get_context("fork" if sys.platform.startswith("linux") else "spawn")
    with ctx.Pool(workers) as pool:
        args = [(doc, ci, t) for ci, t in tasks]
        for rec in pool.imap_unordered(_worker, args, chunksize=1):
            yield rec


def _task_key(cell: Cell, trial: int) -> tuple:
    return (cell.n_robots, cell.cbuff, cell.step_deg, cell.algorithm.name,
            cell.algorithm.greed, cell.algorithm.phobia, trial)


def _record_sort_key(spec: CampaignSpec):
    order = {c.key: i for i, c in enumerate(spec.cells())}

    def key(rec: TrialRecord):
        cell_key = Cell(rec.n_robots, rec.cbuff_mm, rec.step_deg,
                        AlgorithmArm(rec.algorithm, rec.greed, rec.phobia)).key
        return (order.get(cell_key, len(order)), rec.trial)

    return key


def campaign_to_csv(spec: CampaignSpec, path, workers: int = 1,
                    resume: bool = False, progress=None) -> list[TrialRecord]:
    """Run a campaign and write one sorted CSV row per trial.

    With resume=True, rows already present in the file are kept and only the
    missing (cell, trial) pairs run.  The final file is always rewritten in
    cell-major, trial-minor order so identical seeds give identical bytes in
    all seed-deterministic columns.
    """
    done: list[TrialRecord] = []
    skip = set()
    if resume and os.path.exists(path):
        for rec in load_records(path):
            done.append(rec)
            skip.add(rec.key)
    for rec in run_campaign(spec, workers=workers, skip_keys=skip or None):
        done.append(rec)
        if progress:
            progress(rec)
    done.sort(key=_record_sort_key(spec))
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRIAL_COLUMNS)
        for rec in done:
            writer.writerow(rec.row())
    return done


def load_records(path) -> list[TrialRecord]:
    records = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        missing = set(TRIAL_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"trial CSV missing columns: {sorted(missing)}")
        for row in reader:
            records.append(
                TrialRecord(
                    n_robots=int(row["n_robots"]),
                    cbuff_mm=float(row["cbuff_mm"]),
                    step_deg=float(row["step_deg"]),
                    algorithm=row["algorithm"],
                    greed=float(row["greed"]),
                    phobia=float(row["phobia"]),
                    direction=row["direction"],
                    trial=int(row["trial"]),
                    seed=int(row["seed"]),
                    field_retries=int(row["field_retries"]),
                    efficiency=float(row["efficiency"]),
                    converged_first_pass=row["converged_first_pass"] in ("True", "true", "1"),
                    n_replaced=int(row["n_replaced"]),
                    generator_passes=int(row["generator_passes"]),
                    steps_used=int(row["steps_used"]),
                    fold_time_s=float(row["fold_time_s"]),
                    tau_pg_s=float(row["tau_pg_s"]),
                    tau_sr_s=float(row["tau_sr_s"]),
                    deadlock_group_sizes=row["deadlock_group_sizes"],
                    safety_proximity_events=int(row["safety_proximity_events"]),
                    safety_max_step_delta_deg=float(row["safety_max_step_delta_deg"]),
                    error=row["error"],
                )
            )
    return records


SUMMARY_COLUMNS = [
    "n_robots", "cbuff_mm", "step_deg", "algorithm", "greed", "phobia",
    "n_trials",
    "eff_mean", "eff_min", "eff_q1", "eff_median", "eff_q3",
    "eff_whisker_lo", "eff_whisker_hi", "eff_ci95_lo", "eff_ci95_hi",
    "fold_mean_s", "fold_q1_s", "fold_median_s", "fold_q3_s",
    "fold_whisker_lo_s", "fold_whisker_hi_s",
    "fold_ci95_lo_s", "fold_ci95_hi_s",
    "tau_pg_mean_s", "tau_sr_total_s",
]


def _box_stats(values: np.ndarray) -> dict:
    q1, med, q3 = np.percentile(values, [25, 50, 75])
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = values[(values >= lo_fence) & (values <= hi_fence)]
    lo = float(inside.min()) if inside.size else float(values.min())
    hi = float(inside.max()) if inside.size else float(values.max())
    return {"q1": float(q1), "median": float(med), "q3": float(q3),
            "whisker_lo": lo, "whisker_hi": hi}


def _ci95(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean())
    if values.size < 2:
        return mean, mean
    half = float(
        stats.t.ppf(0.975, values.size - 1) * values.std(ddof=1)
        / math.sqrt(values.size)
    )
    return mean - half, mean + half


def aggregate(records) -> list[dict]:
    """Per-cell summary: efficiency and fold-time box statistics plus means.

    Whiskers follow the 1.5 x IQR convention (most extreme data inside the
    fences).  The 95% CI of the mean uses the t distribution.
    """
    records = [r for r in records if not r.error]
    if not records:
        raise ValueError("no successful records to aggregate")
    groups: dict[tuple, list[TrialRecord]] = {}
    for r in records:
        k = (r.n_robots, r.cbuff_mm, r.step_deg, r.algorithm, r.greed, r.phobia)
        groups.setdefault(k, []).append(r)
    out = []
    for k in sorted(groups):
        rs = groups[k]
        eff = np.array([r.efficiency for r in rs])
        fold = np.array([r.fold_time_s for r in rs])
        taupg = np.array([r.tau_pg_s for r in rs])
        tausr = np.array([r.tau_sr_s for r in rs])
        ebox = _box_stats(eff)
        fbox = _box_stats(fold)
        eci = _ci95(eff)
        fci = _ci95(fold)
        out.append({
            "n_robots": k[0], "cbuff_mm": k[1], "step_deg": k[2],
            "algorithm": k[3], "greed": k[4], "phobia": k[5],
            "n_trials": len(rs),
            "eff_mean": float(eff.mean()), "eff_min": float(eff.min()),
            "eff_q1": ebox["q1"], "eff_median": ebox["median"],
            "eff_q3": ebox["q3"],
            "eff_whisker_lo": ebox["whisker_lo"],
            "eff_whisker_hi": ebox["whisker_hi"],
            "eff_ci95_lo": eci[0], "eff_ci95_hi": eci[1],
            "fold_mean_s": float(fold.mean()),
            "fold_q1_s": fbox["q1"], "fold_median_s": fbox["median"],
            "fold_q3_s": fbox["q3"],
            "fold_whisker_lo_s": fbox["whisker_lo"],
            "fold_whisker_hi_s": fbox["whisker_hi"],
            "fold_ci95_lo_s": fci[0], "fold_ci95_hi_s": fci[1],
            "tau_pg_mean_s": float(taupg.mean()),
            "tau_sr_total_s": float(tausr.sum()),
        })
    return out


def summary_to_csv(summary: list[dict], path=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(SUMMARY_COLUMNS)
    for row in summary:
        writer.writerow([row[c] for c in SUMMARY_COLUMNS])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as f:
            f.write(text)
    return text

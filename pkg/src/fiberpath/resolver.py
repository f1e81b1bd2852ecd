"""Reverse-solve orchestration: deadlock detection and source replacement.

When a reverse solve deadlocks, one robot from each deadlocked group has its
source coordinates redrawn and the generator reruns.  Every replaced robot is
one lost science target, so the efficiency of a resolution is the fraction of
robots that kept their original sources.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .grid import (
    REDRAW_CAP,
    GridConfiguration,
    GridLayout,
    InfeasibleDensityError,
    draw_annulus_pose,
)
from .pathgen import REVERSE, SolveConfig, SolveOutcome, solve
from .seeding import derive_seed

__all__ = [
    "ReplacementReport",
    "UnresolvedError",
    "deadlock_groups",
    "solve_with_replacement",
    "efficiency",
]


class UnresolvedError(RuntimeError):
    """Replacement rounds were exhausted without convergence."""


@dataclass
class ReplacementReport:
    """Outcome of a replacement loop."""

    replaced_robot_indices: set[int]
    replacement_draw_counts: dict[int, int]
    generator_passes: int
    total_wall_time: float
    final_outcome: SolveOutcome
    deadlock_history: list[list[list[int]]] = field(default_factory=list)
    """Deadlock groups (robot index lists) per non-converging pass."""

    @property
    def converged(self) -> bool:
        return self.final_outcome.converged

    def to_dict(self) -> dict:
        return {
            "replaced_robot_indices": sorted(self.replaced_robot_indices),
            "replacement_draw_counts": {
                str(k): v for k, v in sorted(self.replacement_draw_counts.items())
            },
            "generator_passes": self.generator_passes,
            "total_wall_time_s": self.total_wall_time,
            "converged": self.converged,
            "deadlock_history": self.deadlock_history,
            "deadlock_group_sizes": [
                [len(g) for g in groups] for groups in self.deadlock_history
            ],
        }


def deadlock_groups(outcome: SolveOutcome, layout: GridLayout) -> list[list[int]]:
    """Connected components of the deadlocked set under the neighbor graph.

    Empty when the outcome converged.
    """
    dead = {int(i) for i in outcome.deadlocked_robots}
    groups = []
    seen: set[int] = set()
    for r in sorted(dead):
        if r in seen:
            continue
        comp = []
        stack = [r]
        seen.add(r)
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in layout.neighbors[u]:
                if v in dead and v not in seen:
                    seen.add(v)
                    stack.append(v)
        groups.append(sorted(comp))
    return groups


def _redraw_source(
    config: GridConfiguration, k: int, rng: np.random.Generator, slack: float
) -> int:
    """Replace robot k's source coordinates, keeping the full source set clean.

    The new draw must clear every other robot's source by 2*cbuff + slack.
    Returns the number of draws used.
    """
    lay = config.layout
    la, lb = lay.geom.alpha_len, lay.geom.beta_len
    ex, ey, fx, fy = _kernels.all_segments(
        lay.robots[:, 0], lay.robots[:, 1], config.alpha_init, config.beta_init,
        la, lb,
    )
    active = np.ones(lay.n_robots, dtype=np.bool_)
    active[k] = False
    margin = lay.cbuff + slack / 2.0
    for attempt in range(1, REDRAW_CAP + 1):
        pose = draw_annulus_pose(lay, k, rng)
        ar = math.radians(pose.alpha)
        abr = math.radians(pose.alpha + pose.beta)
        cex = lay.robots[k, 0] + la * math.cos(ar)
        cey = lay.robots[k, 1] + la * math.sin(ar)
        cfx = cex + lb * math.cos(abr)
        cfy = cey + lb * math.sin(abr)
        if not _kernels.draw_collides(
            k, cex, cey, cfx, cfy, ex, ey, fx, fy, active,
            lay.nbr_ptr, lay.nbr_idx, margin,
        ):
            config.set_source(k, pose)
            return attempt
    raise InfeasibleDensityError(
        f"robot {k}: no collision-free replacement in {REDRAW_CAP} draws"
    )


def solve_with_replacement(
    config: GridConfiguration,
    solve_config: SolveConfig,
    max_rounds: int = 100,
    group_mode: bool = True,
) -> ReplacementReport:
    """Iterate reverse solves, replacing sources until the grid converges.

    Each non-converging pass picks one robot uniformly at random from every
    deadlocked group (or from a single random group when group_mode is off),
    redraws its source coordinates against the current source set, and
    reruns the generator.  A robot counts once toward the replaced set no
    matter how many times it is redrawn.  Destinations are never touched.

    Pass p runs with a seed derived from (rng_seed, "pass", p), p = 0 being
    the first attempt; replacements draw from an independent derived stream.
    """
    if solve_config.direction != REVERSE:
        raise ValueError("replacement loop requires a reverse solve "
                         "(sources are the initial coordinates)")
    rng = np.random.default_rng(derive_seed(solve_config.rng_seed, "replacement"))
    replaced: dict[int, int] = {}
    history: list[list[list[int]]] = []

    t0 = time.perf_counter()
    passes = 0
    outcome = None
    for round_idx in range(max_rounds + 1):
        pass_cfg = SolveConfig(
            step_deg=solve_config.step_deg,
            greed=solve_config.greed,
            phobia=solve_config.phobia,
            direction=REVERSE,
            rng_seed=derive_seed(solve_config.rng_seed, "pass", round_idx),
            max_steps=solve_config.max_steps,
            axis_speed=solve_config.axis_speed,
        )
        outcome = solve(config, pass_cfg)
        passes += 1
        if outcome.converged:
            break
        groups = deadlock_groups(outcome, config.layout)
        history.append([list(g) for g in groups])
        if round_idx == max_rounds:
            break
        if not group_mode:
            groups = [groups[int(rng.integers(len(groups)))]]
        for group in groups:
            k = group[int(rng.integers(len(group)))]
            draws = _redraw_source(config, k, rng, slack=0.0)
            replaced[k] = replaced.get(k, 0) + draws

    total = time.perf_counter() - t0
    return ReplacementReport(
        replaced_robot_indices=set(replaced),
        replacement_draw_counts=replaced,
        generator_passes=passes,
        total_wall_time=total,
        final_outcome=outcome,
        deadlock_history=history,
    )


def efficiency(report: ReplacementReport, n_robots: int) -> float:
    """Targets kept over targets assigned: (n - replaced) / n."""
    return (n_robots - len(report.replaced_robot_indices)) / n_robots

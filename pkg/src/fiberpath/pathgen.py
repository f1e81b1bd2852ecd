"""The stepwise trajectory generator and its configuration.

A solve sweeps the robots in ascending index once per step; each robot picks
its next pose from nine candidate perturbations under the safety margin, so
robots react to neighbors that already moved within the same sweep.  With
greed = 1 and phobia = 0 the stepper is the deterministic greedy variant; any
other setting yields the stochastic one.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import ArmGeometry
from .grid import GridConfiguration, build_hex_grid

__all__ = [
    "SolveConfig",
    "RobotPath",
    "Trajectory",
    "SolveOutcome",
    "CollidingStateError",
    "RngState",
    "max_displacement",
    "cost",
    "energy",
    "perturb_robot",
    "solve",
    "trajectory_to_timed",
    "trajectory_to_dict",
    "trajectory_from_dict",
    "save_trajectory",
    "load_trajectory",
]

FORWARD = "forward"
REVERSE = "reverse"


class CollidingStateError(ValueError):
    """Initial or destination configuration violates the contact rule."""


class RngState:
    """Mutable splitmix64 stream shared with the compiled stepper."""

    def __init__(self, seed: int):
        self.state = np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)

    def uniform(self) -> float:
        """One draw in [0, 1)."""
        return float(_kernels.rand_uniform(self.state))


@dataclass(frozen=True)
class SolveConfig:
    """Algorithm knobs for one solve.

    max_steps defaults to ceil(1000 / step_deg), i.e. a 1000-degree travel
    budget per axis.  Defaults greed = 1, phobia = 0 give the greedy stepper.
    """

    step_deg: float
    greed: float = 1.0
    phobia: float = 0.0
    direction: str = REVERSE
    rng_seed: int = 0
    max_steps: int | None = None
    axis_speed: float = 30.0  # deg/s

    def __post_init__(self):
        if self.step_deg <= 0:
            raise ValueError("step_deg must be positive")
        if not (0.0 <= self.greed <= 1.0 and 0.0 <= self.phobia <= 1.0):
            raise ValueError("greed and phobia must lie in [0, 1]")
        if self.direction not in (FORWARD, REVERSE):
            raise ValueError(f"direction must be {FORWARD!r} or {REVERSE!r}")
        if self.max_steps is None:
            object.__setattr__(self, "max_steps", math.ceil(1000.0 / self.step_deg))
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.axis_speed <= 0:
            raise ValueError("axis_speed must be positive")

    @property
    def dt(self) -> float:
        """Seconds of motion per step (step size over axis speed)."""
        return self.step_deg / self.axis_speed


@dataclass
class RobotPath:
    """Per-axis (time_s, angle_deg) waypoint arrays for one robot."""

    index: int
    alpha: np.ndarray  # (m, 2)
    beta: np.ndarray   # (k, 2)


@dataclass
class Trajectory:
    """Waypoint trajectories for every robot in a grid.

    stage is ``raw`` straight out of the stepper (uniform step lattice),
    ``smoothed`` after velocity filtering, ``simplified`` after polyline
    reduction (per-axis waypoint counts may then differ).
    """

    stage: str
    step_deg: float
    axis_speed: float
    robots: list[RobotPath]

    @property
    def n_robots(self) -> int:
        return len(self.robots)

    @property
    def duration(self) -> float:
        """Seconds from first to last waypoint (max over robots and axes)."""
        end = 0.0
        for rp in self.robots:
            end = max(end, rp.alpha[-1, 0], rp.beta[-1, 0])
        return end

    def reflected(self) -> "Trajectory":
        """Time-reversed copy (motion played backwards)."""
        end = self.duration
        robots = []
        for rp in self.robots:
            ra = np.column_stack((end - rp.alpha[::-1, 0], rp.alpha[::-1, 1]))
            rb = np.column_stack((end - rp.beta[::-1, 0], rp.beta[::-1, 1]))
            robots.append(RobotPath(rp.index, ra, rb))
        return Trajectory(self.stage, self.step_deg, self.axis_speed, robots)


@dataclass
class SolveOutcome:
    """Result of one stepper run."""

    trajectories: Trajectory
    converged: bool
    deadlocked_robots: np.ndarray  # sorted robot indices, empty if converged
    steps_used: int
    wall_time: float  # seconds spent inside the stepper

    @property
    def fold_time(self) -> float:
        """Seconds of robot motion implied by the steps taken."""
        return self.steps_used * self.trajectories.step_deg / self.trajectories.axis_speed


def max_displacement(geom: ArmGeometry, step_deg: float) -> float:
    """Upper bound on fiber travel in one step, guarding tunneling moves.

    Fiber at full extension swept by one step on both axes:
    ``(alpha_len + beta_len) * sin(2 * step_deg)``.
    """
    if step_deg < 0:
        raise ValueError("step_deg must be nonnegative")
    return (geom.alpha_len + geom.beta_len) * math.sin(2.0 * math.radians(step_deg))


def cost(state) -> float:
    """Angular distance left to travel: Euclidean norm of current - destination."""
    return math.hypot(
        state.current.alpha - state.destination.alpha,
        state.current.beta - state.destination.beta,
    )


def energy(config: GridConfiguration, i: int) -> float:
    """Local crowding for robot i: sum of inverse-square neighbor distances.

    Infinite when some neighbor is in contact (distance exactly zero).
    """
    lay = config.layout
    ex, ey, fx, fy = _kernels.all_segments(
        lay.robots[:, 0], lay.robots[:, 1], config.alpha, config.beta,
        lay.geom.alpha_len, lay.geom.beta_len,
    )
    return float(_kernels.robot_energy(i, ex, ey, fx, fy, lay.nbr_ptr, lay.nbr_idx))


def perturb_robot(
    config: GridConfiguration, i: int, solve_config: SolveConfig, rng: RngState
) -> None:
    """Apply one move decision to robot i in place.

    The robot stays parked when already at its destination with no neighbor
    inside the encroachment horizon; otherwise it scores the nine candidate
    perturbations (travel- and overshoot-clamped, shuffled) and accepts
    improving candidates with probability greed, ties with probability 1/2.
    """
    if config.offline[i]:
        raise ValueError(f"robot {i} is offline")
    lay = config.layout
    geom = lay.geom
    ex, ey, fx, fy = _kernels.all_segments(
        lay.robots[:, 0], lay.robots[:, 1], config.alpha, config.beta,
        geom.alpha_len, geom.beta_len,
    )
    md = max_displacement(geom, solve_config.step_deg)
    step = solve_config.step_deg
    pert = np.array(
        [[da * step, db * step] for da in (-1.0, 0.0, 1.0) for db in (-1.0, 0.0, 1.0)]
    )
    perm = np.empty(9, dtype=np.int64)
    _kernels._perturb_one(
        i, lay.robots[:, 0], lay.robots[:, 1], config.alpha, config.beta,
        config.alpha_dest, config.beta_dest, ex, ey, fx, fy,
        lay.nbr_ptr, lay.nbr_idx, geom.alpha_len, geom.beta_len,
        2.0 * lay.cbuff, 2.0 * lay.cbuff + 3.0 * md,
        step, solve_config.greed, solve_config.phobia, rng.state, pert, perm,
    )


_warmed = False


def _warm_kernels():
    """Compile (or load cached) stepper code before anything is timed."""
    global _warmed
    if _warmed:
        return
    lay = build_hex_grid(1, 22.4, ArmGeometry(7.4, 15.0), 1.5)
    cfg = GridConfiguration(lay)
    ta = np.zeros((2, 1))
    tb = np.zeros((2, 1))
    _kernels.solve_kernel(
        lay.robots[:, 0], lay.robots[:, 1], cfg.alpha, cfg.beta,
        cfg.alpha_dest, cfg.beta_dest, cfg.offline, lay.nbr_ptr, lay.nbr_idx,
        7.4, 15.0, 1.5, 1.0, 1, 1.0, 0.0, 0, ta, tb,
    )
    _warmed = True


def solve(config: GridConfiguration, solve_config: SolveConfig) -> SolveOutcome:
    """Run the stepper from the configuration's initial coordinates.

    The configuration's current poses are reset to the initial coordinates,
    then advanced in place; on return they hold the final poses.  For a
    reverse solve the emitted trajectory is time-reflected, so it plays as
    physically forward motion from the destination back to the sources.

    Raises
    ------
    CollidingStateError
        If the initial or destination pose set violates the contact rule.
    """
    lay = config.layout
    config.reset_to_initial()
    if not config.is_valid("initial"):
        raise CollidingStateError("initial configuration has contacting arms")
    if not config.is_valid("destination"):
        raise CollidingStateError("destination configuration has contacting arms")

    _warm_kernels()
    n = lay.n_robots
    traj_alpha = np.empty((solve_config.max_steps + 1, n))
    traj_beta = np.empty((solve_config.max_steps + 1, n))

    t0 = time.perf_counter()
    steps, converged = _kernels.solve_kernel(
        lay.robots[:, 0], lay.robots[:, 1], config.alpha, config.beta,
        config.alpha_dest, config.beta_dest, config.offline,
        lay.nbr_ptr, lay.nbr_idx, lay.geom.alpha_len, lay.geom.beta_len,
        lay.cbuff, solve_config.step_deg, solve_config.max_steps,
        solve_config.greed, solve_config.phobia,
        np.uint64(solve_config.rng_seed & 0xFFFFFFFFFFFFFFFF),
        traj_alpha, traj_beta,
    )
    wall = time.perf_counter() - t0

    steps = int(steps)
    alpha_rec = traj_alpha[: steps + 1]
    beta_rec = traj_beta[: steps + 1]
    if solve_config.direction == REVERSE:
        alpha_rec = alpha_rec[::-1]
        beta_rec = beta_rec[::-1]

    dt = solve_config.dt
    times = np.arange(steps + 1) * dt
    robots = [
        RobotPath(
            index=i,
            alpha=np.column_stack((times, alpha_rec[:, i])),
            beta=np.column_stack((times, beta_rec[:, i])),
        )
        for i in range(n)
    ]
    trajectory = Trajectory(
        stage="raw",
        step_deg=solve_config.step_deg,
        axis_speed=solve_config.axis_speed,
        robots=robots,
    )

    online = ~config.offline
    stuck = (
        (config.alpha != config.alpha_dest) | (config.beta != config.beta_dest)
    ) & online
    deadlocked = np.flatnonzero(stuck)
    return SolveOutcome(
        trajectories=trajectory,
        converged=bool(converged),
        deadlocked_robots=deadlocked,
        steps_used=steps,
        wall_time=wall,
    )


def trajectory_to_timed(traj: Trajectory) -> list[np.ndarray]:
    """Per-robot (time_s, alpha_deg, beta_deg) arrays.

    Requires both axes to share one time lattice (raw and smoothed stages).
    """
    out = []
    for rp in traj.robots:
        if rp.alpha.shape != rp.beta.shape or not np.array_equal(
            rp.alpha[:, 0], rp.beta[:, 0]
        ):
            raise ValueError(
                "per-axis time lattices differ; use the per-axis waypoints instead"
            )
        out.append(np.column_stack((rp.alpha[:, 0], rp.alpha[:, 1], rp.beta[:, 1])))
    return out


# ---------------------------------------------------------------------------
# trajectory serialization
# ---------------------------------------------------------------------------

def trajectory_to_dict(traj: Trajectory) -> dict:
    return {
        "step_deg": traj.step_deg,
        "axis_speed_deg_s": traj.axis_speed,
        "stage": traj.stage,
        "robots": [
            {
                "index": rp.index,
                "alpha": [[float(t), float(a)] for t, a in rp.alpha],
                "beta": [[float(t), float(b)] for t, b in rp.beta],
            }
            for rp in traj.robots
        ],
    }


def trajectory_from_dict(doc: dict) -> Trajectory:
    try:
        robots = [
            RobotPath(
                index=entry["index"],
                alpha=np.asarray(entry["alpha"], dtype=float).reshape(-1, 2),
                beta=np.asarray(entry["beta"], dtype=float).reshape(-1, 2),
            )
            for entry in doc["robots"]
        ]
        return Trajectory(
            stage=doc["stage"],
            step_deg=doc["step_deg"],
            axis_speed=doc["axis_speed_deg_s"],
            robots=robots,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed trajectory document: {exc}") from exc


def save_trajectory(traj: Trajectory, path) -> None:
    with open(path, "w") as f:
        json.dump(trajectory_to_dict(traj), f, separators=(",", ":"))


def load_trajectory(path) -> Trajectory:
    with open(path) as f:
        return trajectory_from_dict(json.load(f))

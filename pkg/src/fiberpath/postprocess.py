"""Adapt raw stepper output to hardware limits.

Raw paths wiggle wherever arms negotiate right of way.  A running-average
velocity filter damps the wiggles (bounding acceleration), polyline
simplification cuts the waypoint count to what a positioner controller can
hold, and a final re-verification at a slightly reduced buffer proves the
post-processed motion is still collision free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geometry import ArmGeometry, fiber_position, Point2, AngularPose
from .grid import GridLayout
from .pathgen import RobotPath, Trajectory

__all__ = [
    "DegenerateWindowError",
    "PointBudgetError",
    "Violation",
    "VerificationReport",
    "MAX_POINTS_PER_AXIS",
    "DEFAULT_ACCEL_LIMIT",
    "default_window",
    "smooth_velocity",
    "simplify_rdp",
    "verify_trajectory",
    "buffer_budget",
    "lateral_uncertainty",
]

#: Hardware cap on (angle, time) waypoints per axis.
MAX_POINTS_PER_AXIS = 1024

#: Default angular acceleration ceiling used to pick a smoothing window,
#: deg/s^2.  A configuration knob, not a published hardware figure.
DEFAULT_ACCEL_LIMIT = 3000.0


class DegenerateWindowError(ValueError):
    """Smoothing window does not fit inside the trajectory."""


class PointBudgetError(RuntimeError):
    """Simplification cannot reach the per-axis point budget at this epsilon."""


def default_window(step_deg: float, axis_speed: float,
                   accel_limit: float = DEFAULT_ACCEL_LIMIT) -> int:
    """Smallest odd window keeping filtered acceleration under accel_limit.

    A width-w average of velocities in [-v, v] changes by at most 2v/w per
    step of dt = step_deg / axis_speed, so w >= 2*v**2 / (step_deg * a).
    """
    w = math.ceil(2.0 * axis_speed * axis_speed / (step_deg * accel_limit))
    w = max(w, 1)
    return w if w % 2 == 1 else w + 1


def _uniform_lattice_dt(traj: Trajectory) -> float:
    return traj.step_deg / traj.axis_speed


def _smooth_axis(vals: np.ndarray, h: int, w: int) -> np.ndarray:
    if h == 0:
        return vals.copy()
    v = np.diff(vals)
    padded = np.concatenate((np.zeros(h), v, np.zeros(h)))
    smoothed = np.convolve(padded, np.full(w, 1.0 / w), mode="same")
    out = np.empty(len(vals) + 2 * h)
    out[0] = vals[0]
    out[1:] = vals[0] + np.cumsum(smoothed)
    out[-1] = vals[-1]  # the filter conserves total travel; pin away FP drift
    return out


def smooth_velocity(traj: Trajectory, window: int) -> Trajectory:
    """Convolve each axis velocity profile with a centered uniform window.

    The velocity sequence is zero-padded on both sides (robot at rest before
    and after the motion), which lengthens every path by window - 1 samples
    while preserving the start and end angles exactly.  Requires the uniform
    raw/smoothed time lattice.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and >= 1")
    n_samples = min(min(rp.alpha.shape[0], rp.beta.shape[0]) for rp in traj.robots)
    if window > n_samples:
        raise DegenerateWindowError(
            f"window {window} exceeds trajectory length {n_samples}"
        )
    h = (window - 1) // 2
    dt = _uniform_lattice_dt(traj)
    robots = []
    for rp in traj.robots:
        a = _smooth_axis(rp.alpha[:, 1], h, window)
        b = _smooth_axis(rp.beta[:, 1], h, window)
        times = np.arange(len(a)) * dt
        robots.append(
            RobotPath(
                rp.index,
                np.column_stack((times, a)),
                np.column_stack((times, b)),
            )
        )
    return Trajectory("smoothed", traj.step_deg, traj.axis_speed, robots)


def _rdp_keep_mask(t: np.ndarray, y: np.ndarray, eps: float) -> np.ndarray:
    """Classic split-at-worst recursion; deviation measured along the angle
    axis at each sample time, so kept polylines interpolate originals to eps.
    """
    n = len(t)
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        i0, i1 = stack.pop()
        if i1 - i0 < 2:
            continue
        tt = t[i0 + 1:i1]
        yy = y[i0 + 1:i1]
        chord = y[i0] + (tt - t[i0]) * ((y[i1] - y[i0]) / (t[i1] - t[i0]))
        dev = np.abs(yy - chord)
        k = int(np.argmax(dev))
        if dev[k] > eps:
            mid = i0 + 1 + k
            keep[mid] = True
            stack.append((i0, mid))
            stack.append((mid, i1))
    return keep


def _simplify_axis(points: np.ndarray, eps: float) -> np.ndarray:
    if points.shape[0] <= 2:
        return points.copy()
    mask = _rdp_keep_mask(points[:, 0], points[:, 1], eps)
    return points[mask]


def simplify_rdp(traj: Trajectory, epsilon: float,
                 max_points: int = MAX_POINTS_PER_AXIS) -> Trajectory:
    """Reduce each per-axis waypoint polyline, keeping samples within epsilon.

    Every original sample stays within epsilon degrees of the simplified
    piecewise-linear profile evaluated at the same time.  First and last
    points are always retained.

    Raises
    ------
    PointBudgetError
        If some axis still needs more than max_points waypoints; the message
        reports an epsilon that would fit the budget.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    robots = []
    worst = 0
    for rp in traj.robots:
        a = _simplify_axis(rp.alpha, epsilon)
        b = _simplify_axis(rp.beta, epsilon)
        worst = max(worst, a.shape[0], b.shape[0])
        robots.append(RobotPath(rp.index, a, b))
    if worst > max_points:
        eps = epsilon
        for _ in range(60):
            eps *= 1.5
            if all(
                max(_simplify_axis(rp.alpha, eps).shape[0],
                    _simplify_axis(rp.beta, eps).shape[0]) <= max_points
                for rp in traj.robots
            ):
                break
        raise PointBudgetError(
            f"axis needs {worst} points at epsilon {epsilon}; "
            f"epsilon {eps:g} would fit the {max_points}-point budget"
        )
    return Trajectory("simplified", traj.step_deg, traj.axis_speed, robots)


@dataclass
class Violation:
    robot_i: int
    robot_j: int
    time_s: float
    distance_mm: float


@dataclass
class VerificationReport:
    """Replay result: proximity events plus axis limit/speed breaches."""

    violations: list[Violation]
    max_points_alpha: int
    max_points_beta: int
    limit_violations: list[dict] = field(default_factory=list)
    speed_violations: list[dict] = field(default_factory=list)
    total_proximity_events: int = 0

    @property
    def clean(self) -> bool:
        return not (self.violations or self.limit_violations or self.speed_violations)

    def to_dict(self) -> dict:
        return {
            "violations": [
                {
                    "robot_i": v.robot_i,
                    "robot_j": v.robot_j,
                    "time_s": v.time_s,
                    "distance_mm": v.distance_mm,
                }
                for v in self.violations
            ],
            "max_points_alpha": self.max_points_alpha,
            "max_points_beta": self.max_points_beta,
            "limit_violations": self.limit_violations,
            "speed_violations": self.speed_violations,
            "total_proximity_events": self.total_proximity_events,
        }


def _pack_axis(paths: list[np.ndarray]):
    ptr = np.zeros(len(paths) + 1, dtype=np.int64)
    for i, p in enumerate(paths):
        ptr[i + 1] = ptr[i] + p.shape[0]
    times = np.concatenate([p[:, 0] for p in paths])
    vals = np.concatenate([p[:, 1] for p in paths])
    return times, vals, ptr


def verify_trajectory(
    traj: Trajectory,
    layout: GridLayout,
    check_cbuff: float,
    dt: float,
    max_reported: int = 10_000,
) -> VerificationReport:
    """Replay a trajectory on a common dt lattice and report any conflicts.

    Robot pairs whose beta arms come within 2*check_cbuff at a lattice sample
    are reported, along with waypoints outside [0, 360) and waypoint-to-
    waypoint speeds above the trajectory's axis speed.  Findings are report
    content, never exceptions.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if traj.n_robots != layout.n_robots:
        raise ValueError(
            f"trajectory has {traj.n_robots} robots, layout {layout.n_robots}"
        )
    at, av, a_ptr = _pack_axis([rp.alpha for rp in traj.robots])
    bt, bv, b_ptr = _pack_axis([rp.beta for rp in traj.robots])

    out_i = np.empty(max_reported, dtype=np.int64)
    out_j = np.empty(max_reported, dtype=np.int64)
    out_t = np.empty(max_reported)
    out_d = np.empty(max_reported)
    count = _kernels.verify_kernel(
        layout.robots[:, 0], layout.robots[:, 1], layout.nbr_ptr, layout.nbr_idx,
        layout.geom.alpha_len, layout.geom.beta_len,
        at, av, a_ptr, bt, bv, b_ptr,
        check_cbuff, dt, traj.duration, out_i, out_j, out_t, out_d,
    )
    count = int(count)
    shown = min(count, max_reported)
    violations = [
        Violation(int(out_i[k]), int(out_j[k]), float(out_t[k]), float(out_d[k]))
        for k in range(shown)
    ]

    limit_violations = []
    speed_violations = []
    speed_cap = traj.axis_speed + 1e-9
    max_a = max_b = 0
    for rp in traj.robots:
        max_a = max(max_a, rp.alpha.shape[0])
        max_b = max(max_b, rp.beta.shape[0])
        for axis, pts in (("alpha", rp.alpha), ("beta", rp.beta)):
            bad = np.flatnonzero((pts[:, 1] < 0.0) | (pts[:, 1] >= 360.0))
            for k in bad:
                limit_violations.append(
                    {"robot": rp.index, "axis": axis,
                     "time_s": float(pts[k, 0]), "angle_deg": float(pts[k, 1])}
                )
            dts = np.diff(pts[:, 0])
            if np.any(dts <= 0):
                speed_violations.append(
                    {"robot": rp.index, "axis": axis,
                     "time_s": float(pts[0, 0]), "speed_deg_s": math.inf}
                )
                continue
            speeds = np.abs(np.diff(pts[:, 1])) / dts
            fast = np.flatnonzero(speeds > speed_cap)
            for k in fast:
                speed_violations.append(
                    {"robot": rp.index, "axis": axis,
                     "time_s": float(pts[k, 0]), "speed_deg_s": float(speeds[k])}
                )

    return VerificationReport(
        violations=violations,
        max_points_alpha=max_a,
        max_points_beta=max_b,
        limit_violations=limit_violations,
        speed_violations=speed_violations,
        total_proximity_events=count,
    )


def buffer_budget(arm_halfwidth: float, smooth_margin: float,
                  lateral_uncertainty: float) -> float:
    """Collision buffer as the sum of its three spending lines."""
    for name, v in (("arm_halfwidth", arm_halfwidth),
                    ("smooth_margin", smooth_margin),
                    ("lateral_uncertainty", lateral_uncertainty)):
        if v < 0:
            raise ValueError(f"{name} must be nonnegative")
    return arm_halfwidth + smooth_margin + lateral_uncertainty


def lateral_uncertainty(geom: ArmGeometry, d_alpha: float, d_beta: float) -> float:
    """Fiber displacement at full extension for small axis errors.

    Distance between the fiber at pose (0, 0) and at pose (d_alpha, d_beta).
    """
    origin = Point2(0.0, 0.0)
    f1 = fiber_position(origin, geom, AngularPose(0.0, 0.0))
    f2 = fiber_position(
        origin, geom, AngularPose(d_alpha % 360.0, d_beta % 360.0)
    )
    return math.hypot(f1.x - f2.x, f1.y - f2.y)

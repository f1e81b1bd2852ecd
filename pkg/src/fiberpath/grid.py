"""Hexagonal positioner arrays, neighbor graphs, and configurations.

Robots are indexed ring-major: the center first, then each concentric ring
walked counterclockwise starting from the +x axis.  The lattice rows run
along +x (the alpha = 0 direction).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels
from .geometry import AngularPose, ArmGeometry, Point2, beta_gamma_from_radius

__all__ = [
    "GridLayout",
    "RobotState",
    "GridConfiguration",
    "HexCountError",
    "InvalidFoldError",
    "InfeasibleDensityError",
    "hex_count",
    "build_hex_grid",
    "is_collided",
    "assign_random_targets",
    "set_folded_destination",
    "layout_to_dict",
    "layout_from_dict",
]

# alpha travel is clamped to this ceiling, so drawn poses stay reachable
MAX_TRAVEL_DEG = 359.999

REDRAW_CAP = 10_000


class HexCountError(ValueError):
    """Robot count is not a centered hexagonal number."""


class InvalidFoldError(ValueError):
    """The requested common destination pose collides somewhere in the grid."""


class InfeasibleDensityError(RuntimeError):
    """Collision-free target assignment failed within the redraw budget."""


def hex_count(rings: int) -> int:
    """Robots in a filled hexagonal array with the given ring count."""
    return 3 * rings * (rings + 1) + 1


def _rings_for(n_robots: int) -> int:
    k = round((math.sqrt(max(12 * n_robots - 3, 0)) - 3) / 6)
    if k < 0 or hex_count(k) != n_robots:
        lo = 0
        while hex_count(lo + 1) <= n_robots:
            lo += 1
        raise HexCountError(
            f"{n_robots} is not a centered hexagonal count; nearest valid "
            f"counts are {hex_count(lo)} and {hex_count(lo + 1)}"
        )
    return k


@dataclass(frozen=True)
class GridLayout:
    """Immutable array geometry: bases, arms, pitch, buffer, neighbor graph."""

    robots: np.ndarray  # (n, 2) base positions, mm
    geom: ArmGeometry
    pitch: float
    cbuff: float
    neighbors: tuple  # tuple of tuples of robot indices
    nbr_ptr: np.ndarray = field(repr=False, default=None)
    nbr_idx: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        ptr = np.zeros(len(self.neighbors) + 1, dtype=np.int64)
        for i, nb in enumerate(self.neighbors):
            ptr[i + 1] = ptr[i] + len(nb)
        idx = np.fromiter(
            (j for nb in self.neighbors for j in nb), dtype=np.int64, count=ptr[-1]
        )
        object.__setattr__(self, "nbr_ptr", ptr)
        object.__setattr__(self, "nbr_idx", idx)
        self.robots.setflags(write=False)

    @property
    def n_robots(self) -> int:
        return self.robots.shape[0]

    def base(self, i: int) -> Point2:
        return Point2(float(self.robots[i, 0]), float(self.robots[i, 1]))


def _neighbor_lists(robots: np.ndarray, geom: ArmGeometry, cbuff: float) -> tuple:
    # two robots risk interference when their centers are within twice the
    # summed arm length plus buffer (inclusive threshold)
    threshold = 2.0 * (geom.alpha_len + geom.beta_len + cbuff)
    tree = cKDTree(robots)
    lists = [[] for _ in range(robots.shape[0])]
    for i, j in tree.query_pairs(threshold):
        lists[i].append(j)
        lists[j].append(i)
    return tuple(tuple(sorted(nb)) for nb in lists)


def build_hex_grid(
    n_robots: int, pitch: float, geom: ArmGeometry, cbuff: float
) -> GridLayout:
    """Concentric-ring hexagonal layout centered on the origin.

    ``n_robots`` must be a centered hexagonal number (1, 7, 19, 37, ...).
    Neighbor lists are built with the inclusive center-distance threshold
    ``2*(alpha_len + beta_len + cbuff)``.
    """
    rings = _rings_for(n_robots)
    if cbuff < 0:
        raise ValueError("cbuff must be nonnegative")

    # axial basis: rows along +x, second axis at 60 degrees
    axial = [(0, 0)]
    walk = ((-1, 1), (-1, 0), (0, -1), (1, -1), (1, 0), (0, 1))
    for r in range(1, rings + 1):
        q, s = r, 0
        for dq, ds in walk:
            for _ in range(r):
                axial.append((q, s))
                q += dq
                s += ds
    robots = np.empty((n_robots, 2))
    for i, (q, s) in enumerate(axial):
        robots[i, 0] = pitch * (q + 0.5 * s)
        robots[i, 1] = pitch * (s * math.sqrt(3.0) / 2.0)

    return GridLayout(
        robots=robots,
        geom=geom,
        pitch=pitch,
        cbuff=cbuff,
        neighbors=_neighbor_lists(robots, geom, cbuff),
    )


@dataclass
class RobotState:
    """Snapshot of one robot's angular coordinates."""

    index: int
    current: AngularPose
    initial: AngularPose
    destination: AngularPose
    offline: bool = False


class GridConfiguration:
    """A layout plus per-robot current/initial/destination coordinates.

    Poses are held in flat arrays (degrees); ``state(i)`` gives a snapshot
    view for one robot.
    """

    def __init__(self, layout: GridLayout):
        n = layout.n_robots
        self.layout = layout
        self.alpha = np.zeros(n)
        self.beta = np.zeros(n)
        self.alpha_init = np.zeros(n)
        self.beta_init = np.zeros(n)
        self.alpha_dest = np.zeros(n)
        self.beta_dest = np.zeros(n)
        self.offline = np.zeros(n, dtype=np.bool_)

    @property
    def n_robots(self) -> int:
        return self.layout.n_robots

    def state(self, i: int) -> RobotState:
        return RobotState(
            index=i,
            current=AngularPose(float(self.alpha[i]), float(self.beta[i])),
            initial=AngularPose(float(self.alpha_init[i]), float(self.beta_init[i])),
            destination=AngularPose(float(self.alpha_dest[i]), float(self.beta_dest[i])),
            offline=bool(self.offline[i]),
        )

    @property
    def states(self) -> list[RobotState]:
        return [self.state(i) for i in range(self.n_robots)]

    def set_source(self, i: int, pose: AngularPose):
        """Set robot i's source coordinates (initial and current)."""
        self.alpha_init[i] = self.alpha[i] = pose.alpha
        self.beta_init[i] = self.beta[i] = pose.beta

    def set_offline(self, i: int, offline: bool = True):
        self.offline[i] = offline

    def swap_endpoints(self):
        """Exchange the roles of initial and destination coordinates."""
        self.alpha_init, self.alpha_dest = self.alpha_dest, self.alpha_init
        self.beta_init, self.beta_dest = self.beta_dest, self.beta_init
        self.alpha = self.alpha_init.copy()
        self.beta = self.beta_init.copy()

    def reset_to_initial(self):
        self.alpha = self.alpha_init.copy()
        self.beta = self.beta_init.copy()

    def min_pair_distance(self, which: str = "current") -> float:
        """Smallest neighbor-pair beta-arm distance for a pose set."""
        alpha, beta = self._pose_arrays(which)
        lay = self.layout
        ex, ey, fx, fy = _kernels.all_segments(
            lay.robots[:, 0], lay.robots[:, 1], alpha, beta,
            lay.geom.alpha_len, lay.geom.beta_len,
        )
        return float(
            _kernels.grid_min_pair_dist(ex, ey, fx, fy, lay.nbr_ptr, lay.nbr_idx)
        )

    def is_valid(self, which: str = "current") -> bool:
        """No neighbor pair at or inside contact (distance > 2*cbuff)."""
        return self.min_pair_distance(which) > 2.0 * self.layout.cbuff

    def _pose_arrays(self, which: str):
        if which == "current":
            return self.alpha, self.beta
        if which == "initial":
            return self.alpha_init, self.beta_init
        if which == "destination":
            # an offline robot blocks at its current pose, wherever that is
            alpha = np.where(self.offline, self.alpha, self.alpha_dest)
            beta = np.where(self.offline, self.beta, self.beta_dest)
            return alpha, beta
        raise ValueError(f"unknown pose set {which!r}")

    def copy(self) -> "GridConfiguration":
        out = GridConfiguration(self.layout)
        out.alpha = self.alpha.copy()
        out.beta = self.beta.copy()
        out.alpha_init = self.alpha_init.copy()
        out.beta_init = self.beta_init.copy()
        out.alpha_dest = self.alpha_dest.copy()
        out.beta_dest = self.beta_dest.copy()
        out.offline = self.offline.copy()
        return out


def is_collided(config: GridConfiguration, i: int, slack: float = 0.0) -> bool:
    """True iff some neighbor's beta arm is within ``2*cbuff + slack`` of i's.

    slack = 0 is the contact rule, slack = MD the per-step safety margin,
    slack = 3*MD the encroachment horizon.
    """
    lay = config.layout
    ex, ey, fx, fy = _kernels.all_segments(
        lay.robots[:, 0], lay.robots[:, 1], config.alpha, config.beta,
        lay.geom.alpha_len, lay.geom.beta_len,
    )
    d = _kernels.robot_min_neighbor_dist(i, ex, ey, fx, fy, lay.nbr_ptr, lay.nbr_idx)
    return bool(d <= 2.0 * lay.cbuff + slack)


def draw_annulus_pose(layout: GridLayout, i: int, rng: np.random.Generator) -> AngularPose:
    """Right-armed pose whose fiber point is area-uniform over the annulus."""
    geom = layout.geom
    r = math.sqrt(rng.uniform(geom.inner_radius**2, geom.outer_radius**2))
    phi = rng.uniform(0.0, 2.0 * math.pi)
    beta, gamma = beta_gamma_from_radius(geom, r)
    alpha = (math.degrees(phi) - gamma) % 360.0
    alpha = min(alpha, MAX_TRAVEL_DEG)
    return AngularPose(alpha, min(beta, 180.0))


def assign_random_targets(
    layout: GridLayout, rng_seed: int, clearance_slack: float = 0.0
) -> GridConfiguration:
    """Draw collision-free right-armed source coordinates for every robot.

    Robots are assigned in index order; a draw whose beta arm comes within
    ``2*cbuff + clearance_slack`` of an already-assigned neighbor is redrawn
    (up to 10,000 attempts per robot).  Deterministic for a given seed.

    Pass the stepper's per-step displacement bound as clearance_slack when
    the configuration feeds a solve: a pair seeded inside the stepper's
    safety margin can never move and freezes its whole neighborhood.
    """
    config = GridConfiguration(layout)
    rng = np.random.default_rng(rng_seed)
    lay = layout
    n = lay.n_robots
    ex = np.empty(n)
    ey = np.empty(n)
    fx = np.empty(n)
    fy = np.empty(n)
    assigned = np.zeros(n, dtype=np.bool_)
    la, lb = lay.geom.alpha_len, lay.geom.beta_len
    margin = lay.cbuff + clearance_slack / 2.0  # draw_collides doubles it

    for i in range(n):
        for _ in range(REDRAW_CAP):
            pose = draw_annulus_pose(lay, i, rng)
            ar = math.radians(pose.alpha)
            abr = math.radians(pose.alpha + pose.beta)
            cex = lay.robots[i, 0] + la * math.cos(ar)
            cey = lay.robots[i, 1] + la * math.sin(ar)
            cfx = cex + lb * math.cos(abr)
            cfy = cey + lb * math.sin(abr)
            if not _kernels.draw_collides(
                i, cex, cey, cfx, cfy, ex, ey, fx, fy, assigned,
                lay.nbr_ptr, lay.nbr_idx, margin,
            ):
                break
        else:
            raise InfeasibleDensityError(
                f"robot {i}: no collision-free draw in {REDRAW_CAP} attempts"
            )
        ex[i], ey[i], fx[i], fy[i] = cex, cey, cfx, cfy
        assigned[i] = True
        config.set_source(i, pose)

    config.alpha_dest[:] = config.alpha_init
    config.beta_dest[:] = config.beta_init
    return config


def set_folded_destination(config: GridConfiguration, pose: AngularPose):
    """Give every robot the same destination, checking it is lattice-safe."""
    lay = config.layout
    n = lay.n_robots
    alpha = np.full(n, pose.alpha)
    beta = np.full(n, pose.beta)
    ex, ey, fx, fy = _kernels.all_segments(
        lay.robots[:, 0], lay.robots[:, 1], alpha, beta,
        lay.geom.alpha_len, lay.geom.beta_len,
    )
    d = _kernels.grid_min_pair_dist(ex, ey, fx, fy, lay.nbr_ptr, lay.nbr_idx)
    if d <= 2.0 * lay.cbuff:
        raise InvalidFoldError(
            f"pose ({pose.alpha}, {pose.beta}) collides lattice-wide: "
            f"min pair distance {d:.3f} mm <= {2.0 * lay.cbuff:.3f} mm"
        )
    config.alpha_dest[:] = pose.alpha
    config.beta_dest[:] = pose.beta


# ---------------------------------------------------------------------------
# layout serialization
# ---------------------------------------------------------------------------

def layout_to_dict(layout: GridLayout) -> dict:
    return {
        "pitch": layout.pitch,
        "alpha_len": layout.geom.alpha_len,
        "beta_len": layout.geom.beta_len,
        "cbuff": layout.cbuff,
        "robots": [
            {"index": i, "x": float(layout.robots[i, 0]), "y": float(layout.robots[i, 1])}
            for i in range(layout.n_robots)
        ],
        "neighbors": [list(nb) for nb in layout.neighbors],
    }


def layout_from_dict(doc: dict) -> GridLayout:
    try:
        robots = np.zeros((len(doc["robots"]), 2))
        for entry in doc["robots"]:
            robots[entry["index"], 0] = entry["x"]
            robots[entry["index"], 1] = entry["y"]
        geom = ArmGeometry(alpha_len=doc["alpha_len"], beta_len=doc["beta_len"])
        return GridLayout(
            robots=robots,
            geom=geom,
            pitch=doc["pitch"],
            cbuff=doc["cbuff"],
            neighbors=tuple(tuple(nb) for nb in doc["neighbors"]),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed layout document: {exc}") from exc


def save_layout(layout: GridLayout, path) -> None:
    with open(path, "w") as f:
        json.dump(layout_to_dict(layout), f, separators=(",", ":"))


def load_layout(path) -> GridLayout:
    with open(path) as f:
        return layout_from_dict(json.load(f))

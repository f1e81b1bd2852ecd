"""Planar kinematics and distance primitives for a two-armed fiber positioner.

All angles are degrees, all lengths millimeters.  Everything here is a pure
function of its inputs and safe to call from any thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "Point2",
    "Segment2",
    "ArmGeometry",
    "AngularPose",
    "ReachError",
    "InfeasibleGeometryError",
    "SDSS_ARM",
    "SDSS_PITCH",
    "fiber_position",
    "elbow_position",
    "beta_arm_segment",
    "segment_min_distance",
    "beta_gamma_from_radius",
    "inverse_kinematics_right_arm",
    "safe_beta_threshold",
]


class ReachError(ValueError):
    """Target lies outside the annular patrol zone."""


class InfeasibleGeometryError(ValueError):
    """No beta angle can satisfy the requested containment condition."""


@dataclass(frozen=True)
class Point2:
    """A point in the focal plane, millimeters."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")


@dataclass(frozen=True)
class Segment2:
    """A closed line segment; zero length is allowed."""

    p0: Point2
    p1: Point2


@dataclass(frozen=True)
class ArmGeometry:
    """Arm lengths of a positioner.

    ``beta_len`` must exceed ``alpha_len`` so the patrol annulus has a
    positive inner radius.
    """

    alpha_len: float
    beta_len: float

    def __post_init__(self):
        if self.alpha_len <= 0:
            raise ValueError("alpha_len must be positive")
        if self.beta_len <= self.alpha_len:
            raise ValueError("beta_len must exceed alpha_len")

    @property
    def inner_radius(self) -> float:
        return self.beta_len - self.alpha_len

    @property
    def outer_radius(self) -> float:
        return self.beta_len + self.alpha_len


@dataclass(frozen=True)
class AngularPose:
    """Alpha and beta axis angles, each within [0, 360) degrees."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (0.0 <= self.alpha < 360.0):
            raise ValueError(f"alpha {self.alpha} outside [0, 360)")
        if not (0.0 <= self.beta < 360.0):
            raise ValueError(f"beta {self.beta} outside [0, 360)")

    @property
    def is_right_arm(self) -> bool:
        return 0.0 <= self.beta <= 180.0


#: SDSS-V positioner arms: 7.4 mm alpha, 15 mm beta.
SDSS_ARM = ArmGeometry(alpha_len=7.4, beta_len=15.0)

#: SDSS-V center-to-center robot spacing (= sum of arm lengths), mm.
SDSS_PITCH = 22.4


def fiber_position(base: Point2, geom: ArmGeometry, pose: AngularPose) -> Point2:
    """Focal-plane position of the fiber for a given pose.

    The fiber sits at the tip of the beta arm:
    ``base + alpha_len*(cos a, sin a) + beta_len*(cos(a+b), sin(a+b))``.
    """
    a = math.radians(pose.alpha)
    ab = math.radians(pose.alpha + pose.beta)
    return Point2(
        base.x + geom.alpha_len * math.cos(a) + geom.beta_len * math.cos(ab),
        base.y + geom.alpha_len * math.sin(a) + geom.beta_len * math.sin(ab),
    )


def elbow_position(base: Point2, geom: ArmGeometry, pose: AngularPose) -> Point2:
    """Position of the beta axis (the elbow); independent of the beta angle."""
    a = math.radians(pose.alpha)
    return Point2(
        base.x + geom.alpha_len * math.cos(a),
        base.y + geom.alpha_len * math.sin(a),
    )


def beta_arm_segment(base: Point2, geom: ArmGeometry, pose: AngularPose) -> Segment2:
    """The beta arm as a segment from elbow to fiber (length == beta_len)."""
    return Segment2(elbow_position(base, geom, pose), fiber_position(base, geom, pose))


def segment_min_distance(s1: Segment2, s2: Segment2) -> float:
    """Minimum Euclidean distance between two closed 2-D segments.

    Zero iff the segments intersect.  In the plane the minimum between
    non-intersecting segments is always attained at an endpoint, so the
    distance is the smaller of the four endpoint-to-segment distances,
    short-circuited by a proper-crossing test.  Shares its implementation
    with the stepper's collision checks.
    """
    from ._kernels import seg_seg_dist

    return float(
        seg_seg_dist(
            s1.p0.x, s1.p0.y, s1.p1.x, s1.p1.y,
            s2.p0.x, s2.p0.y, s2.p1.x, s2.p1.y,
        )
    )


def beta_gamma_from_radius(geom: ArmGeometry, r: float) -> tuple:
    """Arm fold angle and base interior angle for a fiber radius.

    Law of cosines in half-angle form; the factored products stay accurate
    at both annulus rims, where the plain arccos loses half its digits.
    """
    la, lb = geom.alpha_len, geom.beta_len
    r = min(geom.outer_radius, max(geom.inner_radius, r))
    # at the rims both angles are sqrt-conditioned in r; snap the last
    # nanometer so rim targets invert exactly
    if geom.outer_radius - r <= 1e-9:
        return 0.0, 0.0
    if r - geom.inner_radius <= 1e-9:
        return 180.0, 180.0
    # cos(beta) = (r^2 - la^2 - lb^2) / (2 la lb), beta = elbow fold angle
    beta = 2.0 * math.atan2(
        math.sqrt(max(0.0, (la + lb - r) * (la + lb + r))),
        math.sqrt(max(0.0, (r - lb + la) * (r + lb - la))),
    )
    # cos(gamma) = (r^2 + la^2 - lb^2) / (2 r la), gamma at the base between
    # the target direction and the alpha arm
    gamma = 2.0 * math.atan2(
        math.sqrt(max(0.0, (lb - r + la) * (lb + r - la))),
        math.sqrt(max(0.0, (r + la - lb) * (r + la + lb))),
    )
    return math.degrees(beta), math.degrees(gamma)


def inverse_kinematics_right_arm(
    base: Point2, geom: ArmGeometry, target: Point2
) -> AngularPose:
    """Unique right-arm pose (beta in [0, 180]) placing the fiber on target.

    Raises
    ------
    ReachError
        If the target radius falls outside the patrol annulus
        ``[beta_len - alpha_len, alpha_len + beta_len]``.
    """
    tx = target.x - base.x
    ty = target.y - base.y
    r = math.hypot(tx, ty)
    eps = 1e-9
    if r < geom.inner_radius - eps or r > geom.outer_radius + eps:
        raise ReachError(
            f"target radius {r:.6f} mm outside patrol annulus "
            f"[{geom.inner_radius}, {geom.outer_radius}]"
        )
    beta, gamma = beta_gamma_from_radius(geom, r)
    alpha = (math.degrees(math.atan2(ty, tx)) - gamma) % 360.0
    if alpha >= 360.0:  # guard against FP wrap at the boundary
        alpha = 0.0
    if beta > 180.0:
        beta = 180.0
    return AngularPose(alpha, beta)


def safe_beta_threshold(geom: ArmGeometry, pitch: float, cbuff: float) -> float:
    """Minimum beta angle folding the buffered beta arm into a half-pitch disk.

    At or above the returned angle, every point of the collision envelope
    (the beta arm segment dilated by ``cbuff``) lies within ``pitch/2`` of the
    robot base, so a lattice of robots all folded at least this far can never
    interfere.  The farthest envelope point sits ``cbuff`` beyond one of the
    segment ends, which gives a closed form from the law of cosines::

        cos(beta_min) = ((pitch/2 - cbuff)**2 - alpha_len**2 - beta_len**2)
                        / (2 * alpha_len * beta_len)

    Raises
    ------
    InfeasibleGeometryError
        If no beta angle achieves containment (arm too long for the pitch).
    """
    if cbuff < 0:
        raise ValueError("cbuff must be nonnegative")
    half_pitch = pitch / 2.0
    la, lb = geom.alpha_len, geom.beta_len

    if la + cbuff > half_pitch:
        raise InfeasibleGeometryError(
            "elbow plus buffer exceeds half the pitch; no fold angle helps"
        )
    reach = half_pitch - cbuff  # max allowed distance from base to segment
    cos_beta = (reach * reach - la * la - lb * lb) / (2.0 * la * lb)
    if cos_beta >= 1.0:
        return 0.0  # arm fits even at full extension
    if cos_beta < -1.0:
        raise InfeasibleGeometryError(
            "fiber remains outside half the pitch even when fully folded"
        )
    return math.degrees(math.acos(cos_beta))

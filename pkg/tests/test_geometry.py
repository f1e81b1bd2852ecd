import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fiberpath.geometry import (
    AngularPose,
    ArmGeometry,
    InfeasibleGeometryError,
    Point2,
    ReachError,
    SDSS_ARM,
    SDSS_PITCH,
    Segment2,
    beta_arm_segment,
    elbow_position,
    fiber_position,
    inverse_kinematics_right_arm,
    safe_beta_threshold,
    segment_min_distance,
)

from _oracles import random_segment_pairs, safe_beta_oracle, segment_distance_oracle

ORIGIN = Point2(0.0, 0.0)

angles = st.floats(min_value=0.0, max_value=359.999)
right_beta = st.floats(min_value=0.0, max_value=180.0)
coords = st.floats(min_value=-300.0, max_value=300.0)


def test_point_rejects_non_finite():
    with pytest.raises(ValueError):
        Point2(math.nan, 0.0)
    with pytest.raises(ValueError):
        Point2(0.0, math.inf)


def test_arm_geometry_validation():
    with pytest.raises(ValueError):
        ArmGeometry(-1.0, 15.0)
    with pytest.raises(ValueError):
        ArmGeometry(7.4, 7.4)
    assert SDSS_ARM.inner_radius == pytest.approx(7.6)
    assert SDSS_ARM.outer_radius == pytest.approx(22.4)


def test_pose_travel_limits():
    with pytest.raises(ValueError):
        AngularPose(360.0, 0.0)
    with pytest.raises(ValueError):
        AngularPose(0.0, -0.1)
    assert AngularPose(0.0, 180.0).is_right_arm
    assert not AngularPose(0.0, 180.001).is_right_arm


class TestFiberPosition:
    def test_full_extension(self):
        p = fiber_position(ORIGIN, SDSS_ARM, AngularPose(0.0, 0.0))
        assert p.x == pytest.approx(22.4)
        assert p.y == pytest.approx(0.0)

    def test_toleranced_pose_spot_value(self):
        # worst-case axis errors at full extension
        p = fiber_position(ORIGIN, SDSS_ARM, AngularPose(1.50, 1.48))
        assert abs(p.x - 22.38) <= 5e-3
        assert abs(p.y - 0.97) <= 5e-3

    def test_folded(self):
        p = fiber_position(ORIGIN, SDSS_ARM, AngularPose(0.0, 180.0))
        assert p.x == pytest.approx(-7.6)
        assert p.y == pytest.approx(0.0, abs=1e-12)

    @given(bx=coords, by=coords, alpha=angles, beta=angles)
    def test_translation_equivariance(self, bx, by, alpha, beta):
        pose = AngularPose(alpha, beta)
        p0 = fiber_position(ORIGIN, SDSS_ARM, pose)
        p1 = fiber_position(Point2(bx, by), SDSS_ARM, pose)
        assert p1.x - bx == pytest.approx(p0.x, abs=1e-9)
        assert p1.y - by == pytest.approx(p0.y, abs=1e-9)

    @given(alpha=angles, beta=angles)
    def test_annulus_containment(self, alpha, beta):
        p = fiber_position(ORIGIN, SDSS_ARM, AngularPose(alpha, beta))
        r = math.hypot(p.x, p.y)
        assert SDSS_ARM.inner_radius - 1e-9 <= r <= SDSS_ARM.outer_radius + 1e-9

    @given(alpha=angles, beta=angles)
    def test_periodic_in_both_angles(self, alpha, beta):
        p = fiber_position(ORIGIN, SDSS_ARM, AngularPose(alpha, beta))
        a = math.radians(alpha + 360.0)
        ab = math.radians(alpha + 360.0 + beta + 720.0)
        x = 7.4 * math.cos(a) + 15.0 * math.cos(ab)
        y = 7.4 * math.sin(a) + 15.0 * math.sin(ab)
        assert p.x == pytest.approx(x, abs=1e-9)
        assert p.y == pytest.approx(y, abs=1e-9)


class TestElbowPosition:
    @pytest.mark.parametrize("beta", [0.0, 45.0, 180.0, 359.0])
    def test_beta_independent(self, beta):
        p = elbow_position(ORIGIN, SDSS_ARM, AngularPose(0.0, beta))
        assert (p.x, p.y) == pytest.approx((7.4, 0.0))

    def test_quarter_turn(self):
        p = elbow_position(ORIGIN, SDSS_ARM, AngularPose(90.0, 0.0))
        assert p.x == pytest.approx(0.0, abs=1e-12)
        assert p.y == pytest.approx(7.4)

    def test_translated_base(self):
        p = elbow_position(Point2(10.0, -5.0), SDSS_ARM, AngularPose(180.0, 90.0))
        assert (p.x, p.y) == pytest.approx((2.6, -5.0))


class TestBetaArmSegment:
    def test_full_extension(self):
        seg = beta_arm_segment(ORIGIN, SDSS_ARM, AngularPose(0.0, 0.0))
        assert (seg.p0.x, seg.p0.y) == pytest.approx((7.4, 0.0))
        assert (seg.p1.x, seg.p1.y) == pytest.approx((22.4, 0.0))

    def test_folded(self):
        seg = beta_arm_segment(ORIGIN, SDSS_ARM, AngularPose(0.0, 180.0))
        assert (seg.p0.x, seg.p0.y) == pytest.approx((7.4, 0.0))
        assert (seg.p1.x, seg.p1.y) == pytest.approx((-7.6, 0.0), abs=1e-12)

    @given(alpha=angles, beta=angles)
    def test_length_equals_beta_len(self, alpha, beta):
        seg = beta_arm_segment(ORIGIN, SDSS_ARM, AngularPose(alpha, beta))
        length = math.hypot(seg.p1.x - seg.p0.x, seg.p1.y - seg.p0.y)
        assert length == pytest.approx(15.0, abs=1e-9)


def seg(ax, ay, bx, by):
    return Segment2(Point2(ax, ay), Point2(bx, by))


class TestSegmentMinDistance:
    def test_identical_segments(self):
        assert segment_min_distance(seg(0, 0, 1, 0), seg(0, 0, 1, 0)) == 0.0

    def test_parallel_unit_apart(self):
        assert segment_min_distance(seg(0, 0, 1, 0), seg(0, 1, 1, 1)) == pytest.approx(1.0)

    def test_crossing_is_zero(self):
        assert segment_min_distance(seg(0, 0, 1, 1), seg(0, 1, 1, 0)) == 0.0

    def test_degenerate_point_segment(self):
        assert segment_min_distance(seg(0, 0, 0, 0), seg(1, 0, 2, 0)) == pytest.approx(1.0)
        assert segment_min_distance(seg(0, 0, 0, 0), seg(0, 0, 0, 0)) == 0.0

    def test_collinear_disjoint(self):
        assert segment_min_distance(seg(0, 0, 1, 0), seg(3, 0, 5, 0)) == pytest.approx(2.0)

    def test_matches_sampling_oracle(self, rng):
        s1, s2 = random_segment_pairs(500, rng)
        expected = segment_distance_oracle(s1, s2)
        for k in range(500):
            got = segment_min_distance(
                seg(*s1[k]), seg(*s2[k])
            )
            assert got == pytest.approx(expected[k], abs=1e-6)

    @given(st.lists(coords, min_size=8, max_size=8))
    def test_symmetry_and_endpoint_bound(self, vals):
        a = seg(vals[0], vals[1], vals[2], vals[3])
        b = seg(vals[4], vals[5], vals[6], vals[7])
        d_ab = segment_min_distance(a, b)
        d_ba = segment_min_distance(b, a)
        assert d_ab == pytest.approx(d_ba, abs=1e-12)
        assert d_ab >= 0.0
        for p in (a.p0, a.p1):
            for q in (b.p0, b.p1):
                assert d_ab <= math.hypot(p.x - q.x, p.y - q.y) + 1e-12


def circular_diff(a, b):
    return abs((a - b + 180.0) % 360.0 - 180.0)


class TestInverseKinematics:
    def test_outer_rim(self):
        pose = inverse_kinematics_right_arm(ORIGIN, SDSS_ARM, Point2(22.4, 0.0))
        assert circular_diff(pose.alpha, 0.0) <= 1e-4
        assert pose.beta == pytest.approx(0.0, abs=1e-4)

    def test_inner_rim(self):
        pose = inverse_kinematics_right_arm(ORIGIN, SDSS_ARM, Point2(-7.6, 0.0))
        assert circular_diff(pose.alpha, 0.0) <= 1e-4
        assert pose.beta == pytest.approx(180.0, abs=1e-4)

    def test_out_of_annulus(self):
        with pytest.raises(ReachError):
            inverse_kinematics_right_arm(ORIGIN, SDSS_ARM, Point2(30.0, 0.0))
        with pytest.raises(ReachError):
            inverse_kinematics_right_arm(ORIGIN, SDSS_ARM, Point2(1.0, 0.0))

    @given(alpha=angles, beta=right_beta, bx=coords, by=coords)
    @settings(max_examples=300)
    def test_round_trip(self, alpha, beta, bx, by):
        base = Point2(bx, by)
        pose = AngularPose(alpha, beta)
        target = fiber_position(base, SDSS_ARM, pose)
        back = inverse_kinematics_right_arm(base, SDSS_ARM, target)
        assert 0.0 <= back.beta <= 180.0
        # the position contract holds everywhere
        again = fiber_position(base, SDSS_ARM, back)
        assert math.hypot(again.x - target.x, again.y - target.y) <= 1e-9
        # angles are sqrt-conditioned at the exact annulus rims, so the
        # strict angular bound applies away from them
        if 0.01 < beta < 179.99:
            assert back.beta == pytest.approx(beta, abs=1e-6)
            assert circular_diff(back.alpha, alpha) <= 1e-6

    def test_round_trip_batch(self, rng):
        for _ in range(1000):
            pose = AngularPose(rng.uniform(0, 359.999), rng.uniform(0.01, 179.99))
            target = fiber_position(ORIGIN, SDSS_ARM, pose)
            back = inverse_kinematics_right_arm(ORIGIN, SDSS_ARM, target)
            assert circular_diff(back.alpha, pose.alpha) <= 1e-6
            assert back.beta == pytest.approx(pose.beta, abs=1e-6)


class TestSafeBetaThreshold:
    def test_matches_oracle_physical_buffer(self):
        got = safe_beta_threshold(SDSS_ARM, SDSS_PITCH, 1.5)
        want = safe_beta_oracle(SDSS_ARM, SDSS_PITCH, 1.5)
        assert got == pytest.approx(want, abs=0.05)

    def test_matches_oracle_operational_buffer(self):
        got = safe_beta_threshold(SDSS_ARM, SDSS_PITCH, 2.5)
        want = safe_beta_oracle(SDSS_ARM, SDSS_PITCH, 2.5)
        assert got == pytest.approx(want, abs=0.05)

    def test_operational_buffer_near_155(self):
        # the quoted ~155 deg operating guideline corresponds to the
        # operational 2.5 mm buffer under the containment geometry
        assert safe_beta_threshold(SDSS_ARM, SDSS_PITCH, 2.5) == pytest.approx(155.0, abs=2.0)

    def test_short_arm_always_safe(self):
        geom = ArmGeometry(alpha_len=3.0, beta_len=8.0)
        # outer reach 11 fits inside half pitch of 22.4 at zero buffer
        assert safe_beta_threshold(geom, 2 * 22.4, 0.0) == 0.0

    def test_infeasible_geometry(self):
        with pytest.raises(InfeasibleGeometryError):
            safe_beta_threshold(SDSS_ARM, 10.0, 2.5)

    def test_extremal_point_sits_on_half_pitch(self):
        beta = safe_beta_threshold(SDSS_ARM, SDSS_PITCH, 1.5)
        pose = AngularPose(0.0, beta)
        seg_ = beta_arm_segment(ORIGIN, SDSS_ARM, pose)
        t = np.linspace(0.0, 1.0, 200_001)
        px = seg_.p0.x + t * (seg_.p1.x - seg_.p0.x)
        py = seg_.p0.y + t * (seg_.p1.y - seg_.p0.y)
        reach = np.sqrt(px**2 + py**2).max() + 1.5
        assert reach == pytest.approx(SDSS_PITCH / 2.0, abs=1e-3)

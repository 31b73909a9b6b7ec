import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gelplace.frames import (
    FrameTransform,
    Pose6,
    Wrench,
    apply_to_point,
    compose,
    invert,
    matrix_to_rpy,
    rot_x,
    rot_y,
    rot_z,
    rpy_to_matrix,
    tactile_to_ee,
    transform_wrench,
)


def skew(v):
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def adjoint_oracle(t: FrameTransform) -> np.ndarray:
    """Independent 6x6 wrench-transport matrix: [[R, 0], [d^ R, R]]."""
    m = np.zeros((6, 6))
    m[:3, :3] = t.rotation
    m[3:, :3] = skew(t.translation) @ t.rotation
    m[3:, 3:] = t.rotation
    return m


def homogeneous(t: FrameTransform) -> np.ndarray:
    h = np.eye(4)
    h[:3, :3] = t.rotation
    h[:3, 3] = t.translation
    return h


def random_transform(rng) -> FrameTransform:
    rpy = rng.uniform(-math.pi, math.pi, size=3)
    rpy[1] = rng.uniform(-1.5, 1.5)  # stay clear of the pitch singularity
    return FrameTransform(rpy_to_matrix(*rpy), rng.uniform(-1.0, 1.0, size=3))


class TestRotations:
    def test_basic_axis_rotations(self):
        np.testing.assert_allclose(rot_z(math.pi / 2) @ [1, 0, 0], [0, 1, 0], atol=1e-15)
        np.testing.assert_allclose(rot_x(math.pi / 2) @ [0, 1, 0], [0, 0, 1], atol=1e-15)
        np.testing.assert_allclose(rot_y(math.pi / 2) @ [0, 0, 1], [1, 0, 0], atol=1e-15)

    def test_positive_pitch_tips_plus_x_down(self):
        # the object's +x face drops when pitch is positive; this sign anchors
        # the whole corrective-rotation chain
        tipped = rot_y(math.radians(10.0)) @ np.array([1.0, 0.0, 0.0])
        assert tipped[2] < 0.0

    def test_rpy_round_trip(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            r, p, y = rng.uniform(-1.4, 1.4, size=3)
            rr, pp, yy = matrix_to_rpy(rpy_to_matrix(r, p, y))
            assert abs(rr - r) < 1e-9 and abs(pp - p) < 1e-9 and abs(yy - y) < 1e-9

    def test_rpy_matches_explicit_product(self):
        r, p, y = 0.3, -0.2, 1.1
        np.testing.assert_allclose(rpy_to_matrix(r, p, y), rot_z(y) @ rot_y(p) @ rot_x(r), atol=1e-15)

    def test_rejects_non_rotation(self):
        with pytest.raises(ValueError):
            Pose6(np.zeros(3), np.eye(3) * 1.5)


class TestTransformWrench:
    def test_identity(self):
        w = Wrench([1.0, -2.0, 3.0], [0.1, 0.2, -0.3])
        out = transform_wrench(w, FrameTransform.identity())
        np.testing.assert_array_equal(out.force, w.force)
        np.testing.assert_array_equal(out.torque, w.torque)

    def test_pure_translation_moment(self):
        # offset origin by 0.1 m along x, push 5 N along z: -0.5 N m about y
        t = FrameTransform(np.eye(3), [0.1, 0.0, 0.0])
        out = transform_wrench(Wrench([0, 0, 5.0], [0, 0, 0]), t)
        np.testing.assert_allclose(out.force, [0, 0, 5.0])
        np.testing.assert_allclose(out.torque, [0, -0.5, 0], atol=1e-15)

    def test_pure_rotation(self):
        t = FrameTransform(rot_z(math.pi / 2), np.zeros(3))
        out = transform_wrench(Wrench([1.0, 0, 0], [0.2, 0, 0]), t)
        np.testing.assert_allclose(out.force, [0, 1.0, 0], atol=1e-15)
        np.testing.assert_allclose(out.torque, [0, 0.2, 0], atol=1e-15)

    def test_against_adjoint_oracle(self):
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(1000):
            t = random_transform(rng)
            w = Wrench(rng.uniform(-10, 10, 3), rng.uniform(-2, 2, 3))
            got = transform_wrench(w, t).as_array()
            want = adjoint_oracle(t) @ w.as_array()
            worst = max(worst, float(np.abs(got - want).max()))
        assert worst < 1e-12

    def test_force_through_origin_adds_no_torque(self):
        # when d is parallel to the rotated force the moment term vanishes
        rng = np.random.default_rng(3)
        for _ in range(50):
            t = random_transform(rng)
            f_src = rng.uniform(-5, 5, 3)
            f_tgt = t.rotation @ f_src
            t.translation = 0.37 * f_tgt
            out = transform_wrench(Wrench(f_src, [0.1, -0.2, 0.3]), t)
            np.testing.assert_allclose(out.torque, t.rotation @ [0.1, -0.2, 0.3], atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(
        a=st.lists(st.floats(-10, 10), min_size=6, max_size=6),
        b=st.lists(st.floats(-10, 10), min_size=6, max_size=6),
        s=st.floats(-4, 4),
        seed=st.integers(0, 2**31 - 1),
    )
    def test_linearity(self, a, b, s, seed):
        t = random_transform(np.random.default_rng(seed))
        wa, wb = Wrench.from_array(a), Wrench.from_array(b)
        lhs = transform_wrench(wa + s * wb, t).as_array()
        rhs = transform_wrench(wa, t).as_array() + s * transform_wrench(wb, t).as_array()
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)

    def test_round_trip_through_inverse(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            t = random_transform(rng)
            w = Wrench(rng.uniform(-10, 10, 3), rng.uniform(-2, 2, 3))
            back = transform_wrench(transform_wrench(w, t), invert(t))
            np.testing.assert_allclose(back.as_array(), w.as_array(), atol=1e-10)


class TestCompose:
    def test_identity_neutral(self):
        t = random_transform(np.random.default_rng(0))
        for out in (compose(t, FrameTransform.identity()), compose(FrameTransform.identity(), t)):
            np.testing.assert_allclose(out.rotation, t.rotation, atol=1e-15)
            np.testing.assert_allclose(out.translation, t.translation, atol=1e-15)

    def test_matches_homogeneous_product(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            a, b = random_transform(rng), random_transform(rng)
            got = homogeneous(compose(a, b))
            np.testing.assert_allclose(got, homogeneous(a) @ homogeneous(b), atol=1e-12)

    def test_compose_with_inverse_is_identity(self):
        t = random_transform(np.random.default_rng(9))
        ident = compose(t, invert(t))
        np.testing.assert_allclose(ident.rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(ident.translation, np.zeros(3), atol=1e-12)

    def test_apply_to_point(self):
        t = FrameTransform(rot_z(math.pi / 2), [1.0, 0.0, 0.0])
        np.testing.assert_allclose(apply_to_point(t, [1, 0, 0]), [1, 1, 0], atol=1e-15)

    def test_transform_composes_with_wrench_transport(self):
        # transporting through a then b equals transporting through compose(b, a)
        rng = np.random.default_rng(13)
        a, b = random_transform(rng), random_transform(rng)
        w = Wrench(rng.uniform(-5, 5, 3), rng.uniform(-1, 1, 3))
        two_step = transform_wrench(transform_wrench(w, a), b)
        one_step = transform_wrench(w, compose(b, a))
        np.testing.assert_allclose(two_step.as_array(), one_step.as_array(), atol=1e-12)


class TestTactileToEE:
    @pytest.mark.parametrize("yaw", [0.0, math.pi / 2, math.pi / 6, -0.4])
    def test_matches_planar_rotation(self, yaw):
        t = tactile_to_ee(yaw)
        c, s = math.cos(yaw), math.sin(yaw)
        planar = np.array([[c, -s], [s, c]])
        np.testing.assert_allclose(t.rotation[:2, :2], planar, atol=1e-15)
        np.testing.assert_allclose(t.translation, np.zeros(3))

    def test_zero_yaw_is_identity_on_torques(self):
        w = Wrench([0, 0, 0], [0.05, -0.02, 0.0])
        out = transform_wrench(w, tactile_to_ee(0.0))
        np.testing.assert_allclose(out.torque, w.torque, atol=1e-15)

    def test_quarter_turn_swaps_axes(self):
        # a pure sensor-frame roll torque appears as a pitch torque after a
        # 90 degree mount rotation
        out = transform_wrench(Wrench([0, 0, 0], [0.05, 0, 0]), tactile_to_ee(math.pi / 2))
        np.testing.assert_allclose(out.torque, [0, 0.05, 0], atol=1e-15)

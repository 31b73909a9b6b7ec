import math

import numpy as np
import pytest

from gelplace.frames import Wrench
from gelplace.sensors import (
    DoubleCapture,
    FTSensorModel,
    FTSensorState,
    GelSightModel,
    NotCaptured,
    ft_capture_offset,
    ft_read,
    ft_reset,
    ft_to_application_point,
    ft_true_at_sensor,
    gel_displacements,
    gel_respond,
    gel_sample_dropout,
    gel_snapshot,
)
from gelplace.tactile import DotField, curl_mean, diff_z


def tau(x=0.0, y=0.0, z=0.0):
    return Wrench([0.0, 0.0, 0.0], [x, y, z])


def features(model, u1, u2, v1=None, v2=None):
    n = model.n_dots
    v1 = np.ones(n, bool) if v1 is None else v1
    v2 = np.ones(n, bool) if v2 is None else v2
    f1, f2 = DotField(u1, v1), DotField(u2, v2)
    curl = 0.5 * (curl_mean(f1, model.grid) + curl_mean(f2, model.grid))
    return curl, diff_z(f1, f2)


class TestDrawOrder:
    """The kernels re-derive every stream scalar by scalar; these pin the
    assumption that vectorised draws consume the bit stream in C order."""

    def test_normal_array_equals_scalar_sequence(self):
        a = np.random.default_rng(99).normal(0.0, 0.3, size=(5, 2))
        rng = np.random.default_rng(99)
        b = np.array([[rng.normal(0.0, 0.3) for _ in range(2)] for _ in range(5)])
        np.testing.assert_array_equal(a, b)

    def test_uniform_array_equals_scalar_sequence(self):
        a = np.random.default_rng(7).random(11)
        rng = np.random.default_rng(7)
        b = np.array([rng.random() for _ in range(11)])
        np.testing.assert_array_equal(a, b)


class TestGelResponse:
    def setup_method(self):
        self.model = GelSightModel()

    def test_no_load_no_displacement(self):
        u1, u2 = gel_respond(self.model, Wrench.zero(), 0.0)
        np.testing.assert_array_equal(u1, 0.0)
        np.testing.assert_array_equal(u2, 0.0)

    def test_pitch_torque_sets_curl_sign(self):
        u1, u2 = gel_respond(self.model, tau(y=0.1), 0.0)
        curl, diff = features(self.model, u1, u2)
        assert abs(curl - (-self.model.rot_gain * 0.1)) < 1e-9
        assert abs(diff) < 1e-12
        # negated torque flips the field
        u1n, _ = gel_respond(self.model, tau(y=-0.1), 0.0)
        np.testing.assert_allclose(u1n, -u1, atol=1e-15)

    def test_roll_torque_sets_diff(self):
        t = 0.2
        u1, u2 = gel_respond(self.model, tau(x=t), 0.0)
        curl, diff = features(self.model, u1, u2)
        want = 2.0 * self.model.shear_gain * t / self.model.face_separation
        assert abs(diff - want) < 1e-12
        assert math.copysign(1.0, diff) == math.copysign(1.0, t)
        assert abs(curl) < 1e-12

    def test_press_is_common_mode(self):
        u1, u2 = gel_respond(self.model, Wrench.zero(), 5.0)
        np.testing.assert_array_equal(u1, u2)
        curl, diff = features(self.model, u1, u2)
        assert abs(curl) < 1e-12 and abs(diff) < 1e-12
        assert abs(u1[0, 1] - self.model.press_gain * 5.0) < 1e-15

    def test_tangential_force_feature_neutral(self):
        u1, u2 = gel_respond(self.model, Wrench([3.0, 0, 0], [0, 0, 0]), 0.0)
        curl, diff = features(self.model, u1, u2)
        assert abs(curl) < 1e-12 and abs(diff) < 1e-12

    def test_linearity(self):
        wa, wb = tau(x=0.1, y=-0.05), tau(x=-0.02, y=0.08)
        ua = gel_respond(self.model, wa, 2.0)
        ub = gel_respond(self.model, wb, 1.0)
        uab = gel_respond(self.model, wa + wb, 3.0)
        for i in range(2):
            np.testing.assert_allclose(uab[i], ua[i] + ub[i], atol=1e-12)

    def test_snapshot_subtracts_standing_load(self):
        # gravity of the held object is in the reference; only the change
        # since the snapshot shows up, to machine precision
        standing = Wrench([0.5, 0.0, -1.4], [0.03, -0.01, 0.0])
        delta = tau(x=0.08, y=-0.04)
        n = self.model.n_dots
        ref = gel_snapshot(self.model, standing, 0.0, np.ones(n, bool), np.ones(n, bool))
        f1, f2 = gel_displacements(self.model, ref, standing + delta, 0.0)
        u1d, u2d = gel_respond(self.model, delta, 0.0)
        np.testing.assert_allclose(f1.u, u1d, atol=1e-12)
        np.testing.assert_allclose(f2.u, u2d, atol=1e-12)

    def test_jitter_statistics(self):
        rng = np.random.default_rng(0)
        u1, u2 = gel_respond(self.model, Wrench.zero(), 0.0, rng)
        both = np.concatenate([u1.ravel(), u2.ravel()])
        assert 0.8 * self.model.jitter_std < both.std() < 1.2 * self.model.jitter_std

    def test_jitter_barely_moves_features(self):
        rng = np.random.default_rng(1)
        vals = []
        for _ in range(200):
            u1, u2 = gel_respond(self.model, Wrench.zero(), 0.0, rng)
            vals.append(features(self.model, u1, u2))
        curls, diffs = np.array(vals).T
        # feature-level noise is orders below the working signal (~0.05)
        assert curls.std() < 2e-3 and diffs.std() < 2e-3

    def test_dropout_masks(self):
        model = GelSightModel(dropout_rate=0.3)
        v1, v2 = gel_sample_dropout(model, np.random.default_rng(5))
        assert 0 < (~v1).sum() < model.n_dots
        assert not np.array_equal(v1, v2)
        clean1, clean2 = gel_sample_dropout(GelSightModel(dropout_rate=0.0), np.random.default_rng(5))
        assert clean1.all() and clean2.all()


class TestFTChain:
    def setup_method(self):
        self.model = FTSensorModel()
        self.state = FTSensorState()

    def capture_zero(self, noisy=False, rng=None):
        ft_capture_offset(self.model, self.state, Wrench.zero(), (0.0, 0.0), rng, noisy=noisy)

    def test_read_before_capture_rejected(self):
        with pytest.raises(NotCaptured):
            ft_read(self.model, self.state, Wrench.zero(), noisy=False)

    def test_double_capture_rejected(self):
        self.capture_zero()
        with pytest.raises(DoubleCapture):
            self.capture_zero()

    def test_reset_allows_recapture(self):
        self.capture_zero()
        ft_reset(self.state)
        self.capture_zero()

    def test_noiseless_chain_reports_change_from_capture(self):
        w0 = Wrench([0, 0, -2.0], [0.04, 0, 0])
        ft_capture_offset(self.model, self.state, w0, (0, 0), noisy=False)
        # immediately after capture the reading is exactly zero
        out = ft_read(self.model, self.state, w0, (0, 0), noisy=False)
        np.testing.assert_array_equal(out.as_array(), 0.0)
        w1 = w0 + Wrench([0, 0, 5.0], [0.1, 0, 0])
        for _ in range(400):
            out = ft_read(self.model, self.state, w1, (0, 0), noisy=False)
        assert abs(out.force[2] - 5.0) <= self.model.force_step / 2 + 1e-12
        assert abs(out.torque[0] - 0.1) <= self.model.torque_step / 2 + 1e-12

    def test_filter_single_step_response(self):
        self.capture_zero()
        step = Wrench([0, 0, 4.0], [0, 0, 0])
        out = ft_read(self.model, self.state, step, (0, 0), noisy=False)
        alpha = self.model.filter_alpha
        want = alpha * 4.0
        assert abs(out.force[2] - round(want / 0.25) * 0.25) < 1e-12

    def test_filter_alpha_value(self):
        # 5 Hz cutoff sampled at 200 Hz
        tau_f = 1.0 / (2.0 * math.pi * 5.0)
        assert abs(self.model.filter_alpha - 0.005 / (tau_f + 0.005)) < 1e-15

    def test_sub_resolution_signal_invisible(self):
        self.capture_zero()
        out = ft_read(self.model, self.state, tau(x=0.0009), noisy=False)
        assert out.torque[0] == 0.0  # below half a 0.002 N m count

    def test_readings_live_on_quantisation_lattice(self):
        rng = np.random.default_rng(3)
        self.capture_zero(noisy=True, rng=rng)
        for _ in range(50):
            out = ft_read(self.model, self.state, tau(x=0.31), (0, 0), rng=rng)
            arr = out.as_array()
            np.testing.assert_allclose(
                arr[:3], np.round(arr[:3] / 0.25) * 0.25, atol=1e-12)
            np.testing.assert_allclose(
                arr[3:], np.round(arr[3:] / 0.002) * 0.002, atol=1e-12)

    def test_tilt_bias_tracks_wrist_pose(self):
        # capture at 10 deg pitch, read flat: the cable relaxes by B * 0.1745
        rpy0 = (0.0, math.radians(10.0))
        ft_capture_offset(self.model, self.state, Wrench.zero(), rpy0, noisy=False)
        out = Wrench.zero()
        for _ in range(500):
            out = ft_read(self.model, self.state, Wrench.zero(), (0.0, 0.0), noisy=False)
        want = -self.model.bias_per_rad[1] * math.radians(10.0)
        assert abs(out.torque[1] - want) <= self.model.torque_step / 2 + 1e-12

    def test_capture_noise_becomes_dc_error(self):
        rng = np.random.default_rng(11)
        self.capture_zero(noisy=True, rng=rng)
        reads = []
        for _ in range(600):
            reads.append(ft_read(self.model, self.state, Wrench.zero(), (0, 0), noisy=False).torque[1])
        dc = np.mean(reads[200:])
        assert abs(dc) > 0.005  # a one-shot zero leaves an offset of noise size
        assert abs(dc - reads[-1]) < 1e-9  # and it never decays

    def test_noisy_mean_unbiased_about_capture(self):
        rng = np.random.default_rng(2)
        ft_capture_offset(self.model, self.state, Wrench.zero(), (0, 0), rng=None, noisy=False)
        vals = np.array([
            ft_read(self.model, self.state, Wrench.zero(), (0, 0), rng=rng).as_array()
            for _ in range(4000)
        ])
        assert abs(vals[:, 2].mean()) < 0.07 * self.model.noise_std_force
        assert abs(vals[:, 4].mean()) < 0.07 * self.model.noise_std_torque
        # low-pass shrinks white noise to about sqrt(alpha / (2 - alpha))
        factor = math.sqrt(self.model.filter_alpha / (2.0 - self.model.filter_alpha))
        assert 0.6 * factor < vals[:, 1].std() / self.model.noise_std_force < 1.6 * factor


class TestMountTransport:
    def test_round_trip(self):
        model = FTSensorModel()
        w = Wrench([1.0, -2.0, 5.0], [0.1, 0.2, -0.05])
        back = ft_to_application_point(model, ft_true_at_sensor(model, w))
        np.testing.assert_allclose(back.as_array(), w.as_array(), atol=1e-15)

    def test_axial_force_invisible_to_cell_torque(self):
        model = FTSensorModel()
        up = ft_true_at_sensor(model, Wrench([0, 0, 5.0], [0, 0, 0]))
        np.testing.assert_allclose(up.torque, 0.0, atol=1e-15)

    def test_lateral_force_couples_through_lever(self):
        model = FTSensorModel(mount_offset_z=0.075)
        at_cell = ft_true_at_sensor(model, Wrench([2.0, 0, 0], [0, 0, 0]))
        assert abs(at_cell.torque[1] - (-2.0 * 0.075)) < 1e-15

    def test_force_noise_becomes_torque_noise_at_application_point(self):
        # the mechanism that ruins the wrist-cell baseline on small bases:
        # white force noise at the cell reappears as torque noise below
        model = FTSensorModel(noise_std_torque=0.0)
        state = FTSensorState()
        rng = np.random.default_rng(8)
        ft_capture_offset(model, state, Wrench.zero(), (0, 0), noisy=False)
        taus = []
        for _ in range(4000):
            r = ft_read(model, state, Wrench.zero(), (0, 0), rng=rng)
            taus.append(ft_to_application_point(model, r).torque[1])
        factor = math.sqrt(model.filter_alpha / (2.0 - model.filter_alpha))
        want = factor * model.noise_std_force * model.mount_offset_z
        assert 0.6 * want < np.std(taus) < 1.6 * want

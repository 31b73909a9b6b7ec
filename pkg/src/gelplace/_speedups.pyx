# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of the reference trial loop in ``_pyloop``.

Same formulas, same evaluation order, same random draw order, compiled with
FMA contraction disabled, so outcomes are bitwise identical to the pure
Python loop.  Any change to ``_pyloop.run_trial`` must be mirrored here.
"""

import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport M_PI, INFINITY, sin, cos, asin, atan2, sqrt, fabs, rint
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_normal, random_standard_uniform

from .tactile import DegenerateGeometry, MIN_VALID_CURL

KERNEL_VERSION = 1

cdef double DEG2RAD = M_PI / 180.0
cdef double RAD2DEG = 180.0 / M_PI
cdef double DET_TOL = 1e-9
cdef double TOPPLE_GUARD_MARGIN_DEG = 5.0
cdef double TILT_FAILSAFE_DEG = 45.0
cdef int MIN_VALID = MIN_VALID_CURL

cdef enum:
    MAX_DOTS = 256
    MAX_PTS = 64
    MAX_FIT = 4096  # MAX_DOTS * (max neighbours + 1)


cdef inline double _quant(double v, double step) noexcept nogil:
    # round() in the reference loop goes through int, which cannot carry a
    # negative zero; normalise so the lattice point at zero is always +0.0.
    cdef double q = rint(v / step)
    if q == 0.0:
        q = 0.0
    return q * step


cdef int _curl_weights(double* dot_x, double* dot_z, unsigned char* valid,
                       int n, int k, double* w_z, double* w_x) noexcept nogil:
    """Mirror of _pyloop.curl_weight_vectors; returns n_fits (0 on failure)."""
    cdef int valid_idx[MAX_DOTS]
    cdef double cand_d2[MAX_DOTS]
    cdef int cand_j[MAX_DOTS]
    cdef int hood[MAX_DOTS]
    cdef int fit_j[MAX_FIT]
    cdef double fit_w1[MAX_FIT]
    cdef double fit_w2[MAX_FIT]
    cdef int n_valid = 0
    cdef int i, j, ii, jj, m, take, n_cand, best, n_hood, n_fit_pts, n_fits
    cdef double xi, zi, dx, dz
    cdef double s1, sx, sz, sxx, sxz, szz, det
    cdef double inv10, inv11, inv12, inv20, inv21, inv22, w1, w2, inv_fits

    for i in range(n):
        if valid[i]:
            valid_idx[n_valid] = i
            n_valid += 1
    if n_valid < MIN_VALID:
        return 0
    for j in range(n):
        w_z[j] = 0.0
        w_x[j] = 0.0
    n_fit_pts = 0
    n_fits = 0
    for ii in range(n_valid):
        i = valid_idx[ii]
        xi = dot_x[i]
        zi = dot_z[i]
        n_cand = 0
        for jj in range(n_valid):
            j = valid_idx[jj]
            if j == i:
                continue
            dx = dot_x[j] - xi
            dz = dot_z[j] - zi
            cand_d2[n_cand] = dx * dx + dz * dz
            cand_j[n_cand] = j
            n_cand += 1
        take = k if k < n_cand else n_cand
        # k nearest by (distance, index), ascending, via repeated selection
        hood[0] = i
        n_hood = 1
        for m in range(take):
            best = -1
            for jj in range(n_cand):
                if cand_j[jj] < 0:
                    continue
                if best < 0 or cand_d2[jj] < cand_d2[best] or (
                    cand_d2[jj] == cand_d2[best] and cand_j[jj] < cand_j[best]
                ):
                    best = jj
            hood[n_hood] = cand_j[best]
            n_hood += 1
            cand_j[best] = -1
        s1 = 0.0
        sx = 0.0
        sz = 0.0
        sxx = 0.0
        sxz = 0.0
        szz = 0.0
        for m in range(n_hood):
            j = hood[m]
            dx = dot_x[j] - xi
            dz = dot_z[j] - zi
            s1 += 1.0
            sx += dx
            sz += dz
            sxx += dx * dx
            sxz += dx * dz
            szz += dz * dz
        det = (
            s1 * (sxx * szz - sxz * sxz)
            - sx * (sx * szz - sxz * sz)
            + sz * (sx * sxz - sxx * sz)
        )
        if fabs(det) < DET_TOL:
            continue
        inv10 = -(sx * szz - sxz * sz) / det
        inv11 = (s1 * szz - sz * sz) / det
        inv12 = -(s1 * sxz - sx * sz) / det
        inv20 = (sx * sxz - sxx * sz) / det
        inv21 = -(s1 * sxz - sz * sx) / det
        inv22 = (s1 * sxx - sx * sx) / det
        n_fits += 1
        for m in range(n_hood):
            j = hood[m]
            dx = dot_x[j] - xi
            dz = dot_z[j] - zi
            w1 = inv10 + inv11 * dx + inv12 * dz
            w2 = inv20 + inv21 * dx + inv22 * dz
            fit_j[n_fit_pts] = j
            fit_w1[n_fit_pts] = w1
            fit_w2[n_fit_pts] = w2
            n_fit_pts += 1
    if n_fits == 0:
        return 0
    for m in range(n_fit_pts):
        j = fit_j[m]
        w_z[j] += fit_w1[m]
        w_x[j] -= fit_w2[m]
    inv_fits = 1.0 / n_fits
    for j in range(n):
        w_z[j] *= inv_fits
        w_x[j] *= inv_fits
    return n_fits


def curl_weight_vectors(xy, valid, int k):
    """Window onto the kernel's private plane-fit weights, for cross-checks."""
    cdef int n = len(valid)
    if n > MAX_DOTS:
        raise ValueError(f"at most {MAX_DOTS} dots supported, got {n}")
    cdef double dot_x[MAX_DOTS]
    cdef double dot_z[MAX_DOTS]
    cdef unsigned char vmask[MAX_DOTS]
    cdef double w_z[MAX_DOTS]
    cdef double w_x[MAX_DOTS]
    cdef int i
    for i in range(n):
        dot_x[i] = xy[i, 0]
        dot_z[i] = xy[i, 1]
        vmask[i] = 1 if valid[i] else 0
        w_z[i] = 0.0
        w_x[i] = 0.0
    cdef int fits = _curl_weights(dot_x, dot_z, vmask, n, k, w_z, w_x)
    if fits == 0:
        raise DegenerateGeometry("no usable plane fits")
    return [w_z[i] for i in range(n)], [w_x[i] for i in range(n)]


def run_trial(params, rng):
    """Simulate one placement attempt; returns the outcome tuple.

    Tuple layout: (final_roll_deg, final_pitch_deg, settled, timed_out,
    toppled, steps, contact_step, sim_time_s).
    """
    spec = params.spec
    cfg = params.cfg
    gel = params.gel
    ft = params.ft

    cdef bint tactile_mode = params.mode == "tactile"
    cdef bint noise = params.noise

    cdef int n_pts = spec.contact_points.shape[0]
    cdef int n_dots = gel.n_dots
    if n_pts > MAX_PTS or n_dots > MAX_DOTS:
        raise ValueError("object or dot grid too large for the compiled kernel")

    cdef double grasp = float(params.grasp_height)
    pts = np.ascontiguousarray(spec.contact_points, dtype=np.float64)
    xy = np.ascontiguousarray(gel.grid.xy, dtype=np.float64)
    cdef double[:, ::1] pts_mv = pts
    cdef double[:, ::1] xy_mv = xy

    cdef double pax[MAX_PTS]
    cdef double pay[MAX_PTS]
    cdef double paz[MAX_PTS]
    cdef double dot_x[MAX_DOTS]
    cdef double dot_z[MAX_DOTS]
    cdef int i
    for i in range(n_pts):
        pax[i] = pts_mv[i, 0]
        pay[i] = pts_mv[i, 1]
        paz[i] = -grasp
    for i in range(n_dots):
        dot_x[i] = xy_mv[i, 0]
        dot_z[i] = xy_mv[i, 1]

    cdef double com_x = float(spec.com[0])
    cdef double com_y = float(spec.com[1])
    cdef double com_z = float(spec.com[2]) - grasp
    cdef double weight = float(spec.mass) * 9.81
    cdef double compliance = float(spec.compliance)
    cdef double liq_gain = float(spec.liquid_gain)
    cdef double liq_tau = float(spec.liquid_tau)
    cdef double point_k = 1.25e4
    cdef double soft_ref = 0.005

    cdef double rot_gain = float(gel.rot_gain)
    cdef double shear_gain = float(gel.shear_gain)
    cdef double press_gain = float(gel.press_gain)
    cdef double face_sep = float(gel.face_separation)
    cdef double jitter = float(gel.jitter_std)
    cdef double dropout = float(gel.dropout_rate)
    cdef int curl_k = int(gel.curl_neighbors)

    cdef double sig_f = float(ft.noise_std_force)
    cdef double sig_t = float(ft.noise_std_torque)
    cdef double bias_x = float(ft.bias_per_rad[0])
    cdef double bias_y = float(ft.bias_per_rad[1])
    cdef double alpha = float(ft.filter_alpha)
    cdef double q_f = float(ft.force_step)
    cdef double q_t = float(ft.torque_step)
    cdef double dz_mount = float(ft.mount_offset_z)

    cdef double dt = float(cfg.control_dt)
    cdef double k_z = float(cfg.k_z)
    cdef double k_roll = float(cfg.k_roll)
    cdef double k_pitch = float(cfg.k_pitch)
    cdef double f_target = float(cfg.f_target_z)
    cdef double curl_gain = float(cfg.curl_gain)
    cdef double curl_sign = float(cfg.curl_sign)
    cdef double diff_gain = float(cfg.diff_gain)
    cdef double diff_sign = float(cfg.diff_sign)
    cdef double descent = float(cfg.descent_speed)
    cdef double trigger = float(cfg.contact_trigger)
    cdef double v_max = float(cfg.max_linear_rate)
    cdef double w_max = float(cfg.max_angular_rate)
    cdef double eps = float(cfg.settle_epsilon)
    cdef int tick_every = int(cfg.tactile_every)
    cdef int window = int(cfg.settle_window_steps)
    cdef int total_steps = int(round(cfg.timeout_s * cfg.control_rate_hz))

    capsule = rng.bit_generator.capsule
    cdef bitgen_t* bitgen = <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")

    # --- starting pose ------------------------------------------------------
    cdef double roll0 = float(params.tilt_roll_deg) * DEG2RAD
    cdef double pitch0 = float(params.tilt_pitch_deg) * DEG2RAD
    cdef double cr = cos(roll0)
    cdef double sr = sin(roll0)
    cdef double cp = cos(pitch0)
    cdef double sp = sin(pitch0)
    # R = Ry(pitch) @ Rx(roll)
    cdef double r00 = cp, r01 = sp * sr, r02 = sp * cr
    cdef double r10 = 0.0, r11 = cr, r12 = -sr
    cdef double r20 = -sp, r21 = cp * sr, r22 = cp * cr
    cdef double px = 0.0, py = 0.0, pz = grasp
    cdef double min_gap = INFINITY
    cdef double zw
    for i in range(n_pts):
        zw = pz + r20 * pax[i] + r21 * pay[i] + r22 * paz[i]
        if zw < min_gap:
            min_gap = zw
    pz += float(cfg.clearance) - min_gap
    cdef double t0r = roll0 * RAD2DEG
    cdef double t0p = pitch0 * RAD2DEG
    cdef double tilt0_deg = sqrt(t0r * t0r + t0p * t0p)
    cdef double guard_deg = tilt0_deg + TOPPLE_GUARD_MARGIN_DEG
    cdef double liq_x = 0.0, liq_y = 0.0

    # --- prologue draws -----------------------------------------------------
    cdef unsigned char valid1[MAX_DOTS]
    cdef unsigned char valid2[MAX_DOTS]
    if noise and dropout > 0.0:
        for i in range(n_dots):
            valid1[i] = random_standard_uniform(bitgen) >= dropout
        for i in range(n_dots):
            valid2[i] = random_standard_uniform(bitgen) >= dropout
    else:
        for i in range(n_dots):
            valid1[i] = 1
            valid2[i] = 1
    cdef double wz1[MAX_DOTS]
    cdef double wx1[MAX_DOTS]
    cdef double wz2[MAX_DOTS]
    cdef double wx2[MAX_DOTS]
    if _curl_weights(dot_x, dot_z, valid1, n_dots, curl_k, wz1, wx1) == 0:
        raise DegenerateGeometry("first face admits no curl estimate")
    if _curl_weights(dot_x, dot_z, valid2, n_dots, curl_k, wz2, wx2) == 0:
        raise DegenerateGeometry("second face admits no curl estimate")
    cdef int nv1 = 0, nv2 = 0
    for i in range(n_dots):
        if valid1[i]:
            nv1 += 1
    for i in range(n_dots):
        if valid2[i]:
            nv2 += 1

    # gravity wrench of the hanging object at the hover pose (EE axes)
    cdef double vx, vy, vz_c, relx, rely, twx, twy
    cdef double g_fx, g_fy, g_fz, g_tx, g_ty, g_tz
    vx = com_x + liq_x
    vy = com_y + liq_y
    vz_c = com_z
    relx = r00 * vx + r01 * vy + r02 * vz_c
    rely = r10 * vx + r11 * vy + r12 * vz_c
    twx = -weight * rely
    twy = weight * relx
    g_fx = r20 * -weight
    g_fy = r21 * -weight
    g_fz = r22 * -weight
    g_tx = r00 * twx + r10 * twy
    g_ty = r01 * twx + r11 * twy
    g_tz = r02 * twx + r12 * twy

    # reference snapshot at the hover pose: gravity only, no contact
    cdef double ref1x[MAX_DOTS]
    cdef double ref1z[MAX_DOTS]
    cdef double ref2x[MAX_DOTS]
    cdef double ref2z[MAX_DOTS]
    cdef double c_rot, ux, uz, face_sign
    cdef int face
    for face in range(2):
        face_sign = 1.0 if face == 0 else -1.0
        for i in range(n_dots):
            c_rot = 0.5 * rot_gain * g_ty
            ux = c_rot * dot_z[i] + press_gain * g_fx
            uz = -c_rot * dot_x[i] + face_sign * shear_gain * g_tx / face_sep + press_gain * 0.0
            if noise and jitter > 0.0:
                ux += random_normal(bitgen, 0.0, jitter)
                uz += random_normal(bitgen, 0.0, jitter)
            if face == 0:
                ref1x[i] = ux
                ref1z[i] = uz
            else:
                ref2x[i] = ux
                ref2z[i] = uz

    # wrist tilt for the cable bias, from the base normal
    cdef double nx_, ny_, nz_, s_clamp, wr, wp
    nx_ = r02
    ny_ = r12
    nz_ = r22
    s_clamp = -ny_
    if s_clamp > 1.0:
        s_clamp = 1.0
    elif s_clamp < -1.0:
        s_clamp = -1.0
    wr = asin(s_clamp)
    wp = atan2(nx_, nz_)

    # offset capture: one device reading at the hover pose
    cdef double sfx, sfy, sfz, stx, sty, stz
    sfx = g_fx
    sfy = g_fy
    sfz = g_fz
    stx = g_tx + dz_mount * g_fy
    sty = g_ty - dz_mount * g_fx
    stz = g_tz
    if noise:
        sfx += random_normal(bitgen, 0.0, sig_f)
        sfy += random_normal(bitgen, 0.0, sig_f)
        sfz += random_normal(bitgen, 0.0, sig_f)
        stx += random_normal(bitgen, 0.0, sig_t)
        sty += random_normal(bitgen, 0.0, sig_t)
        stz += random_normal(bitgen, 0.0, sig_t)
        stx += bias_x * wr
        sty += bias_y * wp
    cdef double filt0 = sfx, filt1 = sfy, filt2 = sfz
    cdef double filt3 = stx, filt4 = sty, filt5 = stz
    cdef double off0 = _quant(sfx, q_f)
    cdef double off1 = _quant(sfy, q_f)
    cdef double off2 = _quant(sfz, q_f)
    cdef double off3 = _quant(stx, q_t)
    cdef double off4 = _quant(sty, q_t)
    cdef double off5 = _quant(stz, q_t)

    # --- main loop ----------------------------------------------------------
    cdef bint contacted = False
    cdef int contact_step = -1
    cdef bint settled = False
    cdef bint guard_toppled = False
    cdef int settle_count = 0
    cdef double held_curl = 0.0
    cdef double held_diff = 0.0
    cdef int step_i = 0
    cdef double press, ax, ay, az, qx, qy, qz, pen, f_i, atten
    cdef double fwz, fx, fy, fz, tx, ty, tz
    cdef double m_fx, m_fy, m_fz, m_tx, m_ty
    cdef double curl1, curl2, zsum1, zsum2, c_acc, z_acc, dux, duz
    cdef double v_z, w_x, w_y, tau_ru, tau_pu, mag
    cdef double norm, angle, axx, axy, s_r, c2
    cdef double d00, d01, d02, d10, d11, d12, d20, d21, d22
    cdef double n00, n01, n02, n10, n11, n12, n20, n21, n22
    cdef double n_roll, n_pitch, tilt_mag, tgt_x, tgt_y, rate, denom
    cdef double dnx, dny, dnorm, best_p, proj, gx, gy
    cdef bint tipped

    while step_i < total_steps:
        # contact wrench (world z springs) about the application point
        press = 0.0
        twx = 0.0
        twy = 0.0
        for i in range(n_pts):
            ax = pax[i]
            ay = pay[i]
            az = paz[i]
            qx = px + r00 * ax + r01 * ay + r02 * az
            qy = py + r10 * ax + r11 * ay + r12 * az
            qz = pz + r20 * ax + r21 * ay + r22 * az
            pen = -qz
            if pen > 0.0:
                f_i = point_k * pen
                press += f_i
                twx += f_i * (qy - py)
                twy -= f_i * (qx - px)
        if compliance > 0.0 and press > 0.0:
            atten = 1.0 / (1.0 + compliance * press / soft_ref)
            twx *= atten
            twy *= atten

        # gravity of the held object
        vx = com_x + liq_x
        vy = com_y + liq_y
        vz_c = com_z
        relx = r00 * vx + r01 * vy + r02 * vz_c
        rely = r10 * vx + r11 * vy + r12 * vz_c
        twx += -weight * rely
        twy += weight * relx
        fwz = press - weight

        # world wrench into EE axes
        fx = r20 * fwz
        fy = r21 * fwz
        fz = r22 * fwz
        tx = r00 * twx + r10 * twy
        ty = r01 * twx + r11 * twy
        tz = r02 * twx + r12 * twy

        # wrist cell: transport up, noise, bias, filter, quantise, offset
        nx_ = r02
        ny_ = r12
        nz_ = r22
        s_clamp = -ny_
        if s_clamp > 1.0:
            s_clamp = 1.0
        elif s_clamp < -1.0:
            s_clamp = -1.0
        wr = asin(s_clamp)
        wp = atan2(nx_, nz_)
        sfx = fx
        sfy = fy
        sfz = fz
        stx = tx + dz_mount * fy
        sty = ty - dz_mount * fx
        stz = tz
        if noise:
            sfx += random_normal(bitgen, 0.0, sig_f)
            sfy += random_normal(bitgen, 0.0, sig_f)
            sfz += random_normal(bitgen, 0.0, sig_f)
            stx += random_normal(bitgen, 0.0, sig_t)
            sty += random_normal(bitgen, 0.0, sig_t)
            stz += random_normal(bitgen, 0.0, sig_t)
            stx += bias_x * wr
            sty += bias_y * wp
        filt0 += alpha * (sfx - filt0)
        filt1 += alpha * (sfy - filt1)
        filt2 += alpha * (sfz - filt2)
        filt3 += alpha * (stx - filt3)
        filt4 += alpha * (sty - filt4)
        filt5 += alpha * (stz - filt5)
        m_fx = _quant(filt0, q_f) - off0
        m_fy = _quant(filt1, q_f) - off1
        m_fz = _quant(filt2, q_f) - off2
        m_tx = _quant(filt3, q_t) - off3
        m_ty = _quant(filt4, q_t) - off4
        # transport the reading down to the application point
        m_tx -= dz_mount * m_fy
        m_ty += dz_mount * m_fx

        # gel tick: fresh fields, subtract reference, weights and face means
        if step_i % tick_every == 0:
            curl1 = 0.0
            curl2 = 0.0
            zsum1 = 0.0
            zsum2 = 0.0
            for face in range(2):
                face_sign = 1.0 if face == 0 else -1.0
                c_acc = 0.0
                z_acc = 0.0
                for i in range(n_dots):
                    c_rot = 0.5 * rot_gain * ty
                    ux = c_rot * dot_z[i] + press_gain * fx
                    uz = -c_rot * dot_x[i] + face_sign * shear_gain * tx / face_sep + press_gain * press
                    if noise and jitter > 0.0:
                        ux += random_normal(bitgen, 0.0, jitter)
                        uz += random_normal(bitgen, 0.0, jitter)
                    if face == 0:
                        dux = ux - ref1x[i]
                        duz = uz - ref1z[i]
                        c_acc += wz1[i] * duz + wx1[i] * dux
                        if valid1[i]:
                            z_acc += duz
                    else:
                        dux = ux - ref2x[i]
                        duz = uz - ref2z[i]
                        c_acc += wz2[i] * duz + wx2[i] * dux
                        if valid2[i]:
                            z_acc += duz
                if face == 0:
                    curl1 = c_acc
                    zsum1 = z_acc
                else:
                    curl2 = c_acc
                    zsum2 = z_acc
            held_curl = 0.5 * (curl1 + curl2)
            held_diff = zsum1 / nv1 - zsum2 / nv2

        # control
        v_z = 0.0
        w_x = 0.0
        w_y = 0.0
        tau_ru = 0.0
        tau_pu = 0.0
        if not contacted:
            if m_fz > trigger:
                contacted = True
                contact_step = step_i
        if not contacted:
            v_z = -descent
        else:
            if tactile_mode:
                tau_ru = diff_sign * diff_gain * held_diff
                tau_pu = curl_sign * curl_gain * held_curl
            else:
                tau_ru = m_tx
                tau_pu = m_ty
            v_z = k_z * (m_fz - f_target)
            if v_z > v_max:
                v_z = v_max
            elif v_z < -v_max:
                v_z = -v_max
            w_x = k_roll * tau_ru
            if w_x > w_max:
                w_x = w_max
            elif w_x < -w_max:
                w_x = -w_max
            w_y = k_pitch * tau_pu
            if w_y > w_max:
                w_y = w_max
            elif w_y < -w_max:
                w_y = -w_max
            mag = fabs(tau_ru)
            if fabs(tau_pu) > mag:
                mag = fabs(tau_pu)
            if mag < eps:
                settle_count += 1
            else:
                settle_count = 0

        if contacted and settle_count >= window:
            settled = True
            step_i += 1
            break

        # integrate: rotation about the application point, then translation
        if w_x != 0.0 or w_y != 0.0:
            norm = sqrt(w_x * w_x + w_y * w_y)
            angle = norm * dt
            axx = w_x / norm
            axy = w_y / norm
            s_r = sin(angle)
            c2 = 1.0 - cos(angle)
            d00 = 1.0 + c2 * -(axy * axy)
            d01 = c2 * axx * axy
            d02 = s_r * axy
            d10 = c2 * axx * axy
            d11 = 1.0 + c2 * -(axx * axx)
            d12 = s_r * -axx
            d20 = s_r * -axy
            d21 = s_r * axx
            d22 = 1.0 + c2 * -(axx * axx + axy * axy)
            n00 = d00 * r00 + d01 * r10 + d02 * r20
            n01 = d00 * r01 + d01 * r11 + d02 * r21
            n02 = d00 * r02 + d01 * r12 + d02 * r22
            n10 = d10 * r00 + d11 * r10 + d12 * r20
            n11 = d10 * r01 + d11 * r11 + d12 * r21
            n12 = d10 * r02 + d11 * r12 + d12 * r22
            n20 = d20 * r00 + d21 * r10 + d22 * r20
            n21 = d20 * r01 + d21 * r11 + d22 * r21
            n22 = d20 * r02 + d21 * r12 + d22 * r22
            r00 = n00
            r01 = n01
            r02 = n02
            r10 = n10
            r11 = n11
            r12 = n12
            r20 = n20
            r21 = n21
            r22 = n22
        pz += v_z * dt

        # free liquid relaxes toward the downhill side
        if liq_gain > 0.0:
            s_clamp = -r12
            if s_clamp > 1.0:
                s_clamp = 1.0
            elif s_clamp < -1.0:
                s_clamp = -1.0
            n_roll = asin(s_clamp) * RAD2DEG
            n_pitch = atan2(r02, r22) * RAD2DEG
            tgt_x = liq_gain * sin(n_pitch * DEG2RAD)
            tgt_y = -liq_gain * sin(n_roll * DEG2RAD)
            denom = liq_tau if liq_tau > dt else dt
            rate = dt / denom
            liq_x += rate * (tgt_x - liq_x)
            liq_y += rate * (tgt_y - liq_y)

        step_i += 1

        # runaway guard: only fires when the controller made the tilt worse
        s_clamp = -r12
        if s_clamp > 1.0:
            s_clamp = 1.0
        elif s_clamp < -1.0:
            s_clamp = -1.0
        n_roll = asin(s_clamp) * RAD2DEG
        n_pitch = atan2(r02, r22) * RAD2DEG
        tilt_mag = sqrt(n_roll * n_roll + n_pitch * n_pitch)
        if tilt_mag > guard_deg:
            tipped = False
            if tilt_mag > TILT_FAILSAFE_DEG:
                tipped = True
            else:
                dnx = r02
                dny = r12
                dnorm = sqrt(dnx * dnx + dny * dny)
                if dnorm >= 1e-12:
                    dnx /= dnorm
                    dny /= dnorm
                    best_p = -INFINITY
                    for i in range(n_pts):
                        qx = px + r00 * pax[i] + r01 * pay[i] + r02 * paz[i]
                        qy = py + r10 * pax[i] + r11 * pay[i] + r12 * paz[i]
                        proj = qx * dnx + qy * dny
                        if proj > best_p:
                            best_p = proj
                    gx = px + r00 * (com_x + liq_x) + r01 * (com_y + liq_y) + r02 * com_z
                    gy = py + r10 * (com_x + liq_x) + r11 * (com_y + liq_y) + r12 * com_z
                    if gx * dnx + gy * dny > best_p:
                        tipped = True
            if tipped:
                guard_toppled = True
                break

    # --- outcome ------------------------------------------------------------
    s_clamp = -r12
    if s_clamp > 1.0:
        s_clamp = 1.0
    elif s_clamp < -1.0:
        s_clamp = -1.0
    cdef double final_roll = asin(s_clamp) * RAD2DEG
    cdef double final_pitch = atan2(r02, r22) * RAD2DEG
    cdef double final_mag = sqrt(final_roll * final_roll + final_pitch * final_pitch)
    cdef bint toppled = guard_toppled
    if not toppled:
        if final_mag > TILT_FAILSAFE_DEG:
            toppled = True
        else:
            dnx = r02
            dny = r12
            dnorm = sqrt(dnx * dnx + dny * dny)
            if dnorm >= 1e-12:
                dnx /= dnorm
                dny /= dnorm
                best_p = -INFINITY
                for i in range(n_pts):
                    qx = px + r00 * pax[i] + r01 * pay[i] + r02 * paz[i]
                    qy = py + r10 * pax[i] + r11 * pay[i] + r12 * paz[i]
                    proj = qx * dnx + qy * dny
                    if proj > best_p:
                        best_p = proj
                gx = px + r00 * (com_x + liq_x) + r01 * (com_y + liq_y) + r02 * com_z
                gy = py + r10 * (com_x + liq_x) + r11 * (com_y + liq_y) + r12 * com_z
                if gx * dnx + gy * dny > best_p:
                    toppled = True
    cdef bint timed_out = (not settled) and (not guard_toppled) and step_i >= total_steps
    return (
        final_roll,
        final_pitch,
        settled,
        timed_out,
        toppled,
        step_i,
        contact_step,
        step_i * dt,
    )

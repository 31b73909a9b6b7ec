"""Reference implementation of the placement trial loop.

Pure Python, scalar arithmetic only.  The compiled kernel in ``_speedups``
is a line-for-line translation of this loop; the two must stay bitwise
identical (same formulas, same evaluation order, same random draw order), so
changes here have to be mirrored there.  Keep numpy out of the hot path: the
loop works on plain floats so its IEEE semantics match the C code exactly.

Draw order per trial:
  1. dropout masks, first face then second, one uniform per dot (noise on)
  2. reference jitter, first face then second, per dot x then z (noise on)
  3. offset capture, force x y z then torque x y z (noise on)
  4. per control step: cell noise (6 normals, same order as capture)
  5. per tactile tick: jitter, same order as the reference snapshot

``noise=False`` turns off the white noise, the cable-tension bias, the dot
jitter and the dropout (zero draws), leaving only the deterministic device
properties: the low-pass filter and the quantisation.
"""

from __future__ import annotations

import math

import numpy as np

from .tactile import DegenerateGeometry, MIN_VALID_CURL
from .world import GRAVITY, POINT_STIFFNESS, SOFT_REF_DEFLECTION

DET_TOL = 1e-9
TOPPLE_GUARD_MARGIN_DEG = 5.0
TILT_FAILSAFE_DEG = 45.0


def curl_weight_vectors(dot_x, dot_z, valid, k):
    """Per-face linear curl weights, scalar arithmetic.

    Same estimator as :func:`gelplace.tactile.curl_weights` (k nearest valid
    neighbours, affine fit, singular fits dropped) but evaluated in plain
    loops so the compiled kernel can reproduce it bit for bit.
    """
    n = len(valid)
    valid_idx = [i for i in range(n) if valid[i]]
    if len(valid_idx) < MIN_VALID_CURL:
        raise DegenerateGeometry(f"only {len(valid_idx)} valid dots")
    w_z = [0.0] * n
    w_x = [0.0] * n
    contributions = []  # (point index, w1, w2) per accepted fit
    n_fits = 0
    for i in valid_idx:
        xi = dot_x[i]
        zi = dot_z[i]
        # k nearest valid neighbours, ties broken by index
        cand = []
        for j in valid_idx:
            if j == i:
                continue
            dx = dot_x[j] - xi
            dz = dot_z[j] - zi
            cand.append((dx * dx + dz * dz, j))
        cand.sort()
        hood = [i] + [j for (_, j) in cand[: min(k, len(cand))]]
        # normal matrix of the affine design [1, dx, dz]
        s1 = 0.0
        sx = 0.0
        sz = 0.0
        sxx = 0.0
        sxz = 0.0
        szz = 0.0
        for j in hood:
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
        if abs(det) < DET_TOL:
            continue
        # rows 1 and 2 of the inverse via the adjugate
        inv10 = -(sx * szz - sxz * sz) / det
        inv11 = (s1 * szz - sz * sz) / det
        inv12 = -(s1 * sxz - sx * sz) / det
        inv20 = (sx * sxz - sxx * sz) / det
        inv21 = -(s1 * sxz - sz * sx) / det
        inv22 = (s1 * sxx - sx * sx) / det
        n_fits += 1
        for j in hood:
            dx = dot_x[j] - xi
            dz = dot_z[j] - zi
            w1 = inv10 + inv11 * dx + inv12 * dz  # d(u_z)/dx weight
            w2 = inv20 + inv21 * dx + inv22 * dz  # d(u_x)/dz weight
            contributions.append((j, w1, w2))
    if n_fits == 0:
        raise DegenerateGeometry("no dot admits a non-singular gradient fit")
    for j, w1, w2 in contributions:
        w_z[j] += w1
        w_x[j] -= w2
    inv_fits = 1.0 / n_fits
    for j in range(n):
        w_z[j] *= inv_fits
        w_x[j] *= inv_fits
    return w_z, w_x


def run_trial(params, rng, telemetry=False):
    """Simulate one placement attempt; see controller.run_placement."""
    from .controller import TrialOutcome

    spec = params.spec
    cfg = params.cfg
    gel = params.gel
    ft = params.ft
    tactile_mode = params.mode == "tactile"
    noise = params.noise

    # --- unpack everything into plain floats -------------------------------
    n_pts = spec.contact_points.shape[0]
    grasp = float(params.grasp_height)
    # object-frame vectors from the grip point to each contact point
    pax = [float(spec.contact_points[i, 0]) for i in range(n_pts)]
    pay = [float(spec.contact_points[i, 1]) for i in range(n_pts)]
    paz = [-grasp] * n_pts
    com_x = float(spec.com[0])
    com_y = float(spec.com[1])
    com_z = float(spec.com[2]) - grasp
    weight = float(spec.mass) * GRAVITY
    compliance = float(spec.compliance)
    liq_gain = float(spec.liquid_gain)
    liq_tau = float(spec.liquid_tau)

    n_dots = gel.n_dots
    dot_x = [float(gel.grid.xy[i, 0]) for i in range(n_dots)]
    dot_z = [float(gel.grid.xy[i, 1]) for i in range(n_dots)]
    rot_gain = float(gel.rot_gain)
    shear_gain = float(gel.shear_gain)
    press_gain = float(gel.press_gain)
    face_sep = float(gel.face_separation)
    jitter = float(gel.jitter_std)
    dropout = float(gel.dropout_rate)

    sig_f = float(ft.noise_std_force)
    sig_t = float(ft.noise_std_torque)
    bias_x = float(ft.bias_per_rad[0])
    bias_y = float(ft.bias_per_rad[1])
    alpha = float(ft.filter_alpha)
    q_f = float(ft.force_step)
    q_t = float(ft.torque_step)
    dz_mount = float(ft.mount_offset_z)

    dt = float(cfg.control_dt)
    k_z = float(cfg.k_z)
    k_roll = float(cfg.k_roll)
    k_pitch = float(cfg.k_pitch)
    f_target = float(cfg.f_target_z)
    curl_gain = float(cfg.curl_gain)
    curl_sign = float(cfg.curl_sign)
    diff_gain = float(cfg.diff_gain)
    diff_sign = float(cfg.diff_sign)
    descent = float(cfg.descent_speed)
    trigger = float(cfg.contact_trigger)
    v_max = float(cfg.max_linear_rate)
    w_max = float(cfg.max_angular_rate)
    eps = float(cfg.settle_epsilon)
    tick_every = int(cfg.tactile_every)
    window = int(cfg.settle_window_steps)
    total_steps = int(round(cfg.timeout_s * cfg.control_rate_hz))

    # --- starting pose ------------------------------------------------------
    roll0 = math.radians(float(params.tilt_roll_deg))
    pitch0 = math.radians(float(params.tilt_pitch_deg))
    cr = math.cos(roll0)
    sr = math.sin(roll0)
    cp = math.cos(pitch0)
    sp = math.sin(pitch0)
    # R = Ry(pitch) @ Rx(roll)
    r00 = cp
    r01 = sp * sr
    r02 = sp * cr
    r10 = 0.0
    r11 = cr
    r12 = -sr
    r20 = -sp
    r21 = cp * sr
    r22 = cp * cr
    px = 0.0
    py = 0.0
    pz = grasp
    min_gap = math.inf
    for i in range(n_pts):
        zw = pz + r20 * pax[i] + r21 * pay[i] + r22 * paz[i]
        if zw < min_gap:
            min_gap = zw
    pz += float(cfg.clearance) - min_gap
    t0r = math.degrees(roll0)
    t0p = math.degrees(pitch0)
    tilt0_deg = math.sqrt(t0r * t0r + t0p * t0p)
    guard_deg = tilt0_deg + TOPPLE_GUARD_MARGIN_DEG
    liq_x = 0.0
    liq_y = 0.0

    # --- prologue draws -----------------------------------------------------
    if noise and dropout > 0.0:
        valid1 = [rng.random() >= dropout for _ in range(n_dots)]
        valid2 = [rng.random() >= dropout for _ in range(n_dots)]
    else:
        valid1 = [True] * n_dots
        valid2 = [True] * n_dots
    curl_k = int(gel.curl_neighbors)
    wz1, wx1 = curl_weight_vectors(dot_x, dot_z, valid1, curl_k)
    wz2, wx2 = curl_weight_vectors(dot_x, dot_z, valid2, curl_k)
    nv1 = 0
    for i in range(n_dots):
        if valid1[i]:
            nv1 += 1
    nv2 = 0
    for i in range(n_dots):
        if valid2[i]:
            nv2 += 1

    def gravity_ee():
        """EE-frame wrench of the hanging object weight (no contact)."""
        vx = com_x + liq_x
        vy = com_y + liq_y
        vz = com_z
        relx = r00 * vx + r01 * vy + r02 * vz
        rely = r10 * vx + r11 * vy + r12 * vz
        twx = -weight * rely
        twy = weight * relx
        # world wrench (0, 0, -weight; twx, twy, 0) into EE axes
        fx = r20 * -weight
        fy = r21 * -weight
        fz = r22 * -weight
        tx = r00 * twx + r10 * twy
        ty = r01 * twx + r11 * twy
        tz = r02 * twx + r12 * twy
        return fx, fy, fz, tx, ty, tz

    def face_dot(face_sign, idx, tau_r, tau_p, press, f_tan):
        """Noiseless displacement of one dot (mm)."""
        c = 0.5 * rot_gain * tau_p
        ux = c * dot_z[idx] + press_gain * f_tan
        uz = -c * dot_x[idx] + face_sign * shear_gain * tau_r / face_sep + press_gain * press
        return ux, uz

    # reference snapshot at the hover pose: gravity only, no contact
    g_fx, g_fy, g_fz, g_tx, g_ty, g_tz = gravity_ee()
    ref1x = [0.0] * n_dots
    ref1z = [0.0] * n_dots
    ref2x = [0.0] * n_dots
    ref2z = [0.0] * n_dots
    for face_sign, rx, rz in ((1.0, ref1x, ref1z), (-1.0, ref2x, ref2z)):
        for i in range(n_dots):
            ux, uz = face_dot(face_sign, i, g_tx, g_ty, 0.0, g_fx)
            if noise and jitter > 0.0:
                ux += rng.normal(0.0, jitter)
                uz += rng.normal(0.0, jitter)
            rx[i] = ux
            rz[i] = uz

    # wrist tilt for the cable bias, from the base normal
    def wrist_rp():
        ny = r12
        nz = r22
        nx = r02
        s = -ny
        if s > 1.0:
            s = 1.0
        elif s < -1.0:
            s = -1.0
        return math.asin(s), math.atan2(nx, nz)

    def to_sensor(fx, fy, fz, tx, ty, tz):
        return fx, fy, fz, tx + dz_mount * fy, ty - dz_mount * fx, tz

    def quant(v, step):
        return round(v / step) * step

    # offset capture: one device reading at the hover pose
    wr, wp = wrist_rp()
    sfx, sfy, sfz, stx, sty, stz = to_sensor(g_fx, g_fy, g_fz, g_tx, g_ty, g_tz)
    if noise:
        sfx += rng.normal(0.0, sig_f)
        sfy += rng.normal(0.0, sig_f)
        sfz += rng.normal(0.0, sig_f)
        stx += rng.normal(0.0, sig_t)
        sty += rng.normal(0.0, sig_t)
        stz += rng.normal(0.0, sig_t)
        stx += bias_x * wr
        sty += bias_y * wp
    filt = [sfx, sfy, sfz, stx, sty, stz]
    offset = [
        quant(sfx, q_f), quant(sfy, q_f), quant(sfz, q_f),
        quant(stx, q_t), quant(sty, q_t), quant(stz, q_t),
    ]

    # --- main loop ----------------------------------------------------------
    contacted = False
    contact_step = -1
    settled = False
    guard_toppled = False
    settle_count = 0
    held_curl = 0.0
    held_diff = 0.0
    step_i = 0
    log = {k: [] for k in (
        "t", "roll", "pitch", "press", "fz_meas", "curl", "diff",
        "tau_roll_used", "tau_pitch_used", "v_z", "w_x", "w_y",
    )} if telemetry else None

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
                f_i = POINT_STIFFNESS * pen
                press += f_i
                twx += f_i * (qy - py)
                twy -= f_i * (qx - px)
        if compliance > 0.0 and press > 0.0:
            atten = 1.0 / (1.0 + compliance * press / SOFT_REF_DEFLECTION)
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
        wr, wp = wrist_rp()
        sfx, sfy, sfz, stx, sty, stz = to_sensor(fx, fy, fz, tx, ty, tz)
        if noise:
            sfx += rng.normal(0.0, sig_f)
            sfy += rng.normal(0.0, sig_f)
            sfz += rng.normal(0.0, sig_f)
            stx += rng.normal(0.0, sig_t)
            sty += rng.normal(0.0, sig_t)
            stz += rng.normal(0.0, sig_t)
            stx += bias_x * wr
            sty += bias_y * wp
        filt[0] += alpha * (sfx - filt[0])
        filt[1] += alpha * (sfy - filt[1])
        filt[2] += alpha * (sfz - filt[2])
        filt[3] += alpha * (stx - filt[3])
        filt[4] += alpha * (sty - filt[4])
        filt[5] += alpha * (stz - filt[5])
        m_fx = quant(filt[0], q_f) - offset[0]
        m_fy = quant(filt[1], q_f) - offset[1]
        m_fz = quant(filt[2], q_f) - offset[2]
        m_tx = quant(filt[3], q_t) - offset[3]
        m_ty = quant(filt[4], q_t) - offset[4]
        # transport the reading down to the application point
        m_tx -= dz_mount * m_fy
        m_ty += dz_mount * m_fx

        # gel tick: fresh fields, subtract reference, weights and face means
        if step_i % tick_every == 0:
            curl1 = 0.0
            curl2 = 0.0
            zsum1 = 0.0
            zsum2 = 0.0
            for face_sign, refx, refz, wzv, wxv, validv in (
                (1.0, ref1x, ref1z, wz1, wx1, valid1),
                (-1.0, ref2x, ref2z, wz2, wx2, valid2),
            ):
                c_acc = 0.0
                z_acc = 0.0
                for i in range(n_dots):
                    ux, uz = face_dot(face_sign, i, tx, ty, press, fx)
                    if noise and jitter > 0.0:
                        ux += rng.normal(0.0, jitter)
                        uz += rng.normal(0.0, jitter)
                    dux = ux - refx[i]
                    duz = uz - refz[i]
                    c_acc += wzv[i] * duz + wxv[i] * dux
                    if validv[i]:
                        z_acc += duz
                if face_sign > 0.0:
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
            mag = abs(tau_ru)
            if abs(tau_pu) > mag:
                mag = abs(tau_pu)
            if mag < eps:
                settle_count += 1
            else:
                settle_count = 0

        if telemetry:
            n_roll, n_pitch = _tilt_deg(r02, r12, r22)
            log["t"].append(step_i * dt)
            log["roll"].append(n_roll)
            log["pitch"].append(n_pitch)
            log["press"].append(press)
            log["fz_meas"].append(m_fz)
            log["curl"].append(held_curl)
            log["diff"].append(held_diff)
            log["tau_roll_used"].append(tau_ru)
            log["tau_pitch_used"].append(tau_pu)
            log["v_z"].append(v_z)
            log["w_x"].append(w_x)
            log["w_y"].append(w_y)

        if contacted and settle_count >= window:
            settled = True
            step_i += 1
            break

        # integrate: rotation about the application point, then translation
        if w_x != 0.0 or w_y != 0.0:
            norm = math.sqrt(w_x * w_x + w_y * w_y)
            angle = norm * dt
            axx = w_x / norm
            axy = w_y / norm
            s = math.sin(angle)
            c2 = 1.0 - math.cos(angle)
            d00 = 1.0 + c2 * -(axy * axy)
            d01 = c2 * axx * axy
            d02 = s * axy
            d10 = c2 * axx * axy
            d11 = 1.0 + c2 * -(axx * axx)
            d12 = s * -axx
            d20 = s * -axy
            d21 = s * axx
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
            r00, r01, r02 = n00, n01, n02
            r10, r11, r12 = n10, n11, n12
            r20, r21, r22 = n20, n21, n22
        pz += v_z * dt

        # free liquid relaxes toward the downhill side
        if liq_gain > 0.0:
            n_roll, n_pitch = _tilt_deg(r02, r12, r22)
            tgt_x = liq_gain * math.sin(math.radians(n_pitch))
            tgt_y = -liq_gain * math.sin(math.radians(n_roll))
            rate = dt / (liq_tau if liq_tau > dt else dt)
            liq_x += rate * (tgt_x - liq_x)
            liq_y += rate * (tgt_y - liq_y)

        step_i += 1

        # runaway guard: only fires when the controller made the tilt worse
        n_roll, n_pitch = _tilt_deg(r02, r12, r22)
        tilt_mag = math.sqrt(n_roll * n_roll + n_pitch * n_pitch)
        if tilt_mag > guard_deg:
            if tilt_mag > TILT_FAILSAFE_DEG or _would_tip(
                n_pts, pax, pay, paz, px, py, pz,
                r00, r01, r02, r10, r11, r12, r20, r21, r22,
                com_x + liq_x, com_y + liq_y, com_z,
            ):
                guard_toppled = True
                break

    final_roll, final_pitch = _tilt_deg(r02, r12, r22)
    final_mag = math.sqrt(final_roll * final_roll + final_pitch * final_pitch)
    toppled = guard_toppled or final_mag > TILT_FAILSAFE_DEG or _would_tip(
        n_pts, pax, pay, paz, px, py, pz,
        r00, r01, r02, r10, r11, r12, r20, r21, r22,
        com_x + liq_x, com_y + liq_y, com_z,
    )
    timed_out = (not settled) and (not guard_toppled) and step_i >= total_steps
    out = TrialOutcome(
        final_roll_deg=final_roll,
        final_pitch_deg=final_pitch,
        settled=settled,
        timed_out=timed_out,
        toppled=toppled,
        steps=step_i,
        contact_step=contact_step,
        sim_time_s=step_i * dt,
        backend="python",
    )
    if telemetry:
        out.telemetry = {k: np.asarray(v) for k, v in log.items()}
    return out


def _tilt_deg(nx, ny, nz):
    """Base-plane tilt (roll, pitch) in degrees from the up-axis column."""
    s = -ny
    if s > 1.0:
        s = 1.0
    elif s < -1.0:
        s = -1.0
    return math.degrees(math.asin(s)), math.degrees(math.atan2(nx, nz))


def _would_tip(n_pts, pax, pay, paz, px, py, pz,
               r00, r01, r02, r10, r11, r12, r20, r21, r22,
               cx, cy, cz):
    """Release test: centre of mass plumb beyond the downhill support point."""
    dnx = r02
    dny = r12
    norm = math.sqrt(dnx * dnx + dny * dny)
    if norm < 1e-12:
        return False
    dnx /= norm
    dny /= norm
    best = -math.inf
    for i in range(n_pts):
        qx = px + r00 * pax[i] + r01 * pay[i] + r02 * paz[i]
        qy = py + r10 * pax[i] + r11 * pay[i] + r12 * paz[i]
        proj = qx * dnx + qy * dny
        if proj > best:
            best = proj
    gx = px + r00 * cx + r01 * cy + r02 * cz
    gy = py + r10 * cx + r11 * cy + r12 * cz
    return gx * dnx + gy * dny > best

"""Hot numeric loops, each with a numba kernel and a pure-numpy twin.

The numba path is used when numba imports and ``NONSTOP_DISABLE_NUMBA`` is not
set to a truthy value. Both paths implement the same arithmetic; the numpy
twins are vectorized over carriers rather than looped.

Simulation state vector layout (length ``13 + 9 n``)::

    [load pos (3), load vel (3), quaternion w,x,y,z (4), body rate (3),
     carrier pos (3n), carrier vel (3n), integral tracking error (3n)]
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLED = os.environ.get("NONSTOP_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")
HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"

DIVERGENCE_LIMIT = 1e6
SLACK_LENGTH = 1e-9
LOAD_DIM = 13


def _njit(func):
    if HAVE_NUMBA:
        return numba.njit(cache=True)(func)
    return func


# ---------------------------------------------------------------------------
# orbit sampling


def orbit_samples_numpy(c, B, omega, lengths, times):
    """Tension and carrier speed at each time for ``f_i = c_i + B_i mu(omega t)``.

    ``c`` is ``(n, 3)``, ``B`` is ``(n, 3, 2)`` (amplitude already applied).
    Returns two ``(m, n)`` arrays.
    """
    phase = np.mod(omega * np.asarray(times, dtype=float), 2.0 * np.pi)
    mu = np.stack([np.cos(phase), np.sin(phase)], axis=1)
    mudot = omega * np.stack([-np.sin(phase), np.cos(phase)], axis=1)
    f = c[None, :, :] + np.einsum("nij,mj->mni", B, mu)
    fdot = np.einsum("nij,mj->mni", B, mudot)
    T = np.linalg.norm(f, axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = f / T[..., None]
        tangential = fdot - np.sum(fdot * q, axis=2)[..., None] * q
        speed = np.linalg.norm(tangential, axis=2) / T * lengths[None, :]
    speed = np.where(T > 0, speed, 0.0)
    return T, speed


@_njit
def _orbit_samples_jit(c, B, omega, lengths, times):
    m = times.shape[0]
    n = c.shape[0]
    T = np.empty((m, n))
    speed = np.empty((m, n))
    two_pi = 2.0 * np.pi
    for j in range(m):
        ph = (omega * times[j]) % two_pi
        c0 = np.cos(ph)
        s0 = np.sin(ph)
        for i in range(n):
            f0 = c[i, 0] + B[i, 0, 0] * c0 + B[i, 0, 1] * s0
            f1 = c[i, 1] + B[i, 1, 0] * c0 + B[i, 1, 1] * s0
            f2 = c[i, 2] + B[i, 2, 0] * c0 + B[i, 2, 1] * s0
            d0 = omega * (-B[i, 0, 0] * s0 + B[i, 0, 1] * c0)
            d1 = omega * (-B[i, 1, 0] * s0 + B[i, 1, 1] * c0)
            d2 = omega * (-B[i, 2, 0] * s0 + B[i, 2, 1] * c0)
            t = np.sqrt(f0 * f0 + f1 * f1 + f2 * f2)
            T[j, i] = t
            if t > 0.0:
                q0 = f0 / t
                q1 = f1 / t
                q2 = f2 / t
                dot = d0 * q0 + d1 * q1 + d2 * q2
                g0 = d0 - dot * q0
                g1 = d1 - dot * q1
                g2 = d2 - dot * q2
                speed[j, i] = np.sqrt(g0 * g0 + g1 * g1 + g2 * g2) / t * lengths[i]
            else:
                speed[j, i] = 0.0
    return T, speed


def orbit_samples_numba(c, B, omega, lengths, times):
    return _orbit_samples_jit(
        np.ascontiguousarray(c, dtype=np.float64),
        np.ascontiguousarray(B, dtype=np.float64),
        float(omega),
        np.ascontiguousarray(lengths, dtype=np.float64),
        np.ascontiguousarray(times, dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# coupled load / cable / carrier dynamics


def _quat_to_rot_numpy(q):
    w, x, y, z = q / np.sqrt(q @ q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def _cable_forces_numpy(y, b, n, Kc, Bc, l0, active):
    pL = y[0:3]
    vL = y[3:6]
    R = _quat_to_rot_numpy(y[6:10])
    om = y[10:13]
    pc = y[13 : 13 + 3 * n].reshape(n, 3)
    vc = y[13 + 3 * n : 13 + 6 * n].reshape(n, 3)
    rb = b @ R.T
    attach = pL + rb
    attach_vel = vL + np.cross(om, b) @ R.T
    d = pc - attach
    L = np.sqrt(np.sum(d * d, axis=1))
    safe = L >= SLACK_LENGTH
    u = np.zeros_like(d)
    u[safe] = d[safe] / L[safe, None]
    s = L - l0
    sdot = np.sum(u * (vc - attach_vel), axis=1)
    T = np.where(s > 0.0, np.maximum(0.0, Kc * s + Bc * sdot), 0.0) * active
    return T[:, None] * u, T, R


def rhs_numpy(y, pd, vd, p):
    """Time derivative of the full state for desired carrier states ``pd, vd``."""
    n = p["b"].shape[0]
    F, _, R = _cable_forces_numpy(y, p["b"], n, p["Kc"], p["Bc"], p["l0"], p["active"])
    vL = y[3:6]
    om = y[10:13]
    qt = y[6:10]
    pc = y[13 : 13 + 3 * n].reshape(n, 3)
    vc = y[13 + 3 * n : 13 + 6 * n].reshape(n, 3)
    ei = y[13 + 6 * n :].reshape(n, 3)

    dy = np.empty_like(y)
    dy[0:3] = vL
    dy[3:6] = F.sum(axis=0) / p["mass"]
    dy[5] -= p["g"]
    w, x, yq, z = qt
    ox, oy, oz = om
    dy[6] = -0.5 * (x * ox + yq * oy + z * oz)
    dy[7] = 0.5 * (w * ox + yq * oz - z * oy)
    dy[8] = 0.5 * (w * oy + z * ox - x * oz)
    dy[9] = 0.5 * (w * oz + x * oy - yq * ox)
    tau = np.cross(p["b"], F @ R).sum(axis=0)
    I = p["inertia"]
    dy[10:13] = p["inertia_inv"] @ (tau - np.cross(om, I @ om))

    free = (1.0 - p["pinned"])[:, None]
    e = pd - pc
    edot = vd - vc
    u = -F + edot @ p["Kd"].T + e @ p["Kp"].T + ei @ p["Ki"].T
    dy[13 : 13 + 3 * n] = (vc * free).reshape(-1)
    dy[13 + 3 * n : 13 + 6 * n] = ((u @ p["Minv"].T) * free).reshape(-1)
    dy[13 + 6 * n :] = (e * free).reshape(-1)
    return dy


def _normalize_quat(y):
    y[6:10] /= np.sqrt(y[6:10] @ y[6:10])


def integrate_numpy(y0, desired_p, desired_v, dt, steps, record_every, p):
    """Fixed-step RK4. ``desired_*`` are sampled on the half-step grid.

    Returns ``(states, tensions, status)`` where ``status`` is ``-1`` on
    success or the index of the step whose result diverged.
    """
    _check_grid(np.asarray(y0), np.asarray(desired_p), np.asarray(desired_v), steps, record_every, p)
    n = p["b"].shape[0]
    nrec = steps // record_every + 1
    states = np.empty((nrec, y0.size))
    tensions = np.empty((nrec, n))
    y = y0.astype(float).copy()
    states[0] = y
    tensions[0] = _cable_forces_numpy(y, p["b"], n, p["Kc"], p["Bc"], p["l0"], p["active"])[1]
    h = dt
    rec = 1
    for k in range(steps):
        j = 2 * k
        k1 = rhs_numpy(y, desired_p[j], desired_v[j], p)
        k2 = rhs_numpy(y + 0.5 * h * k1, desired_p[j + 1], desired_v[j + 1], p)
        k3 = rhs_numpy(y + 0.5 * h * k2, desired_p[j + 1], desired_v[j + 1], p)
        k4 = rhs_numpy(y + h * k3, desired_p[j + 2], desired_v[j + 2], p)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _normalize_quat(y)
        if not np.all(np.abs(y) < DIVERGENCE_LIMIT):
            return states[:rec], tensions[:rec], k
        if (k + 1) % record_every == 0:
            states[rec] = y
            tensions[rec] = _cable_forces_numpy(y, p["b"], n, p["Kc"], p["Bc"], p["l0"], p["active"])[1]
            rec += 1
    return states, tensions, -1


@_njit
def _cable_forces_jit(y, b, Kc, Bc, l0, active, F, T, R):
    n = b.shape[0]
    qw, qx, qy, qz = y[6], y[7], y[8], y[9]
    qn = np.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
    qw /= qn
    qx /= qn
    qy /= qn
    qz /= qn
    R[0, 0] = 1 - 2 * (qy * qy + qz * qz)
    R[0, 1] = 2 * (qx * qy - qw * qz)
    R[0, 2] = 2 * (qx * qz + qw * qy)
    R[1, 0] = 2 * (qx * qy + qw * qz)
    R[1, 1] = 1 - 2 * (qx * qx + qz * qz)
    R[1, 2] = 2 * (qy * qz - qw * qx)
    R[2, 0] = 2 * (qx * qz - qw * qy)
    R[2, 1] = 2 * (qy * qz + qw * qx)
    R[2, 2] = 1 - 2 * (qx * qx + qy * qy)
    ox, oy, oz = y[10], y[11], y[12]
    for i in range(n):
        bx, by, bz = b[i, 0], b[i, 1], b[i, 2]
        # body-frame velocity of the attachment point, omega x b
        wx = oy * bz - oz * by
        wy = oz * bx - ox * bz
        wz = ox * by - oy * bx
        d = np.empty(3)
        dv = np.empty(3)
        for r in range(3):
            a = y[r] + R[r, 0] * bx + R[r, 1] * by + R[r, 2] * bz
            av = y[3 + r] + R[r, 0] * wx + R[r, 1] * wy + R[r, 2] * wz
            d[r] = y[13 + 3 * i + r] - a
            dv[r] = y[13 + 3 * n + 3 * i + r] - av
        L = np.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
        if L >= SLACK_LENGTH:
            u0 = d[0] / L
            u1 = d[1] / L
            u2 = d[2] / L
        else:
            u0 = 0.0
            u1 = 0.0
            u2 = 0.0
        s = L - l0
        t = 0.0
        if s > 0.0:
            t = Kc * s + Bc * (u0 * dv[0] + u1 * dv[1] + u2 * dv[2])
            if t < 0.0:
                t = 0.0
        t *= active[i]
        T[i] = t
        F[i, 0] = t * u0
        F[i, 1] = t * u1
        F[i, 2] = t * u2


@_njit
def _rhs_jit(y, pd, vd, b, mass, g, inertia, inertia_inv, Kc, Bc, l0, Minv, Kd, Kp, Ki, active, pinned, dy, F, T, R):
    n = b.shape[0]
    _cable_forces_jit(y, b, Kc, Bc, l0, active, F, T, R)
    for r in range(3):
        dy[r] = y[3 + r]
    fx = 0.0
    fy = 0.0
    fz = 0.0
    tx = 0.0
    ty = 0.0
    tz = 0.0
    for i in range(n):
        fx += F[i, 0]
        fy += F[i, 1]
        fz += F[i, 2]
        # R^T F in body frame, then b x (R^T F)
        b0 = R[0, 0] * F[i, 0] + R[1, 0] * F[i, 1] + R[2, 0] * F[i, 2]
        b1 = R[0, 1] * F[i, 0] + R[1, 1] * F[i, 1] + R[2, 1] * F[i, 2]
        b2 = R[0, 2] * F[i, 0] + R[1, 2] * F[i, 1] + R[2, 2] * F[i, 2]
        tx += b[i, 1] * b2 - b[i, 2] * b1
        ty += b[i, 2] * b0 - b[i, 0] * b2
        tz += b[i, 0] * b1 - b[i, 1] * b0
    dy[3] = fx / mass
    dy[4] = fy / mass
    dy[5] = fz / mass - g
    w, x, yq, z = y[6], y[7], y[8], y[9]
    ox, oy, oz = y[10], y[11], y[12]
    dy[6] = -0.5 * (x * ox + yq * oy + z * oz)
    dy[7] = 0.5 * (w * ox + yq * oz - z * oy)
    dy[8] = 0.5 * (w * oy + z * ox - x * oz)
    dy[9] = 0.5 * (w * oz + x * oy - yq * ox)
    h0 = inertia[0, 0] * ox + inertia[0, 1] * oy + inertia[0, 2] * oz
    h1 = inertia[1, 0] * ox + inertia[1, 1] * oy + inertia[1, 2] * oz
    h2 = inertia[2, 0] * ox + inertia[2, 1] * oy + inertia[2, 2] * oz
    m0 = tx - (oy * h2 - oz * h1)
    m1 = ty - (oz * h0 - ox * h2)
    m2 = tz - (ox * h1 - oy * h0)
    for r in range(3):
        dy[10 + r] = inertia_inv[r, 0] * m0 + inertia_inv[r, 1] * m1 + inertia_inv[r, 2] * m2

    base_p = 13
    base_v = 13 + 3 * n
    base_e = 13 + 6 * n
    e = np.empty(3)
    ed = np.empty(3)
    ui = np.empty(3)
    for i in range(n):
        free = 1.0 - pinned[i]
        for r in range(3):
            e[r] = pd[i, r] - y[base_p + 3 * i + r]
            ed[r] = vd[i, r] - y[base_v + 3 * i + r]
        for r in range(3):
            acc = -F[i, r]
            for c in range(3):
                acc += Kd[r, c] * ed[c] + Kp[r, c] * e[c] + Ki[r, c] * y[base_e + 3 * i + c]
            ui[r] = acc
        for r in range(3):
            a = Minv[r, 0] * ui[0] + Minv[r, 1] * ui[1] + Minv[r, 2] * ui[2]
            dy[base_p + 3 * i + r] = y[base_v + 3 * i + r] * free
            dy[base_v + 3 * i + r] = a * free
            dy[base_e + 3 * i + r] = e[r] * free


@_njit
def _integrate_jit(y0, desired_p, desired_v, dt, steps, record_every, b, mass, g, inertia, inertia_inv,
                   Kc, Bc, l0, Minv, Kd, Kp, Ki, active, pinned):
    n = b.shape[0]
    m = y0.shape[0]
    nrec = steps // record_every + 1
    states = np.empty((nrec, m))
    tensions = np.empty((nrec, n))
    F = np.empty((n, 3))
    T = np.empty(n)
    R = np.empty((3, 3))
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    y = y0.copy()
    states[0, :] = y
    _cable_forces_jit(y, b, Kc, Bc, l0, active, F, T, R)
    tensions[0, :] = T
    rec = 1
    h = dt
    for k in range(steps):
        j = 2 * k
        _rhs_jit(y, desired_p[j], desired_v[j], b, mass, g, inertia, inertia_inv, Kc, Bc, l0, Minv, Kd, Kp, Ki,
                 active, pinned, k1, F, T, R)
        for r in range(m):
            tmp[r] = y[r] + 0.5 * h * k1[r]
        _rhs_jit(tmp, desired_p[j + 1], desired_v[j + 1], b, mass, g, inertia, inertia_inv, Kc, Bc, l0, Minv,
                 Kd, Kp, Ki, active, pinned, k2, F, T, R)
        for r in range(m):
            tmp[r] = y[r] + 0.5 * h * k2[r]
        _rhs_jit(tmp, desired_p[j + 1], desired_v[j + 1], b, mass, g, inertia, inertia_inv, Kc, Bc, l0, Minv,
                 Kd, Kp, Ki, active, pinned, k3, F, T, R)
        for r in range(m):
            tmp[r] = y[r] + h * k3[r]
        _rhs_jit(tmp, desired_p[j + 2], desired_v[j + 2], b, mass, g, inertia, inertia_inv, Kc, Bc, l0, Minv,
                 Kd, Kp, Ki, active, pinned, k4, F, T, R)
        ok = True
        for r in range(m):
            y[r] = y[r] + (h / 6.0) * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r])
        qn = np.sqrt(y[6] * y[6] + y[7] * y[7] + y[8] * y[8] + y[9] * y[9])
        for r in range(6, 10):
            y[r] /= qn
        for r in range(m):
            if not (abs(y[r]) < DIVERGENCE_LIMIT):
                ok = False
        if not ok:
            return states[:rec], tensions[:rec], k
        if (k + 1) % record_every == 0:
            states[rec, :] = y
            _cable_forces_jit(y, b, Kc, Bc, l0, active, F, T, R)
            tensions[rec, :] = T
            rec += 1
    return states, tensions, -1


_PARAM_ORDER = ("b", "mass", "g", "inertia", "inertia_inv", "Kc", "Bc", "l0", "Minv", "Kd", "Kp", "Ki",
                "active", "pinned")


def _check_grid(y0, desired_p, desired_v, steps, record_every, p):
    n = p["b"].shape[0]
    shape = (2 * steps + 1, n, 3)
    if desired_p.shape != shape or desired_v.shape != shape:
        raise ValueError(f"desired states must have shape {shape}, got {desired_p.shape} and {desired_v.shape}")
    if y0.shape != (LOAD_DIM + 9 * n,):
        raise ValueError(f"state vector must have length {LOAD_DIM + 9 * n}")
    if steps < 0 or record_every < 1:
        raise ValueError("steps must be >= 0 and record_every >= 1")


def integrate_numba(y0, desired_p, desired_v, dt, steps, record_every, p):
    _check_grid(np.asarray(y0), np.asarray(desired_p), np.asarray(desired_v), steps, record_every, p)
    args = []
    for name in _PARAM_ORDER:
        v = p[name]
        args.append(np.ascontiguousarray(v, dtype=np.float64) if isinstance(v, np.ndarray) else float(v))
    return _integrate_jit(
        np.ascontiguousarray(y0, dtype=np.float64),
        np.ascontiguousarray(desired_p, dtype=np.float64),
        np.ascontiguousarray(desired_v, dtype=np.float64),
        float(dt),
        int(steps),
        int(record_every),
        *args,
    )


def cable_tensions(y, p):
    """Cable tensions ``(n,)`` and forces on the load ``(n, 3)`` at state ``y``."""
    n = p["b"].shape[0]
    F, T, _ = _cable_forces_numpy(np.asarray(y, dtype=float), p["b"], n, p["Kc"], p["Bc"], p["l0"], p["active"])
    return T, F


if USE_NUMBA:
    orbit_samples = orbit_samples_numba
    integrate = integrate_numba
else:
    orbit_samples = orbit_samples_numpy
    integrate = integrate_numpy

"""Compiled right-hand sides and fixed-step RK4 loops.

State layout is ``(r, phi, theta, v_r, v_phi, v_theta, m)`` for the
spherical model and ``(x, y, z, vx, vy, vz, m)`` for the Cartesian one.
``model == 1`` swaps the Keplerian field for a flat planet with uniform
gravity; ``r``, ``phi``, ``theta`` then hold height, cross-track and
downrange lengths.
"""

import math

import numpy as np
from numba import njit

KEPLER = 0
UNIFORM = 1


@njit(cache=True)
def rhs_spherical(y, thrust, ur, uphi, uth, mu, ve, model, g_flat, out):
    r = y[0]
    phi = y[1]
    vr = y[3]
    vphi = y[4]
    vth = y[5]
    m = y[6]
    acc = thrust / m
    if model == KEPLER:
        tphi = math.tan(phi)
        out[0] = vr
        out[1] = vphi / r
        out[2] = vth / (r * math.cos(phi))
        out[3] = (vphi * vphi + vth * vth) / r - mu / (r * r) + acc * ur
        out[4] = -vphi * vr / r - vth * vth / r * tphi + acc * uphi
        out[5] = -vth * vr / r + vphi * vth / r * tphi + acc * uth
    else:
        out[0] = vr
        out[1] = vphi
        out[2] = vth
        out[3] = -g_flat + acc * ur
        out[4] = acc * uphi
        out[5] = acc * uth
    out[6] = -thrust / ve


@njit(cache=True)
def _bilinear_dir(t, b, c):
    ux = c[0] * t + b[0]
    uy = c[1] * t + b[1]
    uz = c[2] * t + b[2]
    n = math.sqrt(ux * ux + uy * uy + uz * uz)
    return ux / n, uy / n, uz / n


@njit(cache=True)
def _rk4_bilinear_step(y, t, h, b, c, thrust, mu, ve, model, g_flat, k1, k2, k3, k4, tmp):
    ur, uphi, uth = _bilinear_dir(t, b, c)
    rhs_spherical(y, thrust, ur, uphi, uth, mu, ve, model, g_flat, k1)
    for i in range(7):
        tmp[i] = y[i] + 0.5 * h * k1[i]
    ur, uphi, uth = _bilinear_dir(t + 0.5 * h, b, c)
    rhs_spherical(tmp, thrust, ur, uphi, uth, mu, ve, model, g_flat, k2)
    for i in range(7):
        tmp[i] = y[i] + 0.5 * h * k2[i]
    rhs_spherical(tmp, thrust, ur, uphi, uth, mu, ve, model, g_flat, k3)
    for i in range(7):
        tmp[i] = y[i] + h * k3[i]
    ur, uphi, uth = _bilinear_dir(t + h, b, c)
    rhs_spherical(tmp, thrust, ur, uphi, uth, mu, ve, model, g_flat, k4)
    for i in range(7):
        y[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(cache=True)
def propagate_bilinear(y0, t0, t1, step, b, c, thrust, mu, ve, model, g_flat, record):
    """RK4 from ``t0`` to ``t1`` (either direction) under ``u = (ct+b)/|ct+b|``.

    The span is split into ``ceil(|t1-t0|/step)`` equal steps so the grid
    always lands on ``t1``. Returns the final state and, if ``record``,
    an ``(n+1, 8)`` array of ``(t, state)`` rows.
    """
    span = t1 - t0
    n = int(math.ceil(abs(span) / step - 1e-9))
    if n < 1:
        n = 1
    h = span / n
    y = y0.copy()
    k1 = np.empty(7)
    k2 = np.empty(7)
    k3 = np.empty(7)
    k4 = np.empty(7)
    tmp = np.empty(7)
    if record:
        out = np.empty((n + 1, 8))
    else:
        out = np.empty((0, 8))
    t = t0
    if record:
        out[0, 0] = t
        out[0, 1:] = y
    for i in range(n):
        _rk4_bilinear_step(y, t, h, b, c, thrust, mu, ve, model, g_flat, k1, k2, k3, k4, tmp)
        t = t0 + (i + 1) * h
        if record:
            out[i + 1, 0] = t
            out[i + 1, 1:] = y
    return y, out


@njit(cache=True)
def rhs_cartesian(y, ax, ay, az, total_mode, thrust, mu, ve, out):
    """Cartesian derivative.

    With ``total_mode`` the commanded vector is the total acceleration and
    gravity is already inside it; otherwise it is the thrust-specific
    acceleration and central gravity is added.
    """
    out[0] = y[3]
    out[1] = y[4]
    out[2] = y[5]
    if total_mode:
        out[3] = ax
        out[4] = ay
        out[5] = az
    else:
        rn = math.sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2])
        k = -mu / (rn * rn * rn)
        out[3] = ax + k * y[0]
        out[4] = ay + k * y[1]
        out[5] = az + k * y[2]
    out[6] = -thrust / ve

"""Hot kernels: profile/mollifier evaluation, the regularized geodesic field
and a Dormand-Prince 5(4) stepper for the wave zone.

Everything here is scalar/array code numba can compile. Packing convention
shared by all kernels:

``fp``  float64[5]  = (eps, sigma, a**2, e, t_force0)
``ip``  int64[3]    = (profile_kind, mollifier_kind, check_guard)
``pp``  profile parameters, ``mp`` mollifier parameters
``fa``  polynomial coefficients (in t - t_force0) of the U forcing
``fc``  (m, 3) polynomial coefficients of the Z forcing
"""

from __future__ import annotations

import math

import numpy as np

from ._jit import jit

PROFILE_KINDS = {"zero": 0, "constant": 1, "quadratic": 2, "gaussian": 3}
MOLLIFIER_KINDS = {"bump": 0, "polynomial": 1, "skewed_bump": 2}

STATUS_EXIT = 0
STATUS_BOUNCE = 1
STATUS_GUARD = 2
STATUS_UNDERFLOW = 3
STATUS_CAPACITY = 4
STATUS_TIME_LIMIT = 5

# Dormand-Prince 5(4) tableau.
DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
DP_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
])
DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
DP_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])


@jit
def profile_eval(kind, p, z2, z3, z4):
    """Return ``(H, dH/dZ2, dH/dZ3, dH/dZ4)`` at one point."""
    if kind == 1:
        return p[0], 0.0, 0.0, 0.0
    if kind == 2:
        return (p[0] * z2 * z2 + p[1] * z3 * z3 + p[2] * z4 * z4,
                2.0 * p[0] * z2, 2.0 * p[1] * z3, 2.0 * p[2] * z4)
    if kind == 3:
        w2 = p[1] * p[1]
        h = p[0] * math.exp(-(z2 * z2 + z3 * z3 + z4 * z4) / w2)
        f = -2.0 * h / w2
        return h, f * z2, f * z3, f * z4
    return 0.0, 0.0, 0.0, 0.0


@jit
def mollifier_eval(kind, m, x):
    """Return ``(rho(x), rho'(x))``; both vanish for ``|x| >= 1``."""
    if x <= -1.0 or x >= 1.0:
        return 0.0, 0.0
    s = 1.0 - x * x
    if kind == 1:
        n = m[1]
        return m[0] * s ** n, -2.0 * n * x * m[0] * s ** (n - 1.0)
    g = math.exp(-1.0 / s)
    dg = -2.0 * x * g / (s * s)
    if kind == 2:
        k = m[1]
        return m[0] * (1.0 + k * x) * g, m[0] * (k * g + (1.0 + k * x) * dg)
    return m[0] * g, m[0] * dg


@jit
def _poly(coeffs, tau):
    acc = 0.0
    for i in range(coeffs.shape[0] - 1, -1, -1):
        acc = acc * tau + coeffs[i]
    return acc


@jit
def rhs_kernel(t, y, out, fp, ip, pp, mp, fa, fc):
    """Regularized geodesic field on the 10-dimensional phase space.

    Writes ``d/dt (pos, vel)`` into ``out``. Returns False when the
    denominator ``N = sigma a^2 - U^2 H delta_eps(U)`` leaves the side of its
    background value, i.e. ``sigma N < a^2/4`` (only checked if ``ip[2]`` is
    nonzero).
    """
    eps = fp[0]
    sigma = fp[1]
    a2 = fp[2]
    e = fp[3]
    u = y[0]
    v = y[1]
    z2 = y[2]
    z3 = y[3]
    z4 = y[4]
    du = y[5]
    dz2 = y[7]
    dz3 = y[8]
    dz4 = y[9]

    rho, drho = mollifier_eval(ip[1], mp, u / eps)
    d = rho / eps
    dp = drho / (eps * eps)
    h, h2, h3, h4 = profile_eval(ip[0], pp, z2, z3, z4)

    n = sigma * a2 - u * u * h * d
    dh_z = h2 * z2 + h3 * z3 + h4 * z4
    dh_zdot = h2 * dz2 + h3 * dz3 + h4 * dz4
    g = dh_z * d + h * dp * u
    # (H delta U)^. expanded by the chain rule
    hdu_dot = dh_zdot * d * u + h * dp * du * u + h * d * du
    lam = (e + 0.5 * du * du * g - du * hdu_dot) / n

    tau = t - fp[4]
    fu = _poly(fa, tau)
    c2 = 0.0
    c3 = 0.0
    c4 = 0.0
    for i in range(fc.shape[0] - 1, -1, -1):
        c2 = c2 * tau + fc[i, 0]
        c3 = c3 * tau + fc[i, 1]
        c4 = c4 * tau + fc[i, 2]

    kick = 0.5 * d * du * du
    for i in range(5):
        out[i] = y[5 + i]
    out[5] = -lam * u + fu
    out[6] = 0.5 * h * dp * du * du + dh_zdot * d * du - lam * (v + h * d * u)
    out[7] = kick * h2 - lam * z2 + c2
    out[8] = kick * h3 - lam * z3 + c3
    out[9] = sigma * kick * h4 - lam * z4 + c4
    if ip[2] != 0 and sigma * n < 0.25 * a2:
        return False
    return True


@jit
def dopri_step(t, y, h, k1, K, y_new, rtol, atol, fp, ip, pp, mp, fa, fc):
    """One Dormand-Prince step from ``(t, y)`` with ``k1 = f(t, y)``.

    Fills the stage matrix ``K`` (7 x 10, last row is ``f(t + h, y_new)``)
    and ``y_new``. Returns ``(ok, error_norm)``.
    """
    ndim = y.shape[0]
    ytmp = np.empty(ndim)
    for j in range(ndim):
        K[0, j] = k1[j]
    ok = True
    for s in range(1, 6):
        for j in range(ndim):
            acc = 0.0
            for r in range(s):
                acc += DP_A[s, r] * K[r, j]
            ytmp[j] = y[j] + h * acc
        row = K[s]
        ok = rhs_kernel(t + DP_C[s] * h, ytmp, row, fp, ip, pp, mp, fa, fc) and ok
    for j in range(ndim):
        acc = 0.0
        for r in range(6):
            acc += DP_B[r] * K[r, j]
        y_new[j] = y[j] + h * acc
    row = K[6]
    ok = rhs_kernel(t + h, y_new, row, fp, ip, pp, mp, fa, fc) and ok
    err2 = 0.0
    for j in range(ndim):
        acc = 0.0
        for r in range(7):
            acc += DP_E[r] * K[r, j]
        scale = atol + rtol * max(abs(y[j]), abs(y_new[j]))
        q = h * acc / scale
        err2 += q * q
    return ok, math.sqrt(err2 / ndim)


@jit
def project_onto_hyperboloid(y, sigma, a2):
    """Newton-project the position onto F = 0, then make the velocity tangent."""
    for _ in range(3):
        f = -2.0 * y[0] * y[1] + y[2] * y[2] + y[3] * y[3] + sigma * y[4] * y[4] - sigma * a2
        g0 = -2.0 * y[1]
        g1 = -2.0 * y[0]
        g2 = 2.0 * y[2]
        g3 = 2.0 * y[3]
        g4 = 2.0 * sigma * y[4]
        gg = g0 * g0 + g1 * g1 + g2 * g2 + g3 * g3 + g4 * g4
        c = f / gg
        y[0] -= c * g0
        y[1] -= c * g1
        y[2] -= c * g2
        y[3] -= c * g3
        y[4] -= c * g4
    g0 = -2.0 * y[1]
    g1 = -2.0 * y[0]
    g2 = 2.0 * y[2]
    g3 = 2.0 * y[3]
    g4 = 2.0 * sigma * y[4]
    gg = g0 * g0 + g1 * g1 + g2 * g2 + g3 * g3 + g4 * g4
    c = (g0 * y[5] + g1 * y[6] + g2 * y[7] + g3 * y[8] + g4 * y[9]) / gg
    y[5] -= c * g0
    y[6] -= c * g1
    y[7] -= c * g2
    y[8] -= c * g3
    y[9] -= c * g4


@jit
def zone_kernel(t0, y0, side, width, h_init, h_max, t_limit, rtol, atol,
                fp, ip, pp, mp, fa, fc, fixed_h, project, cap):
    """Integrate from ``(t0, y0)`` until ``side * U`` reaches ``width``.

    ``side`` is +1 when the exit surface is ``U = +width``. If ``fixed_h`` is
    non-empty its entries are used as step sizes (the last one repeated) and
    error control is off. Returns ``(status, n, ts, ys, Ks)``; on exit or
    bounce the last stored step is the one that crossed the surface.
    """
    ndim = y0.shape[0]
    ts = np.empty(cap + 1)
    ys = np.empty((cap + 1, ndim))
    Ks = np.empty((cap, 7, ndim))
    ts[0] = t0
    for j in range(ndim):
        ys[0, j] = y0[j]
    y = y0.copy()
    y_new = np.empty(ndim)
    k1 = np.empty(ndim)
    K = np.empty((7, ndim))
    if not rhs_kernel(t0, y, k1, fp, ip, pp, mp, fa, fc):
        return STATUS_GUARD, 0, ts, ys, Ks
    t = t0
    h = min(h_init, h_max)
    n = 0
    nfixed = fixed_h.shape[0]
    inside = side * y0[0] > -width
    while True:
        if n >= cap:
            return STATUS_CAPACITY, n, ts, ys, Ks
        if t >= t_limit:
            return STATUS_TIME_LIMIT, n, ts, ys, Ks
        if nfixed > 0:
            h = fixed_h[n] if n < nfixed else fixed_h[nfixed - 1]
        ok, err = dopri_step(t, y, h, k1, K, y_new, rtol, atol, fp, ip, pp, mp, fa, fc)
        if not ok:
            return STATUS_GUARD, n, ts, ys, Ks
        if nfixed == 0 and err > 1.0:
            h *= max(0.2, 0.9 * err ** -0.2)
            if h < 1e-15 * max(abs(t), width):
                return STATUS_UNDERFLOW, n, ts, ys, Ks
            continue
        if project:
            project_onto_hyperboloid(y_new, fp[1], fp[2])
            row = K[6]
            rhs_kernel(t + h, y_new, row, fp, ip, pp, mp, fa, fc)
        for r in range(7):
            for j in range(ndim):
                Ks[n, r, j] = K[r, j]
        t += h
        n += 1
        ts[n] = t
        for j in range(ndim):
            ys[n, j] = y_new[j]
            y[j] = y_new[j]
            k1[j] = K[6, j]
        u = side * y[0]
        if u >= width:
            return STATUS_EXIT, n, ts, ys, Ks
        if u > -width:
            inside = True
        elif inside:
            return STATUS_BOUNCE, n, ts, ys, Ks
        if nfixed == 0:
            factor = 10.0 if err == 0.0 else min(10.0, max(0.2, 0.9 * err ** -0.2))
            h = min(h * factor, h_max)


@jit
def dense_eval(ts, ys, Ks, taus, fp, ip, pp, mp, fa, fc):
    """States at the times ``taus`` inside an accepted step sequence.

    Each point is reached by a fresh Dormand-Prince sub-step from the left
    node of its step, so the result is 5th-order accurate. The usual
    4th-order polynomial interpolant loses too much of the constraint
    tangency where V' is of size 1/eps.
    """
    m = taus.shape[0]
    ndim = ys.shape[1]
    n = ts.shape[0] - 1
    out = np.empty((m, ndim))
    K = np.empty((7, ndim))
    y_new = np.empty(ndim)
    for i in range(m):
        tau = taus[i]
        k = np.searchsorted(ts, tau, side="right") - 1
        if k < 0:
            k = 0
        if k > n - 1:
            k = n - 1
        h = tau - ts[k]
        if h == 0.0:
            for j in range(ndim):
                out[i, j] = ys[k, j]
            continue
        if tau == ts[k + 1]:
            for j in range(ndim):
                out[i, j] = ys[k + 1, j]
            continue
        dopri_step(ts[k], ys[k], h, Ks[k, 0], K, y_new, 1.0, 1.0, fp, ip, pp, mp, fa, fc)
        for j in range(ndim):
            out[i, j] = y_new[j]
    return out

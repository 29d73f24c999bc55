"""Compiled geodesic integrators.

The state is ``y = [x, q]`` where ``q`` is the velocity ``v`` for most
metrics and the momentum ``p = G v`` for the Inverse Monge metric. In the
velocity form ``dy = [v, a(x, v)]``. The Inverse Monge velocity grows like
sqrt(L) along the gradient while the part that fixes the speed stays O(1),
so in float64 its speed cannot be resolved from ``v`` once L exceeds ~1e26;
the momentum stays O(1) and gives the well-conditioned Hamiltonian system
``dx = p + a2 (g.p) g``, ``dp = -a2 (g.p) H p``. ``advance`` steps from a
saved integrator state until it passes ``t_goal`` and returns the new knots.
Knots are never clipped to ``t_goal``, so the knot sequence depends only on
the initial state and the integrator settings, not on the query pattern.
"""
import math

import numpy as np

from ._jit import njit
from ._metric_kernels import (EUCLIDEAN, GENERATIVE, INVERSE_GENERATIVE, INVERSE_MONGE, MONGE,
                              _gen_logf, gen_dlogf_coef, metric_accel, metric_norm_sq)
from ._target_kernels import GMM, gmm_grad_hvp_into, target_derivs, target_grad_hvp

EULER = 0
RK4 = 1
DOPRI5_FIXED = 2
DOPRI5_ADAPTIVE = 3

OK = 0
NONFINITE = 1
BUDGET = 2
STEP_UNDERFLOW = 3
SPEED_DRIFT = 4

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 5.0
PI_BETA = 0.04
PI_ALPHA = 0.2 - 0.75 * PI_BETA

# Dormand-Prince 5(4)
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                          22 / 525, -1 / 40)


@njit
def uses_momentum(mk):
    return mk == INVERSE_MONGE


@njit
def rhs(mk, mp, tk, tp, y):
    D = y.shape[0] // 2
    out = np.empty_like(y)
    x = y[:D]
    q = y[D:]
    if uses_momentum(mk):
        _, g, hq = target_grad_hvp(tk, tp, x, q)
        gp = np.dot(g, q)
        out[:D] = q + mp[0] * gp * g
        out[D:] = -mp[0] * gp * hq
        return out
    out[:D] = q
    out[D:] = metric_accel(mk, mp, tk, tp, x, q)
    return out


@njit
def _fast(mk, tk):
    return tk == GMM and mk <= INVERSE_GENERATIVE


@njit
def rhs_into(mk, mp, tk, tp, y, out, g, hv, w):
    """``rhs`` written into ``out``; Gaussian mixtures allocate nothing.

    ``g`` and ``hv`` are scratch of length D, ``w`` of length K. On the fast
    path ``g`` is left holding the gradient at ``y`` and log p is returned.
    """
    D = y.shape[0] // 2
    if not _fast(mk, tk):
        out[:] = rhs(mk, mp, tk, tp, y)
        return np.nan
    x = y[:D]
    q = y[D:]
    if mk == EUCLIDEAN:
        for i in range(D):
            out[i] = q[i]
            out[D + i] = 0.0
        return np.nan
    lp = gmm_grad_hvp_into(tp, x, q, g, hv, w)
    a2 = mp[0]
    gq = 0.0
    gg = 0.0
    qq = 0.0
    for i in range(D):
        gq += g[i] * q[i]
        gg += g[i] * g[i]
        qq += q[i] * q[i]
    if mk == INVERSE_MONGE:
        for i in range(D):
            out[i] = q[i] + a2 * gq * g[i]
            out[D + i] = -a2 * gq * hv[i]
        return lp
    for i in range(D):
        out[i] = q[i]
    if mk == MONGE:
        qhq = 0.0
        for i in range(D):
            qhq += q[i] * hv[i]
        c = -(a2 / (1.0 + a2 * gg)) * qhq
        for i in range(D):
            out[D + i] = c * g[i]
        return lp
    # generative family: a = 0.5 |v|^2 grad log f - (v . grad log f) v
    c = gen_dlogf_coef(mk, mp, lp)
    for i in range(D):
        out[D + i] = 0.5 * qq * c * g[i] - c * gq * q[i]
    return lp


@njit
def to_native(mk, mp, tk, tp, x, v):
    if uses_momentum(mk):
        _, g, _ = target_derivs(tk, tp, x, 1)
        L = 1.0 + mp[0] * np.dot(g, g)
        return v - (mp[0] / L) * np.dot(g, v) * g
    return v.copy()


@njit
def velocity(mk, mp, tk, tp, x, q):
    if uses_momentum(mk):
        _, g, _ = target_derivs(tk, tp, x, 1)
        return q + mp[0] * np.dot(g, q) * g
    return q.copy()


@njit
def speed_sq(mk, mp, tk, tp, x, q):
    """Squared Riemannian speed from the native state."""
    if uses_momentum(mk):
        _, g, _ = target_derivs(tk, tp, x, 1)
        return np.dot(q, q) + mp[0] * np.dot(g, q) ** 2
    return metric_norm_sq(mk, mp, tk, tp, x, q)


@njit
def _all_finite(a):
    for i in range(a.shape[0]):
        if not math.isfinite(a[i]):
            return False
    return True


@njit
def _dopri5(mk, mp, tk, tp, y, k1, h, ws, g, hv, w):
    """One Dormand-Prince step from ``y`` with FSAL slope ``k1``.

    ``ws`` is 9 x n scratch: rows 0-5 hold k2..k7, row 6 the stage input,
    row 7 the new state and row 8 the error estimate. Returns what
    ``rhs_into`` returned at the new state.
    """
    n = y.shape[0]
    k2, k3, k4, k5, k6, k7 = ws[0], ws[1], ws[2], ws[3], ws[4], ws[5]
    yt, yn, err = ws[6], ws[7], ws[8]
    for i in range(n):
        yt[i] = y[i] + h * A21 * k1[i]
    rhs_into(mk, mp, tk, tp, yt, k2, g, hv, w)
    for i in range(n):
        yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
    rhs_into(mk, mp, tk, tp, yt, k3, g, hv, w)
    for i in range(n):
        yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
    rhs_into(mk, mp, tk, tp, yt, k4, g, hv, w)
    for i in range(n):
        yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
    rhs_into(mk, mp, tk, tp, yt, k5, g, hv, w)
    for i in range(n):
        yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i]
                            + A65 * k5[i])
    rhs_into(mk, mp, tk, tp, yt, k6, g, hv, w)
    for i in range(n):
        yn[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
    lp = rhs_into(mk, mp, tk, tp, yn, k7, g, hv, w)
    for i in range(n):
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                      + E7 * k7[i])
    return lp


@njit
def _rk4(mk, mp, tk, tp, y, k1, h):
    k2 = rhs(mk, mp, tk, tp, y + 0.5 * h * k1)
    k3 = rhs(mk, mp, tk, tp, y + 0.5 * h * k2)
    k4 = rhs(mk, mp, tk, tp, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit
def _err_norm(err, y, y_new, rtol, atol):
    s = 0.0
    n = err.shape[0]
    for i in range(n):
        sc = atol + rtol * max(abs(y[i]), abs(y_new[i]))
        s += (err[i] / sc) ** 2
    return math.sqrt(s / n)


@njit
def initial_step(mk, mp, tk, tp, y, dy, rtol, atol, h_max):
    """Starting step for the adaptive pair (Hairer, Norsett and Wanner)."""
    n = y.shape[0]
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (dy[i] / sc) ** 2
    d0 = math.sqrt(d0 / n)
    d1 = math.sqrt(d1 / n)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, h_max)
    f1 = rhs(mk, mp, tk, tp, y + h0 * dy)
    d2 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(y[i])
        d2 += ((f1[i] - dy[i]) / sc) ** 2
    d2 = math.sqrt(d2 / n) / h0
    if not math.isfinite(d2):
        return h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, h_max)


@njit
def _speed_sq_at(mk, mp, tk, tp, y, g, lp):
    # g and lp are what rhs_into left behind at y on the fast path
    D = y.shape[0] // 2
    if not _fast(mk, tk):
        return speed_sq(mk, mp, tk, tp, y[:D], y[D:])
    qq = 0.0
    gq = 0.0
    for i in range(D):
        qq += y[D + i] * y[D + i]
        gq += g[i] * y[D + i]
    if mk == EUCLIDEAN:
        return qq
    if mk == MONGE or mk == INVERSE_MONGE:
        return qq + mp[0] * gq * gq
    return math.exp(_gen_logf(mk, mp, lp)) * qq


@njit
def _all_finite2(a, b):
    return _all_finite(a) and _all_finite(b)


@njit
def advance(mk, mp, tk, tp, t, y, dy, h, err_prev, t_goal, method, rtol, atol,
            h_max, speed_tol, attempts, max_attempts):
    """Integrate from the saved state until ``t >= t_goal``.

    Returns ``(ts, ys, dys, status, t, y, dy, h, err_prev, attempts)`` where the
    first three hold only the newly accepted knots.
    """
    n2 = y.shape[0]
    D = n2 // 2
    y = y.copy()
    dy = dy.copy()
    ws = np.empty((9, n2))
    g = np.empty(D)
    hv = np.empty(D)
    w = np.empty(int(tp[0]) if tk == GMM else 1)
    cap = 64
    ts = np.empty(cap)
    ys = np.empty((cap, n2))
    dys = np.empty((cap, n2))
    n = 0
    status = OK
    while t < t_goal:
        if attempts >= max_attempts:
            status = BUDGET
            break
        attempts += 1
        h_used = h
        if method == DOPRI5_ADAPTIVE or method == DOPRI5_FIXED:
            if method == DOPRI5_ADAPTIVE and h < 1e-12 * max(1.0, abs(t)):
                status = STEP_UNDERFLOW
                break
            lp = _dopri5(mk, mp, tk, tp, y, dy, h, ws, g, hv, w)
            y_new = ws[7]
            dy_new = ws[5]
            if not _all_finite2(y_new, dy_new):
                if method == DOPRI5_FIXED:
                    status = NONFINITE
                    break
                # treat as a huge error and retry smaller before giving up
                h *= FAC_MIN
                continue
            if method == DOPRI5_ADAPTIVE:
                e = _err_norm(ws[8], y, y_new, rtol, atol)
                if e > 1.0:
                    h *= max(FAC_MIN, SAFETY * e ** -0.2)
                    continue
                e = max(e, 1e-10)
                fac = SAFETY * e ** -PI_ALPHA * err_prev ** PI_BETA
                fac = min(FAC_MAX, max(FAC_MIN, fac))
                h = min(h * fac, h_max)
                err_prev = e
        else:
            if method == EULER:
                y_new = y + h * dy
            else:
                y_new = _rk4(mk, mp, tk, tp, y, dy, h)
            dy_new = ws[5]
            lp = np.nan
            if _all_finite(y_new):
                lp = rhs_into(mk, mp, tk, tp, y_new, dy_new, g, hv, w)
            if not _all_finite2(y_new, dy_new):
                status = NONFINITE
                break
        if speed_tol > 0.0:
            sp = math.sqrt(abs(_speed_sq_at(mk, mp, tk, tp, y_new, g, lp)))
            if not abs(sp - 1.0) <= speed_tol:
                status = SPEED_DRIFT
                break
        t = t + h_used
        y[:] = y_new
        dy[:] = dy_new
        if n == cap:
            cap *= 2
            ts2 = np.empty(cap)
            ys2 = np.empty((cap, n2))
            dys2 = np.empty((cap, n2))
            ts2[:n] = ts[:n]
            ys2[:n] = ys[:n]
            dys2[:n] = dys[:n]
            ts, ys, dys = ts2, ys2, dys2
        ts[n] = t
        ys[n] = y
        dys[n] = dy
        n += 1
    return ts[:n].copy(), ys[:n].copy(), dys[:n].copy(), status, t, y, dy, h, err_prev, attempts


@njit
def hermite(t0, t1, y0, y1, d0, d1, t):
    """Cubic Hermite interpolant on [t0, t1] with end slopes d0, d1."""
    hh = t1 - t0
    s = (t - t0) / hh
    s2 = s * s
    s3 = s2 * s
    h00 = 2.0 * s3 - 3.0 * s2 + 1.0
    h10 = s3 - 2.0 * s2 + s
    h01 = -2.0 * s3 + 3.0 * s2
    h11 = s3 - s2
    return h00 * y0 + h10 * hh * d0 + h01 * y1 + h11 * hh * d1


@njit
def hermite5(t0, t1, x0, x1, v0, v1, a0, a1, t):
    """Quintic Hermite of position from (x, v, a) at both ends.

    Returns the position and its derivative (the interpolated velocity).
    """
    hh = t1 - t0
    s = (t - t0) / hh
    s2 = s * s
    s3 = s2 * s
    s4 = s3 * s
    s5 = s4 * s
    h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5
    h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5
    h2 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5)
    h3 = 0.5 * (s3 - 2.0 * s4 + s5)
    h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5
    h5 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5
    d0 = (-30.0 * s2 + 60.0 * s3 - 30.0 * s4) / hh
    d1 = 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4
    d2 = 0.5 * (2.0 * s - 9.0 * s2 + 12.0 * s3 - 5.0 * s4) * hh
    d3 = 0.5 * (3.0 * s2 - 8.0 * s3 + 5.0 * s4) * hh
    d4 = -12.0 * s2 + 28.0 * s3 - 15.0 * s4
    d5 = (30.0 * s2 - 60.0 * s3 + 30.0 * s4) / hh
    hs = hh * hh
    x = h0 * x0 + h1 * hh * v0 + h2 * hs * a0 + h3 * hs * a1 + h4 * hh * v1 + h5 * x1
    v = d0 * x0 + d1 * v0 + d2 * a0 + d3 * a1 + d4 * v1 + d5 * x1
    return x, v

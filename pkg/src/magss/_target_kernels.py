"""Compiled log-density kernels.

Every target is a ``(kind, params)`` pair: an integer code plus a flat float64
parameter vector. ``target_derivs(kind, params, x, order)`` returns
``(log p, grad, hess)``; entries beyond ``order`` are empty arrays. Keeping a
single dispatcher with flat parameters lets the geodesic integrator compile
once for all targets.
"""
import math

import numpy as np

from ._jit import njit

GMM = 0
FUNNEL = 1
ROSENBROCK = 2
SQUIGGLE = 3
FIELD = 4
TRANSFORMED_MIXTURE = 5
LOGISTIC = 6

LOG_2PI = math.log(2.0 * math.pi)
LOG_PI = math.log(math.pi)


@njit
def _empty_out(D):
    return np.empty(0), np.empty((0, 0))


@njit
def _log1pexp(z):
    if z > 0.0:
        return z + math.log1p(math.exp(-z))
    return math.log1p(math.exp(z))


@njit
def _sigmoid(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@njit
def _funnel(p, x, order):
    sigma = p[0]
    mu = p[1]
    D = x.shape[0]
    xd = x[D - 1]
    e = math.exp(-xd)
    s = 0.0
    for i in range(D - 1):
        s += (x[i] - mu) ** 2
    lp = (-0.5 * (LOG_2PI + 2.0 * math.log(sigma)) - 0.5 * xd * xd / (sigma * sigma)
          - 0.5 * (D - 1) * (LOG_2PI + xd) - 0.5 * s * e)
    g, H = _empty_out(D)
    if order >= 1:
        g = np.empty(D)
        for i in range(D - 1):
            g[i] = -(x[i] - mu) * e
        g[D - 1] = -xd / (sigma * sigma) - 0.5 * (D - 1) + 0.5 * s * e
    if order >= 2:
        H = np.zeros((D, D))
        for i in range(D - 1):
            H[i, i] = -e
            H[i, D - 1] = (x[i] - mu) * e
            H[D - 1, i] = H[i, D - 1]
        H[D - 1, D - 1] = -1.0 / (sigma * sigma) - 0.5 * s * e
    return lp, g, H


@njit
def _rosenbrock(p, x, order):
    # x[0] is shared; each block is a chain x[0] -> x[c0] -> x[c0+1] -> ...
    a = p[0]
    b = p[1]
    bs = int(p[2])
    D = x.shape[0]
    nb = (D - 1) // bs
    d0 = x[0] - a
    lp = -0.5 * LOG_PI - d0 * d0
    g, H = _empty_out(D)
    if order >= 1:
        g = np.zeros(D)
        g[0] = -2.0 * d0
    if order >= 2:
        H = np.zeros((D, D))
        H[0, 0] = -2.0
    for j in range(nb):
        for i in range(bs):
            c = 1 + j * bs + i
            pr = 0 if i == 0 else c - 1
            r = x[c] - x[pr] * x[pr]
            lp += 0.5 * (math.log(b) - LOG_PI) - b * r * r
            if order >= 1:
                g[c] += -2.0 * b * r
                g[pr] += 4.0 * b * r * x[pr]
            if order >= 2:
                H[c, c] += -2.0 * b
                H[c, pr] += 4.0 * b * x[pr]
                H[pr, c] += 4.0 * b * x[pr]
                H[pr, pr] += 4.0 * b * (r - 2.0 * x[pr] * x[pr])
    return lp, g, H


@njit
def _squiggle(p, x, order):
    a = p[0]
    v1 = p[1]
    vr = p[2]
    D = x.shape[0]
    sn = math.sin(a * x[0])
    cs = math.cos(a * x[0])
    lp = -0.5 * (LOG_2PI + math.log(v1)) - 0.5 * x[0] * x[0] / v1
    su = 0.0
    for i in range(1, D):
        u = x[i] + sn
        su += u
        lp += -0.5 * (LOG_2PI + math.log(vr)) - 0.5 * u * u / vr
    g, H = _empty_out(D)
    if order >= 1:
        g = np.empty(D)
        g[0] = -x[0] / v1 - a * cs * su / vr
        for i in range(1, D):
            g[i] = -(x[i] + sn) / vr
    if order >= 2:
        H = np.zeros((D, D))
        H[0, 0] = -1.0 / v1 - ((D - 1) * a * a * cs * cs - a * a * sn * su) / vr
        for i in range(1, D):
            H[0, i] = -a * cs / vr
            H[i, 0] = H[0, i]
            H[i, i] = -1.0 / vr
    return lp, g, H


@njit
def _field(p, x, order):
    a = p[0]
    b = p[1]
    ds = p[2]
    beta = p[3]
    D = x.shape[0]
    ca = a / (2.0 * ds)
    cb = b * ds / 4.0
    smooth = x[0] * x[0] + x[D - 1] * x[D - 1]
    for i in range(1, D):
        smooth += (x[i] - x[i - 1]) ** 2
    well = 0.0
    for i in range(D):
        well += (1.0 - x[i] * x[i]) ** 2
    lp = -beta * (ca * smooth + cb * well)
    g, H = _empty_out(D)
    if order >= 1:
        g = np.empty(D)
        for i in range(D):
            left = x[i - 1] if i > 0 else 0.0
            right = x[i + 1] if i < D - 1 else 0.0
            g[i] = -beta * (2.0 * ca * (2.0 * x[i] - left - right)
                            - 4.0 * cb * x[i] * (1.0 - x[i] * x[i]))
    if order >= 2:
        H = np.zeros((D, D))
        for i in range(D):
            H[i, i] = -beta * (4.0 * ca - 4.0 * cb * (1.0 - 3.0 * x[i] * x[i]))
            if i > 0:
                H[i, i - 1] = 2.0 * beta * ca
                H[i - 1, i] = 2.0 * beta * ca
    return lp, g, H


@njit
def _logistic(p, x, order):
    N = int(p[0])
    D = int(p[1])
    alpha = p[2]
    X = p[3:3 + N * D].reshape((N, D))
    y = p[3 + N * D:3 + N * D + N]
    eta = X @ x
    lp = -0.5 * D * (LOG_2PI + math.log(alpha)) - 0.5 * np.dot(x, x) / alpha
    s = np.empty(N)
    for n in range(N):
        lp += y[n] * eta[n] - _log1pexp(eta[n])
        s[n] = _sigmoid(eta[n])
    g, H = _empty_out(D)
    if order >= 1:
        g = X.T @ (y - s) - x / alpha
    if order >= 2:
        lam = s * (1.0 - s)
        H = -(X.T @ (X * lam.reshape((N, 1))))
        for i in range(D):
            H[i, i] -= 1.0 / alpha
    return lp, g, H


@njit
def mixture_combine(lps, gs, Hs, order):
    """Log-sum-exp of component log-densities with matching derivatives."""
    K = lps.shape[0]
    D = gs.shape[1]
    m = -np.inf
    for k in range(K):
        if lps[k] > m:
            m = lps[k]
    g, H = _empty_out(D)
    if m == -np.inf:
        if order >= 1:
            g = np.zeros(D)
        if order >= 2:
            H = np.zeros((D, D))
        return -np.inf, g, H
    w = np.exp(lps - m)
    tot = w.sum()
    lp = m + math.log(tot)
    if order >= 1:
        r = w / tot
        g = np.zeros(D)
        for k in range(K):
            g += r[k] * gs[k]
        if order >= 2:
            # centered covariance of the component scores; the textbook
            # sum r_k g_k g_k^T - g g^T cancels badly far out in the tails
            H = np.zeros((D, D))
            for k in range(K):
                dg = gs[k] - g
                H += r[k] * (Hs[k] + np.outer(dg, dg))
    return lp, g, H


@njit
def _gmm(p, x, order):
    K = int(p[0])
    D = x.shape[0]
    means = p[2:2 + K * D].reshape((K, D))
    scales = p[2 + K * D:2 + K * D + K]
    logw = p[2 + K * D + K:2 + K * D + 2 * K]
    lps = np.empty(K)
    gs = np.empty((K, D))
    Hs = np.zeros((K if order >= 2 else 0, D, D))
    for k in range(K):
        diff = x - means[k]
        s2 = scales[k] * scales[k]
        lps[k] = (logw[k] - D * math.log(scales[k]) - 0.5 * D * LOG_2PI
                  - 0.5 * np.dot(diff, diff) / s2)
        gs[k] = -diff / s2
        if order >= 2:
            for i in range(D):
                Hs[k, i, i] = -1.0 / s2
    return mixture_combine(lps, gs, Hs, order)


@njit
def _base(kind, p, x, order):
    if kind == FUNNEL:
        return _funnel(p, x, order)
    elif kind == ROSENBROCK:
        return _rosenbrock(p, x, order)
    return _squiggle(p, x, order)


@njit
def _transformed_mixture(p, x, order):
    # layout: K, D, then per component
    #   base_kind, n_base, base_params[n_base], loc[D], scale[D], logw
    K = int(p[0])
    D = x.shape[0]
    lps = np.empty(K)
    gs = np.zeros((K, D))
    Hs = np.zeros((K if order >= 2 else 0, D, D))
    off = 2
    for k in range(K):
        kind = int(p[off])
        nb = int(p[off + 1])
        bp = p[off + 2:off + 2 + nb]
        off += 2 + nb
        loc = p[off:off + D]
        scale = p[off + D:off + 2 * D]
        logw = p[off + 2 * D]
        off += 2 * D + 1
        root = np.sqrt(scale)
        y = (x - loc) / root
        lpb, gb, Hb = _base(kind, bp, y, order)
        lps[k] = lpb - 0.5 * np.sum(np.log(scale)) + logw
        if order >= 1:
            gs[k] = gb / root
        if order >= 2:
            Hs[k] = Hb / np.outer(root, root)
    return mixture_combine(lps, gs, Hs, order)


@njit
def target_derivs(kind, p, x, order):
    if kind == GMM:
        return _gmm(p, x, order)
    elif kind == FUNNEL:
        return _funnel(p, x, order)
    elif kind == ROSENBROCK:
        return _rosenbrock(p, x, order)
    elif kind == SQUIGGLE:
        return _squiggle(p, x, order)
    elif kind == FIELD:
        return _field(p, x, order)
    elif kind == TRANSFORMED_MIXTURE:
        return _transformed_mixture(p, x, order)
    return _logistic(p, x, order)


@njit
def gmm_grad_hvp_into(p, x, v, g, hv, w):
    """Mixture log p; writes grad into ``g`` and H v into ``hv``.

    Same centered form as ``mixture_combine``, contracted with ``v`` up front
    so nothing of size K x D x D is built. ``w`` is scratch of length K.
    """
    K = int(p[0])
    D = x.shape[0]
    off_s = 2 + K * D
    m = -np.inf
    for k in range(K):
        s2 = p[off_s + k] * p[off_s + k]
        q = 0.0
        for i in range(D):
            d = x[i] - p[2 + k * D + i]
            q += d * d
        w[k] = (p[off_s + K + k] - D * math.log(p[off_s + k]) - 0.5 * D * LOG_2PI
                - 0.5 * q / s2)
        if w[k] > m:
            m = w[k]
    for i in range(D):
        g[i] = 0.0
        hv[i] = 0.0
    if m == -np.inf:
        return m
    tot = 0.0
    for k in range(K):
        w[k] = math.exp(w[k] - m)
        tot += w[k]
    lp = m + math.log(tot)
    for k in range(K):
        r = w[k] / tot
        s2 = p[off_s + k] * p[off_s + k]
        for i in range(D):
            g[i] -= r * (x[i] - p[2 + k * D + i]) / s2
    for k in range(K):
        r = w[k] / tot
        s2 = p[off_s + k] * p[off_s + k]
        dv = 0.0
        for i in range(D):
            dv += (-(x[i] - p[2 + k * D + i]) / s2 - g[i]) * v[i]
        for i in range(D):
            dg = -(x[i] - p[2 + k * D + i]) / s2 - g[i]
            hv[i] += r * (dg * dv - v[i] / s2)
    return lp


@njit
def _gmm_grad_hvp(p, x, v):
    D = x.shape[0]
    g = np.empty(D)
    hv = np.empty(D)
    lp = gmm_grad_hvp_into(p, x, v, g, hv, np.empty(int(p[0])))
    return lp, g, hv


@njit
def target_grad_hvp(kind, p, x, v):
    """``(log p, grad, H v)``; Gaussian mixtures skip forming H."""
    if kind == GMM:
        return _gmm_grad_hvp(p, x, v)
    lp, g, H = target_derivs(kind, p, x, 2)
    return lp, g, H @ v


@njit
def target_logp(kind, p, x):
    return target_derivs(kind, p, x, 0)[0]

"""Compiled gradient-based kernels: MALA, tempered swaps and DiGS sweeps.

All of them take the numpy ``Generator`` directly; numba reproduces numpy's
streams, so compiled and plain runs give identical chains. Each MALA step
draws the proposal noise and then one uniform, whether or not the proposal
turns out finite, so the stream position never depends on rejections.
"""
import math

import numpy as np

from ._jit import njit
from ._target_kernels import target_derivs


@njit
def _finite(a):
    for i in range(a.shape[0]):
        if not math.isfinite(a[i]):
            return False
    return True


@njit
def start_ok(tk, tp, x):
    lp, g, _ = target_derivs(tk, tp, x, 1)
    return math.isfinite(lp) and _finite(g)


@njit
def rows_ok(tk, tp, X):
    for i in range(X.shape[0]):
        if not start_ok(tk, tp, X[i]):
            return False
    return True


@njit
def mala(tk, tp, x, eps, n_steps, rng):
    """``n_steps`` MALA moves from ``x``; returns (x, n_accepted)."""
    lp, g, _ = target_derivs(tk, tp, x, 1)
    x, lp, g, n_acc = mala_run(tk, tp, x, lp, g, eps, n_steps, 1.0, rng)
    return x, n_acc


@njit
def mala_run(tk, tp, x, lp, g, eps, n_steps, inv_temp, rng):
    """``n_steps`` MALA moves on p(x)^inv_temp; returns (x, lp, g, n_accepted).

    ``lp`` and ``g`` are the untempered log-density and gradient at ``x``.
    """
    D = x.shape[0]
    scale = math.sqrt(2.0 * eps)
    n_acc = 0
    for _ in range(n_steps):
        xi = rng.standard_normal(D)
        log_u = math.log(rng.random())
        mean = x + (eps * inv_temp) * g
        xp = mean + scale * xi
        lpp, gp, _ = target_derivs(tk, tp, xp, 1)
        if not (math.isfinite(lpp) and _finite(gp)):
            continue
        back = x - xp - (eps * inv_temp) * gp
        log_a = inv_temp * (lpp - lp) - (np.dot(back, back) - scale * scale * np.dot(xi, xi)) / (4.0 * eps)
        if log_u < log_a:
            x = xp
            lp = lpp
            g = gp
            n_acc += 1
    return x, lp, g, n_acc


@njit
def swap_log_accept(lp_i, lp_j, tau_i, tau_j):
    """Log acceptance for exchanging states between temperatures i and j."""
    return (lp_j - lp_i) * (1.0 / tau_i - 1.0 / tau_j)


@njit
def pt_sweep(tk, tp, X, taus, eps, rng):
    """One MALA move per level, then one uniformly chosen adjacent swap.

    Updates ``X`` in place; returns (n_accepted, swap_pair, swapped) with
    ``swap_pair = -1`` when there is a single level.
    """
    N = taus.shape[0]
    LP = np.empty(N)
    GR = np.empty_like(X)
    for i in range(N):
        lp, g, _ = target_derivs(tk, tp, X[i], 1)
        LP[i] = lp
        GR[i] = g
    n_acc = 0
    for i in range(N):
        x, lp, g, a = mala_run(tk, tp, X[i], LP[i], GR[i], eps[i], 1, 1.0 / taus[i], rng)
        X[i] = x
        LP[i] = lp
        GR[i] = g
        n_acc += a
    if N < 2:
        return n_acc, -1, False
    k = rng.integers(0, N - 1)
    log_u = math.log(rng.random())
    swapped = False
    if log_u < swap_log_accept(LP[k], LP[k + 1], taus[k], taus[k + 1]):
        tmp = X[k].copy()
        X[k] = X[k + 1]
        X[k + 1] = tmp
        swapped = True
    return n_acc, k, swapped


@njit
def _denoise_mala(tk, tp, x, lp, g, xt, alpha, sig2, eps, n_steps, rng):
    """MALA on log p(x) - |xt - alpha x|^2 / (2 sig2)."""
    D = x.shape[0]
    scale = math.sqrt(2.0 * eps)
    r = xt - alpha * x
    lc = lp - np.dot(r, r) / (2.0 * sig2)
    gc = g + (alpha / sig2) * r
    n_acc = 0
    for _ in range(n_steps):
        xi = rng.standard_normal(D)
        log_u = math.log(rng.random())
        mean = x + eps * gc
        xp = mean + scale * xi
        lpp, gp, _ = target_derivs(tk, tp, xp, 1)
        if not (math.isfinite(lpp) and _finite(gp)):
            continue
        rp = xt - alpha * xp
        lcp = lpp - np.dot(rp, rp) / (2.0 * sig2)
        gcp = gp + (alpha / sig2) * rp
        back = x - xp - eps * gcp
        log_a = lcp - lc - (np.dot(back, back) - scale * scale * np.dot(xi, xi)) / (4.0 * eps)
        if log_u < log_a:
            x = xp
            lp = lpp
            g = gp
            lc = lcp
            gc = gcp
            n_acc += 1
    return x, lp, g, n_acc


@njit
def digs_sweep(tk, tp, x, alphas, n_local, eps, rng):
    """One Gibbs sweep over the noise schedule.

    Per level: noise ``xt = alpha x + sigma xi``; Metropolis initialization
    from ``N(xt / alpha, (sigma / alpha)^2)``, whose acceptance ratio reduces to
    ``p(x') / p(x)``; then ``n_local`` MALA steps on the denoising posterior.
    Returns (x, n_init_accepted, n_local_accepted).
    """
    D = x.shape[0]
    lp, g, _ = target_derivs(tk, tp, x, 1)
    n_init = 0
    n_acc = 0
    for a in alphas:
        sig2 = 1.0 - a * a
        sig = math.sqrt(sig2)
        xt = a * x + sig * rng.standard_normal(D)
        xp = xt / a + (sig / a) * rng.standard_normal(D)
        log_u = math.log(rng.random())
        lpp, gp, _ = target_derivs(tk, tp, xp, 1)
        if math.isfinite(lpp) and _finite(gp) and log_u < lpp - lp:
            x = xp
            lp = lpp
            g = gp
            n_init += 1
        x, lp, g, k = _denoise_mala(tk, tp, x, lp, g, xt, a, sig2, eps, n_local, rng)
        n_acc += k
    return x, n_init, n_acc

"""Compiled metric-field kernels.

A metric is ``(mkind, mparams)`` and is always evaluated together with its
target ``(tkind, tparams)`` because every family except the Euclidean one is
built from the target's log-density and its derivatives.

Parameter layouts: Monge family ``[alpha2]``; Generative family
``[lambda, p0]``; Fisher reads the covariates from the logistic target.
"""
import math

import numpy as np

from ._jit import njit
from ._target_kernels import _sigmoid, target_derivs, target_grad_hvp

EUCLIDEAN = 0
MONGE = 1
INVERSE_MONGE = 2
GENERATIVE = 3
INVERSE_GENERATIVE = 4
FISHER = 5


@njit
def _order_needed(mk):
    if mk == MONGE or mk == INVERSE_MONGE:
        return 1
    return 0


@njit
def _log_p_plus(lp, lam):
    """log(exp(lp) + lam) without leaving log space."""
    if lam == 0.0:
        return lp
    ll = math.log(lam)
    if lp == -np.inf:
        return ll
    m = max(lp, ll)
    return m + math.log1p(math.exp(-abs(lp - ll)))


@njit
def _gen_logf(mk, mp, lp):
    lam = mp[0]
    c = math.log(mp[1] + lam)
    if mk == GENERATIVE:
        return 2.0 * (c - _log_p_plus(lp, lam))
    return 2.0 * (_log_p_plus(lp, lam) - c)


@njit
def gen_dlogf_coef(mk, mp, lp):
    # grad log f = c grad l with c = -/+ 2 p/(p+lam)
    lam = mp[0]
    ratio = 1.0 if lam == 0.0 else math.exp(lp - _log_p_plus(lp, lam))
    if mk == GENERATIVE:
        return -2.0 * ratio
    return 2.0 * ratio


@njit
def _gen_dlogf(mk, mp, lp, g):
    return gen_dlogf_coef(mk, mp, lp) * g


@njit
def _fisher_parts(tp, x):
    N = int(tp[0])
    D = int(tp[1])
    alpha = tp[2]
    X = tp[3:3 + N * D].reshape((N, D))
    eta = X @ x
    s = np.empty(N)
    for n in range(N):
        s[n] = _sigmoid(eta[n])
    G = X.T @ (X * (s * (1.0 - s)).reshape((N, 1)))
    for i in range(D):
        G[i, i] += 1.0 / alpha
    return X, s, G


@njit
def metric_tensor(mk, mp, tk, tp, x):
    D = x.shape[0]
    if mk == EUCLIDEAN:
        return np.eye(D)
    if mk == FISHER:
        return _fisher_parts(tp, x)[2]
    lp, g, _ = target_derivs(tk, tp, x, _order_needed(mk))
    if mk == MONGE:
        return np.eye(D) + mp[0] * np.outer(g, g)
    if mk == INVERSE_MONGE:
        L = 1.0 + mp[0] * np.dot(g, g)
        return np.eye(D) - (mp[0] / L) * np.outer(g, g)
    return math.exp(_gen_logf(mk, mp, lp)) * np.eye(D)


@njit
def metric_inverse(mk, mp, tk, tp, x):
    D = x.shape[0]
    if mk == EUCLIDEAN:
        return np.eye(D)
    if mk == FISHER:
        G = _fisher_parts(tp, x)[2]
        return np.linalg.solve(G, np.eye(D))
    lp, g, _ = target_derivs(tk, tp, x, _order_needed(mk))
    if mk == MONGE:
        L = 1.0 + mp[0] * np.dot(g, g)
        return np.eye(D) - (mp[0] / L) * np.outer(g, g)
    if mk == INVERSE_MONGE:
        return np.eye(D) + mp[0] * np.outer(g, g)
    return math.exp(-_gen_logf(mk, mp, lp)) * np.eye(D)


@njit
def _monge_coefs(a2, g):
    # sqrt(G) = I + c_half g g^T, G^{-1/2} = I - c_mhalf g g^T; conjugate forms
    # stay finite as |g| -> 0.
    L = 1.0 + a2 * np.dot(g, g)
    rL = math.sqrt(L)
    return a2 / (1.0 + rL), a2 / (L + rL)


@njit
def metric_sqrt(mk, mp, tk, tp, x):
    D = x.shape[0]
    if mk == EUCLIDEAN:
        return np.eye(D)
    if mk == FISHER:
        w, V = np.linalg.eigh(_fisher_parts(tp, x)[2])
        return (V * np.sqrt(w)) @ V.T
    lp, g, _ = target_derivs(tk, tp, x, _order_needed(mk))
    if mk == MONGE or mk == INVERSE_MONGE:
        ch, cmh = _monge_coefs(mp[0], g)
        if mk == MONGE:
            return np.eye(D) + ch * np.outer(g, g)
        return np.eye(D) - cmh * np.outer(g, g)
    return math.exp(0.5 * _gen_logf(mk, mp, lp)) * np.eye(D)


@njit
def metric_inv_sqrt_apply(mk, mp, tk, tp, x, z):
    if mk == EUCLIDEAN:
        return z.copy()
    if mk == FISHER:
        w, V = np.linalg.eigh(_fisher_parts(tp, x)[2])
        return V @ ((V.T @ z) / np.sqrt(w))
    lp, g, _ = target_derivs(tk, tp, x, _order_needed(mk))
    if mk == MONGE or mk == INVERSE_MONGE:
        ch, cmh = _monge_coefs(mp[0], g)
        gz = np.dot(g, z)
        if mk == MONGE:
            return z - cmh * gz * g
        return z + ch * gz * g
    return math.exp(-0.5 * _gen_logf(mk, mp, lp)) * z


@njit
def metric_norm_sq(mk, mp, tk, tp, x, v):
    if mk == EUCLIDEAN:
        return np.dot(v, v)
    if mk == FISHER:
        return np.dot(v, _fisher_parts(tp, x)[2] @ v)
    lp, g, _ = target_derivs(tk, tp, x, _order_needed(mk))
    if mk == MONGE:
        return np.dot(v, v) + mp[0] * np.dot(g, v) ** 2
    if mk == INVERSE_MONGE:
        # |v_perp|^2 + (u . v)^2 / L, free of cancellation for large L
        n2 = np.dot(g, g)
        if n2 == 0.0:
            return np.dot(v, v)
        u = g / math.sqrt(n2)
        vu = np.dot(u, v)
        vp = v - vu * u
        return np.dot(vp, vp) + vu * vu / (1.0 + mp[0] * n2)
    return math.exp(_gen_logf(mk, mp, lp)) * np.dot(v, v)


@njit
def _log_det_from(mk, mp, tp, x, lp, g):
    if mk == EUCLIDEAN:
        return 0.0
    if mk == MONGE:
        return math.log1p(mp[0] * np.dot(g, g))
    if mk == INVERSE_MONGE:
        return -math.log1p(mp[0] * np.dot(g, g))
    if mk == FISHER:
        C = np.linalg.cholesky(_fisher_parts(tp, x)[2])
        return 2.0 * np.sum(np.log(np.diag(C)))
    return x.shape[0] * _gen_logf(mk, mp, lp)


@njit
def metric_log_det(mk, mp, tk, tp, x):
    lp, g, _ = target_derivs(tk, tp, x, _order_needed(mk))
    return _log_det_from(mk, mp, tp, x, lp, g)


@njit
def log_hausdorff(mk, mp, tk, tp, x):
    """log p(x) - 0.5 log det G(x)."""
    lp, g, _ = target_derivs(tk, tp, x, _order_needed(mk))
    if lp == -np.inf:
        return -np.inf
    return lp - 0.5 * _log_det_from(mk, mp, tp, x, lp, g)


@njit
def metric_accel(mk, mp, tk, tp, x, v):
    """Geodesic acceleration: component k is -sum_ij Gamma^k_ij v_i v_j."""
    D = x.shape[0]
    if mk == EUCLIDEAN:
        return np.zeros(D)
    if mk == FISHER:
        X, s, G = _fisher_parts(tp, x)
        dlam = s * (1.0 - s) * (1.0 - 2.0 * s)
        Xv = X @ v
        w = 0.5 * (X.T @ (dlam * Xv * Xv))
        return -np.linalg.solve(G, w)
    if mk == GENERATIVE or mk == INVERSE_GENERATIVE:
        lp, g, _ = target_derivs(tk, tp, x, 1)
        dlf = _gen_dlogf(mk, mp, lp, g)
        return 0.5 * np.dot(v, v) * dlf - np.dot(v, dlf) * v
    a2 = mp[0]
    if mk == MONGE:
        _, g, hv = target_grad_hvp(tk, tp, x, v)
        return -(a2 / (1.0 + a2 * np.dot(g, g))) * np.dot(v, hv) * g
    lp, g, H = target_derivs(tk, tp, x, 2)
    L = 1.0 + a2 * np.dot(g, g)
    # G = I + c g g^T with c = -a2/L. The first-kind contraction is
    #   w = ((grad c . v)(g . v) + c v^T H v) g - 0.5 (g . v)^2 grad c
    # and acc = -(I + a2 g g^T) w. Expanding in u = g/|g| and v = vu u + vp
    # cancels the O(1) terms exactly, which keeps it accurate when L is huge:
    #   acc = a2 |g| ([vu^2 ku + 2 vu (kp . vp)] / L + vp^T H vp) u
    #         + a2 |g| (b / L^2) vu^2 kp,   k = H u, ku = u . k, b = a2 |g|^2
    n2 = np.dot(g, g)
    if n2 == 0.0:
        return np.zeros(D)
    n = math.sqrt(n2)
    u = g / n
    b = a2 * n2
    vu = np.dot(u, v)
    vp = v - vu * u
    k = H @ u
    ku = np.dot(u, k)
    kp = k - ku * u
    cu = (vu * vu * ku + 2.0 * vu * np.dot(kp, vp)) / L + np.dot(vp, H @ vp)
    return (a2 * n) * (cu * u + (b / (L * L)) * vu * vu * kp)

"""Sample-quality diagnostics: marginal Wasserstein-1, IMQ kernel Stein
discrepancy, effective sample size and mode-jump rate.
"""
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._jit import USE_NUMBA, njit
from .errors import CapabilityError, ContractError, EvaluationError


def _as_samples(X, name="samples"):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1:
        raise ContractError(f"{name} must be a non-empty n x D array")
    if not np.all(np.isfinite(X)):
        raise ContractError(f"{name} contain non-finite entries")
    return X


# ------------------------------------------------------------------ Wasserstein

def wasserstein_1d(a, b):
    """W1 between two equal-size 1-D samples: mean |sorted(a) - sorted(b)|."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ContractError("wasserstein_1d needs non-empty inputs")
    if a.size != b.size:
        raise ContractError(
            f"wasserstein_1d needs equal sizes, got {a.size} and {b.size}; subsample first")
    return float(np.mean(np.abs(np.sort(a) - np.sort(b))))


def match_sizes(a, b, rng):
    """Subsample the larger of two sample sets (without replacement) to the other's size."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[0] > b.shape[0]:
        a = a[np.sort(rng.choice(a.shape[0], b.shape[0], replace=False))]
    elif b.shape[0] > a.shape[0]:
        b = b[np.sort(rng.choice(b.shape[0], a.shape[0], replace=False))]
    return a, b


def marginal_w1(samples, reference):
    """Per-coordinate W1 and their mean."""
    X = _as_samples(samples)
    R = _as_samples(reference, "reference")
    if X.shape[1] != R.shape[1]:
        raise ContractError(f"dimension mismatch: {X.shape[1]} vs {R.shape[1]}")
    per_dim = [wasserstein_1d(X[:, k], R[:, k]) for k in range(X.shape[1])]
    return per_dim, float(np.mean(per_dim))


# ------------------------------------------------------------------------- KSD
#
# IMQ kernel k(x, y) = (1 + |x - y|^2)^(-1/2) and the Stein kernel
#   k_p(x, y) = s(x).s(y) k + s(x).grad_y k + s(y).grad_x k + tr(grad_x grad_y k)
# with s the score. Writing u = x - y, r2 = |u|^2, beta = -1/2:
#   grad_x k = 2 beta (1 + r2)^(beta - 1) u = -grad_y k
#   tr(...)  = -2 beta D (1 + r2)^(beta - 1) - 4 beta (beta - 1) (1 + r2)^(beta - 2) r2

_BETA = -0.5


@njit
def _ksd_loops(X, S):
    n, D = X.shape
    total = 0.0
    for i in range(n):
        for j in range(n):
            r2 = 0.0
            ss = 0.0
            su = 0.0
            for k in range(D):
                u = X[i, k] - X[j, k]
                r2 += u * u
                ss += S[i, k] * S[j, k]
                # s(x_j).u - s(x_i).u enters with the 2 beta q prefactor
                su += (S[j, k] - S[i, k]) * u
            base = 1.0 + r2
            kern = base ** _BETA
            q = base ** (_BETA - 1.0)
            total += (ss * kern + 2.0 * _BETA * q * su
                      - 2.0 * _BETA * D * q - 4.0 * _BETA * (_BETA - 1.0) * base ** (_BETA - 2.0) * r2)
    return total / (n * n)


def _ksd_numpy(X, S, block=512):
    n, D = X.shape
    total = 0.0
    for lo in range(0, n, block):
        Xi = X[lo:lo + block]
        Si = S[lo:lo + block]
        U = Xi[:, None, :] - X[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", U, U)
        ss = Si @ S.T
        su = np.einsum("jk,ijk->ij", S, U) - np.einsum("ik,ijk->ij", Si, U)
        base = 1.0 + r2
        q = base ** (_BETA - 1.0)
        total += np.sum(ss * base ** _BETA + 2.0 * _BETA * q * su
                        - 2.0 * _BETA * D * q
                        - 4.0 * _BETA * (_BETA - 1.0) * base ** (_BETA - 2.0) * r2)
    return total / (n * n)


def _scores(X, grad_log_p):
    if callable(grad_log_p):
        S = np.array([grad_log_p(x) for x in X], dtype=np.float64)
    else:
        S = np.asarray(grad_log_p, dtype=np.float64)
    if S.shape != X.shape:
        raise ContractError("scores must have the same shape as the samples")
    if not np.all(np.isfinite(S)):
        raise EvaluationError("non-finite score in KSD")
    return S


def ksd_vstat(samples, grad_log_p):
    """Biased (V-statistic) KSD with the IMQ kernel.

    ``grad_log_p`` is either a callable score or a precomputed n x D array.
    """
    X = _as_samples(samples)
    S = _scores(X, grad_log_p)
    val = _ksd_loops(X, S) if USE_NUMBA else _ksd_numpy(X, S)
    # the V-statistic is a squared norm; tiny negative values are rounding
    return max(float(val), 0.0)


def ksd_naive(samples, grad_log_p):
    """Textbook double loop over k_p, one pair at a time."""
    X = _as_samples(samples)
    S = _scores(X, grad_log_p)
    n, D = X.shape
    total = 0.0
    for i in range(n):
        for j in range(n):
            u = X[i] - X[j]
            r2 = float(u @ u)
            base = 1.0 + r2
            k = base ** -0.5
            gx = -u * base ** -1.5
            gy = u * base ** -1.5
            tr = D * base ** -1.5 - 3.0 * r2 * base ** -2.5
            total += S[i] @ S[j] * k + S[i] @ gy + S[j] @ gx + tr
    return total / (n * n)


# ------------------------------------------------------------------------- ESS

def autocorrelation(x):
    """Normalized autocorrelation at all lags via FFT."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    if acov[0] <= 0:
        return np.zeros(n)
    return acov / acov[0]


def effective_sample_size(chain):
    """ESS with Geyer's initial positive sequence estimator.

    Sums rho over consecutive lag pairs while the pair sum stays positive.
    A zero-variance chain has ESS 1 by convention; the result is kept in [1, n].
    """
    x = np.asarray(chain, dtype=np.float64).ravel()
    n = x.size
    if n < 10:
        raise ContractError(f"effective_sample_size needs n >= 10, got {n}")
    if not np.all(np.isfinite(x)):
        raise ContractError("chain contains non-finite values")
    if np.all(x == x[0]):
        return 1.0
    rho = autocorrelation(x)
    tau = -1.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    if tau <= 0:
        return float(n)
    return float(min(max(n / tau, 1.0), n))


def ess_summary(samples):
    """(min, mean) ESS over coordinates."""
    X = _as_samples(samples)
    ess = [effective_sample_size(X[:, k]) for k in range(X.shape[1])]
    return float(min(ess)), float(np.mean(ess))


# ------------------------------------------------------------------- jump rate

def jump_rate(chains, classifier):
    """Percent of consecutive samples with different mode labels, averaged over chains.

    ``chains`` is one n x D array or a list of them; ``classifier`` maps an
    n x D array to n integer labels.
    """
    if classifier is None:
        raise CapabilityError("jump rate needs a mode classifier")
    if isinstance(chains, np.ndarray) and chains.ndim <= 2:
        chains = [chains]
    rates = []
    for c in chains:
        labels = np.asarray(classifier(_as_samples(c)))
        if labels.size < 2:
            continue
        rates.append(100.0 * np.count_nonzero(labels[1:] != labels[:-1]) / (labels.size - 1))
    if not rates:
        raise ContractError("jump rate needs at least one chain with two samples")
    return float(np.mean(rates))


def label_rate(chains, classifier):
    """Fraction of each label over all samples."""
    if isinstance(chains, np.ndarray) and chains.ndim <= 2:
        chains = [chains]
    labels = np.concatenate([np.asarray(classifier(_as_samples(c))) for c in chains])
    vals, counts = np.unique(labels, return_counts=True)
    return {int(v): float(c) / labels.size for v, c in zip(vals, counts)}


# ---------------------------------------------------------------------- report

@dataclass
class DiagnosticReport:
    n_samples: int
    wall_clock: float = 0.0
    w1_per_dim: list = field(default_factory=list)
    w1_mean: float = None
    ksd: float = None
    ksd_chain_std: float = None
    min_ess: float = None
    avg_ess: float = None
    jump_rate: float = None
    jump_rate_chain_std: float = None

    def __post_init__(self):
        for k, v in asdict(self).items():
            vals = v if isinstance(v, list) else [v]
            for x in vals:
                if x is not None and not (math.isfinite(x) and x >= 0):
                    raise ContractError(f"diagnostic {k} must be finite and >= 0, got {x!r}")

    def to_dict(self):
        return asdict(self)


def diagnose(chains, target, wall_clock=0.0, reference=None, rng=None, ksd_max_n=2000):
    """Full report for a list of per-chain sample arrays.

    W1 is taken against ``reference`` (or exact draws from the target, if it
    has a sampler), KSD on at most ``ksd_max_n`` pooled samples.
    """
    chains = [_as_samples(c) for c in chains]
    if not chains:
        raise ContractError("no chains to diagnose")
    rng = np.random.default_rng(0) if rng is None else rng
    pooled = np.concatenate(chains)
    rep = {"n_samples": int(pooled.shape[0]), "wall_clock": float(wall_clock)}
    if reference is None and target.has_reference:
        reference = target.reference_sample(pooled.shape[0], rng)
    if reference is not None:
        a, b = match_sizes(pooled, np.asarray(reference, dtype=np.float64), rng)
        rep["w1_per_dim"], rep["w1_mean"] = marginal_w1(a, b)
    sub = pooled
    if sub.shape[0] > ksd_max_n:
        sub = sub[np.sort(rng.choice(sub.shape[0], ksd_max_n, replace=False))]
    rep["ksd"] = ksd_vstat(sub, target.grad_log_density)
    if len(chains) > 1:
        per = []
        for c in chains:
            m = min(c.shape[0], max(1, ksd_max_n // len(chains)))
            idx = np.sort(rng.choice(c.shape[0], m, replace=False))
            per.append(ksd_vstat(c[idx], target.grad_log_density))
        rep["ksd_chain_std"] = float(np.std(per))
    if pooled.shape[0] >= 10 and all(c.shape[0] >= 10 for c in chains):
        ess = [ess_summary(c) for c in chains]
        rep["min_ess"] = float(sum(e[0] for e in ess))
        rep["avg_ess"] = float(sum(e[1] for e in ess))
    if target.has_classifier:
        per = [jump_rate(c, target.classify_modes) for c in chains if c.shape[0] >= 2]
        if per:
            rep["jump_rate"] = float(np.mean(per))
            rep["jump_rate_chain_std"] = float(np.std(per))
    return DiagnosticReport(**rep)

"""Benchmark target densities.

All densities are evaluated in log space through the compiled kernels in
``_target_kernels``. Bijective targets (funnel, hybrid Rosenbrock, squiggle and
mixtures built from them) also expose an exact reference sampler.
"""
import csv
import logging
import math
from importlib import resources

import numpy as np

from . import _target_kernels as tk
from .errors import CapabilityError, ConfigurationError, IngestionError

logger = logging.getLogger(__name__)

GMM40_SEED = 20240917


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _check_simplex(weights, n):
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.shape[0] != n:
        raise ConfigurationError(f"expected {n} weights, got {w.shape[0]}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ConfigurationError("mixture weights must be finite and non-negative")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ConfigurationError(f"mixture weights must sum to 1 (got {w.sum()!r})")
    return w / w.sum()


class TargetDensity:
    """Unnormalized log-density on R^D with analytic derivatives.

    Subclasses set ``kind`` and ``params`` for the compiled kernels, and may
    implement ``_sample`` and ``_classify``.
    """

    name = "target"

    def __init__(self, dim, kind, params):
        if int(dim) < 1:
            raise ConfigurationError("dim must be a positive integer")
        self.dim = int(dim)
        self.kind = int(kind)
        self.params = np.ascontiguousarray(params, dtype=np.float64)

    def _point(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ConfigurationError(
                f"{self.name}: expected a point of shape ({self.dim},), got {x.shape}")
        return np.ascontiguousarray(x)

    def derivs(self, x, order=2):
        return tk.target_derivs(self.kind, self.params, self._point(x), order)

    def log_density(self, x):
        return float(tk.target_logp(self.kind, self.params, self._point(x)))

    def grad_log_density(self, x):
        return tk.target_derivs(self.kind, self.params, self._point(x), 1)[1]

    def hessian_log_density(self, x):
        return tk.target_derivs(self.kind, self.params, self._point(x), 2)[2]

    @property
    def has_reference(self):
        return type(self)._sample is not TargetDensity._sample

    @property
    def has_classifier(self):
        return type(self)._classify is not TargetDensity._classify

    def reference_sample(self, n, seed=None):
        """Exact i.i.d. draws, shape ``(n, dim)``."""
        if not self.has_reference:
            raise CapabilityError(f"{self.name} has no exact reference sampler")
        return self._sample(_as_rng(seed), int(n))

    def classify_mode(self, x):
        if not self.has_classifier:
            raise CapabilityError(f"{self.name} has no mode classifier")
        return int(self._classify(self._point(x)))

    def classify_modes(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.array([self.classify_mode(x) for x in X], dtype=np.int64)

    def _sample(self, rng, n):
        raise NotImplementedError

    def _classify(self, x):
        raise NotImplementedError

    def describe(self):
        return {"name": self.name, "dim": self.dim}


class GaussianMixtureTarget(TargetDensity):
    """Isotropic Gaussian mixture; log-density via log-sum-exp."""

    name = "gaussian_mixture"

    def __init__(self, means, scales, weights=None):
        means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        K, D = means.shape
        scales = np.broadcast_to(np.asarray(scales, dtype=np.float64), (K,)).copy()
        if np.any(scales <= 0):
            raise ConfigurationError("component scales must be positive")
        if weights is None:
            weights = np.full(K, 1.0 / K)
        self.means = means
        self.scales = scales
        self.weights = _check_simplex(weights, K)
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        params = np.concatenate([[K, D], means.ravel(), scales, logw])
        super().__init__(D, tk.GMM, params)

    def _sample(self, rng, n):
        comp = rng.choice(len(self.weights), size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        return self.means[comp] + self.scales[comp, None] * z

    def _classify(self, x):
        d2 = np.sum((self.means - x) ** 2, axis=1)
        return int(np.argmin(d2))  # argmin returns the lowest index on ties

    def describe(self):
        return {"name": self.name, "dim": self.dim, "n_components": len(self.weights)}


class GaussianTarget(GaussianMixtureTarget):
    name = "gaussian"

    def __init__(self, dim, scale=1.0, mean=None):
        mean = np.zeros(dim) if mean is None else np.asarray(mean, dtype=np.float64)
        super().__init__(mean[None, :], [scale], [1.0])


def two_gaussians(dim, sigma=0.1, weights=(0.2, 0.8)):
    """Components at -1_D (index 0) and +1_D (index 1)."""
    ones = np.ones(dim)
    t = GaussianMixtureTarget(np.stack([-ones, ones]), [sigma, sigma], weights)
    t.name = "two_gaussians"
    return t


def gmm40_means():
    with resources.files("magss").joinpath("data/gmm40_means.csv").open() as fh:
        return np.loadtxt(fh, delimiter=",", skiprows=1)


def gmm40(sigma=0.1):
    """40 equal-weight components whose means were drawn uniformly on
    (-40, 40)^2 with ``np.random.default_rng(GMM40_SEED)``."""
    t = GaussianMixtureTarget(gmm40_means(), sigma)
    t.name = "gmm40"
    return t


class FunnelTarget(TargetDensity):
    name = "funnel"

    def __init__(self, dim=2, sigma=3.0, mu=0.0):
        if dim < 2:
            raise ConfigurationError("funnel needs dim >= 2")
        if sigma <= 0:
            raise ConfigurationError("funnel sigma must be positive")
        self.sigma = float(sigma)
        self.mu = float(mu)
        super().__init__(dim, tk.FUNNEL, [sigma, mu])

    @staticmethod
    def forward(z, sigma, mu):
        z = np.atleast_2d(z)
        x = np.empty_like(z)
        x[:, -1] = sigma * z[:, -1]
        x[:, :-1] = mu + np.exp(0.5 * sigma * z[:, -1:]) * z[:, :-1]
        return x

    def _sample(self, rng, n):
        return self.forward(rng.standard_normal((n, self.dim)), self.sigma, self.mu)

    def log_det_inverse_jacobian(self, x):
        x = self._point(x)
        return -(self.dim - 1) * x[-1] / 2.0 - math.log(self.sigma)

    def describe(self):
        return {"name": self.name, "dim": self.dim, "sigma": self.sigma, "mu": self.mu}


class HybridRosenbrockTarget(TargetDensity):
    """x_1 ~ N(a, 1/2); every block is a chain x_c ~ N(x_prev^2, 1/(2b)) rooted at x_1.

    ``dim - 1`` must be a multiple of ``block_size``; ``dim == 2`` is the classic
    two-dimensional banana (a single block of length one).
    """

    name = "rosenbrock"

    def __init__(self, dim=2, a=1.0, b=100.0, block_size=3):
        if dim < 2:
            raise ConfigurationError("rosenbrock needs dim >= 2")
        if b <= 0:
            raise ConfigurationError("rosenbrock b must be positive")
        bs = 1 if dim == 2 else int(block_size)
        if bs < 1 or (dim - 1) % bs != 0:
            raise ConfigurationError(
                f"rosenbrock: dim - 1 = {dim - 1} is not a multiple of block_size {bs}")
        self.a = float(a)
        self.b = float(b)
        self.block_size = bs
        super().__init__(dim, tk.ROSENBROCK, [a, b, bs])

    @staticmethod
    def forward(z, a, b, block_size):
        z = np.atleast_2d(z)
        x = np.empty_like(z)
        D = z.shape[1]
        x[:, 0] = a + z[:, 0] / math.sqrt(2.0)
        for j in range((D - 1) // block_size):
            prev = x[:, 0]
            for i in range(block_size):
                c = 1 + j * block_size + i
                x[:, c] = prev ** 2 + z[:, c] / math.sqrt(2.0 * b)
                prev = x[:, c]
        return x

    def _sample(self, rng, n):
        z = rng.standard_normal((n, self.dim))
        return self.forward(z, self.a, self.b, self.block_size)

    def describe(self):
        return {"name": self.name, "dim": self.dim, "a": self.a, "b": self.b,
                "block_size": self.block_size}


class SquiggleTarget(TargetDensity):
    """z ~ N(0, diag(5, 1/2, ..., 1/2)); x_1 = z_1, x_i = z_i - sin(a z_1)."""

    name = "squiggle"

    def __init__(self, dim=2, a=1.5, var_first=5.0, var_rest=0.5):
        if dim < 2:
            raise ConfigurationError("squiggle needs dim >= 2")
        self.a = float(a)
        self.var_first = float(var_first)
        self.var_rest = float(var_rest)
        super().__init__(dim, tk.SQUIGGLE, [a, var_first, var_rest])

    @staticmethod
    def forward(z, a):
        z = np.atleast_2d(z)
        x = z.copy()
        x[:, 1:] = z[:, 1:] - np.sin(a * z[:, :1])
        return x

    def _sample(self, rng, n):
        z = rng.standard_normal((n, self.dim))
        z[:, 0] *= math.sqrt(self.var_first)
        z[:, 1:] *= math.sqrt(self.var_rest)
        return self.forward(z, self.a)

    def log_det_inverse_jacobian(self, x):
        return 0.0

    def describe(self):
        return {"name": self.name, "dim": self.dim, "a": self.a}


_BIJECTIVE = (FunnelTarget, HybridRosenbrockTarget, SquiggleTarget)


class TransformedMixtureTarget(TargetDensity):
    """Mixture of bijective targets, each moved by x = loc + sqrt(scale) * y.

    ``scale`` is the diagonal of the per-component matrix whose inverse square
    root maps x back to the base space; the component density picks up the
    factor |det diag(scale)^(-1/2)|.
    """

    name = "transformed_mixture"

    def __init__(self, components, weights=None):
        if not components:
            raise ConfigurationError("transformed mixture needs at least one component")
        D = components[0][0].dim
        K = len(components)
        if weights is None:
            weights = np.full(K, 1.0 / K)
        self.weights = _check_simplex(weights, K)
        self.bases, self.locs, self.scales = [], [], []
        params = [K, D]
        for (base, loc, scale), w in zip(components, self.weights):
            if not isinstance(base, _BIJECTIVE):
                raise ConfigurationError("mixture components must be bijective targets")
            if base.dim != D:
                raise ConfigurationError("mixture components must share a dimension")
            loc = np.broadcast_to(np.asarray(loc, dtype=np.float64), (D,)).copy()
            scale = np.broadcast_to(np.asarray(scale, dtype=np.float64), (D,)).copy()
            if np.any(scale <= 0):
                raise ConfigurationError("component scales must be positive")
            self.bases.append(base)
            self.locs.append(loc)
            self.scales.append(scale)
            params += [base.kind, len(base.params), *base.params, *loc, *scale,
                       math.log(w) if w > 0 else -np.inf]
        self.locs = np.array(self.locs)
        self.scales = np.array(self.scales)
        super().__init__(D, tk.TRANSFORMED_MIXTURE, params)

    def _sample(self, rng, n):
        comp = rng.choice(len(self.weights), size=n, p=self.weights)
        out = np.empty((n, self.dim))
        for k, base in enumerate(self.bases):
            idx = np.flatnonzero(comp == k)
            if idx.size:
                y = base._sample(rng, idx.size)
                out[idx] = self.locs[k] + np.sqrt(self.scales[k]) * y
        return out

    def _classify(self, x):
        d2 = np.sum((self.locs - x) ** 2, axis=1)
        return int(np.argmin(d2))

    def describe(self):
        return {"name": self.name, "dim": self.dim,
                "components": [b.describe() for b in self.bases],
                "locs": self.locs.tolist(), "scales": self.scales.tolist(),
                "weights": self.weights.tolist()}


def narrow_mixture():
    """Equal-weight mixture of a 2-D Rosenbrock banana and a 2-D squiggle."""
    t = TransformedMixtureTarget([
        (HybridRosenbrockTarget(2), [-7.0, -1.0], [0.5, 0.5]),
        (SquiggleTarget(2), [3.0, 0.0], [0.5, 0.5]),
    ])
    t.name = "narrow_mixture"
    return t


class FieldSystemTarget(TargetDensity):
    """Allen-Cahn lattice field with pinned ends x_0 = x_{D+1} = 0."""

    name = "field_system"

    def __init__(self, dim=16, a=0.1, b=None, beta=1.0):
        if dim < 1:
            raise ConfigurationError("field system needs dim >= 1")
        if beta <= 0:
            raise ConfigurationError("field system beta must be positive")
        self.a = float(a)
        self.b = 1.0 / self.a if b is None else float(b)
        self.beta = float(beta)
        self.delta_s = 1.0 / dim
        super().__init__(dim, tk.FIELD, [self.a, self.b, self.delta_s, self.beta])

    def _classify(self, x):
        bits = (x > 0).astype(np.int64)
        return int(np.sum(bits << np.arange(self.dim, dtype=np.int64)))

    def sign_pattern(self, x):
        return np.where(self._point(x) > 0, 1, -1)

    def is_sign_mixed(self, X):
        """True where a row's rounded sign pattern is neither all -1 nor all +1."""
        pos = np.atleast_2d(X) > 0
        return pos.any(axis=1) & ~pos.all(axis=1)

    def describe(self):
        return {"name": self.name, "dim": self.dim, "a": self.a, "b": self.b,
                "beta": self.beta}


class LogisticRegressionTarget(TargetDensity):
    """Bernoulli likelihood with sigmoid link, prior N(0, alpha I)."""

    name = "logistic_regression"

    def __init__(self, X, y, alpha=100.0):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        y = np.asarray(y, dtype=np.float64).ravel()
        if X.shape[0] != y.shape[0] or X.shape[0] == 0:
            raise ConfigurationError("covariates and labels must have matching, non-zero length")
        if not np.all((y == 0) | (y == 1)):
            raise ConfigurationError("labels must be 0 or 1")
        if alpha <= 0:
            raise ConfigurationError("prior scale alpha must be positive")
        self.X = X
        self.y = y
        self.alpha = float(alpha)
        N, D = X.shape
        super().__init__(D, tk.LOGISTIC, np.concatenate([[N, D, alpha], X.ravel(), y]))

    def describe(self):
        return {"name": self.name, "dim": self.dim, "n_obs": int(self.X.shape[0]),
                "alpha": self.alpha}


def synthetic_logistic_data(n=200, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, dim))
    theta = rng.standard_normal(dim)
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-X @ theta))).astype(np.float64)
    return X, y


def load_logistic_data(path):
    """Read a CSV of covariates followed by a final 0/1 label column.

    A non-numeric first line is treated as a header. Covariates are
    standardized column-wise; variances are clamped at 1e-12 so constant
    columns become zeros. Errors name the 1-based file line.
    """
    rows, labels = [], []
    width = None
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                vals = [float(c) for c in rec]
            except ValueError:
                if lineno == 1 and not rows:
                    continue
                raise IngestionError(f"{path}: row {lineno}: non-numeric value") from None
            if len(vals) < 2:
                raise IngestionError(f"{path}: row {lineno}: need covariates and a label")
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise IngestionError(
                    f"{path}: row {lineno}: expected {width} columns, got {len(vals)}")
            if not all(math.isfinite(v) for v in vals):
                raise IngestionError(f"{path}: row {lineno}: non-finite value")
            if vals[-1] not in (0.0, 1.0):
                raise IngestionError(f"{path}: row {lineno}: label {rec[-1].strip()!r} is not 0 or 1")
            rows.append(vals[:-1])
            labels.append(vals[-1])
    if not rows:
        raise IngestionError(f"{path}: no observations")
    X = np.array(rows)
    y = np.array(labels)
    var = X.var(axis=0)
    if np.any(var < 1e-12):
        logger.warning("%s: constant covariate column(s) %s standardized to zero",
                       path, np.flatnonzero(var < 1e-12).tolist())
    X = (X - X.mean(axis=0)) / np.sqrt(np.maximum(var, 1e-12))
    return X, y

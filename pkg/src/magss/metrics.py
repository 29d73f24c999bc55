"""Riemannian metric fields built on a target density.

Each metric is bound to a target because all of the non-Euclidean families
are functions of ``log p`` and its derivatives. The Monge family uses the
rank-one closed forms and never assembles a matrix outside of ``tensor``,
``inverse`` and ``sqrt``; the Generative family is conformal; the Fisher
metric for logistic regression is dense and goes through Cholesky / eigh.
"""
import logging

import numpy as np

from . import _metric_kernels as mk
from ._target_kernels import LOGISTIC
from .errors import ConfigurationError, ContractError, EvaluationError

logger = logging.getLogger(__name__)

METRIC_NAMES = ("euclidean", "monge", "inverse_monge", "generative",
                "inverse_generative", "fisher_logistic")


class MetricField:
    """Position-dependent metric tensor G(x) over ``target``."""

    name = "metric"
    kind = mk.EUCLIDEAN
    # True when geodesics are straight lines and may be evaluated in closed form
    flat = False

    def __init__(self, target, params=()):
        self.target = target
        self.dim = target.dim
        self.params = np.ascontiguousarray(params, dtype=np.float64)

    @property
    def args(self):
        """Positional prefix shared by every compiled metric kernel."""
        return self.kind, self.params, self.target.kind, self.target.params

    def _point(self, x):
        return self.target._point(x)

    def _vec(self, v):
        v = np.ascontiguousarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise ConfigurationError(f"expected a vector of shape ({self.dim},), got {v.shape}")
        return v

    def _checked(self, out, what):
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"{self.name}: non-finite {what}")
        return out

    def tensor(self, x):
        return self._checked(mk.metric_tensor(*self.args, self._point(x)), "tensor")

    def inverse(self, x):
        return self._checked(mk.metric_inverse(*self.args, self._point(x)), "inverse")

    def sqrt(self, x):
        """Symmetric square root G(x)^{1/2} (dense, for tests and tracing)."""
        return self._checked(mk.metric_sqrt(*self.args, self._point(x)), "square root")

    def log_det(self, x):
        return float(self._checked(mk.metric_log_det(*self.args, self._point(x)), "log-det"))

    def inv_sqrt_apply(self, x, z):
        return self._checked(
            mk.metric_inv_sqrt_apply(*self.args, self._point(x), self._vec(z)),
            "inverse square root")

    def norm_sq(self, x, v):
        return float(mk.metric_norm_sq(*self.args, self._point(x), self._vec(v)))

    def acceleration(self, x, v):
        return self._checked(mk.metric_accel(*self.args, self._point(x), self._vec(v)),
                             "geodesic acceleration")

    def log_hausdorff(self, x):
        """log p(x) - 0.5 log det G(x)."""
        return float(mk.log_hausdorff(*self.args, self._point(x)))

    def describe(self):
        return {"name": self.name}


class EuclideanMetric(MetricField):
    name = "euclidean"
    kind = mk.EUCLIDEAN
    flat = True

    def __init__(self, target):
        super().__init__(target, [0.0])


class MongeMetric(MetricField):
    """G = I + alpha2 * grad l grad l^T."""

    name = "monge"
    kind = mk.MONGE

    def __init__(self, target, alpha2=1.0):
        alpha2 = float(alpha2)
        if not np.isfinite(alpha2) or alpha2 < 0:
            raise ConfigurationError(f"{self.name}: alpha2 must be >= 0, got {alpha2!r}")
        self.alpha2 = alpha2
        super().__init__(target, [alpha2])

    def describe(self):
        return {"name": self.name, "alpha2": self.alpha2}


class InverseMongeMetric(MongeMetric):
    """Matrix inverse of the Monge metric, used as a metric in its own right."""

    name = "inverse_monge"
    kind = mk.INVERSE_MONGE


class GenerativeMetric(MetricField):
    """Conformal metric G = f I with f = ((p0 + lam) / (p + lam))^2."""

    name = "generative"
    kind = mk.GENERATIVE

    def __init__(self, target, lam=1.0, p0=1.0):
        lam = float(lam)
        p0 = float(p0)
        if not np.isfinite(lam) or lam < 0:
            raise ConfigurationError(f"{self.name}: lambda must be >= 0, got {lam!r}")
        if not np.isfinite(p0) or p0 <= 0:
            raise ConfigurationError(f"{self.name}: p0 must be > 0, got {p0!r}")
        if lam == 0.0:
            logger.warning("%s with lambda=0 requires a strictly positive target density",
                           self.name)
        self.lam = lam
        self.p0 = p0
        super().__init__(target, [lam, p0])

    def describe(self):
        return {"name": self.name, "lambda": self.lam, "p0": self.p0}


class InverseGenerativeMetric(GenerativeMetric):
    """G = f^{-1} I; speeds geodesics up where the density is small."""

    name = "inverse_generative"
    kind = mk.INVERSE_GENERATIVE


class FisherLogisticMetric(MetricField):
    """Expected Fisher information of logistic regression plus prior curvature.

    G = X^T diag(s(1-s)) X + I / alpha. The acceleration differentiates the
    weights s(1-s) along v, which only involves the covariates.
    """

    name = "fisher_logistic"
    kind = mk.FISHER

    def __init__(self, target):
        if target.kind != LOGISTIC:
            raise ConfigurationError("fisher_logistic requires a logistic regression target")
        super().__init__(target, [0.0])


def make_metric(name, target, **params):
    """Build a metric by its config name."""
    known = {
        "euclidean": (EuclideanMetric, ()),
        "monge": (MongeMetric, ("alpha2",)),
        "inverse_monge": (InverseMongeMetric, ("alpha2",)),
        "generative": (GenerativeMetric, ("lambda", "p0")),
        "inverse_generative": (InverseGenerativeMetric, ("lambda", "p0")),
        "fisher_logistic": (FisherLogisticMetric, ()),
    }
    if name not in known:
        raise ConfigurationError(f"unknown metric {name!r}; expected one of {METRIC_NAMES}")
    cls, allowed = known[name]
    extra = set(params) - set(allowed)
    if extra:
        raise ConfigurationError(f"metric {name!r} does not take parameters {sorted(extra)}")
    if "lambda" in params:
        params["lam"] = params.pop("lambda")
    return cls(target, **params)


def christoffel_oracle(tensor_fn, x, v, h=1e-5, order=2):
    """Geodesic acceleration from central differences of ``tensor_fn``.

    Uses the general second-kind formula, so it is slow and meant for tests.
    ``order=4`` switches to the five-point stencil, which tolerates a larger
    ``h`` and so resolves metrics that barely vary.
    """
    if order not in (2, 4):
        raise ConfigurationError("christoffel_oracle order must be 2 or 4")
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    D = x.shape[0]
    if D > 16:
        raise ConfigurationError("christoffel_oracle is limited to D <= 16")
    dG = np.empty((D, D, D))  # dG[i] = d G / d x_i
    for i in range(D):
        e = np.zeros(D)
        e[i] = h
        d1 = np.asarray(tensor_fn(x + e)) - np.asarray(tensor_fn(x - e))
        if order == 2:
            dG[i] = d1 / (2 * h)
        else:
            d2 = np.asarray(tensor_fn(x + 2 * e)) - np.asarray(tensor_fn(x - 2 * e))
            dG[i] = (8 * d1 - d2) / (12 * h)
    # first kind, contracted with v twice:
    #   w_m = sum_ij 0.5 (d_i G_mj + d_j G_mi - d_m G_ij) v_i v_j
    t1 = np.einsum("imj,i,j->m", dG, v, v)
    t3 = np.einsum("mij,i,j->m", dG, v, v)
    w = t1 - 0.5 * t3
    G = np.asarray(tensor_fn(x))
    try:
        return -np.linalg.solve(G, w)
    except np.linalg.LinAlgError as exc:
        raise EvaluationError(f"christoffel_oracle: singular tensor ({exc})") from None


def sample_unit_tangent(metric, x, rng, max_retries=10):
    """Draw v with v^T G(x) v = 1: z ~ N(0, I), v = G^{-1/2} z, then normalize."""
    x = metric._point(x)
    for _ in range(max_retries):
        z = rng.standard_normal(metric.dim)
        v = mk.metric_inv_sqrt_apply(*metric.args, x, z)
        nrm = np.sqrt(mk.metric_norm_sq(*metric.args, x, v))
        if np.isfinite(nrm) and nrm >= 1e-300:
            return v / nrm
    raise ContractError(f"could not draw a non-degenerate tangent at x after {max_retries} tries")

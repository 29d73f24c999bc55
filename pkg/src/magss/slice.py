"""One-dimensional slice sampling along a parametrized curve.

``f`` is always a log-density along the curve, ``t -> log p(gamma(t))``, and the
current point sits at ``t = 0``. Levels are drawn in log space and all
comparisons are on logs, so nothing underflows.
"""
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigurationError, IntegrationError, EvaluationError


@dataclass(frozen=True)
class SliceParams:
    w: float = 3.0
    m: int = 8
    max_shrink_iters: int = 100

    def __post_init__(self):
        if not (np.isfinite(self.w) and self.w > 0):
            raise ConfigurationError(f"slice width w must be > 0, got {self.w!r}")
        if int(self.m) != self.m or self.m < 1:
            raise ConfigurationError(f"slice budget m must be an integer >= 1, got {self.m!r}")
        if int(self.max_shrink_iters) != self.max_shrink_iters or self.max_shrink_iters < 0:
            raise ConfigurationError("max_shrink_iters must be a non-negative integer")

    def to_dict(self):
        return asdict(self)


@dataclass
class SliceStats:
    expansions: int = 0
    step_out_evals: int = 0
    shrink_iters: int = 0
    fallback: bool = False


def safe_density(f):
    """Wrap ``f`` so that integration or evaluation failures read as -inf."""
    def g(t):
        try:
            val = float(f(t))
        except (IntegrationError, EvaluationError, FloatingPointError):
            return -math.inf
        return val if val == val else -math.inf  # NaN is outside the slice
    return g


def draw_level(log_f0, rng):
    """log s = log f(0) + log U with U ~ Unif(0, 1)."""
    return log_f0 + math.log(rng.random())


def step_out(log_s, f, params, rng, stats=None):
    """Randomized stepping out; returns ``(l, r)`` with ``l <= 0 <= r``.

    The left end may move ``iota - 1`` times and the right end ``m - iota``
    times, ``iota ~ Unif{1..m}``.
    """
    w = params.w
    u = rng.uniform(0.0, w)
    left = -u
    right = left + w
    iota = int(rng.integers(1, params.m + 1))
    n_exp = 0
    n_eval = 0
    i = 2
    while i <= iota:
        n_eval += 1
        if not f(left) > log_s:
            break
        left -= w
        n_exp += 1
        i += 1
    j = 2
    while j <= params.m + 1 - iota:
        n_eval += 1
        if not f(right) > log_s:
            break
        right += w
        n_exp += 1
        j += 1
    if stats is not None:
        stats.expansions += n_exp
        stats.step_out_evals += n_eval
    return left, right


def wrap(theta_h, left, right):
    """Map a draw on the circle (0, r - l) to the signed parameter in [l, r]."""
    return theta_h - (right - left) if theta_h > right else theta_h


def shrink(log_s, f, left, right, params, rng, stats=None):
    """Circular shrinkage on ``(l, r)``; falls back to ``t = 0``.

    The circle coordinate ``theta_h`` runs from the current point. The live
    set is ``(0, theta_max) U [theta_min, L)``, the arc around the current
    point between the two nearest rejections. The listing this follows names
    the bounds the other way round from what one might expect: ``theta_min``
    is the lower end of the arc just before the wrap point ``L`` and
    ``theta_max`` the upper end of the arc after ``0``. Both start at the first
    draw, so the first rejection keeps the whole circle and the second one
    cuts it to the arc between the two rejected points.
    """
    length = right - left
    n_iter = 0
    t_star = 0.0
    fallback = True
    if params.max_shrink_iters > 0:
        theta_h = rng.uniform(0.0, length)
        theta_min = theta_h
        theta_max = theta_h
        while True:
            theta = wrap(theta_h, left, right)
            if f(theta) > log_s:
                t_star = theta
                fallback = False
                break
            n_iter += 1
            if n_iter >= params.max_shrink_iters:
                break
            if theta_min <= theta_h <= length:
                theta_min = theta_h
            else:
                theta_max = theta_h
            span = theta_max + (length - theta_min)
            if not span > 0:
                break
            z = rng.uniform(0.0, span)
            theta_h = z if z < theta_max else theta_min + (z - theta_max)
    if stats is not None:
        stats.shrink_iters += n_iter
        stats.fallback = stats.fallback or fallback
    return t_star


def slice_along(f, log_f0, params, rng, stats=None):
    """Level draw, step-out and shrinkage along one curve; returns ``t*``."""
    log_s = draw_level(log_f0, rng)
    left, right = step_out(log_s, f, params, rng, stats)
    return shrink(log_s, f, left, right, params, rng, stats)


def slice_1d_step(x, log_density_1d, params, rng, stats=None):
    """One univariate slice-sampling transition from ``x``."""
    x = float(x)
    log_f0 = float(log_density_1d(x))
    if not math.isfinite(log_f0):
        raise ConfigurationError("log density must be finite at the current point")
    f = safe_density(lambda t: log_density_1d(x + t))
    t_star = slice_along(f, log_f0, params, rng, stats)
    return x + t_star

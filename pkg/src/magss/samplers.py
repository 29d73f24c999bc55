"""MCMC transition kernels over :class:`ChainState`.

Every kernel takes a state and returns a new one; the RNG inside the state
advances. MAGSS and the Euclidean hit-and-run kernel consume the stream in the
same order (level uniform, tangent normals, step-out draws, shrink draws), so
with the Euclidean metric they produce bit-identical chains.
"""
import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import _metric_kernels as mk
from . import _sampler_kernels as sk
from .errors import ConfigurationError, ContractError, EvaluationError, IntegrationError
from .geodesics import GeodesicCurve, IntegratorConfig
from .metrics import make_metric, sample_unit_tangent
from .slice import SliceParams, draw_level, safe_density, shrink, step_out


@dataclass
class StepStats:
    """Counters accumulated over one emitted sample."""

    expansions: int = 0
    step_out_evals: int = 0
    shrink_iters: int = 0
    fallback: bool = False
    geodesic_steps: int = 0
    slice_steps: int = 0
    local_steps: int = 0
    local_accepted: int = 0
    init_accepted: int = 0
    swap_attempted: bool = False
    swap_accepted: bool = False

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class ChainState:
    x: np.ndarray
    rng: np.random.Generator
    stats: StepStats = field(default_factory=StepStats)
    # per-temperature positions for parallel tempering, coldest first
    replicas: np.ndarray = None

    def evolve(self, x, stats, replicas=None):
        return ChainState(np.array(x, dtype=np.float64), self.rng, stats,
                          self.replicas if replicas is None else replicas)


def initial_state(x0, rng):
    return ChainState(np.array(x0, dtype=np.float64), rng)


@dataclass
class MagssConfig:
    metric: str = "euclidean"
    metric_params: dict = field(default_factory=dict)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    slice: SliceParams = field(default_factory=SliceParams)

    def __post_init__(self):
        self._cache = {}

    def metric_for(self, target):
        key = id(target)
        hit = self._cache.get(key)
        if hit is None or hit[0] is not target:
            hit = (target, make_metric(self.metric, target, **dict(self.metric_params)))
            self._cache[key] = hit
        return hit[1]


@dataclass
class MetaConfig:
    magss: MagssConfig = field(default_factory=MagssConfig)
    K: int = 1
    L: int = 10
    step_size: float = 0.1

    def __post_init__(self):
        if self.K < 0 or self.L < 0 or self.K + self.L == 0:
            raise ConfigurationError("Meta-MAGSS needs K >= 0, L >= 0 and K + L >= 1")
        _check_step(self.step_size)


@dataclass
class PtConfig:
    temperatures: tuple = (1.0, 5.62, 31.62, 177.83, 1000.0)
    step_size: float = 0.1
    # per-level MALA steps; by default eps * tau_i, so hot levels move further
    step_sizes: tuple = None

    def __post_init__(self):
        taus = np.asarray(self.temperatures, dtype=np.float64)
        if taus.ndim != 1 or taus.size < 1:
            raise ConfigurationError("PT needs at least one temperature")
        if taus[0] != 1.0 or np.any(np.diff(taus) < 0) or not np.all(np.isfinite(taus)):
            raise ConfigurationError("PT ladder must be sorted ascending with tau_1 = 1")
        _check_step(self.step_size)
        if self.step_sizes is not None:
            eps = np.asarray(self.step_sizes, dtype=np.float64)
            if eps.shape != taus.shape or np.any(eps <= 0):
                raise ConfigurationError("PT step_sizes must be positive, one per temperature")

    @property
    def taus(self):
        return np.asarray(self.temperatures, dtype=np.float64)

    @property
    def level_steps(self):
        if self.step_sizes is not None:
            return np.asarray(self.step_sizes, dtype=np.float64)
        return self.step_size * self.taus


@dataclass
class DigsConfig:
    alphas: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    n_local: int = 10
    step_size: float = 0.1

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=np.float64)
        if a.ndim != 1 or a.size < 1 or np.any(a <= 0) or np.any(a >= 1):
            raise ConfigurationError("DiGS noise levels must lie strictly inside (0, 1)")
        if self.n_local < 0:
            raise ConfigurationError("DiGS n_local must be >= 0")
        _check_step(self.step_size)


def _check_step(eps):
    if not (np.isfinite(eps) and eps > 0):
        raise ConfigurationError(f"MALA step size must be > 0, got {eps!r}")


def linear_schedule(n, lo, hi):
    """``n`` equally spaced noise levels from ``lo`` to ``hi``."""
    return tuple(float(a) for a in np.linspace(lo, hi, int(n)))


# ---------------------------------------------------------------- slice kernels

def _magss_move(x, metric, config, rng, stats):
    args = metric.args
    log_f0 = float(mk.log_hausdorff(*args, x))
    if not math.isfinite(log_f0):
        raise ContractError("log Hausdorff density is not finite at the current point")
    log_s = draw_level(log_f0, rng)
    try:
        v = sample_unit_tangent(metric, x, rng)
        curve = GeodesicCurve(metric, x, v, config.integrator)
    except (IntegrationError, EvaluationError, ContractError):
        stats.fallback = True
        return x

    def f(t):
        if t == 0.0:
            return log_f0
        return mk.log_hausdorff(*args, curve.eval(t))

    f = safe_density(f)
    left, right = step_out(log_s, f, config.slice, rng, stats)
    t_star = shrink(log_s, f, left, right, config.slice, rng, stats)
    stats.geodesic_steps += curve.n_steps
    stats.slice_steps += 1
    if t_star == 0.0:
        return x
    return curve.eval(t_star)


def magss_step(state, target, config):
    """One MAGSS transition: level, unit tangent, step-out, shrink, move."""
    metric = config.metric_for(target)
    stats = StepStats()
    x = _magss_move(state.x, metric, config, state.rng, stats)
    return state.evolve(x, stats)


def hit_and_run_step(state, target, params, rng=None):
    """Euclidean hit-and-run slice sampling along a uniform random direction."""
    rng = state.rng if rng is None else rng
    x = state.x
    stats = StepStats()
    lp0 = target.log_density(x)
    log_s = lp0 + math.log(rng.random())
    z = rng.standard_normal(x.shape[0])
    d = z / math.sqrt(np.dot(z, z))

    def f(t):
        return lp0 if t == 0.0 else target.log_density(x + t * d)

    f = safe_density(f)
    left, right = step_out(log_s, f, params, rng, stats)
    t_star = shrink(log_s, f, left, right, params, rng, stats)
    stats.slice_steps = 1
    return state.evolve(x + t_star * d if t_star != 0.0 else x, stats)


# ----------------------------------------------------------- gradient kernels

def _require_start(target, x):
    if not sk.start_ok(target.kind, target.params, x):
        raise ContractError("log density and gradient must be finite at the current point")


def mala_step(state, target, step_size, rng=None, n_steps=1):
    """Metropolis-adjusted Langevin: x' = x + eps grad l + sqrt(2 eps) xi."""
    _check_step(step_size)
    rng = state.rng if rng is None else rng
    _require_start(target, state.x)
    x, n_acc = sk.mala(target.kind, target.params, state.x.copy(), float(step_size),
                       int(n_steps), rng)
    stats = StepStats(local_steps=int(n_steps), local_accepted=int(n_acc))
    return state.evolve(x, stats)


def meta_magss_step(state, target, config):
    """K MAGSS sweeps followed by L MALA steps, emitted as one sample."""
    metric = config.magss.metric_for(target)
    stats = StepStats()
    x = state.x
    for _ in range(config.K):
        x = _magss_move(x, metric, config.magss, state.rng, stats)
    if config.L > 0:
        _require_start(target, x)
        x, n_acc = sk.mala(target.kind, target.params, np.array(x), float(config.step_size),
                           int(config.L), state.rng)
        stats.local_steps = config.L
        stats.local_accepted = int(n_acc)
    return state.evolve(x, stats)


def pt_step(state, target, config):
    """Parallel tempering sweep: MALA at every level, then one adjacent swap.

    The replicas live in ``state.replicas`` (coldest first; initialized from
    ``state.x`` on first use); the emitted sample is the cold chain.
    """
    taus = config.taus
    X = state.replicas
    if X is None:
        X = np.tile(state.x, (taus.size, 1))
    X = np.array(X, dtype=np.float64)
    if X.shape != (taus.size, state.x.shape[0]):
        raise ConfigurationError("PT replicas do not match the temperature ladder")
    if not sk.rows_ok(target.kind, target.params, X):
        raise ContractError("log density and gradient must be finite at every replica")
    n_acc, pair, swapped = sk.pt_sweep(target.kind, target.params, X, taus,
                                       config.level_steps, state.rng)
    stats = StepStats(local_steps=int(taus.size), local_accepted=int(n_acc),
                      swap_attempted=bool(pair >= 0), swap_accepted=bool(swapped))
    return state.evolve(X[0], stats, replicas=X)


def digs_step(state, target, config):
    """One diffusive Gibbs sweep over ``config.alphas``."""
    _require_start(target, state.x)
    alphas = np.asarray(config.alphas, dtype=np.float64)
    x, n_init, n_acc = sk.digs_sweep(target.kind, target.params, state.x.copy(), alphas,
                                     int(config.n_local), float(config.step_size), state.rng)
    stats = StepStats(local_steps=int(config.n_local) * alphas.size,
                      local_accepted=int(n_acc), init_accepted=int(n_init))
    return state.evolve(x, stats)

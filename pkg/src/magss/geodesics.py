"""Cached geodesic curves.

A :class:`GeodesicCurve` integrates the geodesic equations lazily from
``(x0, v0)``. It keeps one cache for ``t >= 0`` and one for ``t <= 0``; the
backward cache is the forward solution from ``(x0, -v0)`` with the velocity
sign flipped back, which is exact by time reversal. Between knots the curve
is evaluated by cubic Hermite interpolation of the state using its time
derivative as slopes; curves integrated in velocity form instead use the quintic Hermite
interpolant of ``x`` through ``(x, v, a)`` and differentiate it for ``v``.
"""
from dataclasses import asdict, dataclass

import numpy as np

from . import _geodesic_kernels as gk
from .errors import ConfigurationError, ContractError, IntegrationError

METHODS = {
    "euler_fixed": gk.EULER,
    "rk4_fixed": gk.RK4,
    "dopri5_fixed": gk.DOPRI5_FIXED,
    "dopri5_adaptive": gk.DOPRI5_ADAPTIVE,
}

_STATUS_TEXT = {
    gk.NONFINITE: "non-finite state",
    gk.BUDGET: "step budget exhausted",
    gk.STEP_UNDERFLOW: "step size underflow",
    gk.SPEED_DRIFT: "Riemannian speed drifted beyond speed_tol",
}


@dataclass(frozen=True)
class IntegratorConfig:
    kind: str = "dopri5_adaptive"
    h: float = 0.01
    rtol: float = 1e-5
    atol: float = 1e-6
    max_steps_per_unit: int = 100_000
    # hard cap per cache side; each knot costs O(D) memory, and the per-unit
    # budget alone would allow millions of them on a long query
    max_steps: int = 200_000
    t_max: float = 1e3
    # adaptive steps are capped so Hermite interpolation between knots stays
    # as accurate as the knots themselves
    h_max: float = 0.1
    # abort once |speed - 1| exceeds this; 0 disables the check
    speed_tol: float = 0.1

    def __post_init__(self):
        if self.kind not in METHODS:
            raise ConfigurationError(
                f"integrator kind must be one of {sorted(METHODS)}, got {self.kind!r}")
        if not self.h > 0:
            raise ConfigurationError("integrator h must be > 0")
        if not (self.rtol > 0 and self.atol > 0):
            raise ConfigurationError("integrator rtol and atol must be > 0")
        if int(self.max_steps_per_unit) < 1:
            raise ConfigurationError("max_steps_per_unit must be >= 1")
        if int(self.max_steps) < 1:
            raise ConfigurationError("max_steps must be >= 1")
        if not self.t_max > 0:
            raise ConfigurationError("t_max must be > 0")
        if not self.h_max > 0:
            raise ConfigurationError("h_max must be > 0")
        if not self.speed_tol >= 0:
            raise ConfigurationError("speed_tol must be >= 0")

    @property
    def method(self):
        return METHODS[self.kind]

    def to_dict(self):
        return asdict(self)


class _Branch:
    """One-sided cache: knots of the forward solution from ``y0``."""

    def __init__(self, curve, y0):
        self.curve = curve
        dy0 = gk.rhs(*curve.metric.args, y0)
        if not np.all(np.isfinite(dy0)):
            raise IntegrationError("non-finite acceleration at the origin", 0.0)
        self.ts = [np.zeros(1)]
        self.ys = [y0[None, :]]
        self.dys = [dy0[None, :]]
        self._flat = None
        self.t = 0.0
        self.y = y0
        self.dy = dy0
        cfg = curve.config
        if cfg.method == gk.DOPRI5_ADAPTIVE:
            self.h = gk.initial_step(*curve.metric.args, y0, dy0, cfg.rtol, cfg.atol,
                                     cfg.h_max)
        else:
            self.h = cfg.h
        self.err_prev = 1.0
        self.attempts = 0
        self.failure = None
        self.budget_hit_at = -1.0
        self.momentum = bool(gk.uses_momentum(curve.metric.kind))

    @property
    def n_steps(self):
        return sum(len(a) for a in self.ts) - 1

    def _knots(self):
        if self._flat is None or len(self.ts) > 1:
            self._flat = (np.concatenate(self.ts), np.concatenate(self.ys),
                          np.concatenate(self.dys))
            self.ts = [self._flat[0]]
            self.ys = [self._flat[1]]
            self.dys = [self._flat[2]]
        return self._flat

    def _extend(self, s):
        cfg = self.curve.config
        budget = int(min(cfg.max_steps_per_unit * max(1.0, s), cfg.max_steps))
        try:
            out = gk.advance(*self.curve.metric.args, self.t, self.y, self.dy, self.h,
                             self.err_prev, s, cfg.method, cfg.rtol, cfg.atol,
                             cfg.h_max, cfg.speed_tol, self.attempts, budget)
        except (np.linalg.LinAlgError, ZeroDivisionError, FloatingPointError, ValueError) as exc:
            self.failure = f"evaluation failed: {exc}"
            return
        ts, ys, dys, status, self.t, self.y, self.dy, self.h, self.err_prev, self.attempts = out
        if len(ts):
            self.ts.append(ts)
            self.ys.append(ys)
            self.dys.append(dys)
        # the step budget scales with the goal, so running out is only final
        # for goals up to this one
        if status == gk.BUDGET and budget >= cfg.max_steps:
            self.failure = _STATUS_TEXT[gk.BUDGET]
        elif status == gk.BUDGET:
            self.budget_hit_at = s
        elif status != gk.OK:
            self.failure = _STATUS_TEXT[status]

    def state(self, s):
        if s > self.t:
            if self.failure is None and self.budget_hit_at < s:
                self._extend(s)
            if s > self.t:
                reason = self.failure or _STATUS_TEXT[gk.BUDGET]
                raise IntegrationError(
                    f"geodesic integration stopped at t={self.t!r}: {reason}", self.t)
        ts, ys, dys = self._knots()
        i = int(np.searchsorted(ts, s, side="right")) - 1
        if ts[i] == s:
            return ys[i]
        if self.momentum:
            return gk.hermite(ts[i], ts[i + 1], ys[i], ys[i + 1], dys[i], dys[i + 1], s)
        D = ys.shape[1] // 2
        x, v = gk.hermite5(ts[i], ts[i + 1], ys[i, :D], ys[i + 1, :D], ys[i, D:],
                           ys[i + 1, D:], dys[i, D:], dys[i + 1, D:], s)
        return np.concatenate((x, v))


class GeodesicCurve:
    """Geodesic ``t -> gamma(t)`` with ``gamma(0) = x0`` and unit initial speed.

    ``v0`` must have Riemannian norm 1 to within 1e-8; it is then rescaled so
    that ``t`` is exactly arc length. Flat metrics are evaluated in closed form
    unless ``force_integration`` is set.
    """

    def __init__(self, metric, x0, v0, config=None, force_integration=False, norm_tol=1e-8):
        self.metric = metric
        self.config = config or IntegratorConfig()
        x0 = np.array(metric._point(x0), dtype=np.float64)
        v0 = np.array(metric._vec(v0), dtype=np.float64)
        nrm2 = metric.norm_sq(x0, v0)
        if not abs(np.sqrt(nrm2) - 1.0) <= norm_tol:
            raise ContractError(f"initial velocity must have unit Riemannian norm, got {np.sqrt(nrm2)!r}")
        self.x0 = x0
        # rescaling a vector that is already unit to rounding would only
        # perturb its last bits
        self.v0 = v0 if abs(nrm2 - 1.0) <= 1e-12 else v0 / np.sqrt(nrm2)
        self.dim = x0.shape[0]
        self.closed_form = metric.flat and not force_integration
        self._q0 = None
        self._fwd = None
        self._bwd = None

    def _branch(self, forward):
        if forward:
            if self._fwd is None:
                self._fwd = _Branch(self, np.concatenate([self.x0, self.q0]))
            return self._fwd
        if self._bwd is None:
            self._bwd = _Branch(self, np.concatenate([self.x0, -self.q0]))
        return self._bwd

    @property
    def q0(self):
        if self._q0 is None:
            self._q0 = gk.to_native(*self.metric.args, self.x0, self.v0)
        return self._q0

    def _native(self, t):
        """Position and signed native second half (velocity or momentum)."""
        t = float(t)
        if not np.isfinite(t) or abs(t) > self.config.t_max:
            raise IntegrationError(f"|t| exceeds t_max={self.config.t_max!r}", 0.0)
        y = self._branch(t > 0).state(abs(t))
        D = self.dim
        if t > 0:
            return y[:D].copy(), y[D:].copy()
        return y[:D].copy(), -y[D:]

    def eval_with_velocity(self, t):
        t = float(t)
        if t == 0.0:
            return self.x0.copy(), self.v0.copy()
        if self.closed_form:
            if not np.isfinite(t) or abs(t) > self.config.t_max:
                raise IntegrationError(f"|t| exceeds t_max={self.config.t_max!r}", 0.0)
            return self.x0 + t * self.v0, self.v0.copy()
        x, q = self._native(t)
        return x, gk.velocity(*self.metric.args, x, q)

    def speed(self, t):
        """Riemannian speed at ``t``, computed from the integrator's own state."""
        if float(t) == 0.0 or self.closed_form:
            x, v = self.eval_with_velocity(t)
            return float(np.sqrt(self.metric.norm_sq(x, v)))
        x, q = self._native(t)
        return float(np.sqrt(gk.speed_sq(*self.metric.args, x, q)))

    def eval(self, t):
        return self.eval_with_velocity(t)[0]

    @property
    def n_steps(self):
        """Accepted integration steps across both caches."""
        return sum(b.n_steps for b in (self._fwd, self._bwd) if b is not None)

    def cached_range(self):
        lo = -self._bwd.t if self._bwd is not None else 0.0
        hi = self._fwd.t if self._fwd is not None else 0.0
        return lo, hi

    def knots(self, forward=True):
        """Accepted knots ``(t, x, v)`` of one cache, signed as seen from ``x0``."""
        b = self._branch(forward)
        ts, ys, _ = b._knots()
        D = self.dim
        xs = ys[:, :D].copy()
        vs = np.array([gk.velocity(*self.metric.args, x, q) for x, q in zip(xs, ys[:, D:])])
        if forward:
            return ts.copy(), xs, vs
        return -ts, xs, -vs


def make_curve(metric, x0, v0, integrator=None, **kwargs):
    return GeodesicCurve(metric, x0, v0, integrator, **kwargs)

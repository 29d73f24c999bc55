import copy
import math

import numpy as np
import pytest
from scipy import stats

from magss.errors import ConfigurationError, IntegrationError
from magss.slice import (SliceParams, SliceStats, safe_density, shrink, slice_1d_step, step_out,
                         wrap)


def std_normal(t):
    return -0.5 * t * t


def predicted_offsets(rng, params):
    r = copy.deepcopy(rng)
    return r.uniform(0.0, params.w), int(r.integers(1, params.m + 1))


def test_step_out_no_expansion():
    params = SliceParams(w=2.0, m=8)
    rng = np.random.default_rng(0)
    u, _ = predicted_offsets(rng, params)
    f = lambda t: 0.0 if abs(t) < 1e-9 else -math.inf
    left, right = step_out(-1.0, f, params, rng)
    assert right - left == pytest.approx(params.w)
    assert left == -u


def test_step_out_plateau_uses_whole_budget():
    params = SliceParams(w=1.0, m=4)
    for seed in range(20):
        left, right = step_out(-1.0, lambda t: 0.0, params, np.random.default_rng(seed))
        assert right - left == pytest.approx(4.0)
        assert left <= 0.0 <= right


def test_step_out_endpoints_leave_slice():
    params = SliceParams(w=0.5, m=8)
    rng = np.random.default_rng(1)
    for _ in range(500):
        log_s = math.log(rng.random())
        u, iota = predicted_offsets(rng, params)
        st = SliceStats()
        left, right = step_out(log_s, std_normal, params, rng, st)
        n_left = round((-left - u) / params.w)
        n_right = round((right - left) / params.w) - 1 - n_left
        assert left <= 0.0 <= right
        assert right - left <= params.m * params.w + 1e-12
        if n_left < iota - 1:
            assert std_normal(left) <= log_s
        if n_right < params.m - iota:
            assert std_normal(right) <= log_s
        assert st.step_out_evals <= params.m + 1


def test_safe_density_maps_failures_out():
    def bad(t):
        raise IntegrationError("boom", 0.0)
    assert safe_density(bad)(1.0) == -math.inf
    assert safe_density(lambda t: float("nan"))(1.0) == -math.inf


def test_shrink_plateau_first_draw_uniform():
    params = SliceParams()
    rng = np.random.default_rng(2)
    draws = []
    for _ in range(20_000):
        st = SliceStats()
        draws.append(shrink(-1.0, lambda t: 0.0, -1.0, 3.0, params, rng, st))
        assert st.shrink_iters == 0 and not st.fallback
    assert stats.kstest(draws, stats.uniform(-1.0, 4.0).cdf).pvalue > 0.01


def test_shrink_narrow_slice():
    eps = 1e-3
    f = lambda t: 0.0 if abs(t) <= eps else -math.inf
    rng = np.random.default_rng(3)
    params = SliceParams()
    for _ in range(10_000):
        st = SliceStats()
        t = shrink(-1.0, f, -2.0, 2.0, params, rng, st)
        assert abs(t) <= eps
        if t != 0.0:
            assert f(t) > -1.0


def test_shrink_zero_iterations_falls_back():
    st = SliceStats()
    t = shrink(-1.0, lambda x: 0.0, -1.0, 1.0, SliceParams(max_shrink_iters=0),
               np.random.default_rng(0), st)
    assert t == 0.0 and st.fallback


def test_shrink_cap_counts_iterations():
    st = SliceStats()
    t = shrink(-1.0, lambda x: 0.0 if x == 0.0 else -math.inf, -1.0, 1.0,
               SliceParams(max_shrink_iters=7), np.random.default_rng(0), st)
    assert t == 0.0 and st.fallback and st.shrink_iters == 7


def test_wrapped_draw_is_uniform():
    left, right = -1.3, 2.2
    rng = np.random.default_rng(4)
    th = np.array([wrap(h, left, right) for h in rng.uniform(0, right - left, 100_000)])
    assert np.all((th > left) & (th <= right))
    counts, _ = np.histogram(th, bins=20, range=(left, right))
    assert stats.chisquare(counts).pvalue > 0.01


def test_slice_1d_moments():
    rng = np.random.default_rng(5)
    params = SliceParams(w=3.0, m=8)
    x = 0.0
    xs = np.empty(100_000)
    for i in range(xs.size):
        x = slice_1d_step(x, std_normal, params, rng)
        xs[i] = x
    assert abs(xs.mean()) < 0.02
    assert abs(xs.var() - 1.0) < 0.05


def test_slice_1d_preserves_normal():
    rng = np.random.default_rng(6)
    params = SliceParams()
    x = 0.0
    out = []
    for i in range(500_000):
        x = slice_1d_step(x, std_normal, params, rng)
        if i % 5 == 4:
            out.append(x)
    assert stats.kstest(out, "norm").statistic < 0.01


def test_slice_1d_narrow_density():
    rng = np.random.default_rng(7)
    params = SliceParams(w=100.0, m=2)
    lp = lambda t: -0.5 * ((t - 0.3) / 1e-3) ** 2
    x = 0.3
    for _ in range(1000):
        x = slice_1d_step(x, lp, params, rng)
        assert abs(x - 0.3) < 1e-2


def test_slice_1d_deterministic():
    def run(seed):
        rng = np.random.default_rng(seed)
        x, out = 0.0, []
        for _ in range(50):
            x = slice_1d_step(x, std_normal, SliceParams(), rng)
            out.append(x)
        return out
    assert run(8) == run(8)


def test_slice_1d_rejects_outside_start():
    with pytest.raises(ConfigurationError):
        slice_1d_step(0.0, lambda t: -math.inf, SliceParams(), np.random.default_rng(0))


def test_params_validation():
    with pytest.raises(ConfigurationError):
        SliceParams(w=0.0)
    with pytest.raises(ConfigurationError):
        SliceParams(m=0)
    with pytest.raises(ConfigurationError):
        SliceParams(m=2.5)

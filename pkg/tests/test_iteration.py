import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from btb.engines import AffineEngine, GaussianEngine, IdentityEngine, MedianEngine
from btb.errors import ConfigError, ShapeError
from btb.image import Image
from btb.iteration import IterationConfig, btb_run, check_epsilon_fixed, default_delta, run_on_image
from btb.metrics import cauchy_bound, contraction_report


def affine_case(seed=0, shape=(8, 8)):
    rng = np.random.default_rng(seed)
    x_star = rng.uniform(0, 255, shape)
    y = x_star + 25 * rng.standard_normal(shape)
    return x_star, y


def distances(trace, x_star):
    return np.array([np.linalg.norm(x - x_star) for x in trace.iterates])


@pytest.mark.parametrize("mode", ["successive", "simple", "anchored", "langevin"])
def test_identity_engine_stops_after_one_step(mode):
    y = np.random.default_rng(1).random((6, 7))
    trace = btb_run(y, IdentityEngine(), IterationConfig(mode=mode, max_iters=20))
    assert trace.iters_run == 1 and trace.stopped_by == "delta"
    assert trace.step_norms == [0.0]
    for x in trace.iterates:
        np.testing.assert_array_equal(x, y)


def test_rates_exact_without_cancellation():
    # with x* = 0 nothing cancels, so the geometric law holds far into the tail
    y = np.random.default_rng(13).standard_normal((8, 8))
    trace = btb_run(y, AffineEngine(np.zeros_like(y), 0.3), IterationConfig(mode="successive", max_iters=60, delta=0.0))
    np.testing.assert_allclose(contraction_report(trace, 0 * y).ratios, 0.3, rtol=1e-12)


def test_successive_affine_closed_form_half():
    # integer images and q = 1/2 keep every iterate exactly representable
    rng = np.random.default_rng(0)
    x_star = rng.integers(0, 256, (8, 8)).astype(float)
    y = x_star + rng.integers(-60, 61, (8, 8))
    trace = btb_run(y, AffineEngine(x_star, 0.5), IterationConfig(mode="successive", max_iters=30, delta=0.0))
    d = distances(trace, x_star)
    np.testing.assert_allclose(d, 0.5 ** np.arange(len(d)) * d[0], rtol=1e-12)


@pytest.mark.parametrize("q", [0.3, 0.5, 0.9])
def test_successive_affine_geometric_steps(q):
    x_star, y = affine_case()
    # the default delta ends the run before ||w_t|| nears the rounding floor of x*
    trace = btb_run(y, AffineEngine(x_star, q), IterationConfig(mode="successive", max_iters=500))
    assert trace.stopped_by == "delta" and trace.iters_run >= 5
    d = distances(trace, x_star)
    np.testing.assert_allclose(d[1:] / d[:-1], q, atol=1e-9)
    steps = np.array(trace.step_norms)
    np.testing.assert_allclose(steps[1:] / steps[:-1], q, atol=1e-9)


@pytest.mark.parametrize("q", [0.3, 0.5, 0.9])
@pytest.mark.parametrize("mu", [0.25, 0.5, 0.8, 1.0])
def test_simple_mode_effective_rate(q, mu):
    x_star, y = affine_case(seed=2)
    trace = btb_run(y, AffineEngine(x_star, q), IterationConfig(mode="simple", mu=mu, max_iters=1000))
    assert trace.stopped_by == "delta" and trace.iters_run >= 5
    rep = contraction_report(trace, x_star)
    np.testing.assert_allclose(rep.ratios, 1 - mu + mu * q, atol=1e-9)
    assert rep.monotone


def test_simple_mode_three_quarters():
    x_star, y = affine_case(seed=3)
    trace = btb_run(y, AffineEngine(x_star, 0.5), IterationConfig(mode="simple", mu=0.5, max_iters=10, delta=0.0))
    d = distances(trace, x_star)
    np.testing.assert_allclose(d, 0.75 ** np.arange(len(d)) * d[0], rtol=1e-12)


@pytest.mark.parametrize("mode, mu, q", [("successive", 1.0, 0.3), ("successive", 1.0, 0.9), ("simple", 0.5, 0.5), ("simple", 0.8, 0.9)])
def test_cauchy_bound_all_pairs(mode, mu, q):
    x_star, y = affine_case(seed=4)
    trace = btb_run(y, AffineEngine(x_star, q), IterationConfig(mode=mode, mu=mu, max_iters=30, delta=0.0))
    qt = 1 - mu + mu * q
    w0 = np.linalg.norm(y - x_star)
    for m, k in itertools.combinations(range(len(trace.iterates)), 2):
        gap = np.linalg.norm(trace.iterates[k] - trace.iterates[m])
        assert gap <= cauchy_bound(qt, m, w0) * (1 + 1e-12)


@given(st.floats(0.05, 0.95), st.floats(0.05, 1.0), st.integers(0, 2**31))
def test_solution_stays_within_initial_noise(q, mu, seed):
    x_star, y = affine_case(seed)
    trace = btb_run(y, AffineEngine(x_star, q), IterationConfig(mode="simple", mu=mu, max_iters=15, delta=0.0))
    assert np.linalg.norm(trace.final - y) <= np.linalg.norm(y - x_star) * (1 + 1e-12)


def test_anchored_mode_fixed_point():
    # x = (1 - mu) y + mu (x* + q (x - x*))  =>  x = ((1 - mu) y + mu (1 - q) x*) / (1 - mu q)
    x_star, y = affine_case(seed=5)
    q, mu = 0.5, 0.6
    trace = btb_run(y, AffineEngine(x_star, q), IterationConfig(mode="anchored", mu=mu, max_iters=200, delta=1e-12))
    want = ((1 - mu) * y + mu * (1 - q) * x_star) / (1 - mu * q)
    np.testing.assert_allclose(trace.final, want, atol=1e-9)
    assert trace.stopped_by == "delta"


def test_langevin_zero_beta_is_simple_bit_for_bit():
    y = np.random.default_rng(6).random((16, 16)) * 255
    f = GaussianEngine(1.0)
    a = btb_run(y, f, IterationConfig(mode="simple", mu=0.7, max_iters=8))
    b = btb_run(y, f, IterationConfig(mode="langevin", mu=0.7, beta=0.0, max_iters=8, seed=99))
    assert len(a.iterates) == len(b.iterates)
    for u, v in zip(a.iterates, b.iterates):
        assert u.tobytes() == v.tobytes()


def test_langevin_is_seeded():
    y = np.random.default_rng(7).random((10, 10))
    cfg = IterationConfig(mode="langevin", beta=0.1, max_iters=5, delta=0.0, seed=3)
    a, b = btb_run(y, MedianEngine(1), cfg), btb_run(y, MedianEngine(1), cfg)
    assert a.step_norms == b.step_norms
    c = btb_run(y, MedianEngine(1), IterationConfig(mode="langevin", beta=0.1, max_iters=5, delta=0.0, seed=4))
    assert a.step_norms != c.step_norms


def test_trace_determinism():
    y = np.random.default_rng(8).random((20, 20)) * 255
    cfg = IterationConfig(mode="anchored", mu=(0.9, 0.7, 0.5), max_iters=6)
    a, b = btb_run(y, MedianEngine(1), cfg), btb_run(y, MedianEngine(1), cfg)
    assert a.step_norms == b.step_norms and a.stopped_by == b.stopped_by
    for u, v in zip(a.iterates, b.iterates):
        np.testing.assert_array_equal(u, v)


def test_trace_bookkeeping():
    x_star, y = affine_case(seed=9)
    trace = btb_run(y, AffineEngine(x_star, 0.5), IterationConfig(mode="simple", max_iters=7, delta=0.0))
    assert trace.iters_run == 7 == len(trace.step_norms)
    assert len(trace.iterates) == 8 and trace.stopped_by == "max_iters"
    np.testing.assert_array_equal(trace.iterates[0], y)
    light = btb_run(y, AffineEngine(x_star, 0.5), IterationConfig(mode="simple", max_iters=7, delta=0.0, keep_iterates=False))
    np.testing.assert_array_equal(light.final, trace.final)
    assert len(light.iterates) == 2


def test_delta_stopping_rule():
    x_star, y = affine_case(seed=10)
    delta = 1.0
    trace = btb_run(y, AffineEngine(x_star, 0.5), IterationConfig(mode="successive", max_iters=100, delta=delta))
    assert trace.stopped_by == "delta"
    assert trace.step_norms[-1] < delta
    assert all(s >= delta for s in trace.step_norms[:-1])


def test_mu_schedule_repeats_last():
    cfg = IterationConfig(mu=[0.9, 0.5])
    assert [cfg.step_size(t) for t in range(4)] == [0.9, 0.5, 0.5, 0.5]
    assert IterationConfig(mode="successive", mu=0.3).step_size(0) == 1.0


def test_mu_schedule_applied():
    x_star, y = affine_case(seed=11)
    mus = (1.0, 0.5, 0.25)
    trace = btb_run(y, AffineEngine(x_star, 0.5), IterationConfig(mode="simple", mu=mus, max_iters=3, delta=0.0))
    rep = contraction_report(trace, x_star)
    np.testing.assert_allclose(rep.ratios, [1 - m + m * 0.5 for m in mus], atol=1e-12)


@pytest.mark.parametrize(
    "kwargs",
    [dict(max_iters=0), dict(mu=0.0), dict(mu=1.5), dict(mu=[]), dict(mode="newton"), dict(beta=-1), dict(delta=-1), dict(epsilon=-0.1)],
)
def test_config_errors(kwargs):
    with pytest.raises(ConfigError):
        IterationConfig(**kwargs)


def test_default_delta_scale():
    assert default_delta((100, 100), 255) == pytest.approx(0.1)
    assert default_delta((100, 100), 1.0) == pytest.approx(0.1 / 255)


def test_engine_shape_change_is_reported():
    with pytest.raises(ShapeError):
        btb_run(np.zeros((4, 4)), lambda x: x[:2], IterationConfig(max_iters=2))


def test_run_on_image_keeps_peak():
    img = Image(np.full((5, 5), 0.5), 1.0)
    out, trace = run_on_image(img, GaussianEngine(1.0))
    assert isinstance(out, Image) and out.peak == 1.0
    assert trace.peak == 1.0


# --- epsilon-fixed points ----------------------------------------------------------


@pytest.mark.parametrize("engine", [GaussianEngine(2.0), MedianEngine(1), IdentityEngine()], ids=repr)
def test_constant_is_exact_fixed_point(engine):
    assert check_epsilon_fixed(np.full((8, 8), 42.0), engine, 0.0)


def test_identity_fixes_everything():
    assert check_epsilon_fixed(np.random.default_rng(0).random((5, 5)), IdentityEngine(), 0.0)


def test_blurred_noise_is_not_fixed():
    noise = np.random.default_rng(1).standard_normal((32, 32))
    f = GaussianEngine(2.0)
    residual = np.linalg.norm(noise - f(noise))
    assert residual > 0
    assert not check_epsilon_fixed(noise, f, 0.0)
    assert check_epsilon_fixed(noise, f, residual)
    with pytest.raises(ConfigError):
        check_epsilon_fixed(noise, f, -1.0)


def test_trace_epsilon_flag():
    x_star, y = affine_case(seed=12)
    trace = btb_run(y, AffineEngine(x_star, 0.5), IterationConfig(mode="successive", max_iters=60, delta=0.0, epsilon=1e-6))
    assert trace.epsilon_fixed
    trace = btb_run(y, AffineEngine(x_star, 0.5), IterationConfig(mode="successive", max_iters=2, delta=0.0, epsilon=1e-6))
    assert not trace.epsilon_fixed

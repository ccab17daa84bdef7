import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from btb.errors import ConfigError
from btb.image import Image, load_image
from btb.engines import (
    AffineEngine,
    GaussianEngine,
    IdentityEngine,
    MedianEngine,
    NlmEngine,
    NlmParams,
    nlm_denoise,
    parse_engine,
)
from btb.noise import add_awgn

import oracles


ENGINES = [
    GaussianEngine(1.0),
    GaussianEngine(2.5),
    MedianEngine(1),
    MedianEngine(2),
    NlmEngine(patch_radius=1, search_radius=3, h=10.0),
    IdentityEngine(),
]


@pytest.mark.parametrize("engine", ENGINES, ids=repr)
@pytest.mark.parametrize("c", [0.0, 0.37, 200.0])
def test_constants_are_fixed(engine, c):
    a = np.full((9, 14), c)
    np.testing.assert_allclose(engine(a), c, rtol=1e-14, atol=1e-14)


@pytest.mark.parametrize("engine", ENGINES, ids=repr)
@pytest.mark.parametrize("shape", [(5, 17), (23, 4), (1, 9), (6, 1)])
def test_shape_preserved(engine, shape):
    rng = np.random.default_rng(0)
    a = rng.random(shape)
    assert engine(a).shape == shape
    out = engine.denoise(Image(a, 1.0))
    assert isinstance(out, Image) and out.shape == shape and out.peak == 1.0


@pytest.mark.parametrize("engine", ENGINES, ids=repr)
def test_deterministic(engine):
    a = np.random.default_rng(2).random((12, 10))
    np.testing.assert_array_equal(engine(a), engine(a))


# --- Gaussian ------------------------------------------------------------------------


def test_subpixel_gaussian_matches_kernel_weights():
    std = 0.3
    # truncation at +-ceil(3 std) = 1: taps e^{-1/(2 std^2)} around a unit centre
    side = math.exp(-1.0 / (2 * std * std))
    taps = np.array([side, 1.0, side]) / (1.0 + 2.0 * side)
    a = np.random.default_rng(4).random((10, 12))
    ap = np.pad(a, 1, mode="symmetric")
    rows = sum(taps[i] * ap[i : i + 10] for i in range(3))
    want = sum(taps[j] * rows[:, j : j + 12] for j in range(3))
    got = GaussianEngine(std)(a)
    np.testing.assert_allclose(got, want, atol=1e-12)
    # the truncated kernel is close to, but not within 1e-6 of, a delta
    assert taps[0] == pytest.approx(3.85e-3, rel=0.01)
    assert np.abs(got - a).max() <= 4 * taps[0]


def test_gaussian_variance_reduction_matches_kernel_energy():
    std = 2.0
    r = math.ceil(3 * std)
    n = np.arange(-r, r + 1)
    k1 = np.exp(-(n**2) / (2 * std * std))
    k1 /= k1.sum()
    factor = float(np.sum(k1**2) ** 2)  # sum of squared 2-D weights
    noise = np.random.default_rng(5).standard_normal((512, 512))
    out = GaussianEngine(std)(noise)
    ratio = out[r:-r, r:-r].var() / noise.var()
    assert ratio < 0.1
    assert ratio == pytest.approx(factor, rel=0.1)


def test_gaussian_rejects_bad_std():
    with pytest.raises(ConfigError):
        GaussianEngine(0.0)


# --- median --------------------------------------------------------------------------


def test_median_removes_single_impulse():
    a = np.zeros((7, 7))
    a[3, 3] = 255
    np.testing.assert_array_equal(MedianEngine(1)(a), 0)


def test_median_matches_sort_oracle_7x7():
    a = np.random.default_rng(6).random((7, 7))
    np.testing.assert_array_equal(MedianEngine(2)(a), oracles.median(a, 2))


@pytest.mark.parametrize("trial", range(20))
def test_median_oracle_random(trial):
    rng = np.random.default_rng(100 + trial)
    h, w = rng.integers(2, 17, size=2)
    r = int(rng.integers(1, 3))
    a = rng.integers(0, 256, (h, w)).astype(float)
    np.testing.assert_array_equal(MedianEngine(r)(a), oracles.median(a, r))


def test_median_radius_validated():
    with pytest.raises(ConfigError):
        MedianEngine(0)


# --- NLM ---------------------------------------------------------------------------


def test_nlm_matches_loop_oracle_16x16():
    a = np.random.default_rng(8).random((16, 16)) * 255
    p = NlmParams(patch_radius=1, search_radius=3, h=40.0)
    np.testing.assert_allclose(nlm_denoise(a, p), oracles.nlm(a, 1, 3, 40.0), rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("trial", range(20))
def test_nlm_oracle_random(trial):
    rng = np.random.default_rng(200 + trial)
    h, w = rng.integers(3, 13, size=2)
    pr = int(rng.integers(0, 2))
    sr = int(rng.integers(max(pr, 1), 4))
    hh = float(rng.uniform(5, 60))
    sigma = float(rng.choice([0.0, 5.0]))
    a = rng.random((h, w)) * 255
    got = nlm_denoise(a, NlmParams(pr, sr, hh, sigma))
    np.testing.assert_allclose(got, oracles.nlm(a, pr, sr, hh, sigma), rtol=1e-10, atol=1e-10)


def test_nlm_sharp_step_is_kept():
    a = np.zeros((12, 12))
    a[:, 6:] = 100.0
    np.testing.assert_allclose(NlmEngine(patch_radius=1, search_radius=3, h=1e-3)(a), a, atol=1e-12)


def test_nlm_underflow_falls_back_to_self():
    a = np.array([[0.0, 1e6], [1e6, 0.0]])
    out = NlmEngine(patch_radius=0, search_radius=1, h=1e-3)(a)
    assert np.all(np.isfinite(out))


def test_nlm_params_validated():
    with pytest.raises(ConfigError):
        NlmParams(patch_radius=4, search_radius=2)
    with pytest.raises(ConfigError):
        NlmParams(h=0.0)


# --- contraction on noise ---------------------------------------------------------


@pytest.mark.parametrize(
    "engine",
    [GaussianEngine(1.0), MedianEngine(1), NlmEngine(patch_radius=1, search_radius=5, h=10.0)],
    ids=repr,
)
def test_engine_shrinks_noise_in_mean(corpus_dir, engine):
    clean = load_image(corpus_dir / "camera.pgm").data[64:160, 64:160]
    ratios = []
    for seed in range(20):
        noisy = add_awgn(clean, 25.0, seed)
        ratios.append(np.linalg.norm(engine(noisy) - clean) / np.linalg.norm(noisy - clean))
    q = float(np.mean(ratios))
    print(f"measured q for {engine.spec()}: {q:.3f}")
    assert q <= 1.0


# --- engine strings ------------------------------------------------------------------


@pytest.mark.parametrize("text", ["gaussian:std=1.5", "median:r=1", "nlm:patch=1,search=5,h=10", "identity"])
def test_parse_engine_round_trip(text):
    e = parse_engine(text)
    assert parse_engine(e.spec()).spec() == e.spec()


def test_parse_engine_values():
    e = parse_engine("nlm:patch=2,search=4,h=12")
    assert (e.p.patch_radius, e.p.search_radius, e.p.h) == (2, 4, 12.0)
    assert parse_engine("median:r=3").radius == 3


@pytest.mark.parametrize("text", ["foo", "gaussian:sigma=1", "median:r", "nlm:h=abc", "gaussian:std=-1"])
def test_parse_engine_errors(text):
    with pytest.raises(ConfigError):
        parse_engine(text)


@given(st.floats(0.1, 0.9), st.integers(0, 2**31))
def test_affine_engine_contracts_exactly(q, seed):
    rng = np.random.default_rng(seed)
    xs, x = rng.standard_normal((2, 6, 6))
    f = AffineEngine(xs, q)
    np.testing.assert_allclose(np.linalg.norm(f(x) - xs), q * np.linalg.norm(x - xs), rtol=1e-12)

"""Image quality metrics and empirical convergence diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .image import Image, as_array, gaussian_taps, quantize


def _pair(a, b):
    a_, b_ = as_array(a), as_array(b)
    if a_.shape != b_.shape:
        raise ShapeError(f"image shapes differ: {a_.shape} vs {b_.shape}")
    return a_, b_


def _peak_of(a, b, peak):
    if peak is not None:
        return float(peak)
    for img in (a, b):
        if isinstance(img, Image):
            return img.peak
    return 255.0


def _quantized(a, peak):
    return quantize(a, peak).astype(np.float64) * (peak / 255.0)


def psnr(a, b, peak: float | None = None, quantize_first: bool = False) -> float:
    """10 log10(peak^2 / MSE); ``math.inf`` for identical inputs.

    ``peak`` defaults to the first Image argument's peak, else 255. With
    ``quantize_first`` both images are clamped and rounded to 8 bits first.
    """
    peak = _peak_of(a, b, peak)
    a_, b_ = _pair(a, b)
    if quantize_first:
        a_, b_ = _quantized(a_, peak), _quantized(b_, peak)
    mse = float(np.mean((a_ - b_) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    std: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float | None = None  # None: image peak

    def __post_init__(self):
        if not (self.k1 > 0 and self.k2 > 0):
            raise ValueError("k1 and k2 must be positive")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError("SSIM window must be odd")


def _valid_filter(a: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Separable correlation keeping only fully-inside window positions."""
    n = len(taps)
    h, w = a.shape[0] - n + 1, a.shape[1] - n + 1
    rows = sum(t * a[i : i + h] for i, t in enumerate(taps))
    return sum(t * rows[:, j : j + w] for j, t in enumerate(taps))


def ssim_map(a, b, p: SsimParams | None = None, peak: float | None = None, quantize_first: bool = False):
    p = p or SsimParams()
    peak = _peak_of(a, b, peak)
    x, y = _pair(a, b)
    if quantize_first:
        x, y = _quantized(x, peak), _quantized(y, peak)
    if min(x.shape) < p.window:
        raise ShapeError(f"image {x.shape} smaller than the {p.window}x{p.window} SSIM window")
    L = p.dynamic_range if p.dynamic_range is not None else peak
    c1, c2 = (p.k1 * L) ** 2, (p.k2 * L) ** 2
    taps = gaussian_taps(p.std, p.window // 2)
    mx, my = _valid_filter(x, taps), _valid_filter(y, taps)
    sxx = _valid_filter(x * x, taps) - mx * mx
    syy = _valid_filter(y * y, taps) - my * my
    sxy = _valid_filter(x * y, taps) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return num / den


def ssim(a, b, p: SsimParams | None = None, peak: float | None = None, quantize_first: bool = False) -> float:
    """Mean SSIM over all window positions lying fully inside the image.

    Gaussian 11x11 window (std 1.5), K1 = 0.01, K2 = 0.03, dynamic range = peak.
    """
    x, y = _pair(a, b)
    if not quantize_first and np.array_equal(x, y):
        return 1.0
    return float(np.mean(ssim_map(a, b, p, peak, quantize_first)))


@dataclass
class ContractionReport:
    """Distances ||x_t - x*|| along a trace and their successive ratios."""

    noise_norms: list
    ratios: list
    max_q: float
    monotone: bool


def contraction_report(trace, x_star) -> ContractionReport:
    """Empirical contraction factors q_t = ||w_{t+1}|| / ||w_t||, w_t = x_t - x*.

    Ratios stop at the first t with ||w_t|| == 0. ``monotone`` means every
    ratio is below 1.
    """
    iterates = trace.iterates if hasattr(trace, "iterates") else list(trace)
    if not iterates:
        raise ValueError("empty trace")
    xs = as_array(x_star)
    norms = []
    for x in iterates:
        a = as_array(x)
        if a.shape != xs.shape:
            raise ShapeError(f"iterate shape {a.shape} does not match x* {xs.shape}")
        norms.append(float(np.linalg.norm((a - xs).ravel())))
    ratios = []
    for prev, cur in zip(norms, norms[1:]):
        if prev == 0.0:
            break
        ratios.append(cur / prev)
    max_q = max(ratios) if ratios else 0.0
    return ContractionReport(norms, ratios, max_q, bool(ratios) and all(r < 1.0 for r in ratios))


def cauchy_bound(q: float, m: int, w0_norm: float) -> float:
    """Upper bound q^m (1 + q) / (1 - q) ||w_0|| on ||x_k - x_m|| for every k > m."""
    if not 0 <= q < 1:
        raise ValueError("q must lie in [0, 1)")
    return q**m * (1.0 + q) / (1.0 - q) * w0_norm


def total_variation(x) -> float:
    """Anisotropic total variation (sum of absolute neighbour differences)."""
    a = as_array(x)
    return float(np.abs(np.diff(a, axis=0)).sum() + np.abs(np.diff(a, axis=1)).sum())

"""Single-step denoisers that plug into the fixed-point iteration.

An engine is any callable mapping a 2-D float array to an array of the same
shape. The classes here add a stable ``name`` and ``params`` for reporting,
and :meth:`DenoiserEngine.denoise` accepts either an :class:`Image` or an
array.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError
from .image import as_array, convolve_separable, gaussian_taps, like, pad_array


class DenoiserEngine:
    name = "engine"

    @property
    def params(self) -> dict:
        return {}

    def __call__(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def denoise(self, img):
        out = self(as_array(img))
        if out.shape != as_array(img).shape:
            raise AssertionError(f"{self.name} changed the image shape")
        return like(img, out)

    def spec(self) -> str:
        """Round-trippable engine string, e.g. ``median:r=1``."""
        args = ",".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in self.params.items())
        return f"{self.name}:{args}" if args else self.name

    def __repr__(self):
        return f"<{type(self).__name__} {self.spec()}>"


class IdentityEngine(DenoiserEngine):
    name = "identity"

    def __call__(self, x):
        return np.array(x, dtype=np.float64, copy=True)


class AffineEngine(DenoiserEngine):
    """f(x) = x* + q (x - x*): a synthetic contraction towards ``x_star`` with rate ``q``."""

    name = "affine"

    def __init__(self, x_star, q: float):
        self.x_star = np.array(as_array(x_star), copy=True)
        self.q = float(q)

    @property
    def params(self):
        return {"q": self.q}

    def __call__(self, x):
        return self.x_star + self.q * (np.asarray(x, dtype=np.float64) - self.x_star)


class GaussianEngine(DenoiserEngine):
    """Separable Gaussian blur truncated at +-ceil(3 std), symmetric boundary."""

    name = "gaussian"

    def __init__(self, std: float = 1.0):
        if not std > 0:
            raise ConfigError(f"gaussian std must be positive, got {std}")
        self.std = float(std)
        self.taps = gaussian_taps(self.std)

    @property
    def params(self):
        return {"std": self.std}

    def __call__(self, x):
        return convolve_separable(np.asarray(x, dtype=np.float64), self.taps)


class MedianEngine(DenoiserEngine):
    name = "median"

    def __init__(self, radius: int = 1):
        if radius < 1:
            raise ConfigError(f"median radius must be >= 1, got {radius}")
        self.radius = int(radius)

    @property
    def params(self):
        return {"r": self.radius}

    def __call__(self, x):
        return ndimage.median_filter(np.asarray(x, dtype=np.float64), size=2 * self.radius + 1, mode="reflect")


@dataclass(frozen=True)
class NlmParams:
    patch_radius: int = 1
    search_radius: int = 5
    h: float = 10.0
    sigma_est: float = 0.0

    def __post_init__(self):
        if self.patch_radius < 0 or self.search_radius < 1:
            raise ConfigError("NLM radii must be non-negative (search >= 1)")
        if self.patch_radius > self.search_radius:
            raise ConfigError("patch_radius must not exceed search_radius")
        if not self.h > 0:
            raise ConfigError(f"NLM bandwidth h must be positive, got {self.h}")


def _box_mean(a: np.ndarray, r: int) -> np.ndarray:
    """Mean over (2r+1)^2 windows of ``a``, which is padded by ``r`` on each side."""
    n = 2 * r + 1
    h, w = a.shape[0] - 2 * r, a.shape[1] - 2 * r
    rows = a[0:h]
    for i in range(1, n):
        rows = rows + a[i : i + h]
    out = rows[:, 0:w]
    for j in range(1, n):
        out = out + rows[:, j : j + w]
    return out / (n * n)


def nlm_denoise(x: np.ndarray, p: NlmParams) -> np.ndarray:
    """Pixelwise non-local means with symmetric boundary extension.

    Weights are exp(-max(d2 - 2 sigma_est^2, 0) / h^2) with d2 the mean
    squared patch difference. The centre pixel gets the largest weight
    among its neighbours (1 if every neighbour weight underflows).
    """
    x = np.asarray(x, dtype=np.float64)
    height, width = x.shape
    s, pr = p.search_radius, p.patch_radius
    xp = pad_array(x, s + pr)
    # centre patches, padded by pr
    base = xp[s : s + height + 2 * pr, s : s + width + 2 * pr]
    num = np.zeros_like(x)
    den = np.zeros_like(x)
    wmax = np.zeros_like(x)
    inv_h2 = 1.0 / (p.h * p.h)
    bias = 2.0 * p.sigma_est**2
    for dy in range(-s, s + 1):
        for dx in range(-s, s + 1):
            if dy == 0 and dx == 0:
                continue
            shifted = xp[s + dy : s + dy + height + 2 * pr, s + dx : s + dx + width + 2 * pr]
            d2 = _box_mean((shifted - base) ** 2, pr)
            w = np.exp(-np.maximum(d2 - bias, 0.0) * inv_h2)
            num += w * shifted[pr : pr + height, pr : pr + width]
            den += w
            np.maximum(wmax, w, out=wmax)
    wmax[wmax == 0.0] = 1.0
    return (num + wmax * x) / (den + wmax)


class NlmEngine(DenoiserEngine):
    name = "nlm"

    def __init__(self, params: NlmParams | None = None, **kwargs):
        self.p = params or NlmParams(**kwargs)

    @property
    def params(self):
        return {"patch": self.p.patch_radius, "search": self.p.search_radius, "h": float(self.p.h)}

    def __call__(self, x):
        return nlm_denoise(x, self.p)


def parse_engine(text: str) -> DenoiserEngine:
    """Build an engine from ``gaussian:std=1.5``, ``median:r=1`` or ``nlm:patch=1,search=5,h=10``."""
    name, _, rest = text.strip().partition(":")
    kv = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"bad engine argument {item!r} in {text!r}")
        kv[key.strip().lower()] = value.strip()
    name = name.lower()
    try:
        if name == "gaussian":
            _only(kv, {"std"}, text)
            return GaussianEngine(float(kv.get("std", 1.0)))
        if name == "median":
            _only(kv, {"r", "radius"}, text)
            return MedianEngine(int(kv.get("r", kv.get("radius", 1))))
        if name == "nlm":
            _only(kv, {"patch", "search", "h", "sigma"}, text)
            return NlmEngine(
                NlmParams(
                    patch_radius=int(kv.get("patch", 1)),
                    search_radius=int(kv.get("search", 5)),
                    h=float(kv.get("h", 10.0)),
                    sigma_est=float(kv.get("sigma", 0.0)),
                )
            )
        if name == "identity":
            _only(kv, set(), text)
            return IdentityEngine()
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad engine spec {text!r}: {exc}") from None
    raise ConfigError(f"unknown engine {name!r}")


def _only(kv, allowed, text):
    extra = set(kv) - allowed
    if extra:
        raise ConfigError(f"unknown engine parameter(s) {sorted(extra)} in {text!r}")

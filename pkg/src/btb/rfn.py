"""Receptive-field normalisation (RFN) in one and two dimensions.

Each sample is divided by the clipped square root of its kernel-weighted
local energy; the RFN operator ``g(v) = (v_norm - 1) * v`` then isolates
the dark zero-crossing structure that speckle leaves behind.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .image import Padding, as_array, like, pad_array

# a kernel whose weights sum to 1 within this is treated as exactly normalised
_NORM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class RfnKernel:
    """Non-negative, symmetric, centre-peaked window of odd side length.

    ``profile`` is the 1-D factor when a 2-D kernel is the outer product of
    a profile with itself; it enables a separable fast path.
    """

    weights: np.ndarray
    profile: np.ndarray | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True)
        if w.ndim not in (1, 2):
            raise ConfigError(f"RFN kernel must be 1-D or 2-D, got {w.ndim}-D")
        if w.ndim == 2 and w.shape[0] != w.shape[1]:
            raise ConfigError(f"2-D RFN kernel must be square, got {w.shape}")
        if w.shape[0] % 2 == 0:
            raise ConfigError(f"RFN kernel side must be odd, got {w.shape[0]}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.profile is not None:
            p = np.array(self.profile, dtype=np.float64, copy=True)
            p.setflags(write=False)
            object.__setattr__(self, "profile", p)

    @property
    def dims(self) -> int:
        return self.weights.ndim

    @property
    def side(self) -> int:
        return self.weights.shape[0]

    @property
    def total(self) -> float:
        s = float(self.weights.sum())
        return 1.0 if abs(s - 1.0) <= _NORM_TOL else s


@dataclass(frozen=True)
class RfnConfig:
    kernel: RfnKernel
    tau: float = 0.25
    signed_variant: bool = False

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class Violation:
    axiom: str
    index: tuple

    def __str__(self):
        return f"{self.axiom} violated at index {self.index}"


def make_gaussian_rfn_kernel(side: int, dims: int = 2) -> RfnKernel:
    """Truncated Gaussian window with std ``side / 4``, normalised to sum 1."""
    if side < 1 or side % 2 == 0:
        raise ConfigError(f"window side must be an odd positive integer, got {side}")
    if dims not in (1, 2):
        raise ConfigError(f"dims must be 1 or 2, got {dims}")
    r = side // 2
    n = np.arange(-r, r + 1, dtype=np.float64)
    p = np.exp(-0.5 * (n / (side / 4.0)) ** 2)
    p /= p.sum()
    if dims == 1:
        return RfnKernel(p)
    return RfnKernel(np.outer(p, p), profile=p)


def make_rect_rfn_kernel(side: int, dims: int = 2) -> RfnKernel:
    """Uniform window ``1 / side**dims``."""
    if side < 1 or side % 2 == 0:
        raise ConfigError(f"window side must be an odd positive integer, got {side}")
    p = np.full(side, 1.0 / side)
    if dims == 1:
        return RfnKernel(p)
    return RfnKernel(np.outer(p, p), profile=p)


def parse_window(text: str, dims: int = 2) -> RfnKernel:
    """``gaussian:15`` or ``rect:7``."""
    kind, _, arg = text.partition(":")
    try:
        side = int(arg)
    except ValueError:
        raise ConfigError(f"bad window spec {text!r}, expected e.g. gaussian:15") from None
    kind = kind.strip().lower()
    if kind in ("gaussian", "gauss"):
        return make_gaussian_rfn_kernel(side, dims)
    if kind in ("rect", "rectangular", "box"):
        return make_rect_rfn_kernel(side, dims)
    raise ConfigError(f"unknown window {kind!r}")


def validate_rfn_kernel(k: RfnKernel) -> list[Violation]:
    """Check positivity, point symmetry, centre maximum and finite mass."""
    w = np.asarray(k.weights, dtype=np.float64)
    out = []
    if not np.all(np.isfinite(w)) or not math.isfinite(float(np.sum(w))):
        bad = np.argwhere(~np.isfinite(w))
        out.append(Violation("finite-energy", tuple(int(i) for i in bad[0]) if len(bad) else ()))
        return out
    for idx in np.argwhere(w < 0):
        out.append(Violation("positivity", tuple(int(i) for i in idx)))
    flipped = w[(slice(None, None, -1),) * w.ndim]
    scale = max(float(np.abs(w).max()), np.finfo(float).tiny)
    for idx in np.argwhere(np.abs(w - flipped) > 1e-12 * scale):
        out.append(Violation("symmetry", tuple(int(i) for i in idx)))
    center = tuple(s // 2 for s in w.shape)
    for idx in np.argwhere(w > w[center]):
        out.append(Violation("center-maximum", tuple(int(i) for i in idx)))
    return out


def _centered_deviation(u: np.ndarray, taps: np.ndarray, axis: int, radius: int) -> np.ndarray:
    """sum_n taps[n] * (u[i - n] - u[i]) along ``axis``; ``u`` is pre-padded by ``radius``."""
    n = u.shape[axis] - 2 * radius
    center = np.take(u, np.arange(radius, radius + n), axis=axis)
    acc = np.zeros_like(center)
    for j, t in enumerate(taps[::-1]):
        if t == 0.0:
            continue
        acc += t * (np.take(u, np.arange(j, j + n), axis=axis) - center)
    return acc


def _local_sq_energy(u: np.ndarray, k: RfnKernel, pad: Padding) -> np.ndarray:
    # Computed as total * u + sum h[n] (u[k-n] - u[k]) instead of h * u so
    # that constant inputs give exactly total * u with no rounding residue.
    r = k.side // 2
    total = k.total
    if u.ndim == 1:
        if k.dims != 1:
            raise ConfigError("1-D signal needs a 1-D kernel")
        up = pad_array(u, r, pad)
        return total * u + _centered_deviation(up, k.weights, 0, r)
    if k.dims != 2:
        raise ConfigError("2-D image needs a 2-D kernel")
    up = pad_array(u, r, pad)
    if k.profile is not None:
        p = k.profile
        psum = 1.0 if abs(p.sum() - 1.0) <= _NORM_TOL else float(p.sum())
        # deviation along columns on all padded rows, then along rows
        d_cols = _centered_deviation(up, p, 1, r)
        d = _centered_deviation(d_cols, p, 0, r) + psum * d_cols[r:-r or None]
        d_rows = _centered_deviation(up[:, r : r + u.shape[1]], p, 0, r)
        return total * u + d + psum * d_rows
    acc = np.zeros_like(u)
    h, w = u.shape
    flipped = k.weights[::-1, ::-1]
    for i in range(k.side):
        for j in range(k.side):
            t = flipped[i, j]
            if t != 0.0:
                acc += t * (up[i : i + h, j : j + w] - u)
    return total * u + acc


def rfn_local_energy(v, k: RfnKernel, pad: Padding | str = Padding.SYMMETRIC):
    """sigma_v = sqrt(h * v^2), the kernel-weighted local RMS of ``v``."""
    a = as_array(v)
    e = _local_sq_energy(a * a, k, Padding(pad))
    return like(v, np.sqrt(np.maximum(e, 0.0)))


def _normalize(a: np.ndarray, cfg: RfnConfig, pad: Padding) -> np.ndarray:
    sigma = np.sqrt(np.maximum(_local_sq_energy(a * a, cfg.kernel, pad), 0.0))
    return a / np.where(sigma >= cfg.tau, sigma, 1.0)


def rfn_normalize(v, cfg: RfnConfig, pad: Padding | str = Padding.SYMMETRIC):
    """Divide each sample by its local energy, or by 1 where that energy is below tau."""
    return like(v, _normalize(as_array(v), cfg, Padding(pad)))


def apply_operator(a: np.ndarray, cfg: RfnConfig, pad: Padding | str = Padding.SYMMETRIC) -> np.ndarray:
    """The RFN operator on a raw array, without the non-negativity check.

    The despeckling loops use this on iterates that may dip slightly below zero.
    """
    vn = _normalize(a, cfg, Padding(pad))
    if cfg.signed_variant:
        return (vn - np.sign(a)) * a
    return (vn - 1.0) * a


def rfn_operator(v, cfg: RfnConfig, pad: Padding | str = Padding.SYMMETRIC):
    """g(v) = (v_norm - 1) * v, or (v_norm - sign(v)) * v for the signed variant."""
    a = as_array(v)
    if not cfg.signed_variant and np.any(a < 0):
        raise DomainError("unsigned RFN operator needs a non-negative input")
    return like(v, apply_operator(a, cfg, pad))

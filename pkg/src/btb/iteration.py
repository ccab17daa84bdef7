"""Fixed-point denoising iteration around an arbitrary denoiser.

Update rules, with ``f`` the denoiser and ``mu_t`` in (0, 1]:

* successive  x_{t+1} = f(x_t)
* simple      x_{t+1} = (1 - mu_t) x_t + mu_t f(x_t)
* anchored    x_{t+1} = (1 - mu_t) y   + mu_t f(x_t)
* langevin    simple + beta * e_t,  e_t ~ N(0, I)

Updates are evaluated in increment form (``x + mu (f(x) - x)``) so that an
exact fixed point of ``f`` is reproduced bit for bit.

The loop runs at most ``max_iters`` steps and exits early once the step
``||x_{t+1} - x_t||_2`` falls below ``delta`` (or is exactly zero).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, ShapeError
from .image import Image, as_array, like
from .noise import rng_from_seed

MODES = ("successive", "simple", "anchored", "langevin")


def default_delta(shape, peak: float = 255.0) -> float:
    """1e-3 * sqrt(pixel count) * peak / 255."""
    return 1e-3 * math.sqrt(int(np.prod(shape))) * peak / 255.0


@dataclass(frozen=True)
class IterationConfig:
    mode: str = "simple"
    mu: float | Sequence[float] = 0.8
    beta: float = 0.0
    delta: float | None = None  # None: default_delta
    max_iters: int = 50
    epsilon: float = 0.0
    seed: int = 0
    keep_iterates: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        mus = (self.mu,) if np.isscalar(self.mu) else tuple(self.mu)
        if not mus:
            raise ConfigError("mu schedule is empty")
        if any(not 0 < m <= 1 for m in mus):
            raise ConfigError(f"step sizes must lie in (0, 1], got {mus}")
        if not np.isscalar(self.mu):
            object.__setattr__(self, "mu", tuple(float(m) for m in mus))
        if self.beta < 0 or self.epsilon < 0:
            raise ConfigError("beta and epsilon must be non-negative")
        if self.delta is not None and self.delta < 0:
            raise ConfigError("delta must be non-negative")

    def step_size(self, t: int) -> float:
        """mu_t; a schedule shorter than the run repeats its last entry."""
        if self.mode == "successive":
            return 1.0
        if np.isscalar(self.mu):
            return float(self.mu)
        return self.mu[min(t, len(self.mu) - 1)]


@dataclass
class IterationTrace:
    """Record of one run: iterates x_0..x_final and the step norm of each update."""

    iterates: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    residual_norms: list = field(default_factory=list)
    stopped_by: str = "max_iters"
    peak: float | None = None
    # whether the last denoised iterate satisfied ||x_t - f(x_t)|| <= epsilon
    epsilon_fixed: bool | None = None

    @property
    def iters_run(self) -> int:
        return len(self.step_norms)

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]

    def final_image(self) -> Image:
        return Image(self.final, self.peak if self.peak is not None else 255.0)


def _norm(a) -> float:
    return float(np.linalg.norm(np.ravel(a)))


def _check_shape(out, x, name):
    if np.shape(out) != np.shape(x):
        raise ShapeError(f"{name} returned shape {np.shape(out)} for input {np.shape(x)}")


def btb_run(y, f: Callable[[np.ndarray], np.ndarray], cfg: IterationConfig | None = None, peak: float | None = None):
    """Iterate the denoiser ``f`` from ``x_0 = y`` according to ``cfg``.

    ``peak`` (default: the Image's peak, else 255) only scales the default delta.
    """
    cfg = cfg or IterationConfig()
    if peak is None:
        peak = y.peak if isinstance(y, Image) else 255.0
    y0 = np.array(as_array(y), dtype=np.float64, copy=True)
    delta = default_delta(y0.shape, peak) if cfg.delta is None else cfg.delta
    rng = rng_from_seed(cfg.seed) if cfg.mode == "langevin" and cfg.beta > 0 else None

    trace = IterationTrace(iterates=[y0], peak=peak)
    x = y0
    for t in range(cfg.max_iters):
        fx = np.asarray(f(x), dtype=np.float64)
        _check_shape(fx, x, "denoiser")
        trace.residual_norms.append(_norm(x - fx))
        mu = cfg.step_size(t)
        if cfg.mode == "successive":
            x_new = fx
        elif cfg.mode == "anchored":
            x_new = y0 + mu * (fx - y0)
        else:
            x_new = x + mu * (fx - x)
            if rng is not None:
                x_new = x_new + cfg.beta * rng.standard_normal(x.shape)
        step = _norm(x_new - x)
        trace.step_norms.append(step)
        if cfg.keep_iterates:
            trace.iterates.append(x_new)
        else:
            trace.iterates[1:] = [x_new]
        x = x_new
        if step < delta or step == 0.0:
            trace.stopped_by = "delta"
            break
    trace.epsilon_fixed = trace.residual_norms[-1] <= cfg.epsilon
    return trace


def check_epsilon_fixed(x, f: Callable[[np.ndarray], np.ndarray], epsilon: float) -> bool:
    """True iff ||x - f(x)||_2 <= epsilon."""
    if epsilon < 0:
        raise ConfigError("epsilon must be non-negative")
    a = as_array(x)
    return _norm(a - np.asarray(f(a), dtype=np.float64)) <= epsilon


def run_on_image(y: Image, f, cfg: IterationConfig | None = None) -> tuple[Image, IterationTrace]:
    """Convenience wrapper returning the final iterate as an Image."""
    trace = btb_run(y, f, cfg)
    return like(y, trace.final), trace

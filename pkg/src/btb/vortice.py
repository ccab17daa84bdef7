"""RFN-driven speckle suppression loops.

``vortice_run`` subtracts a fraction of the RFN operator output each step;
``speckle_focused_run`` accumulates those outputs and keeps pulling the
estimate back towards the original observation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError
from .image import Image, as_array
from .iteration import IterationTrace, default_delta
from .rfn import RfnConfig, apply_operator, make_gaussian_rfn_kernel


def _default_rfn():
    return RfnConfig(make_gaussian_rfn_kernel(15, 2), tau=0.25)


@dataclass(frozen=True)
class VorticeConfig:
    rfn: RfnConfig = field(default_factory=_default_rfn)
    alpha: float = 0.4
    beta: float = 0.4
    delta: float | None = None  # None: default_delta with peak 1
    max_iters: int = 5
    keep_iterates: bool = True

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0 <= self.beta <= 1:
            raise ConfigError(f"beta must lie in [0, 1], got {self.beta}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.delta is not None and self.delta < 0:
            raise ConfigError("delta must be non-negative")


def _prepare(y, cfg):
    y0 = np.array(as_array(y), dtype=np.float64, copy=True)
    if not cfg.rfn.signed_variant and np.any(y0 < 0):
        raise DomainError("despeckling expects a non-negative, [0, 1]-normalised image")
    peak = y.peak if isinstance(y, Image) else 1.0
    delta = default_delta(y0.shape, peak) if cfg.delta is None else cfg.delta
    return y0, peak, delta


def _record(trace, cfg, x_new, x):
    step = float(np.linalg.norm((x_new - x).ravel()))
    trace.step_norms.append(step)
    if cfg.keep_iterates:
        trace.iterates.append(x_new)
    else:
        trace.iterates[1:] = [x_new]
    return step


def vortice_run(y, cfg: VorticeConfig | None = None) -> IterationTrace:
    """x_{t+1} = x_t - alpha g(x_t) from x_0 = y.

    Iterates are not clamped, so they may leave [0, 1] slightly.
    """
    cfg = cfg or VorticeConfig()
    x, peak, delta = _prepare(y, cfg)
    trace = IterationTrace(iterates=[x], peak=peak)
    for _ in range(cfg.max_iters):
        gx = apply_operator(x, cfg.rfn)
        trace.residual_norms.append(float(np.abs(gx).mean()))
        x_new = x - cfg.alpha * gx
        step = _record(trace, cfg, x_new, x)
        x = x_new
        if step < delta or step == 0.0:
            trace.stopped_by = "delta"
            break
    return trace


def speckle_focused_run(y, cfg: VorticeConfig | None = None) -> IterationTrace:
    """Accumulator variant that re-anchors on the observation every step.

    z_{t+1} = g(x_t) + z_t,  v_{t+1} = y - beta z_{t+1},
    x_{t+1} = (1 - alpha) x_t + alpha v_{t+1}, with x_0 = y and z_0 = 0.
    """
    cfg = cfg or VorticeConfig()
    y0, peak, delta = _prepare(y, cfg)
    x = y0
    z = np.zeros_like(y0)
    trace = IterationTrace(iterates=[x], peak=peak)
    for _ in range(cfg.max_iters):
        gx = apply_operator(x, cfg.rfn)
        trace.residual_norms.append(float(np.abs(gx).mean()))
        z = gx + z
        v = y0 - cfg.beta * z
        x_new = x + cfg.alpha * (v - x)
        step = _record(trace, cfg, x_new, x)
        x = x_new
        if step < delta or step == 0.0:
            trace.stopped_by = "delta"
            break
    return trace


def speckle_level(x, rfn: RfnConfig | None = None) -> float:
    """Mean absolute RFN operator output, ||g(x)||_1 / n."""
    rfn = rfn or _default_rfn()
    return float(np.abs(apply_operator(as_array(x), rfn)).mean())

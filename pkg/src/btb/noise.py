"""Noise models: AWGN, Poisson, fully developed speckle, and a synthetic OCT tomogram.

Every generator draws from ``numpy.random.Philox`` (a counter-based bit
generator) keyed by the caller's seed, so streams are reproducible across
platforms and numpy versions that keep Philox4x64-10.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConfigError, DomainError
from .image import Image, as_array, like

DB_EPS = 1e-12


def rng_from_seed(seed) -> np.random.Generator:
    """Philox-backed generator. ``seed`` may be an int or a sequence of ints."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "awgn"
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("awgn", "poisson", "speckle", "none"):
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        if self.kind == "awgn" and self.sigma < 0:
            raise ConfigError("sigma must be non-negative")

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "NoiseSpec":
        """Parse ``awgn:25``, ``poisson``, ``speckle`` or ``none``."""
        kind, _, arg = text.partition(":")
        kind = kind.strip().lower()
        if kind == "awgn":
            if not arg:
                raise ConfigError("awgn needs a sigma, e.g. awgn:25")
            return cls("awgn", float(arg), seed)
        if arg:
            raise ConfigError(f"noise kind {kind!r} takes no argument")
        return cls(kind, 0.0, seed)

    def apply(self, img):
        if self.kind == "awgn":
            return add_awgn(img, self.sigma, self.seed)
        if self.kind == "poisson":
            return add_poisson(img, self.seed)
        if self.kind == "speckle":
            return add_speckle(img, self.seed)
        return img

    def __str__(self):
        return f"awgn:{self.sigma:g}" if self.kind == "awgn" else self.kind


def add_awgn(img, sigma: float, seed):
    """``img + N(0, sigma^2)`` i.i.d. per pixel."""
    if sigma < 0:
        raise DomainError(f"sigma must be non-negative, got {sigma}")
    x = as_array(img)
    if sigma == 0:
        return like(img, x.copy())
    noise = rng_from_seed(seed).standard_normal(x.shape)
    return like(img, x + sigma * noise)


def add_poisson(img, seed):
    """Replace each pixel by a Poisson draw with that pixel as its mean."""
    x = as_array(img)
    if np.any(x < 0):
        raise DomainError("Poisson noise needs non-negative intensities")
    return like(img, rng_from_seed(seed).poisson(x).astype(np.float64))


def _complex_gaussian(rng, shape, power=1.0):
    """Circular complex Gaussian samples with E|z|^2 = power."""
    s = np.sqrt(power / 2.0)
    return s * rng.standard_normal(shape) + 1j * (s * rng.standard_normal(shape))


def sample_speckle_intensity(mean_x: float, n: int, seed) -> np.ndarray:
    """``n`` fully developed speckle intensities with mean ``mean_x``.

    Drawn as |z|^2 for circular complex Gaussian z, which is exponentially
    distributed with density exp(-y/x)/x.
    """
    if not mean_x > 0:
        raise DomainError(f"mean intensity must be positive, got {mean_x}")
    if n < 1:
        raise DomainError(f"sample count must be >= 1, got {n}")
    z = _complex_gaussian(rng_from_seed(seed), int(n), mean_x)
    return z.real**2 + z.imag**2


def add_speckle(img, seed):
    """Multiplicative fully developed speckle: each pixel becomes Exp(mean = pixel)."""
    x = as_array(img)
    if np.any(x < 0):
        raise DomainError("speckle needs non-negative intensities")
    z = _complex_gaussian(rng_from_seed(seed), x.shape)
    return like(img, x * (z.real**2 + z.imag**2))


# ---------------------------------------------------------------------------
# synthetic OCT tomogram


def oct_axial_fwhm(lambda_c: float, delta_lambda: float) -> float:
    """Coherence-limited axial resolution in microns (wavelengths in nm)."""
    return 2.0 * math.log(2.0) / math.pi * lambda_c**2 / delta_lambda * 1e-3


def _default_layers():
    # (first row, end row, scatterers per pixel)
    return (
        (40, 100, 0.05),
        (100, 180, 0.5),
        (180, 230, 0.0005),
        (230, 330, 0.2),
        (330, 380, 0.005),
        (380, 470, 0.5),
        (470, 512, 0.02),
    )


@dataclass(frozen=True)
class SceneConfig:
    """Layered scatterer phantom and imaging system for :func:`synth_tomogram`.

    Pitches and PSF widths are in microns, wavelengths in nm. Layers are
    ``(row_start, row_end, density)`` with ``row_end`` exclusive; rows not
    covered by any layer are empty. ``psf_axial_fwhm=None`` uses the
    coherence-limited resolution from ``lambda_c`` and ``delta_lambda``.
    """

    height: int = 512
    width: int = 512
    axial_pitch: float = 1.0
    lateral_pitch: float = 5.0
    lambda_c: float = 1300.0
    delta_lambda: float = 130.0
    layers: tuple = field(default_factory=_default_layers)
    psf_axial_fwhm: float | None = None
    psf_lateral_fwhm: float = 15.0
    db_floor: float = -40.0
    db_ceil: float = 0.0

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ConfigError("scene size must be positive")
        if not (self.axial_pitch > 0 and self.lateral_pitch > 0):
            raise ConfigError("pixel pitches must be positive")
        if not self.db_floor < self.db_ceil:
            raise ConfigError("db_floor must be below db_ceil")
        layers = tuple((int(a), int(b), float(d)) for a, b, d in self.layers)
        for a, b, d in layers:
            if not 0 < d <= 1:
                raise ConfigError(f"layer density must be in (0, 1], got {d}")
            if not 0 <= a < b:
                raise ConfigError(f"bad layer rows [{a}, {b})")
        object.__setattr__(self, "layers", layers)
        if self.psf_axial_fwhm is None:
            object.__setattr__(self, "psf_axial_fwhm", oct_axial_fwhm(self.lambda_c, self.delta_lambda))

    def density_profile(self) -> np.ndarray:
        """Scatterer density per image row."""
        rho = np.zeros(self.height)
        for a, b, d in self.layers:
            rho[a : min(b, self.height)] = d
        return rho


def load_scene(path) -> SceneConfig:
    """Read a ``key = value`` scene file. ``layer = start end density`` may repeat."""
    kwargs, layers = {}, []
    names = {f.name: f for f in fields(SceneConfig)}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        if key == "layer":
            parts = value.replace(",", " ").split()
            if len(parts) != 3:
                raise ConfigError(f"{path}:{lineno}: layer needs 'start end density'")
            layers.append((int(parts[0]), int(parts[1]), float(parts[2])))
        elif key in ("height", "width"):
            kwargs[key] = int(value)
        elif key in names and key != "layers":
            kwargs[key] = None if value.lower() == "auto" else float(value)
        else:
            raise ConfigError(f"{path}:{lineno}: unknown scene key {key!r}")
    if layers:
        kwargs["layers"] = tuple(layers)
    return SceneConfig(**kwargs)


def dump_scene(scene: SceneConfig) -> str:
    lines = []
    for f in fields(SceneConfig):
        if f.name == "layers":
            continue
        lines.append(f"{f.name} = {getattr(scene, f.name)}")
    lines += [f"layer = {a} {b} {d}" for a, b, d in scene.layers]
    return "\n".join(lines) + "\n"


def psf_kernel(scene: SceneConfig) -> np.ndarray:
    """Separable Gaussian amplitude PSF sampled on the pixel grid, peak 1."""
    fwhm_px = (scene.psf_axial_fwhm / scene.axial_pitch, scene.psf_lateral_fwhm / scene.lateral_pitch)
    profiles = []
    for w in fwhm_px:
        std = w / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        r = max(1, int(math.ceil(4.0 * std)))
        n = np.arange(-r, r + 1)
        profiles.append(np.exp(-0.5 * (n / std) ** 2))
    return np.outer(*profiles)


def scatterer_field(scene: SceneConfig, rng, margin=(0, 0)) -> np.ndarray:
    """Complex reflectivity on the image grid extended by ``margin`` pixels per side.

    A site is occupied with its row's layer density and then carries a
    unit-power circular complex Gaussian amplitude. Margin rows reuse the
    density of the nearest image row so the PSF sees no artificial edge.
    """
    my, mx = margin
    rows = np.clip(np.arange(-my, scene.height + my), 0, scene.height - 1)
    rho = scene.density_profile()[rows]
    shape = (len(rows), scene.width + 2 * mx)
    occupied = rng.random(shape) < rho[:, None]
    return np.where(occupied, _complex_gaussian(rng, shape), 0.0)


def coherent_intensity(f: np.ndarray, psf: np.ndarray) -> np.ndarray:
    """|f * psf|^2 over the 'valid' region of ``f``."""
    return np.abs(fftconvolve(f, psf, mode="valid")) ** 2


def incoherent_intensity(f: np.ndarray, psf: np.ndarray) -> np.ndarray:
    """|f|^2 * |psf|^2 over the 'valid' region, the mean over speckle realisations."""
    out = fftconvolve(np.abs(f) ** 2, np.abs(psf) ** 2, mode="valid")
    return np.maximum(out, 0.0)


def to_db(intensity: np.ndarray) -> np.ndarray:
    return 10.0 * np.log10(intensity + DB_EPS)


@dataclass(frozen=True, eq=False)
class Tomogram:
    """Outputs of :func:`synth_tomogram`; unpacks as ``(speckled, clean)``."""

    speckled: Image
    clean: Image
    speckled_intensity: np.ndarray
    clean_intensity: np.ndarray
    reference_db: float

    def __iter__(self):
        return iter((self.speckled, self.clean))


def synth_tomogram(scene: SceneConfig | None = None, seed=0) -> Tomogram:
    """Simulate a speckled B-scan and its speckle-free incoherent mean.

    Both are log-compressed, then mapped from the window
    ``[ref + db_floor, ref + db_ceil]`` onto [0, 1] (clamped), where ``ref``
    is the 99.9th percentile of the speckled image in dB. Both images share
    the window so they can be compared directly.
    """
    scene = scene or SceneConfig()
    if not scene.layers or not scene.density_profile().any():
        raise DomainError("scene has no scatterers")
    psf = psf_kernel(scene)
    margin = (psf.shape[0] // 2, psf.shape[1] // 2)
    f = scatterer_field(scene, rng_from_seed(seed), margin)
    i_y = coherent_intensity(f, psf)
    i_x = incoherent_intensity(f, psf)
    y_db, x_db = to_db(i_y), to_db(i_x)
    ref = float(np.percentile(y_db, 99.9))
    lo, span = ref + scene.db_floor, scene.db_ceil - scene.db_floor
    y = np.clip((y_db - lo) / span, 0.0, 1.0)
    x = np.clip((x_db - lo) / span, 0.0, 1.0)
    return Tomogram(Image(y, 1.0), Image(x, 1.0), i_y, i_x, ref)


def default_scene(**overrides) -> SceneConfig:
    """The 512 x 512 layered phantom, optionally with fields replaced."""
    return replace(SceneConfig(), **overrides)


def uniform_scene(density: float = 0.5, **overrides) -> SceneConfig:
    """A single homogeneous layer, sampled finely enough for fully developed speckle.

    Half-micron axial pitch and a 30 micron lateral PSF put many scatterers
    inside each resolution cell, so intensities follow the exponential law.
    """
    base = dict(axial_pitch=0.5, psf_lateral_fwhm=30.0)
    base.update(overrides)
    h = base.get("height", 512)
    return SceneConfig(layers=((0, h, density),), **base)

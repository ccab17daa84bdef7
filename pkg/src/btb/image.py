"""Image container, file I/O, padded convolution and BT.601 colour planes.

All arithmetic is float64. Quantisation to 8 bits only happens in
:func:`save_image` / :func:`quantize`.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import FormatError, ShapeError

RAW_MAGIC = b"BTBF"
_RAW_HEADER = struct.Struct("<4sIId")


class Padding(str, Enum):
    SYMMETRIC = "symmetric"
    ZERO = "zero"
    REPLICATE = "replicate"


# numpy.pad / scipy.ndimage names for each padding mode
_NP_PAD = {Padding.SYMMETRIC: "symmetric", Padding.ZERO: "constant", Padding.REPLICATE: "edge"}
_ND_MODE = {Padding.SYMMETRIC: "reflect", Padding.ZERO: "constant", Padding.REPLICATE: "nearest"}


@dataclass(frozen=True, eq=False)
class Image:
    """A 2-D grid of intensities plus its nominal peak value.

    ``data`` is stored as a read-only float64 array of shape (height, width).
    """

    data: np.ndarray
    peak: float = 255.0

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.size == 0:
            raise ShapeError(f"image data must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image data contains NaN or Inf")
        if not self.peak > 0:
            raise ValueError(f"peak must be positive, got {self.peak}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "peak", float(self.peak))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def with_data(self, data) -> "Image":
        """New image with the same peak."""
        return Image(data, self.peak)

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


def as_array(x) -> np.ndarray:
    """Float64 view of an Image or array-like."""
    if isinstance(x, Image):
        return x.data
    return np.asarray(x, dtype=np.float64)


def like(template, data):
    """Wrap ``data`` the same way ``template`` was passed in (Image or ndarray)."""
    if isinstance(template, Image):
        return template.with_data(data)
    return data


@dataclass(frozen=True, eq=False)
class Kernel2D:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] % 2 == 0:
            raise ShapeError(f"kernel must be square with odd side, got shape {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def side(self) -> int:
        return self.weights.shape[0]


def pad_array(a: np.ndarray, radius, pad: Padding | str = Padding.SYMMETRIC) -> np.ndarray:
    """Pad ``a`` by ``radius`` on every side (an int, or one int per axis)."""
    pad = Padding(pad)
    if np.isscalar(radius):
        radius = [radius] * a.ndim
    return np.pad(a, [(r, r) for r in radius], mode=_NP_PAD[pad])


# ---------------------------------------------------------------------------
# convolution


def convolve2d(img, k: Kernel2D | np.ndarray, pad: Padding | str = Padding.SYMMETRIC):
    """Same-size 2-D convolution with the chosen boundary extension.

    Accepts an :class:`Image` or a plain 2-D array and returns the same kind.
    """
    weights = k.weights if isinstance(k, Kernel2D) else Kernel2D(k).weights
    a = as_array(img)
    out = ndimage.convolve(a, weights, mode=_ND_MODE[Padding(pad)], cval=0.0)
    return like(img, out)


def convolve_separable(img, k_rows, k_cols=None, pad: Padding | str = Padding.SYMMETRIC):
    """Convolve with the outer product ``k_rows ⊗ k_cols`` as two 1-D passes.

    ``k_rows`` runs along axis 0, ``k_cols`` along axis 1 (defaults to ``k_rows``).
    """
    k_rows = np.asarray(k_rows, dtype=np.float64)
    k_cols = k_rows if k_cols is None else np.asarray(k_cols, dtype=np.float64)
    mode = _ND_MODE[Padding(pad)]
    a = as_array(img)
    out = ndimage.convolve1d(a, k_rows, axis=0, mode=mode, cval=0.0)
    out = ndimage.convolve1d(out, k_cols, axis=1, mode=mode, cval=0.0)
    return like(img, out)


def gaussian_taps(std: float, radius: int | None = None) -> np.ndarray:
    """Sampled 1-D Gaussian, truncated at ``radius`` (default ceil(3*std)), summing to 1."""
    if radius is None:
        radius = int(np.ceil(3.0 * std))
    n = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-0.5 * (n / std) ** 2)
    return taps / taps.sum()


# ---------------------------------------------------------------------------
# colour

_RGB_TO_YCBCR = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ]
)
_YCBCR_TO_RGB = np.linalg.inv(_RGB_TO_YCBCR)


def color_transform(planes, direction: str = "rgb->ycbcr"):
    """Full-range BT.601 conversion between RGB and YCbCr planes.

    Chroma planes are offset by ``128/255 * peak`` (128 for 8-bit data).
    ``direction`` is ``"rgb->ycbcr"`` or ``"ycbcr->rgb"``.
    """
    if len(planes) != 3:
        raise ShapeError(f"expected 3 planes, got {len(planes)}")
    arrays = [as_array(p) for p in planes]
    if any(a.shape != arrays[0].shape for a in arrays):
        raise ShapeError("colour planes differ in shape: " + ", ".join(str(a.shape) for a in arrays))
    peak = planes[0].peak if isinstance(planes[0], Image) else 255.0
    offset = np.array([0.0, 1.0, 1.0])[:, None, None] * (128.0 / 255.0 * peak)
    stack = np.stack(arrays)
    if direction in ("rgb->ycbcr", "rgb2ycbcr"):
        out = np.tensordot(_RGB_TO_YCBCR, stack, axes=1) + offset
    elif direction in ("ycbcr->rgb", "ycbcr2rgb"):
        out = np.tensordot(_YCBCR_TO_RGB, stack - offset, axes=1)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return [like(p, o) for p, o in zip(planes, out)]


# ---------------------------------------------------------------------------
# file I/O


def quantize(img, peak: float | None = None) -> np.ndarray:
    """Clamp to [0, peak] and map linearly onto 0..255 (uint8)."""
    if peak is None:
        peak = img.peak if isinstance(img, Image) else 255.0
    a = np.clip(as_array(img), 0.0, peak)
    return np.rint(a * (255.0 / peak)).astype(np.uint8)


def _read_pgm(buf: bytes) -> Image:
    pos = 0

    def token():
        nonlocal pos
        while pos < len(buf):
            c = buf[pos : pos + 1]
            if c == b"#":
                nl = buf.find(b"\n", pos)
                pos = len(buf) if nl < 0 else nl + 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header", start)
        return buf[start:pos], start

    magic, off = token()
    if magic != b"P5":
        raise FormatError(f"not a binary PGM (magic {magic[:8]!r})", off)
    fields = []
    for name in ("width", "height", "maxval"):
        tok, off = token()
        if not tok.isdigit():
            raise FormatError(f"bad PGM {name} {tok[:16]!r}", off)
        fields.append(int(tok))
    width, height, maxval = fields
    if width == 0 or height == 0:
        raise FormatError("PGM has zero size", off)
    if not 0 < maxval < 256:
        raise FormatError(f"only 8-bit PGM is supported (maxval {maxval})", off)
    if pos >= len(buf) or not buf[pos : pos + 1].isspace():
        raise FormatError("missing whitespace after PGM maxval", pos)
    pos += 1
    n = width * height
    if len(buf) - pos < n:
        raise FormatError(f"PGM pixel data truncated: need {n} bytes, have {len(buf) - pos}", pos)
    pixels = np.frombuffer(buf, dtype=np.uint8, count=n, offset=pos).reshape(height, width)
    return Image(pixels.astype(np.float64) * (255.0 / maxval), 255.0)


def _read_raw(buf: bytes) -> Image:
    if len(buf) < _RAW_HEADER.size:
        raise FormatError("raw-float header truncated", len(buf))
    _, height, width, peak = _RAW_HEADER.unpack_from(buf, 0)
    if height == 0 or width == 0:
        raise FormatError("raw-float image has zero size", 4)
    if not (np.isfinite(peak) and peak > 0):
        raise FormatError(f"raw-float peak must be positive, got {peak}", 12)
    n = height * width
    body = len(buf) - _RAW_HEADER.size
    if body != 8 * n:
        raise FormatError(f"raw-float body is {body} bytes, expected {8 * n}", _RAW_HEADER.size)
    data = np.frombuffer(buf, dtype="<f8", count=n, offset=_RAW_HEADER.size).reshape(height, width)
    if not np.all(np.isfinite(data)):
        bad = int(np.flatnonzero(~np.isfinite(data.ravel()))[0])
        raise FormatError("raw-float data contains NaN or Inf", _RAW_HEADER.size + 8 * bad)
    return Image(data, peak)


def _read_png_planes(path) -> list[Image]:
    from PIL import Image as PILImage

    try:
        with PILImage.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("L", "P", "LA", "RGB", "RGBA"):
                target = "L" if mode in ("L", "LA") else "RGB"
                if mode == "P":
                    target = "RGB"
                arr = np.asarray(im.convert(target), dtype=np.float64)
            else:
                raise FormatError(f"unsupported PNG mode {mode!r} (8-bit grey or RGB only)", 0)
    except (OSError, SyntaxError) as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise FormatError(f"cannot decode PNG: {exc}", 0) from exc
    if arr.ndim == 2:
        return [Image(arr, 255.0)]
    return [Image(arr[..., c], 255.0) for c in range(3)]


def load_planes(path) -> list[Image]:
    """Load a file as one grey plane, or three RGB planes for colour PNGs."""
    path = Path(path)
    buf = path.read_bytes()
    if buf[:4] == RAW_MAGIC:
        return [_read_raw(buf)]
    if buf[:2] == b"P5":
        return [_read_pgm(buf)]
    if buf[:8] == b"\x89PNG\r\n\x1a\n":
        return _read_png_planes(path)
    raise FormatError(f"unrecognised image format (leading bytes {buf[:4]!r})", 0)


def load_image(path) -> Image:
    """Load an 8-bit PGM (P5), 8-bit greyscale PNG or BTBF raw-float file."""
    planes = load_planes(path)
    if len(planes) != 1:
        raise FormatError(f"{path}: colour image where greyscale was expected", 0)
    return planes[0]


def _infer_format(path: Path) -> str:
    ext = path.suffix.lower()
    return {".pgm": "pgm", ".png": "png", ".btbf": "raw", ".raw": "raw", ".bin": "raw"}.get(ext, "raw")


def save_image(img: Image, path, format: str | None = None) -> None:
    """Write ``img``. ``format`` is ``pgm``, ``png`` or ``raw`` (default: from extension).

    8-bit formats clamp to [0, peak] and quantise; raw-float is lossless.
    """
    path = Path(path)
    fmt = format or _infer_format(path)
    if not isinstance(img, Image):
        img = Image(img)
    if fmt == "raw":
        header = _RAW_HEADER.pack(RAW_MAGIC, img.height, img.width, img.peak)
        path.write_bytes(header + img.data.astype("<f8").tobytes())
    elif fmt == "pgm":
        header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
        path.write_bytes(header + quantize(img).tobytes())
    elif fmt == "png":
        from PIL import Image as PILImage

        PILImage.fromarray(quantize(img)).save(path, format="PNG")
    else:
        raise ValueError(f"unknown image format {fmt!r}")


def save_planes(planes, path, format: str | None = None) -> None:
    """Write one grey plane, or three RGB planes as a colour PNG."""
    if len(planes) == 1:
        save_image(planes[0], path, format)
        return
    from PIL import Image as PILImage

    rgb = np.stack([quantize(p) for p in planes], axis=-1)
    PILImage.fromarray(rgb).save(Path(path), format="PNG")

"""Image containers, file codecs, resampling and quality metrics.

Every analysis in the package consumes the :class:`ImageTensor` /
:class:`GrayImage` containers defined here. Values are float64 in [0, 1];
32-bit floats only appear in PFM files.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image
from scipy import ndimage

from ._errors import ImageFormatError

_logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
CATMULL_ROM_A = -0.5
MIN_ANALYSIS_SIDE = 8

_NETPBM_MAGIC = {b"P5": 1, b"P6": 3}
_PFM_MAGIC = {b"Pf": 1, b"PF": 3}


@dataclass(frozen=True, eq=False)
class ImageTensor:
    """An H×W×C raster with float64 values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise ValueError(
                f"expected an HxW, HxWx1 or HxWx3 array, got shape {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("image contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        """Rows."""
        return self.data.shape[0]

    @property
    def width(self) -> int:
        """Columns."""
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        """Channel count."""
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        """(H, W, C)."""
        return self.data.shape  # type: ignore[return-value]

    def require_analysis_size(self) -> None:
        """Raise unless both sides are at least 8 pixels."""
        if min(self.height, self.width) < MIN_ANALYSIS_SIDE:
            raise ValueError(
                f"analysis needs images of at least {MIN_ANALYSIS_SIDE}x"
                f"{MIN_ANALYSIS_SIDE}, got {self.height}x{self.width}"
            )


@dataclass(frozen=True, eq=False)
class GrayImage:
    """A single-channel H×W raster with float64 values."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 3 and data.shape[2] == 1:
            data = data[:, :, 0]
        if data.ndim != 2:
            raise ValueError(f"expected a 2D gray array, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("image contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        """Rows."""
        return self.data.shape[0]

    @property
    def width(self) -> int:
        """Columns."""
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        """(H, W)."""
        return self.data.shape  # type: ignore[return-value]

    def as_tensor(self) -> ImageTensor:
        """Single-channel :class:`ImageTensor` view."""
        return ImageTensor(self.data[:, :, None])


AnyImage = Union[ImageTensor, GrayImage]


def _array(img: AnyImage | np.ndarray) -> np.ndarray:
    if isinstance(img, (ImageTensor, GrayImage)):
        return img.data
    return np.asarray(img, dtype=np.float64)


# ---------------------------------------------------------------------------
# Decoding / encoding
# ---------------------------------------------------------------------------


def _read_header_tokens(raw: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < count:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated header")
        tokens.append(raw[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def _decode_netpbm(raw: bytes, path: Path) -> np.ndarray:
    tokens, offset = _read_header_tokens(raw, 4)
    channels = _NETPBM_MAGIC[tokens[0]]
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ImageFormatError(f"{path}: malformed PGM/PPM header {tokens}")
    if not 0 < maxval < 65536:
        raise ImageFormatError(
            f"{path}: unsupported bit depth (maxval {maxval}); "
            "only 8- and 16-bit PGM/PPM files are supported"
        )
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    expected = width * height * channels * dtype.itemsize
    body = raw[offset : offset + expected]
    if len(body) != expected:
        raise ImageFormatError(f"{path}: raster truncated")
    pixels = np.frombuffer(body, dtype=dtype).reshape(height, width, channels)
    return pixels.astype(np.float64) / maxval


def read_pfm(path: PathLike) -> np.ndarray:
    """Read a PFM file into an H×W (or H×W×3) float64 array, top row first."""
    path = Path(path)
    raw = path.read_bytes()
    tokens, offset = _read_header_tokens(raw, 4)
    if tokens[0] not in _PFM_MAGIC:
        raise ImageFormatError(f"{path}: not a PFM file")
    channels = _PFM_MAGIC[tokens[0]]
    width, height = int(tokens[1]), int(tokens[2])
    scale = float(tokens[3])
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    count = width * height * channels
    body = np.frombuffer(raw[offset : offset + 4 * count], dtype=dtype)
    if body.size != count:
        raise ImageFormatError(f"{path}: raster truncated")
    data = body.reshape(height, width, channels)[::-1].astype(np.float64)
    return data[:, :, 0] if channels == 1 else data


def write_pfm(path: PathLike, values: np.ndarray) -> None:
    """Write a real-valued H×W or H×W×3 map as little-endian PFM."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 3 and values.shape[2] == 1:
        values = values[:, :, 0]
    if values.ndim == 2:
        magic = b"Pf"
    elif values.ndim == 3 and values.shape[2] == 3:
        magic = b"PF"
    else:
        raise ValueError(f"PFM holds 1 or 3 channels, got shape {values.shape}")
    height, width = values.shape[:2]
    header = magic + f"\n{width} {height}\n-1.0\n".encode("ascii")
    body = np.ascontiguousarray(values[::-1], dtype="<f4").tobytes()
    Path(path).write_bytes(header + body)


def write_pfm_stack(path: PathLike, maps: np.ndarray) -> None:
    """Write a K×H×W stack as one grayscale PFM with the pages tiled vertically."""
    maps = np.asarray(maps, dtype=np.float64)
    if maps.ndim != 3:
        raise ValueError(f"expected a KxHxW stack, got shape {maps.shape}")
    write_pfm(path, maps.reshape(-1, maps.shape[2]))


def decode(path: PathLike) -> ImageTensor:
    """Decode a PNG or binary PGM/PPM file into an :class:`ImageTensor`.

    Raises:
        FileNotFoundError: the file does not exist.
        ImageFormatError: the file is unreadable or its bit depth exceeds 16.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"image file {path} does not exist")
    raw = path.read_bytes()
    if raw[:2] in _NETPBM_MAGIC:
        return ImageTensor(_decode_netpbm(raw, path))
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("1", "L", "P", "RGB", "RGBA", "LA"):
                if mode == "1":
                    im = im.convert("L")
                elif mode == "P":
                    im = im.convert("RGB")
                pixels = np.asarray(im).astype(np.float64) / 255.0
            elif mode in ("I;16", "I;16B", "I;16L", "I"):
                pixels = np.asarray(im).astype(np.float64) / 65535.0
            else:
                raise ImageFormatError(
                    f"{path}: unsupported image mode {mode!r} (bit depth > 16?)"
                )
    except ImageFormatError:
        raise
    except Exception as e:
        raise ImageFormatError(f"{path}: unreadable image ({e})") from e
    if pixels.ndim == 3 and pixels.shape[2] in (2, 4):
        # drop alpha
        pixels = pixels[:, :, :-1]
    return ImageTensor(np.clip(pixels, 0.0, 1.0))


def encode(img: AnyImage | np.ndarray, path: PathLike, bit_depth: int = 8) -> None:
    """Encode an image as PNG, PGM/PPM or PFM, chosen by file suffix."""
    path = Path(path)
    data = _array(img)
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[:, :, 0]
    suffix = path.suffix.lower()
    if suffix == ".pfm":
        write_pfm(path, data)
        return
    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    maxval = 255 if bit_depth == 8 else 65535
    q = np.round(np.clip(data, 0.0, 1.0) * maxval)
    if suffix in (".pgm", ".ppm", ".pnm"):
        if data.ndim == 2:
            magic = b"P5"
        elif data.shape[2] == 3:
            magic = b"P6"
        else:
            raise ValueError(f"PGM/PPM holds 1 or 3 channels, got {data.shape}")
        dtype = ">u2" if bit_depth == 16 else np.uint8
        height, width = data.shape[:2]
        header = magic + f"\n{width} {height}\n{maxval}\n".encode("ascii")
        path.write_bytes(header + q.astype(dtype).tobytes())
        return
    if suffix == ".png":
        if bit_depth == 16:
            if data.ndim != 2:
                raise ValueError("16-bit PNG output is grayscale only")
            Image.fromarray(q.astype(np.uint16)).save(path)
        else:
            Image.fromarray(q.astype(np.uint8)).save(path)
        return
    raise ImageFormatError(f"{path}: unsupported output format {suffix!r}")


def to_uint8_preview(values: np.ndarray) -> GrayImage:
    """Min-max normalise a real map to [0, 1] for 8-bit preview export."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    if hi - lo <= 0.0:
        return GrayImage(np.zeros_like(values))
    return GrayImage((values - lo) / (hi - lo))


# ---------------------------------------------------------------------------
# Conversion and resampling
# ---------------------------------------------------------------------------


def to_gray(img: AnyImage) -> GrayImage:
    """Convert to luma with Rec.601 weights; 1-channel input passes through."""
    if isinstance(img, GrayImage):
        return img
    if img.channels == 1:
        return GrayImage(img.data[:, :, 0])
    r, g, b = (img.data[:, :, i] for i in range(3))
    luma = LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b
    return GrayImage(np.clip(luma, 0.0, 1.0))


def _cubic_kernel(x: np.ndarray, a: float = CATMULL_ROM_A) -> np.ndarray:
    x = np.abs(x)
    x2, x3 = x * x, x * x * x
    near = (a + 2.0) * x3 - (a + 3.0) * x2 + 1.0
    far = a * x3 - 5.0 * a * x2 + 8.0 * a * x - 4.0 * a
    return np.where(x <= 1.0, near, np.where(x < 2.0, far, 0.0))


def _resample_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Return the n_out×n_in bicubic weight matrix for one axis.

    Downsampling widens the kernel by the scale factor (antialiasing). Rows
    sum to one and taps past the border clamp to the edge pixel.
    """
    scale = n_out / n_in
    support = 1.0 if scale >= 1.0 else scale
    centers = (np.arange(n_out) + 0.5) / scale - 0.5
    radius = 2.0 / support
    offsets = np.arange(-math.ceil(radius), math.ceil(radius) + 1)
    taps = np.floor(centers)[:, None] + offsets[None, :]
    weights = _cubic_kernel((centers[:, None] - taps) * support)
    weights /= weights.sum(axis=1, keepdims=True)
    cols = np.clip(taps, 0, n_in - 1).astype(int)
    matrix = np.zeros((n_out, n_in))
    rows = np.repeat(np.arange(n_out), offsets.size)
    np.add.at(matrix, (rows, cols.ravel()), weights.ravel())
    return matrix


def resize_bicubic(
    img: AnyImage, scale: Union[Fraction, float, int]
) -> ImageTensor | GrayImage:
    """Resize with a Catmull-Rom (a = -0.5) kernel, clamp-to-edge borders.

    Output dimensions are ``round(side * scale)``; values are clamped to
    [0, 1]. The result has the same container type as the input.
    """
    scale = Fraction(scale).limit_denominator(10_000)
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    data = _array(img)
    height, width = data.shape[:2]
    out_h, out_w = round(height * scale), round(width * scale)
    if out_h < 1 or out_w < 1:
        raise ValueError(
            f"scale {scale} maps {height}x{width} to a degenerate "
            f"{out_h}x{out_w} output"
        )
    rows = _resample_matrix(height, out_h)
    cols = _resample_matrix(width, out_w)
    out = np.einsum("ij,jk...->ik...", rows, data)
    out = np.einsum("ij,kj...->ki...", cols, out)
    out = np.clip(out, 0.0, 1.0)
    _logger.debug("resize_bicubic: %dx%d -> %dx%d", height, width, out_h, out_w)
    if isinstance(img, GrayImage):
        return GrayImage(out)
    return ImageTensor(out)


# ---------------------------------------------------------------------------
# Quality metrics
# ---------------------------------------------------------------------------


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def mse(a: AnyImage | np.ndarray, b: AnyImage | np.ndarray) -> float:
    """Mean squared error between two same-shaped images."""
    x, y = _array(a), _array(b)
    _check_same_shape(x, y)
    return float(np.mean((x - y) ** 2))


def psnr(a: AnyImage | np.ndarray, b: AnyImage | np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for peak value 1; ``inf`` if identical."""
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / err)


def ssim(
    a: AnyImage | np.ndarray,
    b: AnyImage | np.ndarray,
    sigma: float = 1.5,
    k1: float = 0.01,
    k2: float = 0.03,
) -> float:
    """Mean structural similarity with a Gaussian window, averaged over channels."""
    x, y = _array(a), _array(b)
    _check_same_shape(x, y)
    if x.ndim == 2:
        x, y = x[:, :, None], y[:, :, None]
    c1, c2 = k1**2, k2**2
    scores = []
    for c in range(x.shape[2]):
        xc, yc = x[:, :, c], y[:, :, c]
        mu_x = ndimage.gaussian_filter(xc, sigma)
        mu_y = ndimage.gaussian_filter(yc, sigma)
        var_x = ndimage.gaussian_filter(xc * xc, sigma) - mu_x**2
        var_y = ndimage.gaussian_filter(yc * yc, sigma) - mu_y**2
        cov = ndimage.gaussian_filter(xc * yc, sigma) - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
        den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
        scores.append(float(np.mean(num / den)))
    return float(np.mean(scores))

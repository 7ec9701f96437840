"""Box-counting fractal dimension of binary masks and grayscale surfaces.

Binary masks use classic box counting; grayscale images use differential
box counting, which treats intensity as a surface height and so lands in
[2, 3].
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from .image_core import GrayImage
from .schema import DEFAULT_BOX_SIZES

_logger = logging.getLogger(__name__)

BINARY_FD_RANGE = (0.0, 2.0)
GRAY_FD_RANGE = (2.0, 3.0)


@dataclass(frozen=True, eq=False)
class BoxCountSeries:
    """Box sizes ε (pixels, increasing) with their counts N(ε).

    Binary counts are integers; differential counts are coverage-weighted
    and so may be fractional.
    """

    sizes: np.ndarray
    counts: np.ndarray
    kind: str = "binary"

    @property
    def log_pairs(self) -> np.ndarray:
        """(ln ε, ln N(ε)) rows."""
        return np.column_stack([np.log(self.sizes), np.log(self.counts)])

    def to_frame(self) -> pd.DataFrame:
        """Columns eps, count, ln_eps, ln_count."""
        pairs = self.log_pairs
        return pd.DataFrame(
            {
                "eps": self.sizes.astype(int),
                "count": self.counts,
                "ln_eps": pairs[:, 0],
                "ln_count": pairs[:, 1],
            }
        )


@dataclass(frozen=True, eq=False)
class FractalDimensionEstimate:
    """Fitted dimension D_f with its goodness of fit."""

    dimension: float
    r_squared: float
    series: BoxCountSeries
    degenerate: bool = False
    in_range: bool = True


def default_sizes(height: int, width: int) -> tuple[int, ...]:
    """The default size list clipped to half the smaller image side."""
    limit = min(height, width) // 2
    return tuple(s for s in DEFAULT_BOX_SIZES if s <= limit)


def _validated_sizes(sizes: Sequence[int] | None, height: int, width: int):
    if sizes is None:
        sizes = default_sizes(height, width)
    sizes = sorted(set(int(s) for s in sizes))
    if len(sizes) < 3:
        raise ValueError(
            f"box counting needs at least 3 distinct sizes, got {sizes}; "
            "use a larger image or pass more sizes"
        )
    limit = min(height, width) / 2
    if sizes[0] < 2 or sizes[-1] > limit:
        raise ValueError(
            f"box sizes must lie in [2, {limit:g}] for a {height}x{width} "
            f"image, got {sizes}"
        )
    return np.asarray(sizes)


def _pad_to_multiple(data: np.ndarray, size: int, fill: float) -> np.ndarray:
    """Pad bottom/right so both sides divide by ``size`` (partial edge cells)."""
    height, width = data.shape
    pad_h = -height % size
    pad_w = -width % size
    if pad_h == 0 and pad_w == 0:
        return data
    return np.pad(data, ((0, pad_h), (0, pad_w)), constant_values=fill)


def _cells(data: np.ndarray, size: int) -> np.ndarray:
    height, width = data.shape
    return data.reshape(height // size, size, width // size, size).swapaxes(1, 2)


def box_count_binary(mask: GrayImage, sizes: Sequence[int]) -> BoxCountSeries:
    """Count origin-anchored ε×ε cells holding at least one nonzero pixel.

    Partial cells on the right and bottom edges are counted.
    """
    binary = mask.data > 0
    if not binary.any():
        raise ValueError("box counting needs a mask with at least one nonzero pixel")
    size_arr = _validated_sizes(sizes, *binary.shape)
    counts = []
    for s in size_arr:
        padded = _pad_to_multiple(binary, int(s), False)
        counts.append(int(_cells(padded, int(s)).any(axis=(2, 3)).sum()))
    _logger.debug("box_count_binary: sizes=%s counts=%s", size_arr.tolist(), counts)
    return BoxCountSeries(size_arr, np.asarray(counts, dtype=np.int64), "binary")


def box_count_gray(
    img: GrayImage,
    sizes: Sequence[int] | None = None,
    gray_levels: int = 256,
) -> BoxCountSeries:
    """Differential box counting over a grayscale surface.

    Intensities are quantized to ``gray_levels`` levels; for a grid of s×s
    cells the column height is h = s·G/min(H, W) and each cell contributes
    floor(max/h) - floor(min/h) + 1 boxes. Partial edge cells contribute in
    proportion to the fraction of the cell they cover, so a flat surface
    counts exactly H·W/s² boxes.
    """
    height, width = img.shape
    size_arr = _validated_sizes(sizes, height, width)
    levels = np.round(np.clip(img.data, 0.0, 1.0) * (gray_levels - 1))
    ones = np.ones_like(levels)
    counts = []
    for s in size_arr:
        s = int(s)
        h = s * gray_levels / min(height, width)
        lo_cells = _cells(_pad_to_multiple(levels, s, np.inf), s)
        hi_cells = _cells(_pad_to_multiple(levels, s, -np.inf), s)
        cell_min = lo_cells.min(axis=(2, 3))
        cell_max = hi_cells.max(axis=(2, 3))
        coverage = _cells(_pad_to_multiple(ones, s, 0.0), s).sum(axis=(2, 3)) / s**2
        n = np.floor(cell_max / h) - np.floor(cell_min / h) + 1
        counts.append(float(np.sum(n * coverage)))
    _logger.debug("box_count_gray: sizes=%s counts=%s", size_arr.tolist(), counts)
    return BoxCountSeries(size_arr, np.asarray(counts, dtype=np.float64), "gray")


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Return (slope, intercept, r_squared) of y on x."""
    x_mean, y_mean = x.mean(), y.mean()
    sxx = float(np.sum((x - x_mean) ** 2))
    sxy = float(np.sum((x - x_mean) * (y - y_mean)))
    syy = float(np.sum((y - y_mean) ** 2))
    if sxx == 0.0:
        raise ValueError("box sizes are all equal; cannot fit a slope")
    slope = sxy / sxx
    intercept = float(y_mean - slope * x_mean)
    r_squared = 1.0 if syy == 0.0 else sxy * sxy / (sxx * syy)
    return slope, intercept, r_squared


def fit_dimension(series: BoxCountSeries) -> FractalDimensionEstimate:
    """OLS slope of ln N(ε) against ln(1/ε).

    A series whose counts are all equal is degenerate: the dimension is 0
    and ``degenerate`` is set, with r_squared 0.
    """
    order = np.argsort(series.sizes)
    sizes = series.sizes[order]
    counts = series.counts[order]
    if sizes.size < 3:
        raise ValueError(f"need at least 3 (size, count) pairs, got {sizes.size}")
    if np.any(counts <= 0):
        raise ValueError("box counts must be strictly positive")
    ordered = BoxCountSeries(sizes, counts, series.kind)
    if np.all(counts == counts[0]):
        _logger.warning(
            "fit_dimension: all counts equal (%g); degenerate fit", counts[0]
        )
        return FractalDimensionEstimate(0.0, 0.0, ordered, degenerate=True)
    x = -np.log(sizes.astype(np.float64))
    y = np.log(counts.astype(np.float64))
    slope, _, r_squared = _ols(x, y)
    lo, hi = BINARY_FD_RANGE if series.kind == "binary" else GRAY_FD_RANGE
    in_range = lo - 1e-9 <= slope <= hi + 1e-9
    if not in_range:
        _logger.warning(
            "fit_dimension: %s dimension %.4f outside the expected [%g, %g]",
            series.kind,
            slope,
            lo,
            hi,
        )
    return FractalDimensionEstimate(slope, r_squared, ordered, in_range=in_range)


@dataclass(frozen=True)
class FdGap:
    """Fractal dimensions of an HR/LR pair and their absolute difference."""

    fd_hr: float
    fd_lr: float
    diff: float
    r2_hr: float
    r2_lr: float


def gray_dimension(
    img: GrayImage, sizes: Sequence[int] | None = None, gray_levels: int = 256
) -> FractalDimensionEstimate:
    """Differential box-counting dimension; sizes are clipped to the image."""
    if sizes is not None:
        limit = min(img.shape) // 2
        sizes = [s for s in sizes if 2 <= s <= limit]
    return fit_dimension(box_count_gray(img, sizes, gray_levels))


def fd_gap(
    hr: GrayImage,
    lr: GrayImage,
    sizes: Sequence[int] | None = None,
    gray_levels: int = 256,
) -> FdGap:
    """Dimensions of a high-resolution image and its low-resolution copy."""
    est_hr = gray_dimension(hr, sizes, gray_levels)
    est_lr = gray_dimension(lr, sizes, gray_levels)
    return FdGap(
        fd_hr=est_hr.dimension,
        fd_lr=est_lr.dimension,
        diff=abs(est_hr.dimension - est_lr.dimension),
        r2_hr=est_hr.r_squared,
        r2_lr=est_lr.r_squared,
    )


def expected_carpet_dimension() -> float:
    """log 8 / log 3, the dimension of the Sierpinski carpet."""
    return math.log(8) / math.log(3)


def series_to_frame(series: BoxCountSeries) -> pd.DataFrame:
    """CSV-ready (eps, count, ln_eps, ln_count) table."""
    return series.to_frame()

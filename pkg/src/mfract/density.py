"""Per-pixel power-law density maps.

Around every pixel the local mass U_l (intensity summed over an l×l window)
is assumed to follow U_l ≈ exp(K)·l^D. Fitting ln U against ln l over a set
of window widths gives the density exponent D and the bias K. Two solvers
are provided: an explicit per-pixel oracle and a vectorised closed form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import ndimage

from ._errors import window_too_large_error
from ._parallel import map_row_bands
from .image_core import AnyImage, GrayImage, ImageTensor, to_gray
from .schema import DensityFitConfig

_logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MeasureStack:
    """Window masses ``maps[r]`` = U_{l_r}, shape R×H×W, for ``windows[r]``."""

    windows: tuple[int, ...]
    maps: np.ndarray

    def __post_init__(self) -> None:
        maps = np.asarray(self.maps, dtype=np.float64)
        if maps.ndim != 3 or maps.shape[0] != len(self.windows):
            raise ValueError(
                f"expected a stack of {len(self.windows)} maps, got shape {maps.shape}"
            )
        object.__setattr__(self, "maps", maps)

    @property
    def shape(self) -> tuple[int, int]:
        """(H, W) of every map."""
        return self.maps.shape[1], self.maps.shape[2]

    @classmethod
    def planted(
        cls, windows: tuple[int, ...], shape: tuple[int, int], exponent, scale=1.0
    ) -> "MeasureStack":
        """Synthetic stack U_l = scale·l**exponent (exponent may be a map)."""
        exponent = np.broadcast_to(np.asarray(exponent, dtype=np.float64), shape)
        maps = np.stack([scale * np.power(float(w), exponent) for w in windows])
        return cls(tuple(windows), maps)


@dataclass(frozen=True, eq=False)
class DensityMap:
    """Fitted exponent ``d``, bias ``k`` and squared-residual sum per pixel."""

    d: np.ndarray
    k: np.ndarray
    residual: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        """(H, W) of the fitted maps."""
        return self.d.shape  # type: ignore[return-value]

    def summary(self) -> dict[str, float]:
        """Min, max, mean and std of the exponent map."""
        return {
            "min": float(self.d.min()),
            "max": float(self.d.max()),
            "mean": float(self.d.mean()),
            "std": float(self.d.std()),
        }

    def to_frame(self) -> pd.DataFrame:
        """One-row frame of :meth:`summary`."""
        return pd.DataFrame([self.summary()])


def _check_windows(cfg: DensityFitConfig, height: int, width: int) -> None:
    for w in cfg.windows:
        if w >= height or w >= width:
            raise window_too_large_error(w, height, width)


def measure_stack(img: GrayImage, cfg: DensityFitConfig | None = None) -> MeasureStack:
    """Sliding l×l window sums with half-sample symmetric borders.

    Each sum is a separable correlation with a ones kernel; no floor is
    applied here.
    """
    cfg = cfg or DensityFitConfig()
    data = img.data
    _check_windows(cfg, *data.shape)
    maps = []
    for w in cfg.windows:
        ones = np.ones(w)
        rows = ndimage.correlate1d(data, ones, axis=0, mode=cfg.padding)
        maps.append(ndimage.correlate1d(rows, ones, axis=1, mode=cfg.padding))
    return MeasureStack(tuple(cfg.windows), np.stack(maps))


def _log_axes(stack: MeasureStack, cfg: DensityFitConfig):
    if len(stack.windows) < 3:
        raise ValueError(f"need at least 3 window sizes, got {stack.windows}")
    a = np.log(np.asarray(stack.windows, dtype=np.float64))
    b = np.log(stack.maps + cfg.epsilon_floor)
    return a, b


def density_exact(
    stack: MeasureStack,
    cfg: DensityFitConfig | None = None,
    threads: int | None = None,
) -> DensityMap:
    """Reference fit: solve the 2×2 normal equations pixel by pixel.

    Slow; intended as the oracle for :func:`density_closed_form`.
    """
    cfg = cfg or DensityFitConfig()
    a, b = _log_axes(stack, cfg)
    height, width = stack.shape
    n = float(a.size)
    sa = float(a.sum())
    saa = float(np.dot(a, a))
    if cfg.slope_variant == "ols":
        normal = np.array([[saa, sa], [sa, n]])
    else:
        normal = None

    def band(start: int, stop: int) -> np.ndarray:
        out = np.empty((stop - start, width, 3))
        for i in range(start, stop):
            for j in range(width):
                y = b[:, i, j]
                sb = float(y.sum())
                sab = float(np.dot(a, y))
                if normal is not None:
                    slope, intercept = np.linalg.solve(normal, [sab, sb])
                else:
                    slope = (n * sab - sa * sb) / (n * saa + sa * sa)
                    intercept = (sb - slope * sa) / n
                fit = slope * a + intercept
                out[i - start, j] = (slope, intercept, float(np.sum((y - fit) ** 2)))
        return out

    result = map_row_bands(band, height, threads)
    return DensityMap(result[:, :, 0], result[:, :, 1], result[:, :, 2])


def density_closed_form(
    stack: MeasureStack,
    cfg: DensityFitConfig | None = None,
    threads: int | None = None,
) -> DensityMap:
    """Whole-image least-squares slope.

    D = (R·Σab − Σa·Σb) / (R·Σa² − (Σa)²) with a = ln l and b = ln(U + floor).
    ``slope_variant="printed"`` replaces the denominator's minus with a plus.
    """
    cfg = cfg or DensityFitConfig()
    a, b = _log_axes(stack, cfg)
    n = float(a.size)
    sa = float(a.sum())
    saa = float(np.dot(a, a))
    if cfg.slope_variant == "ols":
        denom = n * saa - sa * sa
    else:
        denom = n * saa + sa * sa
    a_col = a[:, None, None]

    def band(start: int, stop: int) -> np.ndarray:
        y = b[:, start:stop]
        sb = y.sum(axis=0)
        sab = (a_col * y).sum(axis=0)
        slope = (n * sab - sa * sb) / denom
        intercept = (sb - slope * sa) / n
        resid = ((y - slope[None] * a_col - intercept[None]) ** 2).sum(axis=0)
        return np.stack([slope, intercept, resid], axis=-1)

    result = map_row_bands(band, stack.shape[0], threads)
    return DensityMap(result[:, :, 0], result[:, :, 1], result[:, :, 2])


def density_from_image(
    img: AnyImage,
    cfg: DensityFitConfig | None = None,
    threads: int | None = None,
) -> DensityMap:
    """Density map of an image; color inputs are converted to luma first."""
    cfg = cfg or DensityFitConfig()
    gray = to_gray(img) if isinstance(img, ImageTensor) else img
    dmap = density_closed_form(measure_stack(gray, cfg), cfg, threads)
    _logger.debug("density_from_image: windows=%s %s", cfg.windows, dmap.summary())
    return dmap

"""Histogram multifractal spectrum f(α) of a grayscale image.

The image is read as a measure (normalised intensity mass), partitioned
into boxes at several scales ε. Each box gets a coarse Hölder exponent
α = ln μ / ln ε; the spectrum value of an α bin is the regression slope of
ln N_ε(α) against ln(1/ε) across the scales where the bin is occupied.

:func:`density_spectrum` takes the other route: pixels are grouped by their
fitted density exponent and each level set is box counted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from ._errors import InsufficientSupportError
from .boxcount import box_count_binary, default_sizes, fit_dimension
from .density import density_from_image
from .grouping import hard_assign
from .image_core import GrayImage
from .schema import DensityFitConfig, SpectrumConfig

_logger = logging.getLogger(__name__)

EMBEDDING_DIMENSION = 2.0
F_SLACK = 0.2
MIN_BOXES_PER_SIDE = 4


@dataclass(frozen=True, eq=False)
class MeasureGrid:
    """Per-scale box measures; each ``masses[i]`` sums to one."""

    box_sizes: tuple[int, ...]
    eps_list: np.ndarray
    masses: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class QuadraticFit:
    """Least-squares quadratic f ≈ a2·α² + a1·α + a0 with its summary."""

    coeffs: tuple[float, float, float]
    width: float
    peak_alpha: float

    @property
    def concave(self) -> bool:
        """True when the leading coefficient is not positive."""
        return self.coeffs[0] <= 0.0


@dataclass(frozen=True, eq=False)
class SpectrumCurve:
    """Sampled spectrum with its quadratic summary.

    ``collapsed`` marks a monofractal measure, constant within every scale;
    such a curve has a single point.
    """

    alphas: np.ndarray
    f_values: np.ndarray
    support: np.ndarray
    quad: QuadraticFit
    collapsed: bool = False

    @property
    def quad_coeffs(self) -> tuple[float, float, float]:
        """(a2, a1, a0) of the fitted quadratic."""
        return self.quad.coeffs

    @property
    def width(self) -> float:
        """Spectrum width from the quadratic fit."""
        return self.quad.width

    @property
    def peak_alpha(self) -> float:
        """α at the spectrum peak."""
        return self.quad.peak_alpha

    def to_frame(self) -> pd.DataFrame:
        """Columns alpha, f_alpha."""
        return pd.DataFrame({"alpha": self.alphas, "f_alpha": self.f_values})

    def summary(self) -> dict:
        """Fit summary for JSON export."""
        return {
            "quad_coeffs": list(self.quad.coeffs),
            "width": self.quad.width,
            "peak_alpha": self.quad.peak_alpha,
            "collapsed": self.collapsed,
            "n_points": int(self.alphas.size),
        }


def build_measure(img: GrayImage, box_sizes: Sequence[int]) -> MeasureGrid:
    """Partition the image into non-overlapping boxes at each size.

    For each size the image is cropped to the largest multiple of the size;
    ε is recorded as size / min(H, W).

    Raises:
        ValueError: a size leaves fewer than 4 boxes per side, or the image
            (or a crop of it) carries no mass.
    """
    data = np.clip(img.data, 0.0, None)
    height, width = data.shape
    side = min(height, width)
    if data.sum() <= 0.0:
        raise ValueError("cannot build a measure from an all-zero image")
    masses = []
    for s in box_sizes:
        rows, cols = height // s, width // s
        if min(rows, cols) < MIN_BOXES_PER_SIDE:
            raise ValueError(
                f"box size {s} leaves {rows}x{cols} boxes on a {height}x{width} "
                f"image; at least {MIN_BOXES_PER_SIDE} per side are needed"
            )
        crop = data[: rows * s, : cols * s]
        box_mass = crop.reshape(rows, s, cols, s).sum(axis=(1, 3))
        total = box_mass.sum()
        if total <= 0.0:
            raise ValueError(f"image crop for box size {s} carries no mass")
        masses.append(box_mass / total)
    eps = np.asarray(box_sizes, dtype=np.float64) / side
    _logger.debug("build_measure: sizes=%s eps=%s", list(box_sizes), eps.tolist())
    return MeasureGrid(tuple(int(s) for s in box_sizes), eps, tuple(masses))


def holder_exponents(grid: MeasureGrid) -> list[np.ndarray]:
    """Coarse Hölder exponents α = ln μ / ln ε per scale, zero-mass boxes dropped."""
    if np.any(grid.eps_list >= 1.0):
        raise ValueError(
            f"box scales must be normalised below 1, got {grid.eps_list.tolist()}"
        )
    alphas = []
    for eps, mass in zip(grid.eps_list, grid.masses):
        mu = mass[mass > 0.0]
        alphas.append(np.log(mu) / np.log(eps))
    return alphas


def _slope(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    return float(np.sum(xc * (y - y.mean())) / np.sum(xc * xc))


def fit_quadratic_points(alphas: np.ndarray, f_values: np.ndarray) -> QuadraticFit:
    """Quadratic fit of f against α.

    Width is the distance between the real roots of a concave fit, otherwise
    the α range of the data. The peak is the vertex of a concave fit,
    otherwise the α of the largest f.
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    f_values = np.asarray(f_values, dtype=np.float64)
    if alphas.size < 3:
        raise ValueError(f"a quadratic fit needs at least 3 points, got {alphas.size}")
    a2, a1, a0 = (float(c) for c in np.polyfit(alphas, f_values, 2))
    disc = a1 * a1 - 4.0 * a2 * a0
    if a2 < 0.0 and disc > 0.0:
        width = float(np.sqrt(disc) / abs(a2))
    else:
        width = float(alphas.max() - alphas.min())
    if a2 < 0.0:
        peak = -a1 / (2.0 * a2)
    else:
        _logger.warning("fit_quadratic: spectrum fit is not concave (a2=%.4g)", a2)
        peak = float(alphas[np.argmax(f_values)])
    return QuadraticFit((a2, a1, a0), width, peak)


def fit_quadratic(curve: SpectrumCurve) -> QuadraticFit:
    """Quadratic summary of a spectrum; a collapsed curve fits a constant."""
    if curve.collapsed:
        return QuadraticFit(
            (0.0, 0.0, float(curve.f_values[0])), 0.0, float(curve.alphas[0])
        )
    return fit_quadratic_points(curve.alphas, curve.f_values)


def spectrum(
    grid: MeasureGrid,
    n_alpha_bins: int = 24,
    min_scales: int = 3,
    collapse_tol: float = 1e-6,
) -> SpectrumCurve:
    """Histogram estimate of f(α).

    Bin edges span the global α range across scales. A bin survives when
    it is occupied at ``min_scales`` or more scales; its f is the OLS slope
    of ln N_ε(α) against ln(1/ε) over those scales. When the exponents are
    constant within every scale the curve collapses to one point.

    Raises:
        InsufficientSupportError: fewer than 3 bins survive.
    """
    if grid.eps_list.size < 3:
        raise ValueError(f"need at least 3 scales, got {grid.eps_list.size}")
    if n_alpha_bins < 8:
        raise ValueError(f"n_alpha_bins must be >= 8, got {n_alpha_bins}")
    per_scale = holder_exponents(grid)
    log_inv_eps = -np.log(grid.eps_list)
    every = np.concatenate(per_scale)
    lo, hi = float(every.min()), float(every.max())

    # Uniform at every scale is monofractal, even when cropping shifts α
    # between scales.
    if max(float(np.ptp(a)) for a in per_scale) <= collapse_tol:
        counts = np.array([a.size for a in per_scale], dtype=np.float64)
        f = _slope(log_inv_eps, np.log(counts))
        alpha = float(every.mean())
        _logger.info("spectrum: monofractal collapse at alpha=%.4f f=%.4f", alpha, f)
        quad = QuadraticFit((0.0, 0.0, f), 0.0, alpha)
        return SpectrumCurve(
            np.array([alpha]),
            np.array([f]),
            np.array([grid.eps_list.size]),
            quad,
            collapsed=True,
        )

    edges = np.linspace(lo, hi, n_alpha_bins + 1)
    hist = np.stack([np.histogram(a, bins=edges)[0] for a in per_scale])
    centers = 0.5 * (edges[:-1] + edges[1:])
    alphas, f_values, support = [], [], []
    for b in range(n_alpha_bins):
        occupied = hist[:, b] > 0
        if occupied.sum() < min_scales:
            continue
        x = log_inv_eps[occupied]
        y = np.log(hist[occupied, b].astype(np.float64))
        alphas.append(centers[b])
        f_values.append(_slope(x, y))
        support.append(int(occupied.sum()))
    if len(alphas) < 3:
        raise InsufficientSupportError(
            f"insufficient multiscale support: only {len(alphas)} alpha bins "
            f"are occupied at >= {min_scales} scales; try fewer bins or more "
            "box sizes"
        )
    alpha_arr = np.asarray(alphas)
    f_arr = np.asarray(f_values)
    if np.any(f_arr > EMBEDDING_DIMENSION + F_SLACK):
        _logger.warning(
            "spectrum: f(alpha) up to %.3f exceeds the embedding bound", f_arr.max()
        )
    quad = fit_quadratic_points(alpha_arr, f_arr)
    return SpectrumCurve(alpha_arr, f_arr, np.asarray(support), quad)


def image_spectrum(img: GrayImage, cfg: SpectrumConfig | None = None) -> SpectrumCurve:
    """Run :func:`build_measure` and :func:`spectrum` with one config."""
    cfg = cfg or SpectrumConfig()
    grid = build_measure(img, cfg.box_sizes)
    return spectrum(grid, cfg.n_alpha_bins, cfg.min_scales, cfg.collapse_tol)


def density_spectrum(
    img: GrayImage,
    corridors: Sequence[float] | None = None,
    n_sets: int = 12,
    density_cfg: DensityFitConfig | None = None,
    threads: int | None = None,
) -> SpectrumCurve:
    """Level-set estimate of f(α) from the per-pixel density map.

    Pixels are grouped by density value into the corridors [C_k, C_{k+1})
    (``n_sets`` equal-width corridors over the map's range when none are
    given). Each non-empty level set is box counted as a binary mask; its
    dimension is f at the corridor midpoint.

    Raises:
        InsufficientSupportError: fewer than 3 level sets are non-empty.
    """
    dmap = density_from_image(img, density_cfg, threads)
    d = dmap.d
    sizes = default_sizes(*d.shape)
    lo, hi = float(d.min()), float(d.max())
    if corridors is None:
        if hi - lo <= 1e-9:
            full = fit_dimension(box_count_binary(GrayImage(np.ones(d.shape)), sizes))
            _logger.info("density_spectrum: constant density map at %.4f", lo)
            quad = QuadraticFit((0.0, 0.0, full.dimension), 0.0, lo)
            return SpectrumCurve(
                np.array([lo]),
                np.array([full.dimension]),
                np.array([d.size]),
                quad,
                collapsed=True,
            )
        corridors = np.linspace(lo, hi, n_sets + 1)
    edges = np.asarray(corridors, dtype=np.float64)
    membership = hard_assign(d, edges)
    alphas, f_values, support = [], [], []
    for k, level_set in enumerate(membership.maps):
        pixels = int(level_set.sum())
        if pixels == 0:
            continue
        est = fit_dimension(box_count_binary(GrayImage(level_set), sizes))
        alphas.append(0.5 * (edges[k] + edges[k + 1]))
        f_values.append(est.dimension)
        support.append(pixels)
    if len(alphas) < 3:
        raise InsufficientSupportError(
            f"insufficient support: only {len(alphas)} density level sets are "
            "non-empty; pass wider corridors"
        )
    alpha_arr = np.asarray(alphas)
    f_arr = np.asarray(f_values)
    _logger.debug(
        "density_spectrum: %d level sets, f in [%.3f, %.3f]",
        alpha_arr.size,
        f_arr.min(),
        f_arr.max(),
    )
    quad = fit_quadratic_points(alpha_arr, f_arr)
    return SpectrumCurve(alpha_arr, f_arr, np.asarray(support), quad)

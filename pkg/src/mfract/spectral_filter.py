"""Frequency-domain filtering: m' = F⁻¹[A ⊗ F[m]].

Spectra use the unshifted DFT layout, an unnormalised forward transform and
a 1/(HW) inverse. Radial frequency is measured in cycles per pixel per
axis, combined as a Euclidean norm, so the corner bin sits at √0.5.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd
from scipy import fft

from ._parallel import resolve_threads
from ._parse import parse_attention_spec
from .image_core import AnyImage, GrayImage, ImageTensor, read_pfm

_logger = logging.getLogger(__name__)

CORNER_FREQUENCY = math.hypot(0.5, 0.5)
IMAG_TOLERANCE = 1e-9

ImageLike = Union[AnyImage, np.ndarray]


def _array(img: ImageLike) -> np.ndarray:
    if isinstance(img, (GrayImage, ImageTensor)):
        data = img.data
    else:
        data = np.asarray(img)
    if data.ndim not in (2, 3) or min(data.shape[:2]) < 2:
        raise ValueError(f"expected an image of at least 2x2, got shape {data.shape}")
    return data


def radial_frequency(shape: tuple[int, ...]) -> np.ndarray:
    """|f| in cycles/pixel for every bin of an H×W unshifted spectrum."""
    height, width = shape[:2]
    return np.hypot(fft.fftfreq(height)[:, None], fft.fftfreq(width)[None, :])


@dataclass(frozen=True, eq=False)
class FrequencyTensor:
    """Unshifted DFT of an H×W or H×W×C map."""

    values: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        """Spectrum shape."""
        return self.values.shape


@dataclass(frozen=True, eq=False)
class AttentionMap:
    """Spectral multipliers aligned with :class:`FrequencyTensor` layout.

    ``values`` is H×W (shared by all channels) or H×W×C, real or complex.
    """

    values: np.ndarray
    kind: str = "custom"
    radius: float | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if not np.iscomplexobj(values):
            values = values.astype(np.float64)
        if values.ndim not in (2, 3):
            raise ValueError(f"attention must be HxW or HxWxC, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("attention map contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, ...]:
        """Attention map shape."""
        return self.values.shape

    def is_conjugate_symmetric(self, tol: float = IMAG_TOLERANCE) -> bool:
        """True when A(-f) = conj(A(f)) for every bin."""
        mirrored = np.roll(np.flip(self.values, axis=(0, 1)), 1, axis=(0, 1))
        return bool(np.max(np.abs(self.values - np.conj(mirrored))) <= tol)


def identity(shape: tuple[int, ...]) -> AttentionMap:
    """All-pass attention."""
    return AttentionMap(np.ones(shape[:2]), "identity")


def _check_radius(radius: float) -> None:
    if radius < 0.0:
        raise ValueError(f"filter radius must be >= 0, got {radius}")


def lowpass(shape: tuple[int, ...], radius: float) -> AttentionMap:
    """Keep bins with |f| <= radius (DC always kept)."""
    _check_radius(radius)
    mask = radial_frequency(shape) <= radius
    return AttentionMap(mask.astype(np.float64), "lowpass", radius)


def highpass(shape: tuple[int, ...], radius: float) -> AttentionMap:
    """Keep bins with |f| > radius."""
    _check_radius(radius)
    mask = radial_frequency(shape) > radius
    return AttentionMap(mask.astype(np.float64), "highpass", radius)


def from_array(values: np.ndarray) -> AttentionMap:
    """Wrap an explicit multiplier array."""
    return AttentionMap(values, "custom")


def attention_from_spec(spec: str, shape: tuple[int, ...]) -> AttentionMap:
    """Build an attention map from ``identity``, ``lowpass:R``, ``highpass:R``
    or ``file:PATH`` (a real PFM map of the image's size).
    """
    kind, arg = parse_attention_spec(spec)
    if kind == "identity":
        return identity(shape)
    if kind == "lowpass":
        return lowpass(shape, float(arg))  # type: ignore[arg-type]
    if kind == "highpass":
        return highpass(shape, float(arg))  # type: ignore[arg-type]
    path = Path(str(arg))
    if not path.is_file():
        raise FileNotFoundError(f"attention map file {path} does not exist")
    return from_array(read_pfm(path))


def fft2(img: ImageLike, threads: int | None = None) -> FrequencyTensor:
    """Unnormalised 2D DFT over the spatial axes."""
    data = _array(img)
    values = fft.fft2(data, axes=(0, 1), workers=resolve_threads(threads))
    return FrequencyTensor(values)


def ifft2(freq: FrequencyTensor, threads: int | None = None) -> np.ndarray:
    """Inverse DFT with 1/(HW) normalisation; the result stays complex."""
    return fft.ifft2(freq.values, axes=(0, 1), workers=resolve_threads(threads))


@dataclass(frozen=True, eq=False)
class FilterResult:
    """Real part of the filtered map and the discarded imaginary residue."""

    image: np.ndarray
    imag_residue: float
    conjugate_symmetric: bool


def apply_filter(
    img: ImageLike, attention: AttentionMap, threads: int | None = None
) -> FilterResult:
    """Multiply the spectrum by the attention map and transform back.

    Raises:
        ValueError: the attention map does not match the image size.
    """
    data = _array(img)
    if attention.shape[:2] != data.shape[:2]:
        raise ValueError(
            f"attention map is {attention.shape[0]}x{attention.shape[1]} but the "
            f"image is {data.shape[0]}x{data.shape[1]}"
        )
    values = attention.values
    if values.ndim == 2 and data.ndim == 3:
        values = values[:, :, None]
    elif values.ndim == 3 and (data.ndim != 3 or values.shape[2] != data.shape[2]):
        raise ValueError(
            f"per-channel attention {attention.shape} does not match image "
            f"{data.shape}"
        )
    spatial = ifft2(FrequencyTensor(fft2(data, threads).values * values), threads)
    residue = float(np.max(np.abs(spatial.imag)))
    symmetric = attention.is_conjugate_symmetric()
    if residue > IMAG_TOLERANCE:
        _logger.warning(
            "apply_filter: discarding imaginary residue %.3g (%s attention%s)",
            residue,
            attention.kind,
            "" if symmetric else ", not conjugate-symmetric",
        )
    return FilterResult(spatial.real, residue, symmetric)


def band_energy(
    img: ImageLike, band: tuple[float, float], threads: int | None = None
) -> float:
    """Σ|X(f)|² over bins with lo <= |f| <= hi, summed over channels.

    Raises:
        ValueError: the band is inverted, outside [0, √0.5], or holds no bins.
    """
    lo, hi = band
    if not 0.0 <= lo <= hi <= CORNER_FREQUENCY + 1e-12:
        raise ValueError(
            f"band [{lo:g}, {hi:g}] must satisfy 0 <= lo <= hi <= "
            f"{CORNER_FREQUENCY:.6f} cycles/pixel"
        )
    spectrum = fft2(img, threads).values
    radius = radial_frequency(spectrum.shape)
    mask = (radius >= lo) & (radius <= hi)
    if not mask.any():
        raise ValueError(f"band [{lo:g}, {hi:g}] contains no frequency bins")
    power = np.abs(spectrum) ** 2
    if power.ndim == 3:
        power = power.sum(axis=2)
    return float(power[mask].sum())


def band_profile(
    img: ImageLike, n_bands: int = 16, threads: int | None = None
) -> pd.DataFrame:
    """Energy in equal-width radial bands from DC to the corner frequency.

    The first band is closed; later bands are (lo, hi], so every bin is
    counted once and the energies sum to the total spectral energy.
    """
    if n_bands < 1:
        raise ValueError(f"n_bands must be >= 1, got {n_bands}")
    spectrum = fft2(img, threads).values
    power = np.abs(spectrum) ** 2
    if power.ndim == 3:
        power = power.sum(axis=2)
    edges = np.linspace(0.0, CORNER_FREQUENCY, n_bands + 1)
    index = np.searchsorted(edges, radial_frequency(spectrum.shape), side="left") - 1
    index = np.clip(index, 0, n_bands - 1)
    energy = np.bincount(index.ravel(), weights=power.ravel(), minlength=n_bands)
    return pd.DataFrame({"lo": edges[:-1], "hi": edges[1:], "energy": energy})

"""Deterministic test images with known fractal structure."""

from __future__ import annotations

import numpy as np
from scipy import fft

from .image_core import GrayImage


def sierpinski_carpet(level: int) -> GrayImage:
    """Binary Sierpinski carpet of side 3**level (1 = filled)."""
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    carpet = np.ones((1, 1))
    hole = np.zeros((1, 1))
    for _ in range(level):
        n = carpet.shape[0]
        hole = np.zeros((n, n))
        carpet = np.block(
            [
                [carpet, carpet, carpet],
                [carpet, hole, carpet],
                [carpet, carpet, carpet],
            ]
        )
    return GrayImage(carpet)


def _binomial_1d(levels: int, p: float) -> np.ndarray:
    mass = np.ones(1)
    for _ in range(levels):
        mass = np.stack([mass * p, mass * (1.0 - p)], axis=1).ravel()
    return mass


def binomial_cascade(levels: int, p: float = 0.7) -> GrayImage:
    """Product of two 1D binomial cascades, side 2**levels.

    Values are rescaled so the largest pixel is 1; the normalised measure
    (mass / total) is unaffected.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    m = _binomial_1d(levels, p)
    mass = np.outer(m, m)
    return GrayImage(mass / mass.max())


def cascade_alpha_range(p: float) -> tuple[float, float]:
    """Analytic (alpha_min, alpha_max) of :func:`binomial_cascade`."""
    hi, lo = max(p, 1.0 - p), min(p, 1.0 - p)
    return -2.0 * np.log2(hi), -2.0 * np.log2(lo)


def fbm_texture(size: int, hurst: float = 0.5, seed: int = 0) -> GrayImage:
    """Fractional Brownian surface by spectral synthesis, scaled to [0, 1].

    The amplitude spectrum falls as f**-(hurst + 1), giving a surface of
    fractal dimension close to 3 - hurst.
    """
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"hurst must lie in (0, 1), got {hurst}")
    rng = np.random.default_rng(seed)
    fy = fft.fftfreq(size)[:, None]
    fx = fft.fftfreq(size)[None, :]
    radius = np.hypot(fy, fx)
    radius[0, 0] = 1.0
    amplitude = radius ** -(hurst + 1.0)
    amplitude[0, 0] = 0.0
    phase = rng.uniform(0.0, 2.0 * np.pi, (size, size))
    noise = rng.standard_normal((size, size))
    spectrum = amplitude * noise * np.exp(1j * phase)
    surface = fft.ifft2(spectrum).real
    surface -= surface.min()
    return GrayImage(surface / surface.max())


def step_edge(size: int, low: float = 0.2, high: float = 0.8) -> GrayImage:
    """Vertical step: left half ``low``, right half ``high``."""
    data = np.full((size, size), low)
    data[:, size // 2 :] = high
    return GrayImage(data)


def checkerboard(size: int, tile: int = 2) -> GrayImage:
    """Checkerboard of ``tile``-pixel squares with values 0 and 1."""
    idx = np.arange(size) // tile
    return GrayImage(((idx[:, None] + idx[None, :]) % 2).astype(np.float64))

"""
Schema definitions for mfract analyses.

This module provides the configuration classes for every analysis in the
package, plus the environment layer (``MFRACT_*`` variables) they can be
built from.
"""

import os
from typing import Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from ._parse import parse_int_list

env_prefix = "MFRACT_"

DEFAULT_WINDOWS: Tuple[int, ...] = (3, 5, 7, 9)
DEFAULT_BOX_SIZES: Tuple[int, ...] = (2, 3, 4, 6, 8, 12, 16, 24, 32)
DEFAULT_SPECTRUM_BOXES: Tuple[int, ...] = (4, 8, 16, 32)


class _MfractSettings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env", extra="ignore", env_prefix=env_prefix
    )
    threads: Optional[int] = None
    seed: Optional[int] = None
    windows: Optional[str] = None  # in the format "3,5,7,9"
    anchors: Optional[int] = None


def _strictly_increasing(values: Tuple[int, ...]) -> bool:
    return all(a < b for a, b in zip(values, values[1:]))


class RuntimeConfig(BaseModel):
    """
    Process-level knobs shared by every command.

    Attributes:
        threads: Cap on worker threads for row-band evaluation and FFTs.
            None means ``os.cpu_count()``.
        seed: Seed for every seeded draw (weights, Monte Carlo noise).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    threads: Optional[int] = Field(default=None, ge=1)
    seed: int = 0

    @property
    def resolved_threads(self) -> int:
        """Thread count with None resolved to the CPU count."""
        return self.threads or os.cpu_count() or 1

    @classmethod
    def from_settings(cls, **kwargs):
        """Create an instance from environment settings with optional overrides.

        Args:
            **kwargs: Field-level overrides applied on top of env-var settings.
        """
        settings = _MfractSettings()
        params = {"threads": settings.threads, "seed": settings.seed}
        params.update(kwargs)
        if params["seed"] is None:
            params["seed"] = 0
        return cls(**params)


class DensityFitConfig(BaseModel):
    """
    Configuration of the per-pixel power-law density fit.

    Attributes:
        windows: Odd window widths l_1 < ... < l_R, at least three of them.
        epsilon_floor: Added to every window mass before taking logarithms.
        padding: Border handling for the windowed sums.
        slope_variant: "ols" is the least-squares slope; "printed" swaps the
            denominator's minus for a plus, for comparison only.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    windows: Tuple[int, ...] = DEFAULT_WINDOWS
    epsilon_floor: float = Field(default=1e-8, gt=0.0)
    padding: Literal["reflect"] = "reflect"
    slope_variant: Literal["ols", "printed"] = "ols"

    @field_validator("windows")
    @classmethod
    def _check_windows(cls, windows: Tuple[int, ...]) -> Tuple[int, ...]:
        if len(windows) < 3:
            raise ValueError(f"need at least 3 window sizes, got {windows}")
        bad = [w for w in windows if w < 3 or w % 2 == 0]
        if bad:
            raise ValueError(f"window sizes must be odd and >= 3, got {bad}")
        if not _strictly_increasing(windows):
            raise ValueError(f"window sizes must be strictly increasing: {windows}")
        return windows

    @property
    def R(self) -> int:
        """Number of windows."""
        return len(self.windows)

    @classmethod
    def from_settings(cls, **kwargs):
        """Create an instance from ``MFRACT_WINDOWS`` with optional overrides."""
        settings = _MfractSettings()
        params: dict = {}
        windows = parse_int_list(settings.windows)
        if windows:
            params["windows"] = windows
        params.update(kwargs)
        return cls(**params)


class BoxCountConfig(BaseModel):
    """
    Configuration of the box-counting estimators.

    Attributes:
        sizes: Box sizes in pixels. None picks the default list clipped to
            half the smaller image side.
        gray_levels: Number of gray levels G the surface is quantized to.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    sizes: Optional[Tuple[int, ...]] = None
    gray_levels: int = Field(default=256, ge=2)

    @field_validator("sizes")
    @classmethod
    def _check_sizes(cls, sizes: Optional[Tuple[int, ...]]):
        if sizes is None:
            return sizes
        if len(set(sizes)) < 3:
            raise ValueError(f"need at least 3 distinct box sizes, got {sizes}")
        if min(sizes) < 1:
            raise ValueError(f"box sizes must be positive, got {sizes}")
        return tuple(sorted(set(sizes)))


class SpectrumConfig(BaseModel):
    """
    Configuration of the histogram multifractal spectrum.

    Attributes:
        box_sizes: Box sizes in pixels, at least three.
        n_alpha_bins: Number of shared α bins.
        min_scales: A bin needs this many occupied scales to survive.
        collapse_tol: Per-scale α spread below which the spectrum is
            monofractal.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    box_sizes: Tuple[int, ...] = DEFAULT_SPECTRUM_BOXES
    n_alpha_bins: int = Field(default=24, ge=8)
    min_scales: int = Field(default=3, ge=2)
    collapse_tol: float = Field(default=1e-6, ge=0.0)

    @field_validator("box_sizes")
    @classmethod
    def _check_boxes(cls, sizes: Tuple[int, ...]) -> Tuple[int, ...]:
        if len(sizes) < 3:
            raise ValueError(f"need at least 3 box sizes, got {sizes}")
        if min(sizes) < 1 or not _strictly_increasing(sizes):
            raise ValueError(f"box sizes must be positive and increasing: {sizes}")
        return sizes


class GroupProcessorConfig(BaseModel):
    """
    Configuration of the grouped processing block.

    Attributes:
        split: Four channel-group sizes. None splits as evenly as possible,
            earlier groups taking the remainder (groups may be empty).
        dw_kernel: Depthwise kernel size (fixed at 3).
        scales: Downsample factors of the three processed branches.
        seed: Weight-initialisation seed.
        norm_eps: Variance floor of the per-channel standardisation.

    Weights are standard Gaussian draws scaled by 1/sqrt(fan-in): 1/k for a
    k×k depthwise kernel, 1/sqrt(C) for the C×C pointwise mix and
    1/sqrt(9C) for the 3×3 aggregation, so unit-variance inputs give
    unit-variance responses.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    split: Optional[Tuple[int, int, int, int]] = None
    dw_kernel: Literal[3] = 3
    scales: Tuple[int, int, int] = (2, 4, 8)
    seed: int = 0
    norm_eps: float = Field(default=1e-5, gt=0.0)

    @field_validator("scales")
    @classmethod
    def _check_scales(cls, scales: Tuple[int, int, int]) -> Tuple[int, int, int]:
        if min(scales) < 1 or not _strictly_increasing(scales):
            raise ValueError(f"scales must be positive and increasing: {scales}")
        return scales

    def resolve_split(self, channels: int) -> Tuple[int, int, int, int]:
        """Return the four group sizes for ``channels`` input channels."""
        if self.split is not None:
            if sum(self.split) != channels:
                raise ValueError(
                    f"split {self.split} sums to {sum(self.split)}, "
                    f"but the input has {channels} channels"
                )
            return self.split
        q, r = divmod(channels, 4)
        return (q + (r > 0), q + (r > 1), q + (r > 2), q)


class MfbConfig(BaseModel):
    """
    Configuration of the full multi-fractal block forward pass.

    Attributes:
        anchors: Number K of soft-assignment anchors.
        sharpness: Initial sharpness a_k shared by every anchor.
        out_channels: Channels produced by the aggregation convolution.
        density: Density-map fit configuration.
        group: Grouped processing configuration.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    anchors: int = Field(default=64, ge=1)
    sharpness: float = Field(default=1.0, gt=0.0)
    out_channels: int = Field(default=3, ge=1)
    density: DensityFitConfig = DensityFitConfig()
    group: GroupProcessorConfig = GroupProcessorConfig()

    @classmethod
    def from_settings(cls, **kwargs):
        """Create an instance from ``MFRACT_ANCHORS``/``MFRACT_WINDOWS``."""
        settings = _MfractSettings()
        params: dict = {"density": DensityFitConfig.from_settings()}
        if settings.anchors is not None:
            params["anchors"] = settings.anchors
        params.update(kwargs)
        return cls(**params)


class ScheduleConfig(BaseModel):
    """
    Configuration of the linear diffusion noise schedule.

    Attributes:
        T: Total number of steps.
        beta_start: β_1.
        beta_end: β_T.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    T: int = Field(default=1000, ge=2)
    beta_start: float = 1e-6
    beta_end: float = 1e-2

    @model_validator(mode="after")
    def _check_betas(self) -> "ScheduleConfig":
        if not 0.0 < self.beta_start < self.beta_end < 1.0:
            raise ValueError(
                "expected 0 < beta_start < beta_end < 1, got "
                f"beta_start={self.beta_start}, beta_end={self.beta_end}"
            )
        return self

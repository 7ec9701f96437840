"""Fractal and multifractal analysis of images."""

from mfract._errors import ImageFormatError, InsufficientSupportError
from mfract.boxcount import (
    BoxCountSeries,
    FdGap,
    FractalDimensionEstimate,
    box_count_binary,
    box_count_gray,
    fd_gap,
    fit_dimension,
)
from mfract.density import (
    DensityMap,
    MeasureStack,
    density_closed_form,
    density_exact,
    density_from_image,
    measure_stack,
)
from mfract.diffusion_sched import (
    NoiseSchedule,
    chain_equals_marginal,
    invert_x0,
    linear_schedule,
    loss_target,
    posterior_step,
    q_sample,
)
from mfract.grouping import (
    AnchorSet,
    MembershipStack,
    aggregate,
    group_process,
    hard_assign,
    init_anchors,
    mfb_forward,
    soft_assign,
)
from mfract.image_core import GrayImage, ImageTensor, decode, encode, resize_bicubic
from mfract.mfspec import (
    MeasureGrid,
    SpectrumCurve,
    build_measure,
    density_spectrum,
    fit_quadratic,
    holder_exponents,
    spectrum,
)
from mfract.spectral_filter import (
    AttentionMap,
    FrequencyTensor,
    apply_filter,
    band_energy,
    fft2,
    ifft2,
)

__all__ = [
    "AnchorSet",
    "AttentionMap",
    "BoxCountSeries",
    "DensityMap",
    "FdGap",
    "FractalDimensionEstimate",
    "FrequencyTensor",
    "GrayImage",
    "ImageFormatError",
    "ImageTensor",
    "InsufficientSupportError",
    "MeasureGrid",
    "MeasureStack",
    "MembershipStack",
    "NoiseSchedule",
    "SpectrumCurve",
    "aggregate",
    "apply_filter",
    "band_energy",
    "box_count_binary",
    "box_count_gray",
    "build_measure",
    "chain_equals_marginal",
    "decode",
    "density_closed_form",
    "density_exact",
    "density_from_image",
    "density_spectrum",
    "encode",
    "fd_gap",
    "fft2",
    "fit_dimension",
    "fit_quadratic",
    "group_process",
    "hard_assign",
    "holder_exponents",
    "ifft2",
    "init_anchors",
    "invert_x0",
    "linear_schedule",
    "loss_target",
    "measure_stack",
    "mfb_forward",
    "posterior_step",
    "q_sample",
    "resize_bicubic",
    "soft_assign",
    "spectrum",
]

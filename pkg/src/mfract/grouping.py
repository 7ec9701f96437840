"""Grouping of density values into anchor bins, and the multi-fractal block.

A density map is softly assigned to K anchors, giving a K-channel
membership stack. That stack goes through grouped multiscale processing
and a final 3×3 aggregation. All weights are seeded draws; nothing here is
trained.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import special

from .density import DensityMap, density_from_image
from .image_core import AnyImage
from .schema import GroupProcessorConfig, MfbConfig

_logger = logging.getLogger(__name__)

MIN_MFB_SIDE = 32

DensityLike = Union[DensityMap, np.ndarray]


def _values(d: DensityLike) -> np.ndarray:
    if isinstance(d, DensityMap):
        return d.d
    return np.asarray(d, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class AnchorSet:
    """Anchor centres ``b`` with per-anchor sharpness ``a``."""

    b: np.ndarray
    a: np.ndarray
    degenerate: bool = False

    def __post_init__(self) -> None:
        b = np.atleast_1d(np.asarray(self.b, dtype=np.float64))
        a = np.broadcast_to(np.asarray(self.a, dtype=np.float64), b.shape).copy()
        if b.ndim != 1 or b.size < 1:
            raise ValueError(f"anchors must be a non-empty vector, got {b.shape}")
        if np.any(a <= 0.0):
            raise ValueError("anchor sharpness values must be positive")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a", a)

    @property
    def K(self) -> int:
        """Number of anchors."""
        return int(self.b.size)

    def to_dict(self) -> dict:
        """Plain lists, ready for JSON."""
        return {"b": self.b.tolist(), "a": self.a.tolist()}


@dataclass(frozen=True, eq=False)
class MembershipStack:
    """K membership maps of shape K×H×W; ``hard`` stacks are one-hot."""

    maps: np.ndarray
    hard: bool = False

    @property
    def K(self) -> int:
        """Number of membership channels."""
        return int(self.maps.shape[0])

    def as_features(self) -> np.ndarray:
        """Channels-last H×W×K view for the grouped processor."""
        return np.moveaxis(self.maps, 0, -1)


def init_anchors(d: DensityLike, K: int, sharpness: float = 1.0) -> AnchorSet:
    """Place K anchors at the (k - 0.5)/K quantiles of the density values."""
    if K < 1:
        raise ValueError(f"anchor count must be >= 1, got {K}")
    values = _values(d).ravel()
    levels = (np.arange(1, K + 1) - 0.5) / K
    b = np.quantile(values, levels)
    degenerate = bool(values.max() == values.min())
    if degenerate:
        _logger.warning(
            "init_anchors: density map is constant (%g); all %d anchors coincide",
            values[0],
            K,
        )
    return AnchorSet(b, np.full(K, sharpness), degenerate=degenerate)


def soft_assign(d: DensityLike, anchors: AnchorSet) -> MembershipStack:
    """Softmax over anchors of -a_k·(D - b_k)², with max subtraction."""
    values = _values(d)
    shape = (-1,) + (1,) * values.ndim
    logits = -anchors.a.reshape(shape) * (values[None] - anchors.b.reshape(shape)) ** 2
    logits -= logits.max(axis=0, keepdims=True)
    weights = np.exp(logits)
    return MembershipStack(weights / weights.sum(axis=0, keepdims=True))


def hard_assign(d: DensityLike, corridors: Sequence[float]) -> MembershipStack:
    """One-hot corridor membership: C_k <= D < C_{k+1}, last corridor closed.

    Raises:
        ValueError: the edges are not strictly increasing or a value falls
            outside [C_1, C_{K+1}].
    """
    edges = np.asarray(corridors, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError(f"need at least two corridor edges, got {edges.tolist()}")
    if np.any(np.diff(edges) <= 0.0):
        raise ValueError(
            f"corridor edges must be strictly increasing: {edges.tolist()}"
        )
    values = _values(d)
    outside = (values < edges[0]) | (values > edges[-1])
    if np.any(outside):
        raise ValueError(
            f"{int(outside.sum())} density values fall outside the corridors "
            f"[{edges[0]:g}, {edges[-1]:g}]"
        )
    K = edges.size - 1
    index = np.searchsorted(edges, values, side="right") - 1
    index = np.minimum(index, K - 1)
    maps = (np.arange(K).reshape((-1,) + (1,) * values.ndim) == index[None]).astype(
        np.float64
    )
    return MembershipStack(maps, hard=True)


def corridors_from_anchors(anchors: AnchorSet, lo: float, hi: float) -> np.ndarray:
    """Corridor edges at anchor midpoints, closed off by ``lo`` and ``hi``."""
    b = np.sort(anchors.b)
    if not lo < b[0] or not b[-1] < hi:
        raise ValueError(f"[{lo:g}, {hi:g}] must strictly contain every anchor")
    return np.concatenate([[lo], 0.5 * (b[:-1] + b[1:]), [hi]])


# ---------------------------------------------------------------------------
# Grouped processing and aggregation
# ---------------------------------------------------------------------------


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact (erf-based) GELU."""
    return 0.5 * x * (1.0 + special.erf(x / np.sqrt(2.0)))


def _standardize(x: np.ndarray, eps: float) -> np.ndarray:
    mean = x.mean(axis=(0, 1), keepdims=True)
    var = x.var(axis=(0, 1), keepdims=True)
    return (x - mean) / np.sqrt(var + eps)


def _block_mean(x: np.ndarray, factor: int) -> np.ndarray:
    height, width, channels = x.shape
    pad = ((0, -height % factor), (0, -width % factor), (0, 0))
    x = np.pad(x, pad, mode="edge")
    h, w = x.shape[0] // factor, x.shape[1] // factor
    return x.reshape(h, factor, w, factor, channels).mean(axis=(1, 3))


def _upsample_nearest(x: np.ndarray, factor: int, height: int, width: int):
    up = np.repeat(np.repeat(x, factor, axis=0), factor, axis=1)
    return up[:height, :width]


def _conv3x3(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """3×3 correlation with symmetric borders.

    ``weights`` is C×3×3 for a depthwise pass or O×C×3×3 for a full one.
    """
    height, width, channels = x.shape
    padded = np.pad(x, ((1, 1), (1, 1), (0, 0)), mode="symmetric")
    depthwise = weights.ndim == 3
    out_channels = channels if depthwise else weights.shape[0]
    out = np.zeros((height, width, out_channels))
    for dy in range(3):
        for dx in range(3):
            window = padded[dy : dy + height, dx : dx + width]
            if depthwise:
                out += window * weights[:, dy, dx]
            else:
                out += window @ weights[:, :, dy, dx].T
    return out


def _group_weights(split: Sequence[int], cfg: GroupProcessorConfig):
    rng = np.random.default_rng([cfg.seed, 1])
    k = cfg.dw_kernel
    depthwise = [rng.standard_normal((c, k, k)) / k for c in split[1:]]
    channels = sum(split)
    pointwise = rng.standard_normal((channels, channels)) / np.sqrt(channels)
    return depthwise, pointwise


def _as_stack(features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"expected an HxWxC feature stack, got shape {x.shape}")
    return x


def multiscale_features(
    features: np.ndarray, cfg: GroupProcessorConfig | None = None
) -> np.ndarray:
    """Standardise, split four ways and run the multiscale branches.

    The first group passes through; the others are block-averaged, filtered
    depthwise and brought back by nearest upsampling.
    """
    cfg = cfg or GroupProcessorConfig()
    x = _as_stack(features)
    height, width, channels = x.shape
    split = cfg.resolve_split(channels)
    x = _standardize(x, cfg.norm_eps)
    depthwise, _ = _group_weights(split, cfg)
    bounds = np.cumsum((0,) + tuple(split))
    parts = [x[:, :, bounds[0] : bounds[1]]]
    for i, factor in enumerate(cfg.scales):
        part = x[:, :, bounds[i + 1] : bounds[i + 2]]
        if part.shape[2] == 0:
            parts.append(part)
            continue
        coarse = _conv3x3(_block_mean(part, factor), depthwise[i])
        parts.append(_upsample_nearest(coarse, factor, height, width))
    return np.concatenate(parts, axis=2)


def group_process(
    features: np.ndarray, cfg: GroupProcessorConfig | None = None
) -> np.ndarray:
    """Multiscale grouped attention; the output has the input's shape.

    The branches are mixed by a 1×1 projection, passed through GELU and
    the result gates the raw input elementwise.
    """
    cfg = cfg or GroupProcessorConfig()
    x = _as_stack(features)
    mixed = multiscale_features(x, cfg)
    _, pointwise = _group_weights(cfg.resolve_split(x.shape[2]), cfg)
    gate = gelu(mixed @ pointwise.T)
    return gate * x


def aggregate(features: np.ndarray, out_channels: int = 3, seed: int = 0) -> np.ndarray:
    """One seeded bias-free 3×3 convolution to ``out_channels`` channels."""
    x = _as_stack(features)
    channels = x.shape[2]
    rng = np.random.default_rng([seed, 2])
    weights = rng.standard_normal((out_channels, channels, 3, 3)) / np.sqrt(
        channels * 9
    )
    return _conv3x3(x, weights)


@dataclass(frozen=True, eq=False)
class MfbTrace:
    """Every intermediate of one multi-fractal block pass."""

    density: DensityMap
    anchors: AnchorSet
    membership: MembershipStack
    grouped: np.ndarray
    output: np.ndarray


def assign_stage(
    img: AnyImage, cfg: MfbConfig | None = None, threads: int | None = None
) -> tuple[DensityMap, AnchorSet, MembershipStack]:
    """Density map, anchors and soft memberships: the first half of the block."""
    cfg = cfg or MfbConfig()
    height, width = img.data.shape[:2]
    if min(height, width) < MIN_MFB_SIDE:
        raise ValueError(
            f"the multi-fractal block needs at least {MIN_MFB_SIDE}x{MIN_MFB_SIDE} "
            f"pixels, got {height}x{width}"
        )
    dmap = density_from_image(img, cfg.density, threads)
    anchors = init_anchors(dmap, cfg.anchors, cfg.sharpness)
    return dmap, anchors, soft_assign(dmap, anchors)


def process_stage(
    membership: MembershipStack, cfg: MfbConfig | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Grouped processing and aggregation of a membership stack."""
    cfg = cfg or MfbConfig()
    grouped = group_process(membership.as_features(), cfg.group)
    return grouped, aggregate(grouped, cfg.out_channels, cfg.group.seed)


def run_mfb(
    img: AnyImage, cfg: MfbConfig | None = None, threads: int | None = None
) -> MfbTrace:
    """Density → soft assignment → grouped processing → aggregation."""
    cfg = cfg or MfbConfig()
    height, width = img.data.shape[:2]
    dmap, anchors, membership = assign_stage(img, cfg, threads)
    grouped, output = process_stage(membership, cfg)
    _logger.info(
        "run_mfb: %dx%d image, K=%d, output channels=%d",
        height,
        width,
        anchors.K,
        cfg.out_channels,
    )
    return MfbTrace(dmap, anchors, membership, grouped, output)


def mfb_forward(
    img: AnyImage, cfg: MfbConfig | None = None, threads: int | None = None
) -> np.ndarray:
    """H×W×out_channels feature map of the multi-fractal block."""
    return run_mfb(img, cfg, threads).output

"""Row-band thread pool shared by the per-pixel analyses.

Bands are evaluated independently and reassembled in submission order, so
the result never depends on how many threads ran.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from .schema import RuntimeConfig

_logger = logging.getLogger(__name__)


def resolve_threads(threads: int | None = None) -> int:
    """Return an explicit thread count, falling back to ``MFRACT_THREADS``."""
    if threads is not None:
        if threads < 1:
            raise ValueError(f"threads must be >= 1, got {threads}")
        return threads
    return RuntimeConfig.from_settings().resolved_threads


def row_bands(n_rows: int, n_bands: int) -> list[tuple[int, int]]:
    """Split ``range(n_rows)`` into at most ``n_bands`` contiguous bands."""
    n_bands = max(1, min(n_bands, n_rows))
    edges = np.linspace(0, n_rows, n_bands + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges, edges[1:]) if b > a]


def map_row_bands(
    fn: Callable[[int, int], np.ndarray],
    n_rows: int,
    threads: int | None = None,
) -> np.ndarray:
    """Evaluate ``fn(start, stop)`` over row bands and stack the results."""
    n = resolve_threads(threads)
    bands = row_bands(n_rows, n)
    _logger.debug("map_row_bands: rows=%d threads=%d bands=%d", n_rows, n, len(bands))
    if n == 1 or len(bands) == 1:
        return np.concatenate([fn(a, b) for a, b in bands], axis=0)
    with ThreadPoolExecutor(max_workers=n) as pool:
        parts = list(pool.map(lambda band: fn(*band), bands))
    return np.concatenate(parts, axis=0)

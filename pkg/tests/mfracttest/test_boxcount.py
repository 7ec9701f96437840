import logging
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import ndimage

from mfract.boxcount import (
    BoxCountSeries,
    box_count_binary,
    box_count_gray,
    default_sizes,
    expected_carpet_dimension,
    fd_gap,
    fit_dimension,
    gray_dimension,
    series_to_frame,
)
from mfract.image_core import GrayImage, resize_bicubic, to_gray


def test_full_mask_counts_every_cell() -> None:
    series = box_count_binary(GrayImage(np.ones((64, 64))), [4, 8, 16])
    assert series.counts.tolist() == [256, 64, 16]


def test_single_pixel_counts_one_box() -> None:
    mask = np.zeros((64, 64))
    mask[17, 40] = 1.0
    assert box_count_binary(GrayImage(mask), [2, 4, 8, 16]).counts.tolist() == [1] * 4


def test_partial_edge_cells_are_counted() -> None:
    mask = np.zeros((10, 10))
    mask[9, 9] = 1.0
    assert box_count_binary(GrayImage(mask), [2, 3, 4]).counts.tolist() == [1, 1, 1]


def test_empty_mask_rejected() -> None:
    with pytest.raises(ValueError, match="nonzero"):
        box_count_binary(GrayImage(np.zeros((16, 16))), [2, 4, 8])


def test_size_validation() -> None:
    with pytest.raises(ValueError, match="at least 3"):
        box_count_binary(GrayImage(np.ones((16, 16))), [2, 4])
    with pytest.raises(ValueError, match="must lie in"):
        box_count_binary(GrayImage(np.ones((16, 16))), [2, 4, 16])


def test_carpet_counts_are_powers_of_eight(carpet) -> None:
    """N(3^k) = 8^(5-k) on a level-5 carpet."""
    series = box_count_binary(carpet, [3, 9, 27, 81])
    assert series.counts.tolist() == [4096, 512, 64, 8]


def test_carpet_dimension(carpet) -> None:
    est = fit_dimension(box_count_binary(carpet, [3, 9, 27, 81]))
    assert est.dimension == pytest.approx(expected_carpet_dimension(), abs=0.05)
    assert est.dimension == pytest.approx(math.log(8) / math.log(3), abs=1e-9)
    assert est.r_squared >= 0.999
    assert est.in_range


def test_binary_counts_non_increasing_on_nested_grids(rng) -> None:
    mask = GrayImage((rng.uniform(size=(96, 96)) > 0.97).astype(float))
    counts = box_count_binary(mask, [2, 4, 8, 16, 48]).counts
    assert np.all(np.diff(counts) <= 0)


def test_exact_power_law_fit() -> None:
    sizes = np.array([2, 4, 8, 16])
    series = BoxCountSeries(sizes, sizes.astype(float) ** -1.5)
    est = fit_dimension(series)
    assert est.dimension == pytest.approx(1.5, abs=1e-9)
    assert est.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_is_order_invariant() -> None:
    sizes = np.array([2, 3, 4, 6, 8])
    counts = np.array([900.0, 420.0, 230.0, 110.0, 61.0])
    perm = np.array([3, 0, 4, 1, 2])
    a = fit_dimension(BoxCountSeries(sizes, counts))
    b = fit_dimension(BoxCountSeries(sizes[perm], counts[perm]))
    assert a.dimension == pytest.approx(b.dimension, abs=1e-12)


def test_equal_counts_are_degenerate(caplog) -> None:
    with caplog.at_level(logging.WARNING, logger="mfract"):
        est = fit_dimension(BoxCountSeries(np.array([2, 4, 8]), np.array([5, 5, 5])))
    assert est.dimension == 0.0
    assert est.degenerate
    assert "degenerate" in caplog.text


def test_out_of_range_dimension_is_flagged_not_raised(caplog) -> None:
    sizes = np.array([2, 4, 8])
    with caplog.at_level(logging.WARNING, logger="mfract"):
        est = fit_dimension(BoxCountSeries(sizes, sizes.astype(float) ** -2.5))
    assert not est.in_range
    assert "outside the expected" in caplog.text


def test_constant_image_gray_dimension_is_two() -> None:
    img = GrayImage(np.full((100, 100), 0.4))
    series = box_count_gray(img, [2, 3, 4, 6, 8])
    np.testing.assert_allclose(series.counts, 100 * 100 / series.sizes**2)
    assert fit_dimension(series).dimension == pytest.approx(2.0, abs=0.05)


def test_uniform_noise_is_rough(rng) -> None:
    img = GrayImage(rng.uniform(size=(256, 256)))
    assert 2.6 < gray_dimension(img).dimension < 3.0


def test_rough_textures_land_in_surface_range(textures) -> None:
    for img in textures[:3]:
        est = gray_dimension(img)
        assert 2.0 < est.dimension < 3.0
        assert est.r_squared > 0.9


def test_smooth_texture_is_flagged_when_read_low(textures) -> None:
    # Differential box counting reads smooth surfaces slightly low.
    est = gray_dimension(textures[3])
    assert 1.9 < est.dimension < 3.0
    assert est.in_range == (est.dimension >= 2.0)


def test_gray_counts_are_whole_cells_on_dividing_sizes() -> None:
    sizes = [2, 4, 8, 16]
    series = box_count_gray(GrayImage(np.full((64, 64), 0.7)), sizes)
    assert series.counts.tolist() == [(64 // s) ** 2 for s in sizes]


def test_gray_partial_cells_count_by_coverage() -> None:
    series = box_count_gray(GrayImage(np.full((50, 50), 0.7)), [4, 8, 16])
    np.testing.assert_allclose(series.counts, [2500 / 16, 2500 / 64, 2500 / 256])


def test_noise_rougher_than_blurred_copy(rng) -> None:
    noise = rng.uniform(size=(128, 128))
    blurred = ndimage.gaussian_filter(noise, 2.0)
    blurred = (blurred - blurred.min()) / (blurred.max() - blurred.min())
    assert gray_dimension(GrayImage(noise)).dimension > gray_dimension(
        GrayImage(blurred)
    ).dimension


def test_intensity_rescaling_is_stable(textures) -> None:
    for img in textures[:5]:
        scaled = GrayImage(img.data * 0.8)
        delta = gray_dimension(img).dimension - gray_dimension(scaled).dimension
        assert abs(delta) < 0.1


def test_identical_pair_has_no_gap(textures) -> None:
    gap = fd_gap(textures[0], textures[0])
    assert gap.diff == 0.0
    assert gap.fd_hr == gap.fd_lr


@pytest.mark.slow
def test_hr_lr_gap_magnitude(textures) -> None:
    """Mean |FD(HR) - FD(LR)| over 4x bicubic downsamples is small but nonzero."""
    diffs = []
    for hr in textures:
        lr = to_gray(resize_bicubic(hr, Fraction(1, 4)))
        diffs.append(fd_gap(hr, lr).diff)
    assert 0.01 < float(np.mean(diffs)) < 0.2


def test_default_sizes_clip_to_half_side() -> None:
    assert default_sizes(20, 40) == (2, 3, 4, 6, 8)
    assert default_sizes(256, 256)[-1] == 32


def test_series_frame_columns() -> None:
    frame = series_to_frame(box_count_binary(GrayImage(np.ones((32, 32))), [2, 4, 8]))
    assert list(frame.columns) == ["eps", "count", "ln_eps", "ln_count"]
    assert frame["count"].tolist() == [256, 64, 16]

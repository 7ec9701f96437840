import time

import numpy as np
import pytest

from mfract.density import (
    MeasureStack,
    density_closed_form,
    density_exact,
    density_from_image,
    measure_stack,
)
from mfract.image_core import GrayImage, ImageTensor
from mfract.schema import DensityFitConfig
from mfract.synthetic import checkerboard

WINDOWS = (3, 5, 7, 9)


def _window_sum_oracle(data: np.ndarray, w: int) -> np.ndarray:
    half = w // 2
    padded = np.pad(data, half, mode="symmetric")
    out = np.zeros_like(data)
    for i in range(data.shape[0]):
        for j in range(data.shape[1]):
            out[i, j] = padded[i : i + w, j : j + w].sum()
    return out


def test_window_sums_match_double_loop(dyadic_noise) -> None:
    stack = measure_stack(dyadic_noise)
    assert stack.windows == WINDOWS
    assert stack.maps.shape == (4, 64, 64)
    for w, got in zip(WINDOWS, stack.maps):
        np.testing.assert_array_equal(got, _window_sum_oracle(dyadic_noise.data, w))


def test_constant_window_sum() -> None:
    stack = measure_stack(GrayImage(np.full((20, 20), 0.25)))
    np.testing.assert_allclose(stack.maps[0], 9 * 0.25, rtol=1e-15)
    np.testing.assert_allclose(stack.maps[3], 81 * 0.25, rtol=1e-15)


def test_delta_spreads_over_its_neighbourhood() -> None:
    data = np.zeros((32, 32))
    data[20, 10] = 1.0
    u3 = measure_stack(GrayImage(data)).maps[0]
    assert u3[19:22, 9:12].tolist() == [[1.0] * 3] * 3
    assert u3.sum() == 9.0


def test_delta_at_corner_is_reflected() -> None:
    data = np.zeros((32, 32))
    data[0, 0] = 1.0
    u3 = measure_stack(GrayImage(data)).maps[0]
    assert u3[0, 0] == 4.0
    assert u3[0, 1] == 2.0 and u3[1, 0] == 2.0
    assert u3[1, 1] == 1.0
    assert u3[2, 2] == 0.0


def test_window_too_large() -> None:
    cfg = DensityFitConfig(windows=(3, 5, 17))
    with pytest.raises(ValueError, match="does not fit inside a 16x16"):
        measure_stack(GrayImage(np.ones((16, 16))), cfg)


def test_stack_shape_validation() -> None:
    with pytest.raises(ValueError, match="stack of 3 maps"):
        MeasureStack((3, 5, 7), np.ones((2, 4, 4)))


def test_unit_image_has_area_scaling() -> None:
    stack = measure_stack(GrayImage(np.ones((32, 32))))
    for solve in (density_exact, density_closed_form):
        dmap = solve(stack)
        np.testing.assert_allclose(dmap.d, 2.0, atol=1e-8)
        np.testing.assert_allclose(dmap.k, 0.0, atol=1e-8)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 1.5, 2.0, 2.7])
def test_planted_exponent_recovered(gamma) -> None:
    stack = MeasureStack.planted(WINDOWS, (6, 7), gamma, scale=100.0)
    for solve in (density_exact, density_closed_form):
        dmap = solve(stack)
        np.testing.assert_allclose(dmap.d, gamma, atol=1e-9)
        np.testing.assert_allclose(dmap.k, np.log(100.0), atol=1e-8)
        assert dmap.residual.max() < 1e-12


def test_planted_exponent_map(rng) -> None:
    exponent = rng.uniform(0.5, 2.7, (9, 11))
    stack = MeasureStack.planted((3, 5, 7, 9, 11), exponent.shape, exponent, scale=50.0)
    np.testing.assert_allclose(density_closed_form(stack).d, exponent, atol=1e-9)


def test_closed_form_matches_exact_oracle() -> None:
    """The vectorised fit and the per-pixel normal equations agree everywhere."""
    for seed in range(25):
        rng = np.random.default_rng(seed)
        data = rng.uniform(size=(64, 64))
        if seed % 5 == 0:
            data[rng.uniform(size=data.shape) < 0.7] = 0.0
        stack = measure_stack(GrayImage(data))
        exact = density_exact(stack)
        fast = density_closed_form(stack)
        assert np.max(np.abs(fast.d - exact.d)) <= 1e-9
        assert np.max(np.abs(fast.k - exact.k)) <= 1e-9
        assert np.max(np.abs(fast.residual - exact.residual)) <= 1e-9


def test_zero_windows_use_the_floor() -> None:
    stack = measure_stack(GrayImage(np.zeros((16, 16))))
    dmap = density_closed_form(stack)
    np.testing.assert_allclose(dmap.d, 0.0, atol=1e-12)
    np.testing.assert_allclose(dmap.k, np.log(1e-8), rtol=1e-12)


def test_shift_equivariance(rng) -> None:
    data = rng.uniform(size=(48, 48))
    shifted = np.roll(data, (5, 7), axis=(0, 1))
    d = density_from_image(GrayImage(data)).d
    d_shifted = density_from_image(GrayImage(shifted)).d
    margin = max(WINDOWS)
    np.testing.assert_allclose(
        d_shifted[5 + margin : -margin, 7 + margin : -margin],
        d[margin : -margin - 5, margin : -margin - 7],
        atol=1e-12,
    )


def test_intensity_scaling_moves_bias_only(dyadic_noise) -> None:
    cfg = DensityFitConfig(epsilon_floor=1e-15)
    base = density_from_image(dyadic_noise, cfg)
    scaled = density_from_image(GrayImage(dyadic_noise.data * 4.0), cfg)
    assert np.max(np.abs(scaled.d - base.d)) <= 1e-9
    np.testing.assert_allclose(scaled.k - base.k, np.log(4.0), atol=1e-9)


def test_step_edge_lights_up(edge) -> None:
    dev = np.abs(density_from_image(edge).d - 2.0)
    assert dev[:, 30:34].mean() > 0.05
    assert dev[:, :16].max() < 1e-6
    assert dev[:, 48:].max() < 1e-6


def test_checkerboard_differs_from_flat() -> None:
    board = density_from_image(checkerboard(64, tile=2)).d
    flat = density_from_image(GrayImage(np.full((64, 64), 0.5))).d
    assert np.mean(np.abs(board - flat)) > 0.05


def test_printed_variant_is_not_the_slope(dyadic_noise) -> None:
    stack = measure_stack(dyadic_noise)
    printed = DensityFitConfig(slope_variant="printed")
    ols = density_closed_form(stack)
    alt = density_closed_form(stack, printed)
    assert np.max(np.abs(ols.d - alt.d)) > 0.5
    np.testing.assert_allclose(density_exact(stack, printed).d, alt.d, atol=1e-9)


@pytest.mark.parametrize("solve", [density_exact, density_closed_form])
def test_thread_count_does_not_change_results(dyadic_noise, solve) -> None:
    stack = measure_stack(dyadic_noise)
    one = solve(stack, threads=1)
    four = solve(stack, threads=4)
    np.testing.assert_array_equal(one.d, four.d)
    np.testing.assert_array_equal(one.k, four.k)


def test_color_input_uses_luma(rng) -> None:
    rgb = ImageTensor(rng.uniform(size=(24, 24, 3)))
    dmap = density_from_image(rgb)
    assert dmap.shape == (24, 24)


def test_summary_columns(dyadic_noise) -> None:
    frame = density_from_image(dyadic_noise).to_frame()
    assert list(frame.columns) == ["min", "max", "mean", "std"]
    assert frame["min"][0] <= frame["mean"][0] <= frame["max"][0]


@pytest.mark.slow
def test_closed_form_is_much_faster(rng) -> None:
    stack = measure_stack(GrayImage(rng.uniform(size=(512, 512))))
    start = time.perf_counter()
    density_exact(stack, threads=1)
    exact_time = time.perf_counter() - start
    start = time.perf_counter()
    density_closed_form(stack, threads=1)
    fast_time = time.perf_counter() - start
    assert exact_time >= 10 * fast_time

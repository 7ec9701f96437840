import logging

import numpy as np
import pytest

from mfract.grouping import (
    AnchorSet,
    aggregate,
    assign_stage,
    corridors_from_anchors,
    gelu,
    group_process,
    hard_assign,
    init_anchors,
    mfb_forward,
    multiscale_features,
    process_stage,
    run_mfb,
    soft_assign,
)
from mfract.image_core import GrayImage, ImageTensor
from mfract.schema import GroupProcessorConfig, MfbConfig


def test_anchor_quantiles_on_uniform_values() -> None:
    values = np.linspace(0.0, 1.0, 10001)
    anchors = init_anchors(values, 2)
    np.testing.assert_allclose(anchors.b, [0.25, 0.75], atol=1e-9)
    np.testing.assert_array_equal(anchors.a, [1.0, 1.0])
    assert not anchors.degenerate


def test_single_anchor_is_the_median(rng) -> None:
    values = rng.normal(2.0, 0.3, (40, 40))
    assert init_anchors(values, 1).b[0] == pytest.approx(np.median(values), abs=1e-12)


def test_anchors_are_monotone(rng) -> None:
    anchors = init_anchors(rng.uniform(1.5, 2.5, (64, 64)), 16, sharpness=3.0)
    assert anchors.K == 16
    assert np.all(np.diff(anchors.b) >= 0.0)
    assert np.all(anchors.a == 3.0)


def test_constant_density_gives_degenerate_anchors(caplog) -> None:
    with caplog.at_level(logging.WARNING, logger="mfract"):
        anchors = init_anchors(np.full((8, 8), 2.0), 4)
    assert anchors.degenerate
    np.testing.assert_array_equal(anchors.b, [2.0] * 4)
    assert "anchors coincide" in caplog.text


def test_anchor_validation() -> None:
    with pytest.raises(ValueError, match="must be >= 1"):
        init_anchors(np.ones(4), 0)
    with pytest.raises(ValueError, match="positive"):
        AnchorSet(np.array([1.0, 2.0]), np.array([1.0, 0.0]))


def test_memberships_sum_to_one(rng) -> None:
    values = rng.uniform(0.0, 3.0, 1_000_000)
    membership = soft_assign(values, init_anchors(values, 8))
    np.testing.assert_allclose(membership.maps.sum(axis=0), 1.0, atol=1e-12)
    assert membership.maps.min() >= 0.0


def test_single_anchor_takes_everything(rng) -> None:
    values = rng.uniform(0.0, 3.0, (16, 16))
    membership = soft_assign(values, init_anchors(values, 1))
    np.testing.assert_array_equal(membership.maps, np.ones((1, 16, 16)))


def test_sharp_anchors_match_corridors(rng) -> None:
    values = rng.uniform(0.0, 3.0, 20000)
    anchors = init_anchors(values, 8, sharpness=1e6)
    edges = corridors_from_anchors(anchors, values.min() - 1.0, values.max() + 1.0)
    clear = np.min(np.abs(values[:, None] - edges[None, 1:-1]), axis=1) >= 1e-2
    soft = soft_assign(values, anchors).maps[:, clear]
    hard = hard_assign(values, edges).maps[:, clear]
    np.testing.assert_allclose(soft, hard, atol=1e-12)


def test_anchor_permutation_permutes_channels(rng) -> None:
    values = rng.uniform(1.0, 3.0, (12, 12))
    anchors = AnchorSet(np.array([1.2, 1.9, 2.4, 2.9]), np.array([1.0, 2.0, 3.0, 4.0]))
    perm = np.array([2, 0, 3, 1])
    shuffled = AnchorSet(anchors.b[perm], anchors.a[perm])
    np.testing.assert_allclose(
        soft_assign(values, shuffled).maps,
        soft_assign(values, anchors).maps[perm],
        atol=1e-15,
    )


def test_far_values_stay_finite() -> None:
    anchors = AnchorSet(np.array([1.0, 2.0, 3.0]), np.full(3, 50.0))
    maps = soft_assign(np.array([1e3, -1e3]), anchors).maps
    assert np.all(np.isfinite(maps))
    np.testing.assert_array_equal(maps[:, 0], [0.0, 0.0, 1.0])
    np.testing.assert_array_equal(maps[:, 1], [1.0, 0.0, 0.0])


def test_hard_assignment_edges() -> None:
    edges = [0.0, 1.0, 2.0, 3.0]
    maps = hard_assign(np.array([0.0, 0.5, 1.0, 2.0, 2.5, 3.0]), edges).maps
    assert maps.argmax(axis=0).tolist() == [0, 0, 1, 2, 2, 2]
    np.testing.assert_array_equal(maps.sum(axis=0), 1.0)


def test_hard_assignment_rejects_bad_input() -> None:
    with pytest.raises(ValueError, match="outside the corridors"):
        hard_assign(np.array([3.5]), [0.0, 1.0, 3.0])
    with pytest.raises(ValueError, match="strictly increasing"):
        hard_assign(np.array([0.5]), [0.0, 1.0, 1.0])


def test_corridors_from_anchors() -> None:
    anchors = AnchorSet(np.array([1.0, 2.0, 4.0]), np.ones(3))
    edges = corridors_from_anchors(anchors, 0.0, 5.0)
    np.testing.assert_array_equal(edges, [0, 1.5, 3, 5])
    with pytest.raises(ValueError, match="strictly contain"):
        corridors_from_anchors(anchors, 1.0, 5.0)


def test_as_features_is_channels_last(rng) -> None:
    values = rng.uniform(size=(6, 5))
    membership = soft_assign(values, init_anchors(values, 4))
    assert membership.as_features().shape == (6, 5, 4)


def test_gelu_values() -> None:
    assert gelu(np.array([0.0]))[0] == 0.0
    assert gelu(np.array([10.0]))[0] == pytest.approx(10.0, abs=1e-12)
    assert gelu(np.array([1.0]))[0] == pytest.approx(0.8413447460685429, abs=1e-12)


def test_zero_input_gives_zero_output() -> None:
    out = group_process(np.zeros((16, 16, 8)))
    np.testing.assert_array_equal(out, 0.0)
    np.testing.assert_array_equal(aggregate(np.zeros((16, 16, 8))), 0.0)


def test_first_group_is_standardised_identity(rng) -> None:
    x = rng.uniform(size=(32, 32, 8))
    features = multiscale_features(x)
    head = x[:, :, :2]
    expected = (head - head.mean(axis=(0, 1))) / np.sqrt(head.var(axis=(0, 1)) + 1e-5)
    np.testing.assert_allclose(features[:, :, :2], expected, atol=1e-12)
    assert features.shape == x.shape


def test_odd_sizes_keep_shape(rng) -> None:
    x = rng.uniform(size=(30, 27, 4))
    assert multiscale_features(x).shape == (30, 27, 4)
    assert group_process(x).shape == (30, 27, 4)


def test_group_process_is_seeded(rng) -> None:
    x = rng.uniform(size=(16, 16, 8))
    np.testing.assert_array_equal(group_process(x), group_process(x))
    other = group_process(x, GroupProcessorConfig(seed=1))
    assert not np.allclose(other, group_process(x))


def test_explicit_split(rng) -> None:
    x = rng.uniform(size=(16, 16, 6))
    out = group_process(x, GroupProcessorConfig(split=(3, 1, 1, 1)))
    assert out.shape == x.shape
    assert not np.allclose(out, group_process(x))


@pytest.mark.parametrize("channels", [1, 5, 6, 7])
def test_uneven_channel_counts(rng, channels) -> None:
    x = rng.uniform(size=(16, 16, channels))
    features = multiscale_features(x)
    assert features.shape == x.shape
    head = x[:, :, :1]
    expected = (head - head.mean()) / np.sqrt(head.var() + 1e-5)
    np.testing.assert_allclose(features[:, :, :1], expected, atol=1e-12)
    assert group_process(x).shape == x.shape


def test_aggregate_is_linear(rng) -> None:
    x = rng.uniform(size=(16, 16, 64))
    out = aggregate(x)
    assert out.shape == (16, 16, 3)
    np.testing.assert_allclose(aggregate(2.0 * x), 2.0 * out, atol=1e-12)


def test_mfb_output_shape(rng) -> None:
    img = ImageTensor(rng.uniform(size=(128, 128, 3)))
    trace = run_mfb(img)
    assert trace.output.shape == (128, 128, 3)
    assert trace.membership.maps.shape == (64, 128, 128)
    assert trace.grouped.shape == (128, 128, 64)


def test_mfb_is_deterministic(rng) -> None:
    img = GrayImage(rng.uniform(size=(48, 48)))
    cfg = MfbConfig(anchors=8)
    np.testing.assert_array_equal(mfb_forward(img, cfg), mfb_forward(img, cfg))


def test_constant_image_gives_constant_output() -> None:
    out = mfb_forward(GrayImage(np.full((48, 48), 0.5)), MfbConfig(anchors=8))
    assert np.all(np.ptp(out, axis=(0, 1)) == 0.0)


def test_step_edge_response_is_local(edge) -> None:
    out = mfb_forward(edge, MfbConfig(anchors=16))
    assert np.ptp(out[:, :8], axis=(0, 1)).max() < 1e-9
    assert np.ptp(out[:, 28:36]) > 1e-6


def test_small_image_rejected() -> None:
    with pytest.raises(ValueError, match="at least 32x32"):
        mfb_forward(GrayImage(np.ones((31, 64))))


def test_mfb_ignores_thread_count(rng) -> None:
    img = GrayImage(rng.uniform(size=(40, 40)))
    cfg = MfbConfig(anchors=8)
    np.testing.assert_array_equal(
        mfb_forward(img, cfg, threads=1), mfb_forward(img, cfg, threads=3)
    )


@pytest.mark.parametrize("anchors", [1, 6])
def test_anchor_counts_off_the_default_split(rng, anchors) -> None:
    img = GrayImage(rng.uniform(size=(48, 48)))
    out = mfb_forward(img, MfbConfig(anchors=anchors))
    assert out.shape == (48, 48, 3)
    assert np.all(np.isfinite(out))


def test_stages_compose_to_the_block(rng) -> None:
    img = GrayImage(rng.uniform(size=(48, 48)))
    cfg = MfbConfig(anchors=6)
    _, anchors, membership = assign_stage(img, cfg)
    assert anchors.K == 6
    grouped, output = process_stage(membership, cfg)
    trace = run_mfb(img, cfg)
    np.testing.assert_array_equal(grouped, trace.grouped)
    np.testing.assert_array_equal(output, trace.output)

import math
from dataclasses import fields, replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from occlusynth.augment import (
    IDENTITY,
    DEFAULT_RANGES,
    AugmentRanges,
    apply_affine,
    apply_hsv,
    augment_instance,
    blend_paste,
    gaussian_kernel,
    make_rng,
    rgb_to_hsv,
    sample_params,
)
from occlusynth.ingest import InstanceImage


def instance(pixels, mask):
    return InstanceImage("obj", 0, np.asarray(pixels, np.uint8), np.asarray(mask, bool))


def test_default_ranges():
    assert DEFAULT_RANGES.hsv_s_scale == (0.5, 2.0)
    assert DEFAULT_RANGES.hsv_v_scale == (0.5, 2.0)
    assert DEFAULT_RANGES.affine_scale == (0.5, 1.0)
    assert DEFAULT_RANGES.translate_x == DEFAULT_RANGES.translate_y == (-16.0, 16.0)
    assert DEFAULT_RANGES.rotate == (-180.0, 180.0)
    assert DEFAULT_RANGES.shear == (-16.0, 16.0)
    assert DEFAULT_RANGES.blend_sigma == (0.0, 1.0)


def test_sample_params_deterministic():
    assert sample_params(make_rng(42)) == sample_params(make_rng(42))
    assert sample_params(make_rng(42)) != sample_params(make_rng(43))


def test_affine_scale_statistics():
    rng = make_rng(7)
    s = np.array([sample_params(rng).affine_scale for _ in range(10_000)])
    assert s.min() >= 0.5 and s.max() <= 1.0
    assert abs(s.mean() - 0.75) < 0.02


def test_ranges_validation():
    with pytest.raises(ValueError):
        AugmentRanges(affine_scale=(1.0, 0.5))
    with pytest.raises(ValueError):
        AugmentRanges.from_dict({"bogus": [0, 1]})
    r = AugmentRanges.from_dict({"rotate": [0, 0]})
    assert sample_params(make_rng(1), r).rotate == 0.0


@given(arrays(np.uint8, st.tuples(st.integers(1, 6), st.integers(1, 6), st.just(3))))
@settings(max_examples=100, deadline=None)
def test_hsv_identity_round_trip(px):
    out = apply_hsv(px, 1.0, 1.0)
    assert np.abs(out.astype(int) - px.astype(int)).max() <= 1


@given(st.integers(0, 255), st.floats(0.5, 2.0))
@settings(max_examples=50, deadline=None)
def test_gray_stays_gray(level, s):
    px = np.full((1, 1, 3), level, np.uint8)
    out = apply_hsv(px, s, 1.0)
    assert len(set(out.ravel().tolist())) == 1


def test_value_saturates():
    px = np.array([[[128, 0, 0]]], np.uint8)
    out = apply_hsv(px, 1.0, 2.0)
    assert rgb_to_hsv(out)[0, 0, 2] == 255.0
    assert out[0, 0].tolist() == [255, 0, 0]


def test_hue_preserved():
    rng = np.random.default_rng(0)
    px = rng.integers(30, 220, size=(20, 20, 3)).astype(np.uint8)
    h0 = rgb_to_hsv(px)[..., 0]
    hsv1 = rgb_to_hsv(apply_hsv(px, 1.3, 0.9))
    h1, chroma = hsv1[..., 0], hsv1[..., 1] * hsv1[..., 2] / 255.0
    d = np.abs(h0 - h1)
    d = np.minimum(d, 6 - d)
    # 8-bit rounding of each channel moves hue by O(1 / chroma) sector units
    ok = chroma > 0
    assert (d[ok] * chroma[ok]).max() <= 2.0


def asymmetric():
    mask = np.zeros((15, 15), bool)
    mask[2:6, 3:12] = True
    mask[6:11, 3:6] = True
    px = np.zeros((15, 15, 3), np.uint8)
    px[mask] = (200, 100, 50)
    return instance(px, mask)


def test_affine_identity():
    img = asymmetric()
    out = apply_affine(img, IDENTITY, img.shape)
    assert np.array_equal(out.foreground, img.foreground)
    assert np.array_equal(out.pixels, img.pixels)


def test_rotate_180_twice_is_identity():
    img = asymmetric()
    p = replace(IDENTITY, rotate=180.0)
    once = apply_affine(img, p, img.shape)
    assert not np.array_equal(once.foreground, img.foreground)
    assert np.array_equal(once.foreground, img.foreground[::-1, ::-1])
    twice = apply_affine(once, p, img.shape)
    assert np.array_equal(twice.foreground, img.foreground)


def test_scale_half_quarter_area():
    mask = np.zeros((30, 30), bool)
    mask[10:20, 10:20] = True
    img = instance(np.repeat(mask[..., None] * 255, 3, axis=2), mask)
    out = apply_affine(img, replace(IDENTITY, affine_scale=0.5), img.shape)
    assert 15 <= out.foreground.sum() <= 35


def test_default_out_size_never_clips():
    img = asymmetric()
    rng = make_rng(5)
    for _ in range(30):
        p = sample_params(rng)
        out = apply_affine(img, p)
        assert out.foreground.shape == out.pixels.shape[:2]
        # the border ring stays empty when the output is large enough
        f = out.foreground
        assert not (f[0].any() or f[-1].any() or f[:, 0].any() or f[:, -1].any())
        assert f.sum() >= 0.25 * 0.5 * img.foreground.sum()


def test_full_identity_augmentation():
    rng = np.random.default_rng(2)
    px = rng.integers(0, 256, size=(12, 9, 3)).astype(np.uint8)
    mask = rng.random((12, 9)) > 0.5
    out = augment_instance(instance(px, mask), IDENTITY, (12, 9))
    assert np.array_equal(out.foreground, mask)
    assert np.abs(out.pixels.astype(int) - px.astype(int)).max() <= 1
    canvas = np.zeros((20, 20, 3), np.uint8)
    pasted = blend_paste(canvas, out, (3, 4), 0.0)
    region = pasted[4:16, 3:12]
    assert np.array_equal(region[mask], out.pixels[mask])
    assert not region[~mask].any()


def test_gaussian_kernel():
    assert gaussian_kernel(0.0).tolist() == [1.0]
    k = gaussian_kernel(1.0)
    assert k.size == 7
    assert math.isclose(k.sum(), 1.0)
    assert np.allclose(k, k[::-1])


def test_hard_paste_replaces_exactly():
    canvas = np.full((10, 10, 3), 30, np.uint8)
    px = np.full((4, 4, 3), 220, np.uint8)
    out = blend_paste(canvas, instance(px, np.ones((4, 4), bool)), (2, 3), 0.0)
    expect = canvas.copy()
    expect[3:7, 2:6] = 220
    assert np.array_equal(out, expect)
    assert np.array_equal(canvas, np.full((10, 10, 3), 30, np.uint8))


def test_empty_foreground_and_outside_are_noops():
    canvas = np.random.default_rng(0).integers(0, 256, (10, 10, 3)).astype(np.uint8)
    empty = instance(np.full((4, 4, 3), 255), np.zeros((4, 4), bool))
    assert np.array_equal(blend_paste(canvas, empty, (2, 2), 1.0), canvas)
    full = instance(np.full((4, 4, 3), 255), np.ones((4, 4), bool))
    assert np.array_equal(blend_paste(canvas, full, (50, 50), 0.5), canvas)
    assert np.array_equal(blend_paste(canvas, full, (-20, 3), 0.5), canvas)


def test_soft_edge_values():
    # vertical edge: mask covers columns >= 10 of a 30-wide strip
    canvas = np.zeros((30, 40, 3), np.uint8)
    mask = np.zeros((30, 30), bool)
    mask[:, 10:] = True
    inst = instance(np.full((30, 30, 3), 200), mask)
    out = blend_paste(canvas, inst, (0, 0), 1.0)
    # 1-D oracle: alpha at column c is the kernel mass over columns >= 10
    x = np.arange(-3, 4)
    k = np.exp(-x ** 2 / 2.0)
    k /= k.sum()
    for c in (8, 9, 10, 11, 12):
        a = sum(k[i + 3] for i in x if c + i >= 10)
        assert out[15, c, 0] == round(200 * a)
        assert 0 < out[15, c, 0] < 200
    assert out[15, 20, 0] == 200 and out[15, 5, 0] == 0


@given(st.floats(0.0, 1.0), st.integers(-5, 25), st.integers(-5, 25), st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_blend_locality(sigma, x, y, seed):
    rng = np.random.default_rng(seed)
    canvas = rng.integers(0, 256, (24, 24, 3)).astype(np.uint8)
    mask = rng.random((8, 8)) > 0.6
    inst = instance(rng.integers(0, 256, (8, 8, 3)), mask)
    out = blend_paste(canvas, inst, (x, y), sigma)
    placed = np.zeros((24 + 40, 24 + 40), bool)
    placed[y + 20:y + 28, x + 20:x + 28] = mask
    reach = math.ceil(3 * sigma) + 1
    from scipy import ndimage
    near = ndimage.binary_dilation(placed, np.ones((3, 3), bool), iterations=reach) if placed.any() else placed
    far = ~near[20:44, 20:44]
    assert np.array_equal(out[far], canvas[far])


@given(st.integers(0, 2 ** 32))
@settings(max_examples=200, deadline=None)
def test_sample_params_within_ranges(seed):
    p = sample_params(make_rng(seed))
    assert p.within(DEFAULT_RANGES)
    assert {f.name for f in fields(p)} == {f.name for f in fields(AugmentRanges)}

import numpy as np
import pytest

from crfstereo.errors import GenerationError
from crfstereo.synthetic import (
    MAX_BACKGROUND_DISPARITY,
    Layer,
    StereoSample,
    make_stereogram,
)


def test_same_seed_bit_identical():
    a = make_stereogram(7, h=32, w=32, d_max=6, shapes=2)
    b = make_stereogram(7, h=32, w=32, d_max=6, shapes=2)
    assert np.array_equal(a.left, b.left)
    assert np.array_equal(a.right, b.right)
    assert np.array_equal(a.gt_left, b.gt_left)
    assert np.array_equal(a.gt_right, b.gt_right)
    assert np.array_equal(a.mask, b.mask)
    c = make_stereogram(8, h=32, w=32, d_max=6, shapes=2)
    assert not np.array_equal(a.left, c.left)


def test_pure_background_is_exact_shift():
    s = make_stereogram(3, h=16, w=40, d_max=8, shapes=0, noise=0.0)
    d_bg = s.layers[0].disparity
    assert 1 <= d_bg <= MAX_BACKGROUND_DISPARITY
    assert (s.gt_left == d_bg).all()
    # right view is the left view shifted by the background disparity
    assert np.array_equal(s.right[:, : 40 - d_bg], s.left[:, d_bg:])
    # intensity matching recovers the disparity exactly in the interior
    for y in range(0, 16, 5):
        for x in range(8, 40, 7):
            diffs = [abs(s.left[y, x] - s.right[y, x - d]) for d in range(8)]
            assert int(np.argmin(diffs)) == d_bg


def test_geometry_matches_independent_occlusion_oracle():
    s = make_stereogram(11, h=24, w=32, d_max=8, shapes=3, noise=0.5)
    h, w = 24, 32
    layers = s.layers

    def left_disp(y, x):
        d = layers[0].disparity
        for lay in layers[1:]:
            if lay.y0 <= y < lay.y1 and lay.x0 <= x < lay.x1:
                d = lay.disparity
        return d

    def right_disp(y, q):
        d = layers[0].disparity
        for lay in layers[1:]:
            if lay.y0 <= y < lay.y1 and lay.x0 - lay.disparity <= q < lay.x1 - lay.disparity:
                d = lay.disparity
        return d

    for y in range(h):
        for x in range(w):
            dl = left_disp(y, x)
            assert s.gt_left[y, x] == dl
            assert s.gt_right[y, x] == right_disp(y, x)
            m = x - dl
            expect_valid = m >= 0 and right_disp(y, m) == dl
            assert bool(s.mask[y, x]) == expect_valid


def test_occlusion_shadow_width_is_disparity_step():
    # find a seed whose single rectangle sits fully interior, then the
    # mask's shadow band next to the rectangle is exactly d_fg - d_bg wide
    for seed in range(60):
        s = make_stereogram(seed, h=24, w=40, d_max=8, shapes=1, noise=0.0)
        d_bg = s.layers[0].disparity
        rect = s.layers[1]
        step = rect.disparity - d_bg
        if rect.x0 - step >= d_bg and rect.x1 - rect.x0 > step:
            break
    else:
        pytest.fail("no interior-rectangle seed found")
    for y in range(rect.y0, rect.y1):
        band = s.mask[y, d_bg : rect.x0]
        assert (~band).sum() == step
        assert not s.mask[y, rect.x0 - step : rect.x0].any()
    # rows away from the rectangle lose only the left in-image margin
    outside = 0 if rect.y0 > 0 else rect.y1
    assert s.mask[outside, d_bg:].all()


def test_values_and_types():
    s = make_stereogram(5, h=16, w=24, d_max=6, shapes=2, noise=3.0)
    assert s.left.shape == (16, 24)
    assert (s.left >= 0).all() and (s.left <= 255).all()
    assert (s.right >= 0).all() and (s.right <= 255).all()
    assert s.mask.dtype == bool
    assert (s.gt_left >= 0).all() and (s.gt_left < 6).all()
    assert np.array_equal(s.gt_left, np.rint(s.gt_left))  # integer-valued
    disps = [lay.disparity for lay in s.layers[1:]]
    assert disps == sorted(disps)
    assert all(d > s.layers[0].disparity for d in disps)


def test_generation_errors():
    with pytest.raises(GenerationError):
        make_stereogram(0, h=4, w=32)
    with pytest.raises(GenerationError):
        make_stereogram(0, h=32, w=32, d_max=1)
    with pytest.raises(GenerationError):
        make_stereogram(0, h=32, w=32, d_max=9)  # needs d_max <= w/4
    with pytest.raises(GenerationError):
        make_stereogram(0, shapes=-1)
    with pytest.raises(GenerationError):
        make_stereogram(0, noise=-0.5)


def test_training_fixture_shape_accepted():
    s = make_stereogram(0, h=64, w=64, d_max=16, shapes=3)
    assert s.left.shape == (64, 64)
    assert s.mask.any()


def test_sample_shape_validation():
    with pytest.raises(GenerationError):
        StereoSample(
            left=np.zeros((4, 4)),
            right=np.zeros((4, 5)),
            gt_left=np.zeros((4, 4)),
            gt_right=None,
            mask=np.ones((4, 4), dtype=bool),
        )


def test_small_d_max_with_shapes_leaves_room():
    # the background disparity must leave at least one level for shapes
    for seed in range(20):
        s = make_stereogram(seed, h=16, w=16, d_max=4, shapes=1)
        assert s.layers[0].disparity <= 2
        assert s.layers[1].disparity <= 3

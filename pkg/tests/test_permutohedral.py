import numpy as np
import pytest

from conftest import rel_error
from crfstereo.errors import ShapeError, UnsupportedDimensionError
from crfstereo.features import bilateral_features, spatial_features
from crfstereo.permutohedral import MAX_FEATURE_DIM, PermutohedralLattice


def brute_gaussian(values, feats, exclude_self=False):
    d2 = np.sum((feats[:, None] - feats[None, :]) ** 2, axis=2)
    k = np.exp(-0.5 * d2)
    if exclude_self:
        np.fill_diagonal(k, 0.0)
    return k @ values


def normalized(filter_out, ones_out):
    return filter_out / ones_out


def test_rejects_bad_shapes_and_dims():
    with pytest.raises(ShapeError):
        PermutohedralLattice(np.zeros((4,)))
    with pytest.raises(UnsupportedDimensionError):
        PermutohedralLattice(np.zeros((4, MAX_FEATURE_DIM + 1)))


def test_single_point_filter_is_self_response():
    lat = PermutohedralLattice(np.zeros((1, 3)))
    out = lat.filter(np.array([[2.0]]))
    assert out.shape == (1, 1)
    assert abs(out[0, 0] - 2.0 * lat.self_response()) < 1e-12


def test_filter_linearity():
    rng = np.random.default_rng(0)
    feats = rng.standard_normal((40, 4))
    lat = PermutohedralLattice(feats)
    a = rng.standard_normal((40, 2))
    b = rng.standard_normal((40, 2))
    lhs = lat.filter(a + 3.0 * b)
    rhs = lat.filter(a) + 3.0 * lat.filter(b)
    assert np.allclose(lhs, rhs, atol=1e-12)


@pytest.mark.parametrize("dim", [2, 5])
def test_reverse_filter_is_exact_transpose(dim):
    rng = np.random.default_rng(dim)
    feats = rng.standard_normal((30, dim))
    lat = PermutohedralLattice(feats)
    u = rng.standard_normal((30, 3))
    v = rng.standard_normal((30, 3))
    lhs = float(np.sum(lat.filter(u) * v))
    rhs = float(np.sum(u * lat.filter(v, reverse=True)))
    assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(lhs))


def test_self_response_cached_and_positive():
    rng = np.random.default_rng(1)
    feats = rng.standard_normal((25, 3))
    lat = PermutohedralLattice(feats)
    r1 = lat.self_response()
    r2 = lat.self_response()
    assert r1 == r2
    assert r1 > 0.0


def test_identical_points_add():
    # two coincident points see each other exactly like themselves
    feats = np.zeros((2, 2))
    lat = PermutohedralLattice(feats)
    out = lat.filter(np.array([[1.0], [1.0]]))
    assert np.allclose(out[0], out[1])


@pytest.mark.parametrize("dim", [2, 5])
def test_normalized_accuracy_small_images(dim):
    # miniature version of the lattice-vs-brute oracle comparison, under
    # the normalization convention message passing actually uses (divide
    # by the response to all-ones); values are nonnegative like the
    # probabilities the pipeline filters
    rng = np.random.default_rng(42 + dim)
    img = rng.uniform(0, 255, (16, 16, 3))
    if dim == 5:
        feats = bilateral_features(img, 18.65, 4.39).reshape(-1, 5)
    else:
        feats = spatial_features(16, 16, 2.13).reshape(-1, 2)
    vals = rng.uniform(0.0, 1.0, (256, 4))
    ones = np.ones((256, 1))
    lat = PermutohedralLattice(feats)
    approx = normalized(lat.filter(vals), lat.filter(ones))
    exact = normalized(brute_gaussian(vals, feats), brute_gaussian(ones, feats))
    assert rel_error(approx, exact) < 5e-2


def test_arrays_frozen():
    rng = np.random.default_rng(3)
    lat = PermutohedralLattice(rng.standard_normal((10, 2)))
    with pytest.raises(ValueError):
        lat.offsets[0, 0] = 0

"""Both kernel backends must agree to float precision on every operation."""

import numpy as np
import pytest

from crfstereo import _kernels
from crfstereo._kernels import numpy_impl
from crfstereo.permutohedral import PermutohedralLattice

numba_impl = pytest.importorskip("crfstereo._kernels.numba_impl")


def test_backend_flag_consistent():
    assert _kernels.BACKEND in ("numba", "numpy")
    assert _kernels.HAS_NUMBA == (_kernels.BACKEND == "numba")


def test_gauss_filter_bruteforce_backends_agree():
    rng = np.random.default_rng(0)
    for exclude_self in (False, True):
        vals = rng.standard_normal((50, 3))
        feats = rng.standard_normal((50, 4))
        a = numpy_impl.gauss_filter_bruteforce(vals, feats, exclude_self)
        b = numba_impl.gauss_filter_bruteforce(vals, feats, exclude_self)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_lattice_stages_backends_agree():
    rng = np.random.default_rng(1)
    feats = rng.standard_normal((40, 3))
    lat = PermutohedralLattice(feats)
    vals = rng.standard_normal((40, 2))

    sp_np = numpy_impl.lattice_splat(vals, lat.offsets, lat.weights, lat.n_vertices)
    sp_nb = numba_impl.lattice_splat(vals, lat.offsets, lat.weights, lat.n_vertices)
    assert np.allclose(sp_np, sp_nb, atol=1e-12)

    for reverse in (False, True):
        bl_np = numpy_impl.lattice_blur(sp_np, lat.neighbors, reverse)
        bl_nb = numba_impl.lattice_blur(sp_np, lat.neighbors, reverse)
        assert np.allclose(bl_np, bl_nb, atol=1e-12)

    sl_np = numpy_impl.lattice_slice(sp_np, lat.offsets, lat.weights, lat.gain)
    sl_nb = numba_impl.lattice_slice(sp_np, lat.offsets, lat.weights, lat.gain)
    assert np.allclose(sl_np, sl_nb, atol=1e-12)


@pytest.mark.parametrize("dy,dx", [(0, 1), (0, -1), (1, 0), (-1, 0),
                                   (1, 1), (1, -1), (-1, 1), (-1, -1)])
def test_sgm_scan_backends_agree(dy, dx):
    rng = np.random.default_rng(2)
    costs = rng.uniform(0, 5, (7, 9, 4))
    for p1, p2 in ((1.0, 2.0), (1.0, 32.0)):
        a = numpy_impl.sgm_scan(costs, p1, p2, dy, dx)
        b = numba_impl.sgm_scan(costs, p1, p2, dy, dx)
        assert np.allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("radius", [1, 2])
def test_median_filter_backends_agree(radius):
    rng = np.random.default_rng(3)
    vals = rng.uniform(0, 16, (11, 13))
    valid = rng.uniform(size=(11, 13)) > 0.3
    a = numpy_impl.median_filter_masked(vals, valid, radius)
    b = numba_impl.median_filter_masked(vals, valid, radius)
    assert np.allclose(a, b, atol=1e-12)


def test_median_filter_all_invalid_is_identity():
    rng = np.random.default_rng(4)
    vals = rng.uniform(0, 16, (6, 6))
    valid = np.zeros((6, 6), dtype=bool)
    out = numpy_impl.median_filter_masked(vals, valid, 1)
    assert np.array_equal(out, vals)

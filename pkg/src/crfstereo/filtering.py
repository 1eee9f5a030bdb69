"""Gaussian filtering over cost volumes: exact reference and lattice fast path.

Both paths compute the same linear map

    out(i, l) = sum_j exp(-0.5 |f_i - f_j|^2) q(j, l),

optionally excluding the j = i term. The brute-force path evaluates the
sum exactly in O(N^2 d) and serves as the oracle; the lattice path
approximates it in O(N d) via ``PermutohedralLattice``. Because the
kernel matrix is symmetric, each path is its own adjoint; the lattice
realizes the transpose exactly by running its blur sweeps in reverse
order.

``FilterBank`` packages the per-image state the CRF needs: the two
feature fields (appearance and smoothness), their filtering plans, and
the per-pixel normalizers (response of the self-excluded filter to the
all-ones input). Downstream message passing divides by these normalizers
so message weights sum to ~1 per pixel regardless of image size.
"""

import numpy as np

from . import _kernels
from .errors import ParameterError, ShapeError
from .features import KernelWidths, bilateral_features, spatial_features
from .permutohedral import PermutohedralLattice
from .volume import CostVolume

#: Normalizer floor; per-pixel responses at or below this are treated as
#: "no neighbors" and the corresponding messages are zeroed.
NORMALIZER_FLOOR = 1e-12

FILTER_METHODS = ("bruteforce", "lattice")


def _flatten_features(features: np.ndarray, n_points: int) -> np.ndarray:
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim == 3:
        feats = feats.reshape(-1, feats.shape[-1])
    if feats.ndim != 2:
        raise ShapeError(f"features must be (N, d) or (H, W, d), got {features.shape}")
    if feats.shape[0] != n_points:
        raise ShapeError(
            f"features cover {feats.shape[0]} pixels but the volume has {n_points}"
        )
    return feats


def _flat_values(q: CostVolume) -> np.ndarray:
    return q.values.reshape(-1, q.values.shape[-1])


def gaussian_filter_bruteforce(
    q: CostVolume, features: np.ndarray, exclude_self: bool = False
) -> CostVolume:
    """Exact O(N^2) Gaussian filtering of a cost volume."""
    vals = _flat_values(q)
    feats = _flatten_features(features, vals.shape[0])
    out = _kernels.gauss_filter_bruteforce(vals, feats, exclude_self)
    return CostVolume(out.reshape(q.values.shape))


def gaussian_filter_lattice(
    q: CostVolume, features: np.ndarray, exclude_self: bool = False
) -> CostVolume:
    """Permutohedral-lattice approximation of :func:`gaussian_filter_bruteforce`."""
    vals = _flat_values(q)
    feats = _flatten_features(features, vals.shape[0])
    lattice = PermutohedralLattice(feats)
    out = lattice.filter(vals)
    if exclude_self:
        out = out - lattice.self_response() * vals
    return CostVolume(out.reshape(q.values.shape))


def gaussian_filter_backward(
    grad_out: CostVolume,
    features: np.ndarray,
    exclude_self: bool = False,
    method: str = "bruteforce",
) -> CostVolume:
    """Adjoint of the forward filter with respect to its input volume.

    The kernel matrix is symmetric, so the adjoint is the same filtering
    applied to the output gradient; ``method`` must name the same
    implementation used in the forward pass.
    """
    if method not in FILTER_METHODS:
        raise ParameterError(f"method must be one of {FILTER_METHODS}, got {method!r}")
    if method == "bruteforce":
        return gaussian_filter_bruteforce(grad_out, features, exclude_self)
    vals = _flat_values(grad_out)
    feats = _flatten_features(features, vals.shape[0])
    lattice = PermutohedralLattice(feats)
    out = lattice.filter(vals, reverse=True)
    if exclude_self:
        out = out - lattice.self_response() * vals
    return CostVolume(out.reshape(grad_out.values.shape))


class FilterBank:
    """Cached filtering plans and normalizers for one image.

    Parameters
    ----------
    image : (H, W) or (H, W, 3) array, values in [0, 255].
    widths : kernel widths for the appearance and smoothness fields.
    method : "lattice" (fast path) or "bruteforce" (exact oracle).

    The bank owns everything that depends only on the image and the
    widths, so repeated filtering during mean-field iterations and across
    training steps reuses the same plans. ``apply`` computes the raw
    self-excluded filter response; callers divide by ``normalizer`` to
    get unit-mass messages.
    """

    KINDS = ("appearance", "smoothness")

    def __init__(self, image: np.ndarray, widths: KernelWidths, method: str = "lattice"):
        if method not in FILTER_METHODS:
            raise ParameterError(f"method must be one of {FILTER_METHODS}, got {method!r}")
        img = np.asarray(image, dtype=np.float64)
        if img.ndim not in (2, 3):
            raise ShapeError(f"image must be (H, W) or (H, W, C), got {img.shape}")
        self.height, self.width = img.shape[0], img.shape[1]
        self.n_points = self.height * self.width
        self.widths = widths
        self.method = method

        self._feats = {
            "appearance": bilateral_features(img, widths.theta_alpha, widths.theta_beta
                                             ).reshape(self.n_points, -1),
            "smoothness": spatial_features(self.height, self.width, widths.theta_gamma
                                           ).reshape(self.n_points, -1),
        }
        self._lattices = {}
        self._self_resp = {}
        if method == "lattice":
            for kind, feats in self._feats.items():
                lat = PermutohedralLattice(feats)
                self._lattices[kind] = lat
                self._self_resp[kind] = lat.self_response()

        ones = np.ones((self.n_points, 1), dtype=np.float64)
        self._norms = {
            kind: self.apply(kind, ones)[:, 0] for kind in self.KINDS
        }

    def features(self, kind: str) -> np.ndarray:
        return self._feats[self._check_kind(kind)]

    def normalizer(self, kind: str) -> np.ndarray:
        """Per-pixel response of the self-excluded filter to all-ones."""
        return self._norms[self._check_kind(kind)]

    def apply(self, kind: str, values: np.ndarray, transpose: bool = False) -> np.ndarray:
        """Raw self-excluded filtering of flat (N, C) values.

        ``transpose`` selects the adjoint map; for the brute-force path
        the two coincide because the kernel matrix is symmetric.
        """
        kind = self._check_kind(kind)
        vals = np.asarray(values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] != self.n_points:
            raise ShapeError(f"values must be ({self.n_points}, C), got {vals.shape}")
        if self.method == "bruteforce":
            return _kernels.gauss_filter_bruteforce(vals, self._feats[kind], True)
        lat = self._lattices[kind]
        out = lat.filter(vals, reverse=transpose)
        return out - self._self_resp[kind] * vals

    def _check_kind(self, kind: str) -> str:
        if kind not in self.KINDS:
            raise ParameterError(f"kind must be one of {self.KINDS}, got {kind!r}")
        return kind

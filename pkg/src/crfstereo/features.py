"""Feature embeddings that turn Gaussian kernels into plain distances.

Both pairwise kernels used by the CRF are expressed as
``exp(-0.5 * |f_i - f_j|^2)`` over a per-pixel feature vector:

* appearance kernel: f = (x/theta_alpha, y/theta_alpha,
  R/theta_beta, G/theta_beta, B/theta_beta), 5-D;
* smoothness kernel: f = (x/theta_gamma, y/theta_gamma), 2-D.

x is the column index and y the row index; colors are in [0, 255].
Grayscale images are replicated across the three color slots.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError


@dataclass(frozen=True)
class KernelWidths:
    """Positive bandwidths of the two pairwise kernels."""

    theta_alpha: float
    theta_beta: float
    theta_gamma: float

    def __post_init__(self):
        for name in ("theta_alpha", "theta_beta", "theta_gamma"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v <= 0.0:
                raise ParameterError(f"{name} must be positive and finite, got {v}")
            object.__setattr__(self, name, v)


def as_rgb(image: np.ndarray) -> np.ndarray:
    """Return an (H, W, 3) float64 view of a gray or RGB image."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ShapeError(f"expected (H, W), (H, W, 1) or (H, W, 3) image, got {image.shape}")
    if img.shape[2] == 1:
        img = np.repeat(img, 3, axis=2)
    return img


def spatial_features(height: int, width: int, theta_gamma: float) -> np.ndarray:
    """(H, W, 2) smoothness features (x/theta_gamma, y/theta_gamma)."""
    if height < 1 or width < 1:
        raise ShapeError("image dimensions must be positive")
    if not np.isfinite(theta_gamma) or theta_gamma <= 0.0:
        raise ParameterError(f"theta_gamma must be positive, got {theta_gamma}")
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    return np.stack([xs / theta_gamma, ys / theta_gamma], axis=2)


def bilateral_features(image: np.ndarray, theta_alpha: float, theta_beta: float) -> np.ndarray:
    """(H, W, 5) appearance features combining position and color."""
    if not np.isfinite(theta_alpha) or theta_alpha <= 0.0:
        raise ParameterError(f"theta_alpha must be positive, got {theta_alpha}")
    if not np.isfinite(theta_beta) or theta_beta <= 0.0:
        raise ParameterError(f"theta_beta must be positive, got {theta_beta}")
    rgb = as_rgb(image)
    h, w = rgb.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    return np.concatenate(
        [
            (xs / theta_alpha)[:, :, None],
            (ys / theta_alpha)[:, :, None],
            rgb / theta_beta,
        ],
        axis=2,
    )

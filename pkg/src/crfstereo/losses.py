"""Training losses over normalized cost volumes, with validity masking.

All three losses share conventions: probabilities are clamped below at
1e-12 inside logarithms, the scalar loss is the mean over valid pixels,
and gradients are identically zero wherever the mask is False, so
data-less regions contribute nothing to training.
"""

import numpy as np

from .errors import EmptyMaskError, ParameterError, ShapeError
from .volume import CostVolume

#: Probability floor inside logarithms.
PROB_FLOOR = 1e-12

#: Default entropy penalty strength.
DEFAULT_ENTROPY_ALPHA = 0.1


def _check_inputs(q: CostVolume, gt: np.ndarray, mask: np.ndarray):
    if not q.normalized:
        raise ParameterError("loss inputs must be normalized volumes")
    v = q.values
    h, w, d = v.shape
    gt = np.asarray(gt, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if gt.shape != (h, w):
        raise ShapeError(f"ground truth must be ({h}, {w}), got {gt.shape}")
    if mask.shape != (h, w):
        raise ShapeError(f"mask must be ({h}, {w}), got {mask.shape}")
    n_valid = int(mask.sum())
    if n_valid == 0:
        raise EmptyMaskError("no valid pixels under the mask")
    return v, gt, mask, n_valid


def cross_entropy(
    q: CostVolume, gt: np.ndarray, mask: np.ndarray
) -> tuple[float, CostVolume]:
    """Mean -log q at the true (integer) disparity over valid pixels."""
    v, gt, mask, n_valid = _check_inputs(q, gt, mask)
    h, w, d = v.shape
    labels = np.rint(gt).astype(np.int64)
    sel = labels[mask]
    if sel.min() < 0 or sel.max() >= d:
        raise ParameterError(f"valid ground truth must lie in [0, {d})")

    ys, xs = np.nonzero(mask)
    p = np.maximum(v[ys, xs, sel], PROB_FLOOR)
    loss = float(-np.log(p).mean())

    grad = np.zeros_like(v)
    grad[ys, xs, sel] = -1.0 / (p * n_valid)
    return loss, CostVolume(grad)


def piecewise_linear(
    q: CostVolume, gt: np.ndarray, mask: np.ndarray
) -> tuple[float, CostVolume]:
    """Cross-entropy against linear interpolation of the two nearest bins.

    With k = floor(gt) and a = gt - k the per-pixel loss is
    -log((1-a) q_k + a q_{k+1}); a = 0 reduces to plain cross-entropy on
    bin k, so integer ground truth gives identical values.
    """
    v, gt, mask, n_valid = _check_inputs(q, gt, mask)
    h, w, d = v.shape
    gsel = gt[mask]
    if gsel.min() < 0 or gsel.max() > d - 1:
        raise ParameterError(f"valid ground truth must lie in [0, {d - 1}]")

    ys, xs = np.nonzero(mask)
    k = np.floor(gsel).astype(np.int64)
    a = gsel - k
    hi = np.minimum(k + 1, d - 1)  # only read when a > 0, where k + 1 <= d - 1
    mix = (1.0 - a) * v[ys, xs, k] + a * v[ys, xs, hi]
    p = np.maximum(mix, PROB_FLOOR)
    loss = float(-np.log(p).mean())

    grad = np.zeros_like(v)
    coeff = -1.0 / (p * n_valid)
    np.add.at(grad, (ys, xs, k), coeff * (1.0 - a))
    np.add.at(grad, (ys, xs, hi), coeff * a)
    return loss, CostVolume(grad)


def entropy_penalty(
    q: CostVolume, alpha: float, mask: np.ndarray
) -> tuple[float, CostVolume]:
    """Mean per-pixel entropy scaled by alpha; pushes beliefs to commit.

    Per valid pixel: P = -alpha * sum_i p_i log p_i; the gradient per bin
    is -alpha (1 + log p_i), zero at invalid pixels.
    """
    if alpha < 0 or not np.isfinite(alpha):
        raise ParameterError(f"alpha must be finite and >= 0, got {alpha}")
    v, _, mask, n_valid = _check_inputs(q, np.zeros(q.values.shape[:2]), mask)
    p = np.maximum(v, PROB_FLOOR)
    logp = np.log(p)
    per_pixel = -alpha * (p * logp).sum(axis=2)
    penalty = float(per_pixel[mask].mean())

    grad = np.where(mask[:, :, None], -alpha * (1.0 + logp) / n_valid, 0.0)
    return penalty, CostVolume(grad)

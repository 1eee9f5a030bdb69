"""Dense inner-product join of left/right descriptor fields.

The join produces the matching volume C(p, d) = <P_L(p), P_R(p - d)>
for every pixel p and disparity d. Where the matched column p - d falls
left of the image, the entry holds the score sentinel, which softmax
maps to zero probability; those entries carry no gradient.

Both adjoints distribute the incoming volume gradient back onto the
descriptor field that stayed fixed:

    dL/dP_L(p)  = sum_d g(p, d) P_R(p - d)
    dL/dP_R(q)  = sum_d g(q + d, d) P_L(q + d)

with the same out-of-image terms skipped.
"""

import numpy as np

from .errors import ParameterError, ShapeError
from .siamese import DescriptorField
from .volume import SENTINEL_SCORE, CostVolume


def _check_fields(left: DescriptorField, right: DescriptorField) -> None:
    if left.values.shape != right.values.shape:
        raise ShapeError(
            f"descriptor fields differ: {left.values.shape} vs {right.values.shape}"
        )


def join_forward(left: DescriptorField, right: DescriptorField, d_max: int) -> CostVolume:
    """Matching volume of per-pixel descriptor inner products."""
    _check_fields(left, right)
    h, w, dim = left.values.shape
    if d_max < 1:
        raise ParameterError(f"d_max must be >= 1, got {d_max}")
    if d_max > w:
        raise ParameterError(f"d_max {d_max} exceeds image width {w}")
    out = np.full((h, w, d_max), SENTINEL_SCORE, dtype=np.float64)
    for d in range(d_max):
        if d == 0:
            out[:, :, 0] = np.einsum("ywc,ywc->yw", left.values, right.values)
        else:
            out[:, d:, d] = np.einsum(
                "ywc,ywc->yw", left.values[:, d:], right.values[:, :-d]
            )
    return CostVolume(out)


def join_right_reference(
    left: DescriptorField, right: DescriptorField, d_max: int
) -> CostVolume:
    """Matching volume with the right image as reference:
    C_R(q, d) = <P_R(q), P_L(q + d)>, sentinel where q + d is outside."""
    _check_fields(left, right)
    h, w, dim = left.values.shape
    if d_max < 1:
        raise ParameterError(f"d_max must be >= 1, got {d_max}")
    if d_max > w:
        raise ParameterError(f"d_max {d_max} exceeds image width {w}")
    out = np.full((h, w, d_max), SENTINEL_SCORE, dtype=np.float64)
    for d in range(d_max):
        if d == 0:
            out[:, :, 0] = np.einsum("ywc,ywc->yw", right.values, left.values)
        else:
            out[:, :-d, d] = np.einsum(
                "ywc,ywc->yw", right.values[:, :-d], left.values[:, d:]
            )
    return CostVolume(out)


def join_backward_left(grad_out: CostVolume, right: DescriptorField) -> np.ndarray:
    """Volume-gradient adjoint onto the left descriptors."""
    g = grad_out.values
    h, w, dim = right.values.shape
    if g.shape[0] != h or g.shape[1] != w:
        raise ShapeError(f"grad_out is {g.shape[:2]}, field is {(h, w)}")
    d_max = g.shape[2]
    out = np.zeros_like(right.values)
    for d in range(d_max):
        if d == 0:
            out += g[:, :, 0][:, :, None] * right.values
        else:
            out[:, d:] += g[:, d:, d][:, :, None] * right.values[:, :-d]
    return out


def join_backward_right(grad_out: CostVolume, left: DescriptorField) -> np.ndarray:
    """Volume-gradient adjoint onto the right descriptors."""
    g = grad_out.values
    h, w, dim = left.values.shape
    if g.shape[0] != h or g.shape[1] != w:
        raise ShapeError(f"grad_out is {g.shape[:2]}, field is {(h, w)}")
    d_max = g.shape[2]
    out = np.zeros_like(left.values)
    for d in range(d_max):
        if d == 0:
            out += g[:, :, 0][:, :, None] * left.values
        else:
            out[:, :-d] += g[:, d:, d][:, :, None] * left.values[:, d:]
    return out

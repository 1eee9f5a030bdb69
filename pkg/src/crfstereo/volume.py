"""Cost volumes, disparity maps, and the softmax ops that act on them.

Conventions used throughout the package:

* A cost volume is an ``(H, W, D)`` array with the disparity axis
  innermost (contiguous), wrapped in :class:`CostVolume` together with a
  ``normalized`` flag that marks per-pixel probability content.
* Higher values mean *more similar* (scores). Modules that want penalty
  semantics (SGM) negate explicitly.
* A disparity map is a bare ``(H, W)`` float array. Missing values use the
  canonical sentinel :data:`INVALID_DISPARITY`; any negative value is
  treated as missing on ingestion and normalized to the sentinel.
* Out-of-image disparity bins in a matching volume hold the score
  sentinel :data:`SENTINEL_SCORE`, which softmax maps to (numerically)
  zero probability.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError

#: Canonical sentinel for missing disparity values.
INVALID_DISPARITY = -1.0

#: Score assigned to disparity bins whose match would fall outside the image.
SENTINEL_SCORE = -1.0e4


@dataclass(frozen=True)
class CostVolume:
    """An ``(H, W, D)`` stack of per-pixel disparity scores or probabilities.

    ``normalized`` is True when every pixel's disparity vector is a
    probability distribution (softmax output).
    """

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        v = self.values
        if not isinstance(v, np.ndarray) or v.ndim != 3:
            raise ShapeError("cost volume must be an (H, W, D) array")
        if v.shape[2] < 1:
            raise ShapeError("cost volume needs at least one disparity bin")
        if not np.issubdtype(v.dtype, np.floating):
            object.__setattr__(self, "values", v.astype(np.float64))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def d_max(self) -> int:
        return self.values.shape[2]


def valid_mask(disparity: np.ndarray) -> np.ndarray:
    """Boolean mask of pixels carrying a real (non-sentinel) disparity."""
    return disparity >= 0.0


def canonicalize_disparity(disparity: np.ndarray) -> np.ndarray:
    """Map every negative or non-finite entry to the canonical sentinel."""
    d = np.asarray(disparity, dtype=np.float64)
    bad = ~np.isfinite(d) | (d < 0.0)
    if np.any(bad):
        d = d.copy()
        d[bad] = INVALID_DISPARITY
    return d


def argmax_disparity(volume: CostVolume, mode: str = "max") -> np.ndarray:
    """Per-pixel winning disparity index as a float map.

    ``mode`` selects ``"max"`` (scores/probabilities) or ``"min"``
    (penalty costs). Ties resolve to the smallest disparity index.
    """
    if mode == "max":
        idx = np.argmax(volume.values, axis=2)
    elif mode == "min":
        idx = np.argmin(volume.values, axis=2)
    else:
        raise ParameterError(f"mode must be 'max' or 'min', got {mode!r}")
    return idx.astype(np.float64)


def softmax_over_disparities(volume: CostVolume) -> CostVolume:
    """Per-pixel softmax along the disparity axis, max-subtracted for stability."""
    v = volume.values
    shifted = v - v.max(axis=2, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=2, keepdims=True)
    return CostVolume(out, normalized=True)


def softmax_backward(
    grad_out: np.ndarray, softmax_out: "CostVolume | np.ndarray"
) -> np.ndarray:
    """Gradient of a scalar loss through the per-pixel softmax.

    Given g = dL/dq and the forward output q, returns
    dL/ds = q * (g - sum_d g*q) per pixel, summing over the last
    (disparity) axis. ``softmax_out`` may be the CostVolume returned by
    :func:`softmax_over_disparities` or a bare probability array.
    """
    if isinstance(softmax_out, CostVolume):
        if not softmax_out.normalized:
            raise ParameterError("softmax_backward requires a normalized volume")
        q = softmax_out.values
    else:
        q = softmax_out
    if grad_out.shape != q.shape:
        raise ShapeError("grad_out shape does not match the softmax output")
    inner = np.sum(grad_out * q, axis=-1, keepdims=True)
    return q * (grad_out - inner)


@dataclass
class GradientTape:
    """Recorded intermediates of one mean-field forward pass.

    ``meanfield_forward`` appends one record per iteration;
    ``meanfield_backward`` consumes them in exact reverse order and then
    marks the tape used. A tape is valid for a single backward replay.
    """

    q0: np.ndarray | None = None
    unary: np.ndarray | None = None
    records: list = field(default_factory=list)
    bank: object | None = None
    params_snapshot: object | None = None
    consumed: bool = False

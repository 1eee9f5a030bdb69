"""Semi-global matching and the classical disparity post-processing chain.

SGM aggregates a penalty volume (lower = better) along 4 or 8 scanline
directions. Each direction runs an independent 1-D dynamic program

    L_r(p, d) = C(p, d) + min(L_r(p-r, d),
                              L_r(p-r, d+-1) + p1,
                              min_k L_r(p-r, k) + p2)
                        - min_k L_r(p-r, k),

and the aggregated volume is the direction sum, taken in a fixed order
so results are bit-reproducible regardless of how directions are
scheduled.

The post chain applies, in order: left-right consistency check with
occlusion-style fill, parabolic subpixel refinement, and a masked 5x5
median. Callers convert similarity volumes to penalties first.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ParameterError, ShapeError
from .volume import INVALID_DISPARITY, SENTINEL_SCORE, CostVolume

#: Default small-jump and large-jump penalties for [0, 1]-scaled costs.
DEFAULT_P1 = 1.0
DEFAULT_P2 = 32.0

#: Penalty assigned to out-of-image disparity bins after cost conversion.
SENTINEL_PENALTY = 1.0e4

_DIRECTIONS_4 = ((0, 1), (0, -1), (1, 0), (-1, 0))
_DIRECTIONS_8 = _DIRECTIONS_4 + ((1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass(frozen=True)
class SgmConfig:
    """Penalties and scanline count for one aggregation run."""

    p1: float = DEFAULT_P1
    p2: float = DEFAULT_P2
    directions: int = 8

    def __post_init__(self):
        if not (0 < self.p1 <= self.p2):
            raise ParameterError(
                f"penalties must satisfy 0 < p1 <= p2, got p1={self.p1}, p2={self.p2}"
            )
        if self.directions not in (4, 8):
            raise ParameterError(f"directions must be 4 or 8, got {self.directions}")


def similarity_to_cost(volume: CostVolume) -> CostVolume:
    """Map similarity scores to [0, 1] penalties (higher score = lower cost).

    Sentinel (out-of-image) bins become a large constant penalty so they
    never win the aggregation's argmin.
    """
    v = volume.values
    real = v > SENTINEL_SCORE / 2
    if not real.any():
        raise ParameterError("volume holds only sentinel scores")
    vmin = v[real].min()
    vmax = v[real].max()
    span = vmax - vmin
    if span <= 0:
        costs = np.zeros_like(v)
    else:
        costs = (vmax - v) / span
    return CostVolume(np.where(real, costs, SENTINEL_PENALTY))


def probabilities_to_cost(volume: CostVolume, floor: float = 1e-12) -> CostVolume:
    """Negative log of a normalized volume, the penalty form of beliefs."""
    if not volume.normalized:
        raise ParameterError("probabilities_to_cost requires a normalized volume")
    return CostVolume(-np.log(np.maximum(volume.values, floor)))


def sgm_aggregate(costs: CostVolume, config: SgmConfig = SgmConfig()) -> CostVolume:
    """Sum of directional scanline relaxations of a penalty volume."""
    v = costs.values
    if v.shape[2] < 2:
        raise ParameterError("aggregation needs at least 2 disparity bins")
    dirs = _DIRECTIONS_4 if config.directions == 4 else _DIRECTIONS_8
    v = np.ascontiguousarray(v, dtype=np.float64)
    total = np.zeros_like(v)
    for dy, dx in dirs:
        total += _kernels.sgm_scan(v, float(config.p1), float(config.p2), dy, dx)
    return CostVolume(total)


def argmin_disparity(costs: CostVolume) -> np.ndarray:
    """First-index argmin over the disparity axis as a float map."""
    return costs.values.argmin(axis=2).astype(np.float64)


def left_right_check(
    d_left: np.ndarray,
    d_right: np.ndarray,
    tol: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Consistency mask plus occlusion-filled left map.

    Pixel p survives when its match in the right map agrees within
    ``tol``: |d_L(p) - d_R(p - d_L(p))| <= tol. Failed pixels take the
    lower of the nearest surviving left/right neighbours on their row
    (the background side of an occlusion), or stay at the sentinel when
    the whole row failed.
    """
    dl = np.asarray(d_left, dtype=np.float64)
    dr = np.asarray(d_right, dtype=np.float64)
    if dl.shape != dr.shape:
        raise ShapeError(f"maps differ: {dl.shape} vs {dr.shape}")
    h, w = dl.shape
    cols = np.arange(w)[None, :]
    match = cols - np.rint(dl).astype(np.int64)
    in_img = (dl >= 0) & (match >= 0) & (match < w)
    match_c = np.clip(match, 0, w - 1)
    partner = np.take_along_axis(dr, match_c, axis=1)
    ok = in_img & (partner >= 0) & (np.abs(dl - partner) <= tol)

    filled = np.where(ok, dl, INVALID_DISPARITY)
    out = filled.copy()
    for y in range(h):
        row = filled[y]
        valid_x = np.nonzero(row >= 0)[0]
        if valid_x.size == 0:
            continue
        bad_x = np.nonzero(row < 0)[0]
        if bad_x.size == 0:
            continue
        pos = np.searchsorted(valid_x, bad_x)
        left_idx = np.clip(pos - 1, 0, valid_x.size - 1)
        right_idx = np.clip(pos, 0, valid_x.size - 1)
        left_val = np.where(pos > 0, row[valid_x[left_idx]], np.inf)
        right_val = np.where(pos < valid_x.size, row[valid_x[right_idx]], np.inf)
        out[y, bad_x] = np.minimum(left_val, right_val)
    return ok, out


def subpixel_refine(costs: CostVolume, d: np.ndarray) -> np.ndarray:
    """Parabola-vertex refinement of an integer penalty argmin.

    Only pixels whose map value equals the volume's argmin and sits away
    from the disparity borders are refined; everything else (filled
    pixels, sentinels, flat curvature) passes through unchanged.
    """
    v = costs.values
    h, w, dm = v.shape
    dmap = np.asarray(d, dtype=np.float64)
    if dmap.shape != (h, w):
        raise ShapeError(f"map must be ({h}, {w}), got {dmap.shape}")
    out = dmap.copy()
    di = np.rint(dmap).astype(np.int64)
    amin = v.argmin(axis=2)
    interior = (dmap >= 0) & (di == amin) & (di >= 1) & (di <= dm - 2)
    ys, xs = np.nonzero(interior)
    if ys.size == 0:
        return out
    c0 = v[ys, xs, di[ys, xs]]
    cm = v[ys, xs, di[ys, xs] - 1]
    cp = v[ys, xs, di[ys, xs] + 1]
    denom = cp - 2.0 * c0 + cm
    good = denom > 0
    offset = np.zeros_like(c0)
    offset[good] = (cp[good] - cm[good]) / (2.0 * denom[good])
    out[ys, xs] = di[ys, xs] - offset
    return out


def median_filter(d: np.ndarray, window: int = 5) -> np.ndarray:
    """Masked window median; sentinel pixels stay sentinel."""
    if window < 1 or window % 2 == 0:
        raise ParameterError(f"window must be odd and positive, got {window}")
    dmap = np.ascontiguousarray(d, dtype=np.float64)
    valid = dmap >= 0
    return _kernels.median_filter_masked(dmap, valid, window // 2)


def postprocess(
    costs_left: CostVolume,
    d_left: np.ndarray,
    d_right: np.ndarray,
    tol: float = 1.0,
) -> np.ndarray:
    """Full chain: consistency check + fill, subpixel, 5x5 median."""
    _, filled = left_right_check(d_left, d_right, tol)
    refined = subpixel_refine(costs_left, filled)
    return median_filter(refined)

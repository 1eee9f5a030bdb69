"""Approximate high-dimensional Gaussian filtering on the permutohedral lattice.

The filter approximates ``out[i] = sum_j exp(-0.5 |f_i - f_j|^2) v[j]`` in
three linear stages:

1. *Splat*: embed each feature point into the hyperplane lattice and
   distribute its value onto the d+1 enclosing simplex vertices with
   barycentric weights.
2. *Blur*: convolve the vertex values along each of the d+1 lattice
   directions with a [1, 2, 1] stencil, one pass per direction.
3. *Slice*: read the blurred values back at every feature point with the
   same barycentric weights.

The feature scaling is chosen so that the composite kernel
(tent * binomial blur * tent) has exactly the second moment of the unit
Gaussian: the two tents carry (d+1)^2/12 of variance each and the blur
carries (d+1)^2/2 per direction, so a unit feature step must measure
sqrt(2/3)*(d+1) embedding units. The final gain constant makes the
chain's total mass match the unit Gaussian's mass in the uniform-density
limit. Equating the chain's DC mass (2^(d+1) from the raw stencil times
the per-vertex tent mass) with the Gaussian's (2*pi)^(d/2), after the
embedding's d-volume expansion (2/3)^(d/2) (d+1)^d, gives

    gain(d) = (4*pi/3)^(d/2) * sqrt(d+1) / 2^(d+1),

so the output is comparable to the exact brute-force sum without any
per-image normalization.

Construction is single-writer: a built lattice is immutable and reusable
for any number of filtering passes over the same feature field. The
backward pass of the filter is the exact transpose, obtained by running
the blur axes in reverse order.
"""

import numpy as np

from . import _kernels
from .errors import ShapeError, UnsupportedDimensionError

#: Largest supported feature dimensionality.
MAX_FEATURE_DIM = 8


def _lattice_gain(d: int) -> float:
    return (4.0 * np.pi / 3.0) ** (d / 2.0) * np.sqrt(d + 1.0) / 2.0 ** (d + 1)


def _canonical_simplex(d: int) -> np.ndarray:
    """(d+1, d+1) table of canonical simplex vertex coordinates per remainder."""
    canonical = np.empty((d + 1, d + 1), dtype=np.int64)
    for r in range(d + 1):
        canonical[r, : d + 1 - r] = r
        canonical[r, d + 1 - r :] = r - (d + 1)
    return canonical


class PermutohedralLattice:
    """Immutable filtering plan for one feature field.

    Parameters
    ----------
    features : (N, d) float array, d <= 8.
    """

    def __init__(self, features: np.ndarray):
        feats = np.asarray(features, dtype=np.float64)
        if feats.ndim != 2:
            raise ShapeError("features must be (N, d)")
        n, d = feats.shape
        if d < 1 or d > MAX_FEATURE_DIM:
            raise UnsupportedDimensionError(
                f"feature dimension must be in [1, {MAX_FEATURE_DIM}], got {d}"
            )
        if n < 1:
            raise ShapeError("need at least one feature point")

        self.n_points = n
        self.dim = d
        self.gain = _lattice_gain(d)

        # Embed into the sum-zero hyperplane of R^(d+1). The per-axis scale
        # makes a unit feature step measure sqrt(2/3)*(d+1) embedding
        # units, matching the variance budget of the tent/blur/tent chain.
        inv_std = np.sqrt(2.0 / 3.0) * (d + 1)
        scale = inv_std / np.sqrt((np.arange(d) + 1.0) * (np.arange(d) + 2.0))
        cf = feats * scale  # (N, d)

        elevated = np.empty((n, d + 1), dtype=np.float64)
        tail = np.cumsum(cf[:, ::-1], axis=1)[:, ::-1]  # tail[:, j] = sum_{k>=j} cf_k
        elevated[:, 0] = tail[:, 0]
        tail_shift = np.concatenate([tail[:, 1:], np.zeros((n, 1))], axis=1)
        elevated[:, 1:] = tail_shift - np.arange(1, d + 1) * cf

        # Round to the nearest remainder-0 lattice point.
        down = np.floor(elevated / (d + 1)) * (d + 1)
        up = down + (d + 1)
        rem0 = np.where(up - elevated < elevated - down, up, down)
        coord_sum = np.rint(rem0.sum(axis=1) / (d + 1)).astype(np.int64)
        rem0 = rem0.astype(np.int64)

        # Rank the coordinates of the residual; ties break toward the
        # lower index so the simplex assignment is deterministic.
        diff = elevated - rem0
        order = np.argsort(-diff, axis=1, kind="stable")
        rank = np.empty((n, d + 1), dtype=np.int64)
        np.put_along_axis(rank, order, np.arange(d + 1)[None, :], axis=1)

        # Walk back onto the sum-zero plane if rounding left it.
        rank += coord_sum[:, None]
        low = rank < 0
        rank[low] += d + 1
        rem0[low] += d + 1
        high = rank > d
        high &= ~low  # a coordinate moves at most one cell
        rank[high] -= d + 1
        rem0[high] -= d + 1

        # Barycentric coordinates inside the enclosing simplex.
        v = (elevated - rem0) / (d + 1)
        bary = np.zeros((n, d + 2), dtype=np.float64)
        rows = np.arange(n)[:, None]
        np.add.at(bary, (rows, d - rank), v)
        np.add.at(bary, (rows, d + 1 - rank), -v)
        bary[:, 0] += 1.0 + bary[:, d + 1]
        self.weights = np.ascontiguousarray(bary[:, : d + 1])

        # Enclosing simplex vertex keys (first d coordinates only; the
        # last is implied by the zero sum).
        canonical = _canonical_simplex(d)
        corners = np.arange(d + 1)[None, :, None]
        keys = rem0[:, None, :d] + canonical[corners, rank[:, None, :d]]  # (N, d+1, d)
        flat = keys.reshape(-1, d)
        uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
        self.n_vertices = uniq.shape[0]
        self.offsets = np.ascontiguousarray(
            inverse.reshape(n, d + 1).astype(np.int32)
        )

        # Blur neighbors: along axis a the neighbor pair sits at
        # key -/+ ((d+1) e_a - 1) (with the last implicit coordinate
        # absorbing axis d). Vertices outside the populated set read as
        # zeros through the sink row.
        neighbor_ids = np.zeros((d + 1, self.n_vertices, 2), dtype=np.int32)
        lookup = self._key_lookup(uniq, d)
        for a in range(d + 1):
            step = np.full(d, -1, dtype=np.int64)
            if a < d:
                step[a] = d
            n1 = lookup(uniq + step)
            n2 = lookup(uniq - step)
            neighbor_ids[a, :, 0] = n1 + 1  # +1: row 0 of the value array is a zero sink
            neighbor_ids[a, :, 1] = n2 + 1
        self.neighbors = neighbor_ids

        for arr in (self.weights, self.offsets, self.neighbors):
            arr.flags.writeable = False

        self._self_response: float | None = None

    @staticmethod
    def _key_lookup(uniq: np.ndarray, d: int):
        """Vectorized row lookup into the lex-sorted unique key table.

        Returns a function mapping (M, d) candidate keys to row indices,
        -1 where absent. Uses a mixed-radix int64 encoding when the key
        ranges allow it, otherwise a dict of tuples.
        """
        lo = uniq.min(axis=0) - (d + 1)
        sizes = (uniq.max(axis=0) + (d + 1) - lo + 1).astype(object)
        total = 1
        for s in sizes:
            total *= int(s)
        if total < 2**62:
            sizes_i = sizes.astype(np.int64)
            strides = np.ones(d, dtype=np.int64)
            for i in range(d - 2, -1, -1):
                strides[i] = strides[i + 1] * sizes_i[i + 1]
            ucodes = (uniq - lo) @ strides  # strictly increasing (lex-sorted rows)

            def lookup(cand: np.ndarray) -> np.ndarray:
                codes = (cand - lo) @ strides
                pos = np.searchsorted(ucodes, codes)
                pos_c = np.clip(pos, 0, len(ucodes) - 1)
                found = ucodes[pos_c] == codes
                return np.where(found, pos_c, -1).astype(np.int64)

            return lookup

        table = {tuple(row): i for i, row in enumerate(uniq.tolist())}

        def lookup(cand: np.ndarray) -> np.ndarray:
            return np.array(
                [table.get(tuple(row), -1) for row in cand.tolist()], dtype=np.int64
            )

        return lookup

    def filter(self, values: np.ndarray, reverse: bool = False) -> np.ndarray:
        """Apply the filter to (N, C) values; ``reverse`` applies the transpose."""
        vals = np.asarray(values)
        squeeze = vals.ndim == 1
        if squeeze:
            vals = vals[:, None]
        if vals.ndim != 2 or vals.shape[0] != self.n_points:
            raise ShapeError(
                f"values must be ({self.n_points}, C), got {values.shape}"
            )
        if not np.issubdtype(vals.dtype, np.floating):
            vals = vals.astype(np.float64)
        vertex = _kernels.lattice_splat(vals, self.offsets, self.weights, self.n_vertices)
        vertex = _kernels.lattice_blur(vertex, self.neighbors, reverse)
        out = _kernels.lattice_slice(vertex, self.offsets, self.weights, vals.dtype.type(self.gain))
        return out[:, 0] if squeeze else out

    def self_response(self) -> float:
        """Estimated diagonal of the lattice operator.

        Measured once by filtering a one-hot probe at the middle point;
        the diagonal depends only on the point's barycentric embedding, so
        one probe serves as the per-pixel estimate when subtracting the
        self-contribution.
        """
        if self._self_response is None:
            probe = np.zeros((self.n_points, 1), dtype=np.float64)
            mid = self.n_points // 2
            probe[mid, 0] = 1.0
            self._self_response = float(self.filter(probe)[mid, 0])
        return self._self_response

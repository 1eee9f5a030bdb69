"""Pure-numpy implementations of the hot kernels.

Functionally equivalent to ``numba_impl``; used when numba is unavailable
or disabled via ``CRFSTEREO_NO_NUMBA=1``.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# Target size (in scalars) of one pairwise-distance block in the
# brute-force filter; keeps peak memory flat for large inputs.
_BLOCK_SCALARS = 1 << 22


def gauss_filter_bruteforce(values, feats, exclude_self):
    """out[i] = sum_j exp(-0.5 * |f_i - f_j|^2) * values[j], j != i if exclude_self."""
    n = feats.shape[0]
    out = np.empty_like(values)
    chunk = max(1, _BLOCK_SCALARS // max(n, 1))
    for s in range(0, n, chunk):
        e = min(n, s + chunk)
        d2 = ((feats[s:e, None, :] - feats[None, :, :]) ** 2).sum(axis=2)
        w = np.exp(-0.5 * d2)
        if exclude_self:
            w[np.arange(e - s), np.arange(s, e)] = 0.0
        out[s:e] = w @ values
    return out


def lattice_splat(values, offsets, weights, n_vertices):
    """Accumulate pixel values onto lattice vertices with barycentric weights.

    Returns an array of shape (n_vertices + 1, channels); row 0 is a zero
    sink that missing blur neighbors read from.
    """
    d = values.shape[1]
    out = np.zeros((n_vertices + 1, d), dtype=values.dtype)
    contrib = (weights[..., None] * values[:, None, :]).reshape(-1, d)
    np.add.at(out, offsets.ravel() + 1, contrib)
    return out


def lattice_blur(vertex_values, neighbors, reverse):
    """Blur along each lattice axis with the [1, 2, 1] stencil (gain 2 per axis).

    ``neighbors`` holds, per axis and vertex, the two neighbor row indices
    into the padded value array (0 = missing, reads the zero sink). The
    axes are applied in reverse order when ``reverse`` is set, which makes
    the whole splat/blur/slice chain its own exact transpose.
    """
    vals = vertex_values
    n_axes = neighbors.shape[0]
    order = range(n_axes - 1, -1, -1) if reverse else range(n_axes)
    for a in order:
        nxt = np.empty_like(vals)
        nxt[0] = 0.0
        nxt[1:] = vals[1:] + 0.5 * (vals[neighbors[a, :, 0]] + vals[neighbors[a, :, 1]])
        vals = nxt
    return vals


def lattice_slice(vertex_values, offsets, weights, gain):
    """Read filtered values back at pixel positions with barycentric weights."""
    gathered = vertex_values[offsets + 1]
    return gain * np.einsum("nk,nkd->nd", weights, gathered)


def _sgm_relax(cost, prev, p1, p2):
    """One SGM step: cost plus the cheapest transition from ``prev``, renormalized.

    ``prev`` rows that are all +inf mean "no predecessor" and yield the raw cost.
    """
    m = prev.min(axis=-1)
    up = np.empty_like(prev)
    up[..., 1:] = prev[..., :-1]
    up[..., 0] = np.inf
    dn = np.empty_like(prev)
    dn[..., :-1] = prev[..., 1:]
    dn[..., -1] = np.inf
    best = np.minimum(np.minimum(prev, m[..., None] + p2), np.minimum(up, dn) + p1)
    with np.errstate(invalid="ignore"):  # inf - inf on no-predecessor rows
        out = cost + best - m[..., None]
    no_pred = ~np.isfinite(m)
    if np.any(no_pred):
        out[no_pred] = cost[no_pred]
    return out


def sgm_scan(costs, p1, p2, dy, dx):
    """Directional scanline relaxation for semi-global matching.

    Iterates along the propagation axis and vectorizes across the
    perpendicular one, so each row/column depends only on the previous.
    """
    h, w, _ = costs.shape
    out = np.empty_like(costs)
    if dy != 0:
        ys = range(h) if dy > 0 else range(h - 1, -1, -1)
        for y in ys:
            py = y - dy
            if py < 0 or py >= h:
                out[y] = costs[y]
                continue
            if dx == 0:
                prev = out[py]
            else:
                prev = np.full_like(costs[y], np.inf)
                if dx > 0:
                    prev[dx:] = out[py, :-dx]
                else:
                    prev[:dx] = out[py, -dx:]
            out[y] = _sgm_relax(costs[y], prev, p1, p2)
    else:
        xs = range(w) if dx > 0 else range(w - 1, -1, -1)
        for x in xs:
            px = x - dx
            if px < 0 or px >= w:
                out[:, x] = costs[:, x]
                continue
            out[:, x] = _sgm_relax(costs[:, x], out[:, px], p1, p2)
    return out


def median_filter_masked(values, valid, radius):
    """Window median (lower median, always a member of the population).

    Invalid pixels are excluded from every window population and are left
    unchanged in the output. Windows are clipped at the image border.
    """
    h, w = values.shape
    k = 2 * radius + 1
    pad = np.full((h + 2 * radius, w + 2 * radius), np.nan)
    pad[radius : radius + h, radius : radius + w] = np.where(valid, values, np.nan)
    win = sliding_window_view(pad, (k, k)).reshape(h, w, k * k)
    cnt = np.sum(~np.isnan(win), axis=2)
    ordered = np.sort(win, axis=2)  # NaNs sort to the end
    idx = np.maximum(cnt - 1, 0) // 2
    med = np.take_along_axis(ordered, idx[..., None], axis=2)[..., 0]
    return np.where(valid & (cnt > 0), med, values)

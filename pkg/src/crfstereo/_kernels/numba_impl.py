"""JIT-compiled implementations of the hot kernels.

Same contracts as ``numpy_impl``; see the docstrings there. All loops are
sequential (no ``parallel=True``) so results are bit-reproducible across
runs and thread counts.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def gauss_filter_bruteforce(values, feats, exclude_self):
    n, d = values.shape
    f = feats.shape[1]
    out = np.zeros((n, d), dtype=values.dtype)
    for i in range(n):
        for j in range(n):
            if exclude_self and i == j:
                continue
            dist = 0.0
            for k in range(f):
                diff = feats[i, k] - feats[j, k]
                dist += diff * diff
            w = np.exp(-0.5 * dist)
            for k in range(d):
                out[i, k] += w * values[j, k]
    return out


@njit(cache=True)
def lattice_splat(values, offsets, weights, n_vertices):
    n, d = values.shape
    corners = offsets.shape[1]
    out = np.zeros((n_vertices + 1, d), dtype=values.dtype)
    for i in range(n):
        for c in range(corners):
            o = offsets[i, c] + 1
            w = weights[i, c]
            for k in range(d):
                out[o, k] += w * values[i, k]
    return out


@njit(cache=True)
def lattice_blur(vertex_values, neighbors, reverse):
    m1, d = vertex_values.shape
    n_axes = neighbors.shape[0]
    vals = vertex_values
    for step in range(n_axes):
        a = n_axes - 1 - step if reverse else step
        nxt = np.empty((m1, d), dtype=vals.dtype)
        for k in range(d):
            nxt[0, k] = 0.0
        for i in range(1, m1):
            i1 = neighbors[a, i - 1, 0]
            i2 = neighbors[a, i - 1, 1]
            for k in range(d):
                nxt[i, k] = vals[i, k] + 0.5 * (vals[i1, k] + vals[i2, k])
        vals = nxt
    return vals


@njit(cache=True)
def lattice_slice(vertex_values, offsets, weights, gain):
    n, corners = offsets.shape
    d = vertex_values.shape[1]
    out = np.zeros((n, d), dtype=vertex_values.dtype)
    for i in range(n):
        for c in range(corners):
            o = offsets[i, c] + 1
            w = weights[i, c]
            for k in range(d):
                out[i, k] += w * vertex_values[o, k]
        for k in range(d):
            out[i, k] *= gain
    return out


@njit(cache=True)
def sgm_scan(costs, p1, p2, dy, dx):
    h, w, nd = costs.shape
    out = np.empty_like(costs)
    y0, y1, ystep = (0, h, 1) if dy >= 0 else (h - 1, -1, -1)
    x0, x1, xstep = (0, w, 1) if dx >= 0 else (w - 1, -1, -1)
    for y in range(y0, y1, ystep):
        py = y - dy
        for x in range(x0, x1, xstep):
            px = x - dx
            if py < 0 or py >= h or px < 0 or px >= w:
                for d in range(nd):
                    out[y, x, d] = costs[y, x, d]
                continue
            m = out[py, px, 0]
            for d in range(1, nd):
                if out[py, px, d] < m:
                    m = out[py, px, d]
            for d in range(nd):
                best = out[py, px, d]
                if d > 0 and out[py, px, d - 1] + p1 < best:
                    best = out[py, px, d - 1] + p1
                if d < nd - 1 and out[py, px, d + 1] + p1 < best:
                    best = out[py, px, d + 1] + p1
                if m + p2 < best:
                    best = m + p2
                out[y, x, d] = costs[y, x, d] + best - m
    return out


@njit(cache=True)
def median_filter_masked(values, valid, radius):
    h, w = values.shape
    out = values.copy()
    buf = np.empty((2 * radius + 1) * (2 * radius + 1), dtype=values.dtype)
    for y in range(h):
        for x in range(w):
            if not valid[y, x]:
                continue
            n = 0
            for yy in range(max(0, y - radius), min(h, y + radius + 1)):
                for xx in range(max(0, x - radius), min(w, x + radius + 1)):
                    if valid[yy, xx]:
                        buf[n] = values[yy, xx]
                        n += 1
            if n > 0:
                window = np.sort(buf[:n])
                out[y, x] = window[(n - 1) // 2]
    return out

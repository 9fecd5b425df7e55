"""Compiled kernels for the flow solver's per-frame dynamic program.

One DP step computes, for every target cell j of the next frame,

    d_next(j) ~= min_k [ d_cur(k) + || j - c_k ||^2 ]

where c_k = k + flow(k) is the cell k's flow-propagated center.  Centers
are snapped onto the grid (each into its surrounding cells, keeping the
minimal offset per cell), turning the min into a lower envelope of
unit-curvature paraboloids that separates into two 1D generalized
squared-distance transforms, one per axis.  The step is exact whenever
the centers are integral, i.e. for integer-valued flow.
"""

import numpy as np
from numba import njit

INF = np.inf


@njit(cache=True)
def _envelope_1d(f, d_out, a_out):
    # Lower envelope of parabolas y(x) = f[p] + (x - p)^2 sampled at the
    # integer grid.  Entries with f == +inf carry no parabola; a_out gets
    # the argmin root, -1 where the envelope is empty.
    n = f.shape[0]
    v = np.empty(n, np.int64)
    z = np.empty(n + 1, np.float64)
    k = -1
    for q in range(n):
        if not np.isfinite(f[q]):
            continue
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -INF
            z[1] = INF
            continue
        while True:
            p = v[k]
            s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * (q - p))
            if s <= z[k]:
                k -= 1
            else:
                break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = INF
    if k < 0:
        for q in range(n):
            d_out[q] = INF
            a_out[q] = -1
        return
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        p = v[k]
        d_out[q] = f[p] + (q - p) * (q - p)
        a_out[q] = p


@njit(cache=True)
def dp_transition(d_cur, cx, cy, h, w):
    """Run one DP step over an h x w grid.

    d_cur: (h*w,) cost-to-reach per source cell (+inf where unreachable).
    cx, cy: (h*w,) flow-propagated centers per source cell.
    Returns (d_next (h, w), parent (h, w) int32 flat source index).

    Each fractional center is scattered into its 4 surrounding grid
    cells, carrying the exact squared distance from that cell to the
    center as an extra offset; integer centers collapse onto a single
    cell with zero extra offset, which keeps the step exact for
    integer-valued flow.
    """
    hw = h * w
    fx = np.empty(hw, np.int64)
    fy = np.empty(hw, np.int64)
    x_lo, x_hi = 0, w - 1
    y_lo, y_hi = 0, h - 1
    for k in range(hw):
        fx[k] = np.int64(np.floor(cx[k]))
        fy[k] = np.int64(np.floor(cy[k]))
        if np.isfinite(d_cur[k]):
            if fx[k] < x_lo:
                x_lo = fx[k]
            if fx[k] + 1 > x_hi:
                x_hi = fx[k] + 1
            if fy[k] < y_lo:
                y_lo = fy[k]
            if fy[k] + 1 > y_hi:
                y_hi = fy[k] + 1
    ew = x_hi - x_lo + 1
    eh = y_hi - y_lo + 1

    # Scatter into up to 4 cells each; keep the minimal offset per cell,
    # ties to the smallest source index (strict < with ascending k).
    env = np.full((eh, ew), INF)
    winner = np.full((eh, ew), np.int32(-1), np.int32)
    for k in range(hw):
        val = d_cur[k]
        if not np.isfinite(val):
            continue
        x0 = fx[k]
        y0 = fy[k]
        ex0 = cx[k] - x0
        ey0 = cy[k] - y0
        x_steps = 1 if ex0 > 0.0 else 0
        y_steps = 1 if ey0 > 0.0 else 0
        for dy in range(y_steps + 1):
            for dx in range(x_steps + 1):
                rx = ex0 - dx
                ry = ey0 - dy
                cand = val + rx * rx + ry * ry
                r = y0 + dy - y_lo
                c = x0 + dx - x_lo
                if cand < env[r, c]:
                    env[r, c] = cand
                    winner[r, c] = np.int32(k)

    # Pass 1: transform along y within each column.
    trans = np.empty((eh, ew))
    arg_y = np.empty((eh, ew), np.int64)
    buf = np.empty(eh)
    dbuf = np.empty(eh)
    abuf = np.empty(eh, np.int64)
    for c in range(ew):
        for r in range(eh):
            buf[r] = env[r, c]
        _envelope_1d(buf, dbuf, abuf)
        for r in range(eh):
            trans[r, c] = dbuf[r]
            arg_y[r, c] = abuf[r]

    # Pass 2: transform along x within each in-grid row, composing the
    # per-target parent from the two argmins.
    d_next = np.empty((h, w))
    parent = np.empty((h, w), np.int32)
    rbuf = np.empty(ew)
    drow = np.empty(ew)
    arow = np.empty(ew, np.int64)
    for row0 in range(h):
        r = row0 - y_lo
        for c in range(ew):
            rbuf[c] = trans[r, c]
        _envelope_1d(rbuf, drow, arow)
        for col0 in range(w):
            c = col0 - x_lo
            d_next[row0, col0] = drow[c]
            best_c = arow[c]
            best_r = arg_y[r, best_c]
            parent[row0, col0] = winner[best_r, best_c]
    return d_next, parent


def warmup() -> None:
    """Force JIT compilation with a tiny instance (results discarded)."""
    d = np.full(4, INF)
    d[0] = 0.0
    cx = np.array([0.0, 1.0, 0.0, 1.0])
    cy = np.array([0.0, 0.0, 1.0, 1.0])
    dp_transition(d, cx, cy, 2, 2)

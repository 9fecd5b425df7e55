"""Bilinear sampling on regular grids, shared by the solver, trackers and
the cost-volume code.  Grid values live at integer pixel centers; lookups
outside the grid clamp to the nearest border pixel.
"""

from __future__ import annotations

import numpy as np


def bilinear(field: np.ndarray, x, y) -> np.ndarray:
    """Sample ``field`` (H, W) or (H, W, C) at fractional positions.

    x, y may be scalars or same-shape arrays.  Returns samples with shape
    ``x.shape`` (scalar field) or ``x.shape + (C,)``.
    """
    field = np.asarray(field)
    h, w = field.shape[:2]
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, w - 1.0)
    y = np.clip(np.asarray(y, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    if field.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    v00 = field[y0, x0]
    v01 = field[y0, x1]
    v10 = field[y1, x0]
    v11 = field[y1, x1]
    top = v00 * (1.0 - fx) + v01 * fx
    bot = v10 * (1.0 - fx) + v11 * fx
    return top * (1.0 - fy) + bot * fy

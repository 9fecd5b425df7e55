"""Weight-free numerical core of the cost-volume tracker.

Covers the inference math only: bilinear feature lookup, the per-query
cost volume (ReLU of feature dot products), spatial softmax, the
ball-thresholded soft argmax, the Huber-plus-cross-entropy training
loss, and its analytic gradient with the argmax cell and ball membership
treated as constants.  Feature grids come from any source (tests use
seeded random projections); the learned backbone is out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interp import bilinear
from .tracks import Query, TrackStoreError

TAU = 5.0  # soft-argmax ball radius, in grid cells
HUBER_DELTA = 1.0 / 32.0  # on [-1, 1] coordinates (4 px at 256x256)
LAMBDA = 100.0  # occlusion loss weight


class DegenerateMassError(TrackStoreError):
    pass


# ----------------------------------------------------------------------
# Cost volume
# ----------------------------------------------------------------------

def bilinear_lookup(grid: np.ndarray, x: float, y: float, t: int) -> np.ndarray:
    """Sample a (T, H, W, d) feature grid at frame t, fractional (x, y)."""
    return np.asarray(bilinear(grid[t], x, y), dtype=np.float64)


def cost_volume(grid: np.ndarray, query: Query) -> np.ndarray:
    """ReLU'd dot products of the query feature against the whole grid:
    a (T, H, W) tensor."""
    grid = np.asarray(grid, dtype=np.float64)
    fq = bilinear_lookup(grid, query.x, query.y, query.t)
    return np.maximum(np.einsum("thwd,d->thw", grid, fq), 0.0)


# ----------------------------------------------------------------------
# Softmax and soft argmax
# ----------------------------------------------------------------------

def spatial_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def default_grid(height: int, width: int) -> np.ndarray:
    """Coordinate grid G with G[i, j] = (x=j, y=i)."""
    g = np.empty((height, width, 2), dtype=np.float64)
    g[..., 0] = np.arange(width)[None, :]
    g[..., 1] = np.arange(height)[:, None]
    return g


def argmax_cell(s: np.ndarray) -> tuple[int, int]:
    """Row-major first maximum: ties pick the lexicographically smallest
    (i, j)."""
    flat = int(np.argmax(s))
    return flat // s.shape[1], flat % s.shape[1]


def ball_mask(shape: tuple[int, int], center: tuple[int, int], tau: float = TAU) -> np.ndarray:
    ii, jj = np.indices(shape)
    return (ii - center[0]) ** 2 + (jj - center[1]) ** 2 < tau * tau


def soft_argmax(
    s: np.ndarray, grid: np.ndarray | None = None, tau: float = TAU
) -> np.ndarray:
    """Mass-weighted mean of grid coordinates over the cells within
    Euclidean distance tau (strict) of the heatmap argmax."""
    s = np.asarray(s, dtype=np.float64)
    if grid is None:
        grid = default_grid(*s.shape)
    mask = ball_mask(s.shape, argmax_cell(s), tau)
    mass = float(s[mask].sum())
    if mass < 1e-20:
        raise DegenerateMassError("no heatmap mass inside the argmax ball")
    return (s[mask, None] * grid[mask]).sum(axis=0) / mass


# ----------------------------------------------------------------------
# Loss
# ----------------------------------------------------------------------

def huber(d, delta: float = HUBER_DELTA):
    """Quadratic below delta, linear above: d^2/2, then delta*(d - delta/2)."""
    d = np.asarray(d, dtype=np.float64)
    return np.where(d <= delta, 0.5 * d * d, delta * (d - 0.5 * delta))


def bce_with_logit(logit, target):
    """Numerically stable sigmoid cross entropy."""
    logit = np.asarray(logit, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    return np.maximum(logit, 0.0) - logit * target + np.log1p(np.exp(-np.abs(logit)))


def to_unit(points: np.ndarray, width: int, height: int) -> np.ndarray:
    """Map grid coordinates ([0, W-1] x [0, H-1]) onto [-1, 1] per axis."""
    points = np.asarray(points, dtype=np.float64)
    out = np.empty_like(points)
    out[..., 0] = 2.0 * points[..., 0] / (width - 1) - 1.0
    out[..., 1] = 2.0 * points[..., 1] / (height - 1) - 1.0
    return out


def tap_loss(
    pred_pos: np.ndarray,
    pred_occ_logit: np.ndarray,
    gt_pos: np.ndarray,
    gt_occ: np.ndarray,
    lam: float = LAMBDA,
    delta: float = HUBER_DELTA,
) -> float:
    """Per-query training loss over frames.

    Positions must already be rescaled to [-1, 1] per axis.  Visible
    frames contribute the Huber loss of the Euclidean position error;
    every frame contributes lam times the occlusion cross entropy."""
    pred_pos = np.asarray(pred_pos, dtype=np.float64)
    gt_pos = np.asarray(gt_pos, dtype=np.float64)
    gt_occ = np.asarray(gt_occ, dtype=np.float64)
    d = np.linalg.norm(pred_pos - gt_pos, axis=-1)
    pos_term = ((1.0 - gt_occ) * huber(d, delta)).sum()
    occ_term = bce_with_logit(pred_occ_logit, gt_occ).sum()
    return float(pos_term + lam * occ_term)


# ----------------------------------------------------------------------
# Analytic gradient (argmax and ball frozen)
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class FrameGradient:
    d_logits: np.ndarray  # (H, W) gradient w.r.t. the softmax logits
    d_occ_logit: float
    stable: bool  # False when a finite-difference probe could flip the argmax


def frame_loss(
    pos_logits: np.ndarray,
    occ_logit: float,
    gt_pos_grid: np.ndarray,
    gt_occluded: bool,
    tau: float = TAU,
    lam: float = LAMBDA,
    delta: float = HUBER_DELTA,
) -> float:
    """Loss of a single (query, frame) pair from raw heatmap logits."""
    h, w = pos_logits.shape
    s = spatial_softmax(pos_logits)
    p = soft_argmax(s, tau=tau)
    u = to_unit(p, w, h)
    g = to_unit(np.asarray(gt_pos_grid, dtype=np.float64), w, h)
    d = float(np.linalg.norm(u - g))
    pos = 0.0 if gt_occluded else float(huber(d, delta))
    return pos + lam * float(bce_with_logit(occ_logit, float(gt_occluded)))


def loss_gradient(
    pos_logits: np.ndarray,
    occ_logit: float,
    gt_pos_grid: np.ndarray,
    gt_occluded: bool,
    tau: float = TAU,
    lam: float = LAMBDA,
    delta: float = HUBER_DELTA,
    stability_margin: float = 1e-3,
) -> FrameGradient:
    """Gradient of frame_loss w.r.t. the heatmap logits and the occlusion
    logit, differentiating through softmax and the soft argmax with the
    argmax cell and ball membership held fixed."""
    z = np.asarray(pos_logits, dtype=np.float64)
    h, w = z.shape
    s = spatial_softmax(z)
    center = argmax_cell(s)
    mask = ball_mask(z.shape, center, tau)
    grid = default_grid(h, w)
    mass = float(s[mask].sum())
    if mass < 1e-20:
        raise DegenerateMassError("no heatmap mass inside the argmax ball")
    p = (s[mask, None] * grid[mask]).sum(axis=0) / mass

    d_occ = lam * (_sigmoid(occ_logit) - float(gt_occluded))

    if gt_occluded:
        d_logits = np.zeros_like(z)
        return FrameGradient(d_logits, float(d_occ), _is_stable(z, stability_margin))

    u = to_unit(p, w, h)
    g = to_unit(np.asarray(gt_pos_grid, dtype=np.float64), w, h)
    diff = u - g
    dist = float(np.linalg.norm(diff))
    if dist == 0.0:
        dl_du = np.zeros(2)
    else:
        slope = dist if dist <= delta else delta  # d/dd of the Huber loss
        dl_du = slope * diff / dist
    dl_dp = dl_du * np.array([2.0 / (w - 1), 2.0 / (h - 1)])

    # p = sum_B s*G / sum_B s, so dp/ds_ij = (G_ij - p) / mass inside B.
    g_s = np.zeros_like(z)
    g_s[mask] = (grid[mask] - p) @ dl_dp / mass
    # Softmax backward: g_z = s * (g_s - <g_s, s>).
    inner = float((g_s * s).sum())
    d_logits = s * (g_s - inner)
    return FrameGradient(d_logits, float(d_occ), _is_stable(z, stability_margin))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def _is_stable(z: np.ndarray, margin: float) -> bool:
    flat = np.sort(z.ravel())
    return bool(flat[-1] - flat[-2] > margin)


# ----------------------------------------------------------------------
# Self-check suite (backs the tapnet-check CLI command)
# ----------------------------------------------------------------------

# Denominator floor for relative gradient errors: central differences on
# a loss of scale ~1e2 carry ~1e-10 of roundoff, so gradients below 1e-5
# cannot be resolved to 1e-4 relative and count as matching when the
# absolute difference is at the noise floor.
GRAD_CHECK_FLOOR = 1e-5


def check_suite(
    seed: int = 0, instances: int = 200, grid_shape: tuple[int, int] = (12, 12), h: float = 1e-4
) -> dict:
    """Run soft-argmax/gradient sanity checks on random instances and
    report pass counts."""
    rng = np.random.default_rng(seed)
    gh, gw = grid_shape
    report = {
        "instances": instances,
        "stable": 0,
        "gradient_pass": 0,
        "hull_pass": 0,
        "softmax_normalized": 0,
        "max_rel_err": 0.0,
    }
    for _ in range(instances):
        z = rng.normal(0.0, 2.0, size=grid_shape)
        occ_logit = float(rng.normal(0.0, 2.0))
        gt = np.array([rng.uniform(0, gw - 1), rng.uniform(0, gh - 1)])
        occluded = bool(rng.random() < 0.2)

        s = spatial_softmax(z)
        if abs(float(s.sum()) - 1.0) < 1e-6:
            report["softmax_normalized"] += 1
        p = soft_argmax(s)
        mask = ball_mask(grid_shape, argmax_cell(s))
        coords = default_grid(gh, gw)[mask]
        if (
            coords[:, 0].min() - 1e-9 <= p[0] <= coords[:, 0].max() + 1e-9
            and coords[:, 1].min() - 1e-9 <= p[1] <= coords[:, 1].max() + 1e-9
        ):
            report["hull_pass"] += 1

        grad = loss_gradient(z, occ_logit, gt, occluded)
        if not grad.stable:
            continue
        report["stable"] += 1
        ok = True
        cells = [
            (int(rng.integers(0, gh)), int(rng.integers(0, gw))) for _ in range(6)
        ]
        for (ci, cj) in cells:
            zp = z.copy()
            zp[ci, cj] += h
            zm = z.copy()
            zm[ci, cj] -= h
            fd = (
                frame_loss(zp, occ_logit, gt, occluded)
                - frame_loss(zm, occ_logit, gt, occluded)
            ) / (2 * h)
            rel = abs(fd - grad.d_logits[ci, cj]) / max(
                abs(fd), abs(grad.d_logits[ci, cj]), GRAD_CHECK_FLOOR
            )
            report["max_rel_err"] = max(report["max_rel_err"], rel)
            if rel >= 1e-4:
                ok = False
        fd_occ = (
            frame_loss(z, occ_logit + h, gt, occluded)
            - frame_loss(z, occ_logit - h, gt, occluded)
        ) / (2 * h)
        rel = abs(fd_occ - grad.d_occ_logit) / max(
            abs(fd_occ), abs(grad.d_occ_logit), GRAD_CHECK_FLOOR
        )
        report["max_rel_err"] = max(report["max_rel_err"], rel)
        if rel >= 1e-4:
            ok = False
        if ok:
            report["gradient_pass"] += 1
    return report

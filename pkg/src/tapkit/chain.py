"""Baseline trackers built on dense flow.

chain_track integrates forward flow from the query point with bilinear
lookups, marking frames occluded while the point is outside the image
(flow at out-of-frame points is read from the nearest border pixel).
cycle_consistency_occlusion flags frames whose round-trip mapping back to
the query frame lands more than a threshold away (48 px default).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .interp import bilinear
from .tracks import FlowVolume, Query, Track, TrackStoreError


class MissingBackwardCorrespondenceError(TrackStoreError):
    pass


@dataclass(frozen=True)
class ChainConfig:
    out_of_frame_occlusion: bool = True
    cycle_threshold: float = 48.0
    # Whether a point that left the frame becomes visible again when the
    # chained position re-enters.
    allow_reentry: bool = True

    def __post_init__(self):
        if self.cycle_threshold <= 0:
            raise ValueError("cycle_threshold must be positive")


def _inside(x: float, y: float, width: int, height: int) -> bool:
    return 0.0 <= x < width and 0.0 <= y < height


def chain_track(
    flow_forward: FlowVolume,
    query: Query,
    flow_backward: FlowVolume | None = None,
    config: ChainConfig = ChainConfig(),
    tag: str = "",
) -> Track:
    """Track by integrating flow from the query point.

    Forward of the query: p[t+1] = p[t] + F_t(p[t]).  Frames before the
    query are chained on the backward volume (field i maps frame i+1 to
    frame i) when provided, otherwise marked occluded.

    Error accumulation: a positional error e_t grows one step to at most
    e_t * (1 + L) + i_t, where L is the flow field's Lipschitz constant
    and i_t the interpolation error of the lookup; for affine flow the
    bilinear lookup is exact (i_t = 0), so e_t <= e_0 * (1 + L)^t.
    """
    w, h = flow_forward.width, flow_forward.height
    T = flow_forward.num_frames
    if not 0 <= query.t < T:
        raise ValueError(f"query frame {query.t} outside video of {T} frames")
    if not _inside(query.x, query.y, w, h):
        raise ValueError(f"query ({query.x}, {query.y}) outside {w}x{h} image")

    positions = np.zeros((T, 2), dtype=np.float64)
    visible = np.zeros(T, dtype=bool)
    positions[query.t] = (query.x, query.y)
    visible[query.t] = True

    was_out = False
    for t in range(query.t, T - 1):
        x, y = positions[t]
        f = bilinear(flow_forward.uv[t], x, y)  # clamped: nearest border pixel
        positions[t + 1] = (x + f[0], y + f[1])
        inside = _inside(positions[t + 1, 0], positions[t + 1, 1], w, h)
        if not config.out_of_frame_occlusion:
            visible[t + 1] = True
        elif config.allow_reentry:
            visible[t + 1] = inside
        else:
            was_out = was_out or not inside
            visible[t + 1] = inside and not was_out

    if query.t > 0:
        if flow_backward is None:
            positions[: query.t] = positions[query.t]
        else:
            if (flow_backward.width, flow_backward.height) != (w, h):
                raise ValueError("backward flow resolution mismatch")
            was_out = False
            for t in range(query.t - 1, -1, -1):
                x, y = positions[t + 1]
                f = bilinear(flow_backward.uv[t], x, y)
                positions[t] = (x + f[0], y + f[1])
                inside = _inside(positions[t, 0], positions[t, 1], w, h)
                if not config.out_of_frame_occlusion:
                    visible[t] = True
                elif config.allow_reentry:
                    visible[t] = inside
                else:
                    was_out = was_out or not inside
                    visible[t] = inside and not was_out

    return Track(
        points=positions,
        visible=visible,
        query=query,
        tag=tag,
        source_resolution=(w, h),
    )


def cycle_consistency_occlusion(
    forward_positions: np.ndarray,
    query: Query,
    back_map: Callable[[int, tuple[float, float]], tuple[float, float] | None],
    threshold: float = 48.0,
) -> np.ndarray:
    """Visibility from cycle consistency.

    back_map(t, position) returns the position mapped back to the query
    frame (None when no correspondence exists).  A frame is occluded when
    the return position is strictly more than threshold away from the
    query (Euclidean, in the coordinate space of the positions).
    """
    forward_positions = np.asarray(forward_positions, dtype=np.float64)
    T = forward_positions.shape[0]
    visible = np.zeros(T, dtype=bool)
    q = np.array([query.x, query.y])
    for t in range(T):
        ret = back_map(t, (forward_positions[t, 0], forward_positions[t, 1]))
        if ret is None:
            raise MissingBackwardCorrespondenceError(f"no backward map at frame {t}")
        err = float(np.hypot(ret[0] - q[0], ret[1] - q[1]))
        visible[t] = err <= threshold
    return visible


def read_queries(path) -> list[tuple[str, Query]]:
    """Read a query file: {"queries": [{"tag"?, "t", "x", "y"}...]}."""
    import json
    from pathlib import Path

    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    queries = obj.get("queries")
    if not queries:
        raise TrackStoreError(f"{path}: no queries")
    return [
        (str(q.get("tag", f"track_{i:04d}")), Query(int(q["t"]), float(q["x"]), float(q["y"])))
        for i, q in enumerate(queries)
    ]


def flow_back_map(
    flow_forward: FlowVolume, flow_backward: FlowVolume, query_t: int
) -> Callable[[int, tuple[float, float]], tuple[float, float]]:
    """Round-trip map for cycle_consistency_occlusion built from flow
    volumes: chains backward flow for frames after the query and forward
    flow for frames before it."""

    def back_map(t: int, pos: tuple[float, float]) -> tuple[float, float]:
        x, y = pos
        while t > query_t:
            f = bilinear(flow_backward.uv[t - 1], x, y)
            x, y = x + f[0], y + f[1]
            t -= 1
        while t < query_t:
            f = bilinear(flow_forward.uv[t], x, y)
            x, y = x + f[0], y + f[1]
            t += 1
        return (x, y)

    return back_map

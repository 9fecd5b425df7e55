"""Ground truth from rendered rigid scenes.

A query pixel is lifted into its object's local frame via the rendered
local-coordinate map (equivalently: back-projecting the depth map and
applying the inverse object pose), carried through every frame by the
known rigid poses, and projected back to the image.  Occlusion compares
the reprojected depth against the rendered depth map with a 1% margin
over the max of the 4 nearest pixels; points projecting outside the
image count as occluded.
"""

from __future__ import annotations

import numpy as np

from ..tracks import Dataset, FlowField, FlowVolume, Query, Track, TrackStoreError
from .render import RenderOutput
from .scene import RigidScene

OCCLUSION_MARGIN = 0.01


class QueryOnVoidError(TrackStoreError):
    pass


def occlusion_test(
    projected_depth: float,
    depth_map: np.ndarray,
    x: float,
    y: float,
    margin: float = OCCLUSION_MARGIN,
) -> bool:
    """True when the reprojected point is occluded.

    The point is occluded when its depth exceeds the max depth of the 4
    nearest pixels by more than the margin (the max and the margin absorb
    self-matches), or when (x, y) lies outside the image."""
    depth_map = np.asarray(depth_map)
    h, w = depth_map.shape
    if not (0.0 <= x < w and 0.0 <= y < h):
        return True
    x0 = min(max(int(np.floor(x)), 0), w - 1)
    y0 = min(max(int(np.floor(y)), 0), h - 1)
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    nearest_max = max(
        depth_map[y0, x0], depth_map[y0, x1], depth_map[y1, x0], depth_map[y1, x1]
    )
    return bool(projected_depth > nearest_max * (1.0 + margin))


def back_project(scene: RigidScene, render: RenderOutput, t: int, x: int, y: int) -> np.ndarray:
    """Lift a rendered pixel into its object's local frame using the
    depth map and inverse poses (the independent route; the coordinate
    map gives the same answer)."""
    obj_id = int(render.ids[t, y, x])
    if obj_id < 0:
        raise QueryOnVoidError(f"no surface at pixel ({x}, {y}) in frame {t}")
    cam = scene.camera
    z = float(render.depth[t, y, x])
    ray = np.array([(x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0])
    cam_point = ray * z
    world = (cam_point - cam.translations[t]) @ cam.rotations[t]
    return scene.object_by_id(obj_id).world_to_local(t, world)[0]


def gt_track(
    scene: RigidScene,
    render: RenderOutput,
    query: Query,
    tag: str = "",
    use_coordinate_map: bool = True,
) -> Track:
    """Ground-truth track for a query pixel (integer coordinates)."""
    t0, qx, qy = query.t, int(round(query.x)), int(round(query.y))
    if not (0 <= qx < render.width and 0 <= qy < render.height):
        raise QueryOnVoidError(f"query ({qx}, {qy}) outside image")
    obj_id = int(render.ids[t0, qy, qx])
    if obj_id < 0:
        raise QueryOnVoidError(f"no surface at query pixel ({qx}, {qy}) in frame {t0}")
    if use_coordinate_map:
        local = render.local[t0, qy, qx]
    else:
        local = back_project(scene, render, t0, qx, qy)
    obj = scene.object_by_id(obj_id)

    T = scene.num_frames
    positions = np.empty((T, 2), dtype=np.float64)
    visible = np.zeros(T, dtype=bool)
    for f in range(T):
        world = obj.local_to_world(f, local)
        xy, z = scene.camera.project(f, world)
        positions[f] = xy[0]
        visible[f] = not occlusion_test(
            float(z[0]), render.depth[f], positions[f, 0], positions[f, 1]
        )
    return Track(
        points=positions,
        visible=visible,
        query=Query(t0, float(qx), float(qy)),
        tag=tag,
        source_resolution=(render.width, render.height),
    )


def gt_flow(scene: RigidScene, render: RenderOutput, t: int) -> FlowField:
    """Forward flow t -> t+1: per rendered pixel, the image-space motion
    of the frame-t visible surface point (disoccluded regions therefore
    carry the motion of whatever was visible at t); void pixels get 0."""
    if not 0 <= t < scene.num_frames - 1:
        raise ValueError(f"no flow after frame {t} in a {scene.num_frames}-frame scene")
    h, w = render.height, render.width
    uv = np.zeros((h, w, 2), dtype=np.float64)
    ids = render.ids[t]
    ys, xs = np.indices((h, w))
    for obj in scene.objects:
        mask = ids == obj.obj_id
        if not mask.any():
            continue
        local = render.local[t][mask]
        world_next = obj.local_to_world(t + 1, local)
        xy_next, _ = scene.camera.project(t + 1, world_next)
        uv[mask, 0] = xy_next[:, 0] - xs[mask]
        uv[mask, 1] = xy_next[:, 1] - ys[mask]
    return FlowField(uv.astype(np.float32))


def gt_flow_volume(scene: RigidScene, render: RenderOutput) -> FlowVolume:
    return FlowVolume.from_fields(
        [gt_flow(scene, render, t) for t in range(scene.num_frames - 1)]
    )


def sample_queries(
    render: RenderOutput,
    budget: int = 256,
    cap: float = 0.0016,
    seed: int = 0,
    object_ids: list[int] | None = None,
) -> list[Query]:
    """Per-object query allocation on the first frame.

    Objects are visited smallest first; each receives
    floor(min(P * cap, budget / K)) uniform pixels without replacement,
    where P is its frame-0 pixel count and K the number of objects left,
    with the budget shrinking as it is spent."""
    ids0 = render.ids[0]
    if object_ids is None:
        object_ids = sorted(int(i) for i in np.unique(ids0) if i >= 0)
    counts = {i: int(np.sum(ids0 == i)) for i in object_ids}
    order = sorted(object_ids, key=lambda i: (counts[i], i))

    rng = np.random.default_rng(seed)
    remaining = float(budget)
    k = len(order)
    queries: list[Query] = []
    for obj_id in order:
        pixels = counts[obj_id]
        n = int(np.floor(min(pixels * cap, remaining / k)))
        if n > 0:
            flat = np.flatnonzero((ids0 == obj_id).ravel())
            chosen = rng.choice(flat, size=n, replace=False)
            for c in sorted(int(v) for v in chosen):
                queries.append(Query(0, float(c % render.width), float(c // render.width)))
        remaining -= n
        k -= 1
    return queries


def gt_dataset(
    scene: RigidScene,
    render: RenderOutput,
    queries: list[Query],
    video_id: str,
    fps: float = 25.0,
) -> Dataset:
    tracks = [
        gt_track(scene, render, q, tag=f"track_{i:04d}") for i, q in enumerate(queries)
    ]
    return Dataset(
        video_id=video_id,
        width=render.width,
        height=render.height,
        fps=fps,
        tracks=tuple(tracks),
    )

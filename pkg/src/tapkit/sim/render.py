"""Software z-buffer rasterizer.

Renders each frame of a RigidScene into color, depth, object-id and
local-coordinate maps.  Triangles are rasterized at integer pixel
centers with inclusive edge tests; depth and local coordinates are
perspective-correct (1/z and attribute/z interpolate linearly in screen
space, exactly for planar triangles).  Colors come from seeded value
noise over local coordinates, so everything is deterministic given the
scene.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..tracks import DepthMap, _frozen_array
from .scene import RigidScene, SceneObject

_Z_NEAR = 1e-6
_AREA_EPS = 1e-12


class DegenerateTriangleWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RenderOutput:
    """Per-frame maps: color (T,H,W,3) uint8, depth (T,H,W) float64 with
    +inf where nothing renders, object ids (T,H,W) int32 with -1 for
    void, and local-frame coordinates (T,H,W,3) float64."""

    colors: np.ndarray
    depth: np.ndarray
    ids: np.ndarray
    local: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "colors", _frozen_array(self.colors, np.uint8))
        object.__setattr__(self, "depth", _frozen_array(self.depth, np.float64))
        object.__setattr__(self, "ids", _frozen_array(self.ids, np.int32))
        object.__setattr__(self, "local", _frozen_array(self.local, np.float64))

    @property
    def num_frames(self) -> int:
        return self.depth.shape[0]

    @property
    def height(self) -> int:
        return self.depth.shape[1]

    @property
    def width(self) -> int:
        return self.depth.shape[2]

    def depth_map(self, t: int) -> DepthMap:
        return DepthMap(self.depth[t].astype(np.float32))


def _raster_triangle(depth, ids, local, obj_id, screen, z, tri_local):
    h, w = depth.shape
    min_x = max(int(np.ceil(screen[:, 0].min())), 0)
    max_x = min(int(np.floor(screen[:, 0].max())), w - 1)
    min_y = max(int(np.ceil(screen[:, 1].min())), 0)
    max_y = min(int(np.floor(screen[:, 1].max())), h - 1)
    if min_x > max_x or min_y > max_y:
        return
    xs = np.arange(min_x, max_x + 1, dtype=np.float64)
    ys = np.arange(min_y, max_y + 1, dtype=np.float64)
    px, py = np.meshgrid(xs, ys)

    (x0, y0), (x1, y1), (x2, y2) = screen
    area2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
    e0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
    e1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
    e2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
    inside = (e0 >= 0) & (e1 >= 0) & (e2 >= 0)
    if not inside.any():
        return
    w0 = e0 / area2
    w1 = e1 / area2
    w2 = e2 / area2
    inv_z = w0 / z[0] + w1 / z[1] + w2 / z[2]
    pz = 1.0 / inv_z

    yy, xx = np.nonzero(inside)
    rows = yy + min_y
    cols = xx + min_x
    closer = pz[yy, xx] < depth[rows, cols]
    if not closer.any():
        return
    rows = rows[closer]
    cols = cols[closer]
    yy = yy[closer]
    xx = xx[closer]
    depth[rows, cols] = pz[yy, xx]
    ids[rows, cols] = obj_id
    attr = (
        w0[yy, xx, None] * tri_local[0][None, :] / z[0]
        + w1[yy, xx, None] * tri_local[1][None, :] / z[1]
        + w2[yy, xx, None] * tri_local[2][None, :] / z[2]
    ) * pz[yy, xx, None]
    local[rows, cols] = attr


def _hash01(ix, iy, iz, seed: int) -> np.ndarray:
    seed_mix = ((seed & 0xFFFFFFFF) * 0x27D4EB2F165667C5) & 0xFFFFFFFFFFFFFFFF
    h = (
        ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
        ^ iy.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
        ^ iz.astype(np.uint64) * np.uint64(0x165667B19E3779F9)
        ^ np.uint64(seed_mix)
    )
    h ^= h >> np.uint64(33)
    h *= np.uint64(0xFF51AFD7ED558CCD)
    h ^= h >> np.uint64(33)
    return (h & np.uint64(0xFFFFFF)).astype(np.float64) / float(0xFFFFFF)


def value_noise(points: np.ndarray, seed: int, freq: float = 2.0) -> np.ndarray:
    """Smooth seeded noise in [0, 1] per 3D point: trilinear blend of
    hashed lattice values."""
    p = np.asarray(points, dtype=np.float64) * freq
    i0 = np.floor(p).astype(np.int64)
    f = p - i0
    out = np.zeros(p.shape[0], dtype=np.float64)
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                corner = _hash01(i0[:, 0] + dx, i0[:, 1] + dy, i0[:, 2] + dz, seed)
                wx = f[:, 0] if dx else 1.0 - f[:, 0]
                wy = f[:, 1] if dy else 1.0 - f[:, 1]
                wz = f[:, 2] if dz else 1.0 - f[:, 2]
                out += corner * wx * wy * wz
    return out


def _texture(obj: SceneObject, pts: np.ndarray) -> np.ndarray:
    rgb = np.empty((pts.shape[0], 3), dtype=np.float64)
    for ch in range(3):
        rgb[:, ch] = value_noise(pts, obj.texture_seed * 3 + ch, freq=2.0 + ch)
    return np.clip(rgb * 220.0 + 35.0, 0, 255).astype(np.uint8)


def render(scene: RigidScene) -> RenderOutput:
    """Rasterize every frame of the scene; deterministic given the scene."""
    T, h, w = scene.num_frames, scene.height, scene.width
    depth = np.full((T, h, w), np.inf, dtype=np.float64)
    ids = np.full((T, h, w), -1, dtype=np.int32)
    local = np.zeros((T, h, w, 3), dtype=np.float64)
    colors = np.zeros((T, h, w, 3), dtype=np.uint8)

    for t in range(T):
        for obj in scene.objects:
            verts_world = obj.local_to_world(t, obj.mesh.vertices)
            screen, z = scene.camera.project(t, verts_world)
            for face in obj.mesh.faces:
                tz = z[face]
                if np.any(tz <= _Z_NEAR):
                    continue  # behind the camera; scenes keep objects in front
                tri = screen[face]
                (x0, y0), (x1, y1), (x2, y2) = tri
                area2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
                if abs(area2) < _AREA_EPS:
                    warnings.warn(
                        f"skipping degenerate triangle of object {obj.obj_id}",
                        DegenerateTriangleWarning,
                        stacklevel=2,
                    )
                    continue
                order = [0, 1, 2] if area2 > 0 else [0, 2, 1]
                _raster_triangle(
                    depth[t],
                    ids[t],
                    local[t],
                    obj.obj_id,
                    tri[order],
                    tz[order],
                    obj.mesh.vertices[face][order],
                )
        for obj in scene.objects:
            mask = ids[t] == obj.obj_id
            if mask.any():
                colors[t][mask] = _texture(obj, local[t][mask])
    return RenderOutput(colors=colors, depth=depth, ids=ids, local=local)

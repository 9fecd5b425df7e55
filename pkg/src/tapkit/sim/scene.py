"""Rigid scenes: triangulated objects with per-frame rigid poses observed
by a pinhole camera.  Scenes are deliberately simple (textured quads and
boxes with scripted motion) -- enough to exercise occlusion, parallax and
disocclusion without a physics engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..tracks import SchemaViolationError, _frozen_array

_RIGID_TOL = 1e-9


def _check_rigid(rotations: np.ndarray, what: str) -> None:
    for i, r in enumerate(rotations):
        if not np.allclose(r.T @ r, np.eye(3), atol=_RIGID_TOL):
            raise SchemaViolationError(f"{what}: rotation {i} is not orthonormal")
        if np.linalg.det(r) < 0:
            raise SchemaViolationError(f"{what}: rotation {i} has negative determinant")


@dataclass(frozen=True)
class Camera:
    """Pinhole intrinsics plus per-frame world-to-camera extrinsics.

    A world point X maps to camera frame as R[t] @ X + tr[t]; projection
    is x = fx*Xc/Zc + cx, y = fy*Yc/Zc + cy with depth Zc."""

    fx: float
    fy: float
    cx: float
    cy: float
    rotations: np.ndarray  # (T, 3, 3)
    translations: np.ndarray  # (T, 3)

    def __post_init__(self):
        rot = _frozen_array(self.rotations, np.float64)
        tr = _frozen_array(self.translations, np.float64)
        if rot.ndim != 3 or rot.shape[1:] != (3, 3) or tr.shape != (rot.shape[0], 3):
            raise SchemaViolationError("camera pose arrays have wrong shapes")
        _check_rigid(rot, "camera")
        object.__setattr__(self, "rotations", rot)
        object.__setattr__(self, "translations", tr)

    @property
    def num_frames(self) -> int:
        return self.rotations.shape[0]

    def world_to_camera(self, t: int, points: np.ndarray) -> np.ndarray:
        return points @ self.rotations[t].T + self.translations[t]

    def project(self, t: int, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Project world points; returns ((N, 2) pixel coords, (N,) depth)."""
        cam = self.world_to_camera(t, np.atleast_2d(points))
        z = cam[:, 2]
        x = self.fx * cam[:, 0] / z + self.cx
        y = self.fy * cam[:, 1] / z + self.cy
        return np.stack([x, y], axis=1), z


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray  # (N, 3) local coordinates
    faces: np.ndarray  # (M, 3) vertex indices

    def __post_init__(self):
        v = _frozen_array(self.vertices, np.float64)
        f = _frozen_array(self.faces, np.int64)
        if v.ndim != 2 or v.shape[1] != 3 or f.ndim != 2 or f.shape[1] != 3:
            raise SchemaViolationError("mesh arrays have wrong shapes")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)


@dataclass(frozen=True)
class SceneObject:
    obj_id: int
    mesh: TriMesh
    rotations: np.ndarray  # (T, 3, 3) local-to-world
    translations: np.ndarray  # (T, 3)
    texture_seed: int = 0

    def __post_init__(self):
        rot = _frozen_array(self.rotations, np.float64)
        tr = _frozen_array(self.translations, np.float64)
        if rot.ndim != 3 or rot.shape[1:] != (3, 3) or tr.shape != (rot.shape[0], 3):
            raise SchemaViolationError(f"object {self.obj_id}: bad pose arrays")
        _check_rigid(rot, f"object {self.obj_id}")
        object.__setattr__(self, "rotations", rot)
        object.__setattr__(self, "translations", tr)

    def local_to_world(self, t: int, points: np.ndarray) -> np.ndarray:
        return np.atleast_2d(points) @ self.rotations[t].T + self.translations[t]

    def world_to_local(self, t: int, points: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(points) - self.translations[t]) @ self.rotations[t]


@dataclass(frozen=True)
class RigidScene:
    camera: Camera
    objects: tuple[SceneObject, ...]
    num_frames: int
    width: int
    height: int
    seed: int = 0
    background_id: int | None = None

    def __post_init__(self):
        objects = tuple(self.objects)
        for obj in objects:
            if obj.rotations.shape[0] != self.num_frames:
                raise SchemaViolationError(
                    f"object {obj.obj_id} has {obj.rotations.shape[0]} poses, "
                    f"scene has {self.num_frames} frames"
                )
        if self.camera.num_frames != self.num_frames:
            raise SchemaViolationError("camera pose count != num_frames")
        if len({o.obj_id for o in objects}) != len(objects):
            raise SchemaViolationError("duplicate object ids")
        object.__setattr__(self, "objects", objects)

    def object_by_id(self, obj_id: int) -> SceneObject:
        for obj in self.objects:
            if obj.obj_id == obj_id:
                return obj
        raise KeyError(f"no object with id {obj_id}")


# ----------------------------------------------------------------------
# Building blocks
# ----------------------------------------------------------------------

def quad_mesh(size_x: float, size_y: float) -> TriMesh:
    hx, hy = size_x / 2.0, size_y / 2.0
    vertices = np.array(
        [[-hx, -hy, 0.0], [hx, -hy, 0.0], [hx, hy, 0.0], [-hx, hy, 0.0]]
    )
    faces = np.array([[0, 1, 2], [0, 2, 3]])
    return TriMesh(vertices, faces)


def box_mesh(size: float) -> TriMesh:
    h = size / 2.0
    corners = np.array(
        [[sx, sy, sz] for sx in (-h, h) for sy in (-h, h) for sz in (-h, h)]
    )
    quads = [
        (0, 1, 3, 2), (4, 6, 7, 5),  # x faces
        (0, 4, 5, 1), (2, 3, 7, 6),  # y faces
        (0, 2, 6, 4), (1, 5, 7, 3),  # z faces
    ]
    faces = []
    for a, b, c, d in quads:
        faces.append([a, b, c])
        faces.append([a, c, d])
    return TriMesh(corners, np.array(faces))


def identity_poses(num_frames: int) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.broadcast_to(np.eye(3), (num_frames, 3, 3)).copy(),
        np.zeros((num_frames, 3)),
    )


def linear_poses(
    num_frames: int, start: np.ndarray, velocity: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    rot = np.broadcast_to(np.eye(3), (num_frames, 3, 3)).copy()
    steps = np.arange(num_frames, dtype=np.float64)[:, None]
    tr = np.asarray(start, dtype=np.float64)[None, :] + steps * np.asarray(velocity)[None, :]
    return rot, tr


def rotation_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def static_camera(
    num_frames: int, width: int, height: int, fx: float = 128.0, fy: float = 128.0
) -> Camera:
    rot, tr = identity_poses(num_frames)
    return Camera(
        fx=fx, fy=fy, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        rotations=rot, translations=tr,
    )


# ----------------------------------------------------------------------
# Presets
# ----------------------------------------------------------------------

PRESETS = ("translate", "pan", "occlude", "jitter")


def build_scene(
    preset: str,
    seed: int = 0,
    num_frames: int = 24,
    width: int = 256,
    height: int = 256,
) -> RigidScene:
    """Scripted scene presets.

    translate: one big textured quad moving at exactly 2 px/frame in
      front of a static background; the flow field over the whole image
      is spatially constant.
    pan: static background plane, camera trucking sideways so the image
      flow is a constant (-2, 0) px/frame.
    occlude: a near quad sweeps across a farther quad, occluding and then
      disoccluding points on it.
    jitter: several drifting quads at distinct depths under seeded camera
      shake; the workhorse for annotation-recovery runs.
    """
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {PRESETS}")
    rng = np.random.default_rng(np.random.SeedSequence([PRESETS.index(preset), seed]))
    T = num_frames
    mk = {
        "translate": _scene_translate,
        "pan": _scene_pan,
        "occlude": _scene_occlude,
        "jitter": _scene_jitter,
    }[preset]
    return mk(rng, seed, T, width, height)


def _background(T: int, seed: int, depth: float = 40.0, size: float = 640.0) -> SceneObject:
    rot, tr = linear_poses(T, np.array([0.0, 0.0, depth]), np.zeros(3))
    return SceneObject(0, quad_mesh(size, size), rot, tr, texture_seed=seed * 101 + 7)


def _scene_translate(rng, seed, T, width, height) -> RigidScene:
    cam = static_camera(T, width, height)
    # Quad at depth 4 moving 1/16 world units/frame: image motion is
    # exactly fx * (1/16) / 4 = 2 px/frame.
    rot, tr = linear_poses(T, np.array([0.0, 0.0, 4.0]), np.array([1.0 / 16.0, 0.0, 0.0]))
    quad = SceneObject(1, quad_mesh(16.0, 16.0), rot, tr, texture_seed=seed * 31 + 1)
    return RigidScene(
        camera=cam, objects=(_background(T, seed), quad),
        num_frames=T, width=width, height=height, seed=seed, background_id=0,
    )


def _scene_pan(rng, seed, T, width, height) -> RigidScene:
    rot, tr = identity_poses(T)
    # Camera trucking +x by 1/8 world units/frame against a plane at
    # depth 8: image flow is exactly -fx/(8*8) = -2 px/frame.
    tr = tr.copy()
    tr[:, 0] = -np.arange(T, dtype=np.float64) / 8.0
    cam = Camera(
        fx=128.0, fy=128.0, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        rotations=rot, translations=tr,
    )
    plane_rot, plane_tr = linear_poses(T, np.array([0.0, 0.0, 8.0]), np.zeros(3))
    plane = SceneObject(0, quad_mesh(64.0, 64.0), plane_rot, plane_tr, texture_seed=seed * 13 + 5)
    return RigidScene(
        camera=cam, objects=(plane,), num_frames=T,
        width=width, height=height, seed=seed, background_id=0,
    )


def _scene_occlude(rng, seed, T, width, height) -> RigidScene:
    cam = static_camera(T, width, height)
    far_rot, far_tr = linear_poses(T, np.array([0.3, 0.1, 6.0]), np.array([0.004, 0.0, 0.0]))
    far = SceneObject(1, quad_mesh(4.0, 4.0), far_rot, far_tr, texture_seed=seed * 17 + 3)
    # Near quad sweeping right-to-left across the far one.
    near_rot, near_tr = linear_poses(
        T, np.array([2.2, -0.1, 4.0]), np.array([-4.0 / max(T - 1, 1), 0.0, 0.0])
    )
    near = SceneObject(2, quad_mesh(2.2, 2.6), near_rot, near_tr, texture_seed=seed * 29 + 11)
    return RigidScene(
        camera=cam, objects=(_background(T, seed), far, near),
        num_frames=T, width=width, height=height, seed=seed, background_id=0,
    )


def _scene_jitter(rng, seed, T, width, height) -> RigidScene:
    # Camera shake: small seeded translation jitter around the origin.
    rot, tr = identity_poses(T)
    tr = tr.copy()
    tr[:, :2] = rng.uniform(-0.03, 0.03, size=(T, 2))
    cam = Camera(
        fx=128.0, fy=128.0, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        rotations=rot, translations=tr,
    )
    objects = [_background(T, seed, depth=12.0, size=200.0)]
    steps = np.arange(T, dtype=np.float64)
    # Two drifting mid-depth quads near the view center.
    for i in range(2):
        depth = 6.0 + 1.2 * i + rng.uniform(0.0, 0.4)
        start = np.array([rng.uniform(-1.0, 0.2), rng.uniform(-0.7, 0.3), depth])
        vel = np.array([rng.uniform(0.01, 0.05), rng.uniform(-0.02, 0.02), 0.0])
        wobble = rng.uniform(0.05, 0.15)
        phase = rng.uniform(0.0, 2 * np.pi)
        r = np.broadcast_to(np.eye(3), (T, 3, 3)).copy()
        t_obj = (start[None, :] + steps[:, None] * vel[None, :]).copy()
        t_obj[:, 1] += wobble * np.sin(2 * np.pi * steps / T + phase)
        size = rng.uniform(1.8, 2.8)
        objects.append(
            SceneObject(
                i + 1, quad_mesh(size, size * rng.uniform(0.8, 1.2)), r, t_obj,
                texture_seed=seed * 41 + i,
            )
        )
    # A near quad sweeping across the view so the farther quads get
    # occluded and disoccluded.
    depth = 4.0 + rng.uniform(0.0, 0.3)
    span = rng.uniform(2.6, 3.4)
    start = np.array([-span / 2.0, rng.uniform(-0.3, 0.3), depth])
    vel = np.array([span / max(T - 1, 1), 0.0, 0.0])
    r, t_obj = linear_poses(T, start, vel)
    objects.append(
        SceneObject(
            3, quad_mesh(rng.uniform(1.2, 1.8), rng.uniform(1.4, 2.2)), r, t_obj,
            texture_seed=seed * 41 + 2,
        )
    )
    return RigidScene(
        camera=cam, objects=tuple(objects), num_frames=T,
        width=width, height=height, seed=seed, background_id=0,
    )

"""Synthetic rigid-scene generation: scripted scenes, a z-buffer
rasterizer, and exact ground-truth tracks, occlusion, flow and queries."""

from .render import DegenerateTriangleWarning, RenderOutput, render, value_noise
from .scene import (
    PRESETS,
    Camera,
    RigidScene,
    SceneObject,
    TriMesh,
    box_mesh,
    build_scene,
    identity_poses,
    linear_poses,
    quad_mesh,
    rotation_z,
    static_camera,
)
from .truth import (
    OCCLUSION_MARGIN,
    QueryOnVoidError,
    back_project,
    gt_dataset,
    gt_flow,
    gt_flow_volume,
    gt_track,
    occlusion_test,
    sample_queries,
)

__all__ = [
    "PRESETS",
    "OCCLUSION_MARGIN",
    "Camera",
    "DegenerateTriangleWarning",
    "QueryOnVoidError",
    "RenderOutput",
    "RigidScene",
    "SceneObject",
    "TriMesh",
    "back_project",
    "box_mesh",
    "build_scene",
    "gt_dataset",
    "gt_flow",
    "gt_flow_volume",
    "gt_track",
    "identity_poses",
    "linear_poses",
    "occlusion_test",
    "quad_mesh",
    "render",
    "rotation_z",
    "sample_queries",
    "static_camera",
    "value_noise",
]

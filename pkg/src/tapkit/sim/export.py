"""Write a rendered scene to the on-disk video layout the service and
CLI consume: frames (PPM), depth (TAPD), flow (.flo), ground-truth
tracks, metadata and a config echo."""

from __future__ import annotations

import json
from pathlib import Path

from ..tracks import write_depth, write_flo, write_ppm, write_tracks
from .render import RenderOutput
from .scene import RigidScene
from .truth import gt_dataset, gt_flow, sample_queries


def export_video(
    scene: RigidScene,
    render_out: RenderOutput,
    out_dir,
    video_id: str,
    fps: float = 25.0,
    query_budget: int = 256,
    config_echo: dict | None = None,
) -> Path:
    out = Path(out_dir) / video_id
    (out / "frames").mkdir(parents=True, exist_ok=True)
    (out / "depth").mkdir(exist_ok=True)
    (out / "flow").mkdir(exist_ok=True)

    T = scene.num_frames
    for t in range(T):
        write_ppm(render_out.colors[t], out / "frames" / f"{t:05d}.ppm")
        write_depth(render_out.depth_map(t), out / "depth" / f"{t:05d}.tapd")
        if t < T - 1:
            write_flo(gt_flow(scene, render_out, t), out / "flow" / f"{t:05d}.flo")

    queries = sample_queries(render_out, budget=query_budget, seed=scene.seed)
    dataset = gt_dataset(scene, render_out, queries, video_id, fps=fps)
    write_tracks(dataset, out / "gt_tracks.json")

    meta = {
        "video_id": video_id,
        "width": scene.width,
        "height": scene.height,
        "num_frames": T,
        "fps": fps,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    if config_echo is not None:
        (out / "scene.json").write_text(
            json.dumps(config_echo, indent=2) + "\n", encoding="utf-8"
        )
    return out

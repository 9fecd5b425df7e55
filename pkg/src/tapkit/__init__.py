"""tapkit: a point-tracking toolkit.

Flow-guided track assist, TAP evaluation metrics, synthetic rigid-scene
ground truth, flow-chaining baselines, trajectory statistics, the
cost-volume tracker's numerical core, and an annotation service."""

from .tracks import (
    Dataset,
    DepthMap,
    FlowField,
    FlowVolume,
    Query,
    Track,
    read_depth,
    read_flo,
    read_ppm,
    read_tracks,
    rescale_to_eval,
    write_depth,
    write_flo,
    write_ppm,
    write_tracks,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DepthMap",
    "FlowField",
    "FlowVolume",
    "Query",
    "Track",
    "read_depth",
    "read_flo",
    "read_ppm",
    "read_tracks",
    "rescale_to_eval",
    "write_depth",
    "write_flo",
    "write_ppm",
    "write_tracks",
]

"""Core data model for videos, tracks, flow and depth, plus file I/O.

Coordinate convention used everywhere in this package: (x, y) with x
rightward and y downward, origin at the top-left pixel center, so pixel
(column i, row j) has its center at integer coordinates (i, j).  Track
positions are stored at the resolution they were produced at
(``source_resolution``); metric computation rescales to 256x256 first.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

EVAL_WIDTH = 256
EVAL_HEIGHT = 256

FLO_MAGIC = 202021.25
DEPTH_MAGIC = b"TAPD"


class TrackStoreError(Exception):
    """Base class for data-model and file-format errors."""


class BadMagicError(TrackStoreError):
    pass


class TruncatedFileError(TrackStoreError):
    pass


class NonFiniteValueError(TrackStoreError):
    pass


class SchemaViolationError(TrackStoreError):
    pass


class LengthMismatchError(TrackStoreError):
    pass


class ZeroResolutionError(TrackStoreError):
    pass


def _frozen_array(values, dtype) -> np.ndarray:
    # Always copy so freezing never flips a caller's array to read-only.
    arr = np.array(values, dtype=dtype, copy=True, order="C")
    arr.setflags(write=False)
    return arr


# ----------------------------------------------------------------------
# Domain types
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Query:
    """Seed pixel (x, y) at frame t identifying the surface point to track."""

    t: int
    x: float
    y: float


@dataclass(frozen=True)
class Track:
    """Per-frame 2D positions and visibility flags for one tracked point.

    points: (T, 2) float64, columns (x, y).
    visible: (T,) bool.  Positions on occluded frames are carried but are
    semantically meaningless; consumers must not score them.
    """

    points: np.ndarray
    visible: np.ndarray
    query: Query
    tag: str = ""
    source_resolution: tuple[int, int] = (EVAL_WIDTH, EVAL_HEIGHT)

    def __post_init__(self):
        points = _frozen_array(self.points, np.float64)
        visible = _frozen_array(self.visible, bool)
        if points.ndim != 2 or points.shape[1] != 2:
            raise SchemaViolationError(f"points must be (T, 2), got {points.shape}")
        if visible.shape != (points.shape[0],):
            raise LengthMismatchError(
                f"visible length {visible.shape[0] if visible.ndim == 1 else visible.shape}"
                f" != points length {points.shape[0]}"
            )
        if not np.all(np.isfinite(points)):
            raise NonFiniteValueError("track positions must be finite")
        if not 0 <= self.query.t < points.shape[0]:
            raise SchemaViolationError(
                f"query frame {self.query.t} outside [0, {points.shape[0]})"
            )
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "visible", visible)

    @property
    def num_frames(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class FlowField:
    """Dense forward flow for one frame pair: (H, W, 2) with channels (u, v)."""

    uv: np.ndarray

    def __post_init__(self):
        uv = _frozen_array(self.uv, np.float32)
        if uv.ndim != 3 or uv.shape[2] != 2:
            raise SchemaViolationError(f"flow field must be (H, W, 2), got {uv.shape}")
        if not np.all(np.isfinite(uv)):
            raise NonFiniteValueError("flow contains non-finite values")
        object.__setattr__(self, "uv", uv)

    @property
    def height(self) -> int:
        return self.uv.shape[0]

    @property
    def width(self) -> int:
        return self.uv.shape[1]


@dataclass(frozen=True)
class FlowVolume:
    """Forward flow fields for a whole video: (T-1, H, W, 2).

    Field i maps frame i to frame i+1.  Backward flow, when needed, is a
    separate volume whose field i maps frame i+1 back to frame i.
    """

    uv: np.ndarray

    def __post_init__(self):
        uv = _frozen_array(self.uv, np.float32)
        if uv.ndim != 4 or uv.shape[3] != 2:
            raise SchemaViolationError(f"flow volume must be (T-1, H, W, 2), got {uv.shape}")
        if not np.all(np.isfinite(uv)):
            raise NonFiniteValueError("flow contains non-finite values")
        object.__setattr__(self, "uv", uv)

    @classmethod
    def from_fields(cls, fields: list[FlowField]) -> "FlowVolume":
        if not fields:
            raise SchemaViolationError("flow volume needs at least one field")
        return cls(np.stack([f.uv for f in fields]))

    @classmethod
    def from_dir(cls, path) -> "FlowVolume":
        files = sorted(Path(path).glob("*.flo"))
        if not files:
            raise TrackStoreError(f"no .flo files in {path}")
        return cls.from_fields([read_flo(f) for f in files])

    @property
    def num_frames(self) -> int:
        return self.uv.shape[0] + 1

    @property
    def height(self) -> int:
        return self.uv.shape[1]

    @property
    def width(self) -> int:
        return self.uv.shape[2]

    def field(self, t: int) -> FlowField:
        return FlowField(self.uv[t])


@dataclass(frozen=True)
class DepthMap:
    """Camera-frame depth per pixel; +inf marks unrendered background."""

    depth: np.ndarray

    def __post_init__(self):
        depth = _frozen_array(self.depth, np.float32)
        if depth.ndim != 2:
            raise SchemaViolationError(f"depth map must be (H, W), got {depth.shape}")
        if np.any(np.isnan(depth)):
            raise NonFiniteValueError("depth contains NaN")
        object.__setattr__(self, "depth", depth)

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]


@dataclass(frozen=True)
class Dataset:
    """A video's worth of tracks plus the video metadata."""

    video_id: str
    width: int
    height: int
    fps: float
    tracks: tuple[Track, ...] = ()

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ZeroResolutionError(f"bad resolution {self.width}x{self.height}")
        tracks = tuple(self.tracks)
        lengths = {t.num_frames for t in tracks}
        if len(lengths) > 1:
            raise LengthMismatchError(f"tracks disagree on length: {sorted(lengths)}")
        # Bounds are only meaningful on visible frames; occluded positions
        # are carried verbatim and may lie outside the image.
        for tr in tracks:
            vis_pts = tr.points[tr.visible]
            if vis_pts.size and (
                np.any(vis_pts[:, 0] < 0)
                or np.any(vis_pts[:, 0] >= self.width)
                or np.any(vis_pts[:, 1] < 0)
                or np.any(vis_pts[:, 1] >= self.height)
            ):
                raise SchemaViolationError(
                    f"track {tr.tag!r} has visible positions outside "
                    f"[0,{self.width})x[0,{self.height})"
                )
        object.__setattr__(self, "tracks", tracks)

    @property
    def num_frames(self) -> int:
        return self.tracks[0].num_frames if self.tracks else 0


# ----------------------------------------------------------------------
# Flow files (Middlebury interchange)
# ----------------------------------------------------------------------

def read_flo(path) -> FlowField:
    """Read a Middlebury .flo file.

    Layout: little-endian float32 magic 202021.25, int32 width, int32
    height, then height rows of width interleaved (u, v) float32 pairs.
    """
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise TruncatedFileError(f"{path}: header truncated ({len(data)} bytes)")
    magic = struct.unpack("<f", data[:4])[0]
    if magic != FLO_MAGIC:
        raise BadMagicError(f"{path}: magic {magic!r} != {FLO_MAGIC}")
    width, height = struct.unpack("<ii", data[4:12])
    if width <= 0 or height <= 0:
        raise SchemaViolationError(f"{path}: bad dimensions {width}x{height}")
    expected = 12 + 8 * width * height
    if len(data) < expected:
        raise TruncatedFileError(f"{path}: {len(data)} bytes, expected {expected}")
    uv = np.frombuffer(data, dtype="<f4", count=2 * width * height, offset=12)
    uv = uv.reshape(height, width, 2)
    if not np.all(np.isfinite(uv)):
        raise NonFiniteValueError(f"{path}: flow contains non-finite values")
    return FlowField(uv)


def write_flo(flow: FlowField, path) -> None:
    header = struct.pack("<f", FLO_MAGIC) + struct.pack(
        "<ii", flow.width, flow.height
    )
    body = np.ascontiguousarray(flow.uv, dtype="<f4").tobytes()
    Path(path).write_bytes(header + body)


# ----------------------------------------------------------------------
# Depth files
# ----------------------------------------------------------------------

def read_depth(path) -> DepthMap:
    """Read the binary depth format: b"TAPD", uint32 w, uint32 h, float32 rows."""
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise TruncatedFileError(f"{path}: header truncated")
    if data[:4] != DEPTH_MAGIC:
        raise BadMagicError(f"{path}: magic {data[:4]!r} != {DEPTH_MAGIC!r}")
    width, height = struct.unpack("<II", data[4:12])
    expected = 12 + 4 * width * height
    if len(data) < expected:
        raise TruncatedFileError(f"{path}: {len(data)} bytes, expected {expected}")
    depth = np.frombuffer(data, dtype="<f4", count=width * height, offset=12)
    return DepthMap(depth.reshape(height, width))


def write_depth(depth: DepthMap, path) -> None:
    header = DEPTH_MAGIC + struct.pack("<II", depth.width, depth.height)
    Path(path).write_bytes(header + np.ascontiguousarray(depth.depth, "<f4").tobytes())


# ----------------------------------------------------------------------
# Frames (binary PPM)
# ----------------------------------------------------------------------

def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data.startswith(b"P6"):
        raise BadMagicError(f"{path}: not a binary PPM")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":  # comment line
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise SchemaViolationError(f"{path}: maxval {maxval} unsupported")
    expected = pos + 3 * width * height
    if len(data) < expected:
        raise TruncatedFileError(f"{path}: pixel data truncated")
    img = np.frombuffer(data, dtype=np.uint8, count=3 * width * height, offset=pos)
    return img.reshape(height, width, 3)


def write_ppm(image: np.ndarray, path) -> None:
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 3 or image.shape[2] != 3:
        raise SchemaViolationError(f"image must be (H, W, 3), got {image.shape}")
    header = b"P6\n%d %d\n255\n" % (image.shape[1], image.shape[0])
    Path(path).write_bytes(header + image.tobytes())


# ----------------------------------------------------------------------
# Track files (structured text)
# ----------------------------------------------------------------------

def _track_to_obj(track: Track) -> dict:
    return {
        "tag": track.tag,
        "query": {"t": track.query.t, "x": track.query.x, "y": track.query.y},
        "points": [[float(x), float(y)] for x, y in track.points],
        "visible": [bool(v) for v in track.visible],
    }


def _track_from_obj(obj: dict, resolution: tuple[int, int]) -> Track:
    try:
        points = obj["points"]
        visible = obj["visible"]
        q = obj["query"]
        query = Query(int(q["t"]), float(q["x"]), float(q["y"]))
        tag = str(obj.get("tag", ""))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolationError(f"bad track record: {exc}") from exc
    if len(points) != len(visible):
        raise LengthMismatchError(
            f"track {tag!r}: {len(points)} points vs {len(visible)} visible flags"
        )
    return Track(
        points=np.asarray(points, dtype=np.float64).reshape(len(points), 2),
        visible=np.asarray(visible, dtype=bool),
        query=query,
        tag=tag,
        source_resolution=resolution,
    )


def write_tracks(dataset: Dataset, path) -> None:
    """Write a dataset as structured text (JSON).

    Floats are serialized with shortest-exact decimal repr, so
    read_tracks(write_tracks(d)) round-trips values exactly.
    """
    obj = {
        "video_id": dataset.video_id,
        "width": dataset.width,
        "height": dataset.height,
        "fps": dataset.fps,
        "tracks": [_track_to_obj(t) for t in dataset.tracks],
    }
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def read_tracks(path) -> Dataset:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaViolationError(f"{path}: {exc}") from exc
    try:
        video_id = str(obj["video_id"])
        width = int(obj["width"])
        height = int(obj["height"])
        fps = float(obj["fps"])
        raw_tracks = obj["tracks"]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolationError(f"{path}: missing or bad field: {exc}") from exc
    tracks = tuple(_track_from_obj(t, (width, height)) for t in raw_tracks)
    return Dataset(video_id=video_id, width=width, height=height, fps=fps, tracks=tracks)


# ----------------------------------------------------------------------
# Rescaling
# ----------------------------------------------------------------------

def rescale_track(track: Track, width: int, height: int) -> Track:
    """Rescale positions to a new resolution; visibility is unchanged."""
    src_w, src_h = track.source_resolution
    if src_w <= 0 or src_h <= 0 or width <= 0 or height <= 0:
        raise ZeroResolutionError(
            f"cannot rescale {src_w}x{src_h} -> {width}x{height}"
        )
    sx = width / src_w
    sy = height / src_h
    points = track.points * np.array([sx, sy])
    return replace(
        track,
        points=points,
        query=Query(track.query.t, track.query.x * sx, track.query.y * sy),
        source_resolution=(width, height),
    )


def rescale_to_eval(track: Track, width: int = EVAL_WIDTH, height: int = EVAL_HEIGHT) -> Track:
    """Rescale a track into the 256x256 space all metrics are computed in."""
    return rescale_track(track, width, height)

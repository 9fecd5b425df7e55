"""On-disk video store and annotation sessions.

A data directory holds one subdirectory per video (the layout simgen
writes): meta.json, frames/*.ppm, flow/*.flo, and optionally
annotations.json.  Annotations persist as plain files so sessions
survive restarts; concurrent saves are serialized per video and checked
against a revision counter (optimistic concurrency)."""

from __future__ import annotations

import io
import json
import threading
from collections import OrderedDict
from pathlib import Path

from PIL import Image

from ..tracks import FlowVolume
from .models import VideoInfo

ANNOTATIONS_FILE = "annotations.json"
_PNG_CACHE_SIZE = 256


class UnknownVideoError(KeyError):
    pass


class RevisionConflictError(Exception):
    def __init__(self, current: int):
        super().__init__(f"stale revision; current is {current}")
        self.current = current


class _Session:
    def __init__(self, path: Path):
        self.path = path
        self.lock = threading.Lock()
        if path.exists():
            obj = json.loads(path.read_text(encoding="utf-8"))
            self.revision = int(obj.get("revision", 0))
            self.tracks = obj.get("tracks", [])
        else:
            self.revision = 0
            self.tracks = []

    def persist(self) -> None:
        payload = {"revision": self.revision, "tracks": self.tracks}
        self.path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


class VideoStore:
    """Read-only video data plus mutable annotation sessions."""

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        if not self.data_dir.is_dir():
            raise FileNotFoundError(f"data directory {self.data_dir} does not exist")
        self._infos: dict[str, VideoInfo] = {}
        for meta_path in sorted(self.data_dir.glob("*/meta.json")):
            obj = json.loads(meta_path.read_text(encoding="utf-8"))
            info = VideoInfo(
                id=str(obj["video_id"]),
                width=int(obj["width"]),
                height=int(obj["height"]),
                num_frames=int(obj["num_frames"]),
                fps=float(obj["fps"]),
            )
            self._infos[info.id] = info
        if not self._infos:
            raise FileNotFoundError(f"no videos (meta.json) under {self.data_dir}")
        self._flows: dict[str, FlowVolume] = {}
        self._flow_lock = threading.Lock()
        self._png_cache: OrderedDict[tuple[str, int], bytes] = OrderedDict()
        self._png_lock = threading.Lock()
        self._sessions: dict[str, _Session] = {}
        self._session_lock = threading.Lock()

    def list_videos(self) -> list[VideoInfo]:
        return [self._infos[k] for k in sorted(self._infos)]

    def info(self, video_id: str) -> VideoInfo:
        try:
            return self._infos[video_id]
        except KeyError:
            raise UnknownVideoError(video_id) from None

    def video_dir(self, video_id: str) -> Path:
        self.info(video_id)
        return self.data_dir / video_id

    def flow(self, video_id: str) -> FlowVolume:
        # Loaded once, shared read-only across requests.
        with self._flow_lock:
            if video_id not in self._flows:
                self._flows[video_id] = FlowVolume.from_dir(
                    self.video_dir(video_id) / "flow"
                )
            return self._flows[video_id]

    def frame_png(self, video_id: str, t: int) -> bytes:
        info = self.info(video_id)
        if not 0 <= t < info.num_frames:
            raise UnknownVideoError(f"{video_id}: frame {t} out of range")
        key = (video_id, t)
        with self._png_lock:
            if key in self._png_cache:
                self._png_cache.move_to_end(key)
                return self._png_cache[key]
        path = self.video_dir(video_id) / "frames" / f"{t:05d}.ppm"
        with Image.open(path) as im:
            buf = io.BytesIO()
            im.save(buf, format="PNG")
        data = buf.getvalue()
        with self._png_lock:
            self._png_cache[key] = data
            while len(self._png_cache) > _PNG_CACHE_SIZE:
                self._png_cache.popitem(last=False)
        return data

    def _session(self, video_id: str) -> _Session:
        self.info(video_id)
        with self._session_lock:
            if video_id not in self._sessions:
                self._sessions[video_id] = _Session(
                    self.video_dir(video_id) / ANNOTATIONS_FILE
                )
            return self._sessions[video_id]

    def get_tracks(self, video_id: str) -> tuple[int, list]:
        session = self._session(video_id)
        with session.lock:
            return session.revision, session.tracks

    def put_tracks(self, video_id: str, revision: int, tracks: list) -> int:
        session = self._session(video_id)
        with session.lock:
            if revision != session.revision:
                raise RevisionConflictError(session.revision)
            session.tracks = tracks
            session.revision += 1
            session.persist()
            return session.revision

"""Request/response models for the annotation service API."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, model_validator


class VideoInfo(BaseModel):
    id: str
    width: int
    height: int
    num_frames: int
    fps: float


class ControlPointModel(BaseModel):
    t: int
    x: float
    y: float


class SegmentModel(BaseModel):
    points: list[ControlPointModel]
    modes: list[Literal["flow", "linear"]] | None = None

    @model_validator(mode="after")
    def _check_modes(self):
        if self.modes is not None and len(self.modes) != len(self.points) - 1:
            raise ValueError(
                f"{len(self.modes)} gap modes for {len(self.points)} points"
            )
        return self


class SolveRequest(BaseModel):
    controls: list[SegmentModel]
    mode: Literal["flow", "linear"] = "flow"


class SolveResponse(BaseModel):
    points: list[list[float]]
    visible: list[bool]
    provenance: list[str]
    cost: float


class QueryModel(BaseModel):
    t: int
    x: float
    y: float


class AnnotationTrack(BaseModel):
    tag: str
    query: QueryModel
    points: list[list[float]]
    visible: list[bool]
    segments: list[SegmentModel] = []

    @model_validator(mode="after")
    def _check_lengths(self):
        if len(self.points) != len(self.visible):
            raise ValueError(
                f"track {self.tag!r}: {len(self.points)} points "
                f"vs {len(self.visible)} visibility flags"
            )
        return self


class TracksPayload(BaseModel):
    revision: int
    tracks: list[AnnotationTrack]


class SaveResponse(BaseModel):
    revision: int


class ConflictResponse(BaseModel):
    detail: str
    current_revision: int

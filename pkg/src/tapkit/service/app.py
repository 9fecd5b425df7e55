"""The annotation HTTP service.

Serves video metadata and PNG frames, solves tracks on demand from
control points (a pure function of the stored flow and the request
body), and persists annotation sets with optimistic concurrency."""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles

from ..assist import (
    ControlPoint,
    ControlPointError,
    ControlPointSet,
    ControlSegment,
    solve_track_full,
)
from .models import (
    SaveResponse,
    SegmentModel,
    SolveRequest,
    SolveResponse,
    TracksPayload,
    VideoInfo,
)
from .store import RevisionConflictError, UnknownVideoError, VideoStore


def _controls_from_models(segments: list[SegmentModel]) -> ControlPointSet:
    return ControlPointSet(
        tuple(
            ControlSegment(
                tuple(ControlPoint(p.t, p.x, p.y) for p in seg.points),
                tuple(seg.modes) if seg.modes is not None else None,
            )
            for seg in segments
        )
    )


def create_app(data_dir, ui_dir=None) -> FastAPI:
    store = VideoStore(data_dir)
    app = FastAPI(title="tapkit annotation service")
    app.state.store = store

    @app.get("/api/videos", response_model=list[VideoInfo])
    def list_videos():
        return store.list_videos()

    @app.get("/api/videos/{video_id}/frames/{t}")
    def get_frame(video_id: str, t: int):
        try:
            data = store.frame_png(video_id, t)
        except (UnknownVideoError, FileNotFoundError) as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return Response(content=data, media_type="image/png")

    @app.post("/api/videos/{video_id}/solve", response_model=SolveResponse)
    def solve(video_id: str, request: SolveRequest):
        try:
            flow = store.flow(video_id)
        except UnknownVideoError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        try:
            controls = _controls_from_models(request.controls)
            result = solve_track_full(flow, controls, default_mode=request.mode)
        except (ControlPointError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        track = result.track
        return SolveResponse(
            points=[[float(x), float(y)] for x, y in track.points],
            visible=[bool(v) for v in track.visible],
            provenance=list(result.provenance),
            cost=result.cost,
        )

    @app.get("/api/videos/{video_id}/tracks", response_model=TracksPayload)
    def get_tracks(video_id: str):
        try:
            revision, tracks = store.get_tracks(video_id)
        except UnknownVideoError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return TracksPayload(revision=revision, tracks=tracks)

    @app.put("/api/videos/{video_id}/tracks", response_model=SaveResponse)
    def put_tracks(video_id: str, payload: TracksPayload):
        try:
            revision = store.put_tracks(
                video_id,
                payload.revision,
                [t.model_dump() for t in payload.tracks],
            )
        except UnknownVideoError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except RevisionConflictError as exc:
            raise HTTPException(
                status_code=409,
                detail={"detail": str(exc), "current_revision": exc.current},
            ) from exc
        return SaveResponse(revision=revision)

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(data_dir, port: int = 8000, host: str = "127.0.0.1", ui_dir=None) -> None:
    """Run the annotation service; fails fast when the data dir is
    missing or holds no videos."""
    import uvicorn

    app = create_app(data_dir, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")

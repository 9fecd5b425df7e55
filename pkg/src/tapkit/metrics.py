"""Point-tracking evaluation metrics.

All position comparisons happen in 256x256 space (tracks are rescaled
first) with Euclidean distance and a strict ``error < threshold`` test.
The five standard thresholds are 1, 2, 4, 8 and 16 pixels.

Per-query metrics:

* Occlusion Accuracy (OA): per-frame visibility classification accuracy.
* <d at threshold: over frames where ground truth is visible, the
  fraction with position error under the threshold; <d_avg averages the
  five thresholds.
* Jaccard at threshold: TP / (TP + FP + FN) where TP are frames visible
  in both with error under the threshold, FP are predicted-visible frames
  that are occluded in ground truth or too far, FN are ground-truth
  visible frames that are predicted occluded or too far.  A visible-visible
  frame that is too far counts once in FP and once in FN.  Average Jaccard
  (AJ) averages the five thresholds.

Aggregation averages per-query values within a video, then averages
videos uniformly.  Queries are sampled either strided (every 5th frame
where the point is visible, all frames evaluated) or first (earliest
visible frame; frames before the query are excluded from all metrics).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from .tracks import (
    Dataset,
    LengthMismatchError,
    Track,
    TrackStoreError,
    rescale_to_eval,
)

THRESHOLDS: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0, 16.0)
QUERY_STRIDE = 5

QueryMode = Literal["strided", "first"]


class MissingPredictionError(TrackStoreError):
    pass


class EmptyEvaluationSetError(TrackStoreError):
    pass


@dataclass(frozen=True)
class Tally:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "Tally") -> "Tally":
        return Tally(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def jaccard(self) -> float:
        total = self.tp + self.fp + self.fn
        # All-zero tallies mean a correctly predicted all-occluded span:
        # vacuously perfect.
        return self.tp / total if total else 1.0


@dataclass(frozen=True)
class QuerySpec:
    track_index: int
    frame: int
    mode: QueryMode


@dataclass(frozen=True)
class MetricsReport:
    oa: float
    delta_x: dict[float, float]
    delta_x_avg: float
    jaccard: dict[float, float]
    average_jaccard: float
    counts: dict[float, Tally]
    num_queries: int
    num_videos: int

    def to_obj(self) -> dict:
        return {
            "occlusion_accuracy": self.oa,
            "position_accuracy": {str(d): self.delta_x[d] for d in THRESHOLDS},
            "position_accuracy_avg": self.delta_x_avg,
            "jaccard": {str(d): self.jaccard[d] for d in THRESHOLDS},
            "average_jaccard": self.average_jaccard,
            "counts": {
                str(d): {"tp": c.tp, "fp": c.fp, "fn": c.fn}
                for d, c in self.counts.items()
            },
            "num_queries": self.num_queries,
            "num_videos": self.num_videos,
        }


# ----------------------------------------------------------------------
# Per-query primitives
# ----------------------------------------------------------------------

def evaluation_mask(num_frames: int, mode: QueryMode, query_t: int) -> np.ndarray:
    """Frames scored for a query: all frames in strided mode, frames at or
    after the query in first mode.  The query frame is always included."""
    mask = np.ones(num_frames, dtype=bool)
    if mode == "first":
        mask[:query_t] = False
    return mask


def occlusion_accuracy(pred_visible, gt_visible, frames=None) -> float:
    pred_visible = np.asarray(pred_visible, dtype=bool)
    gt_visible = np.asarray(gt_visible, dtype=bool)
    if pred_visible.shape != gt_visible.shape:
        raise LengthMismatchError(
            f"visibility lengths differ: {pred_visible.shape} vs {gt_visible.shape}"
        )
    if frames is None:
        frames = np.ones(gt_visible.shape, dtype=bool)
    frames = np.asarray(frames, dtype=bool)
    n = int(frames.sum())
    if n == 0:
        raise EmptyEvaluationSetError("no frames to evaluate")
    return float(np.sum(pred_visible[frames] == gt_visible[frames])) / n


def _errors(pred_points, gt_points) -> np.ndarray:
    pred_points = np.asarray(pred_points, dtype=np.float64)
    gt_points = np.asarray(gt_points, dtype=np.float64)
    if pred_points.shape != gt_points.shape:
        raise LengthMismatchError(
            f"point lengths differ: {pred_points.shape} vs {gt_points.shape}"
        )
    return np.linalg.norm(pred_points - gt_points, axis=-1)


def _within(err: np.ndarray, threshold: float, strict: bool) -> np.ndarray:
    return err < threshold if strict else err <= threshold


def position_accuracy(
    pred_points, gt_points, gt_visible, threshold: float, frames=None, strict: bool = True
) -> float | None:
    """Fraction of gt-visible evaluated frames with error under threshold.

    Returns None when no gt-visible frames are evaluated; such queries are
    excluded from aggregation.
    """
    gt_visible = np.asarray(gt_visible, dtype=bool)
    if frames is None:
        frames = np.ones(gt_visible.shape, dtype=bool)
    sel = np.asarray(frames, dtype=bool) & gt_visible
    n = int(sel.sum())
    if n == 0:
        return None
    err = _errors(pred_points, gt_points)
    return float(np.sum(_within(err[sel], threshold, strict))) / n


def jaccard_at(
    pred_points,
    pred_visible,
    gt_points,
    gt_visible,
    threshold: float,
    frames=None,
    strict: bool = True,
) -> tuple[float, Tally]:
    pred_visible = np.asarray(pred_visible, dtype=bool)
    gt_visible = np.asarray(gt_visible, dtype=bool)
    if pred_visible.shape != gt_visible.shape:
        raise LengthMismatchError(
            f"visibility lengths differ: {pred_visible.shape} vs {gt_visible.shape}"
        )
    if frames is None:
        frames = np.ones(gt_visible.shape, dtype=bool)
    frames = np.asarray(frames, dtype=bool)
    err = _errors(pred_points, gt_points)
    close = _within(err, threshold, strict)
    both = frames & pred_visible & gt_visible
    tp = int(np.sum(both & close))
    # Predicted visible but gt occluded, or visible-visible too far.
    fp = int(np.sum(frames & pred_visible & ~gt_visible)) + int(np.sum(both & ~close))
    # Gt visible but predicted occluded, or visible-visible too far.
    fn = int(np.sum(frames & gt_visible & ~pred_visible)) + int(np.sum(both & ~close))
    tally = Tally(tp, fp, fn)
    return tally.jaccard(), tally


# ----------------------------------------------------------------------
# Query extraction
# ----------------------------------------------------------------------

def extract_queries(dataset: Dataset, mode: QueryMode) -> list[QuerySpec]:
    """Strided: one query per (track, frame) at frames 0, 5, 10, ... where
    the point is visible.  First: one query at the earliest visible frame.
    Tracks that are never visible yield no queries."""
    if mode not in ("strided", "first"):
        raise ValueError(f"unknown query mode {mode!r}")
    queries: list[QuerySpec] = []
    for i, track in enumerate(dataset.tracks):
        visible = track.visible
        if mode == "strided":
            for t in range(0, track.num_frames, QUERY_STRIDE):
                if visible[t]:
                    queries.append(QuerySpec(i, t, mode))
        else:
            idx = np.flatnonzero(visible)
            if idx.size:
                queries.append(QuerySpec(i, int(idx[0]), mode))
    return queries


# ----------------------------------------------------------------------
# Dataset-level evaluation
# ----------------------------------------------------------------------

def _prediction_for(
    by_tag: dict[str, list[Track]], gt_track: Track, query_t: int
) -> Track:
    candidates = by_tag.get(gt_track.tag)
    if not candidates:
        raise MissingPredictionError(f"no prediction for track {gt_track.tag!r}")
    if len(candidates) == 1:
        return candidates[0]
    for cand in candidates:
        if cand.query.t == query_t:
            return cand
    raise MissingPredictionError(
        f"no prediction for track {gt_track.tag!r} at query frame {query_t}"
    )


@dataclass
class _VideoScores:
    oa: list[float]
    dx: dict[float, list[float]]
    jac: dict[float, list[float]]
    counts: dict[float, Tally]
    num_queries: int


def _score_video(
    gt: Dataset, pred: Dataset, mode: QueryMode, strict: bool
) -> _VideoScores:
    if gt.num_frames != pred.num_frames:
        raise LengthMismatchError(
            f"gt has {gt.num_frames} frames, prediction has {pred.num_frames}"
        )
    gt_eval = [rescale_to_eval(t) for t in gt.tracks]
    pred_eval = [rescale_to_eval(t) for t in pred.tracks]
    by_tag: dict[str, list[Track]] = {}
    for t in pred_eval:
        by_tag.setdefault(t.tag, []).append(t)

    scores = _VideoScores(
        oa=[],
        dx={d: [] for d in THRESHOLDS},
        jac={d: [] for d in THRESHOLDS},
        counts={d: Tally() for d in THRESHOLDS},
        num_queries=0,
    )
    for q in extract_queries(gt, mode):
        g = gt_eval[q.track_index]
        p = _prediction_for(by_tag, g, q.frame)
        frames = evaluation_mask(g.num_frames, mode, q.frame)
        scores.num_queries += 1
        scores.oa.append(occlusion_accuracy(p.visible, g.visible, frames))
        for d in THRESHOLDS:
            acc = position_accuracy(p.points, g.points, g.visible, d, frames, strict)
            if acc is not None:
                scores.dx[d].append(acc)
            jac, tally = jaccard_at(
                p.points, p.visible, g.points, g.visible, d, frames, strict
            )
            scores.jac[d].append(jac)
            scores.counts[d] = scores.counts[d] + tally
    return scores


def _mean(values: Sequence[float]) -> float:
    return float(sum(values) / len(values)) if values else float("nan")


def _report_from_scores(videos: list[_VideoScores]) -> MetricsReport:
    videos = [v for v in videos if v.num_queries > 0]
    if not videos:
        raise EmptyEvaluationSetError("no queries in any video")
    oa = _mean([_mean(v.oa) for v in videos])
    delta_x = {}
    jaccard = {}
    counts = {d: Tally() for d in THRESHOLDS}
    for d in THRESHOLDS:
        dx_videos = [_mean(v.dx[d]) for v in videos if v.dx[d]]
        delta_x[d] = _mean(dx_videos)
        jaccard[d] = _mean([_mean(v.jac[d]) for v in videos])
        for v in videos:
            counts[d] = counts[d] + v.counts[d]
    return MetricsReport(
        oa=oa,
        delta_x=delta_x,
        delta_x_avg=_mean([delta_x[d] for d in THRESHOLDS]),
        jaccard=jaccard,
        average_jaccard=_mean([jaccard[d] for d in THRESHOLDS]),
        counts=counts,
        num_queries=sum(v.num_queries for v in videos),
        num_videos=len(videos),
    )


def evaluate(
    gt: Dataset, pred: Dataset, mode: QueryMode = "strided", strict: bool = True
) -> MetricsReport:
    """Evaluate one video's predictions against its ground truth."""
    return _report_from_scores([_score_video(gt, pred, mode, strict)])


def evaluate_videos(
    pairs: Iterable[tuple[Dataset, Dataset]],
    mode: QueryMode = "strided",
    strict: bool = True,
) -> MetricsReport:
    """Evaluate several videos; per-query means per video, videos averaged
    uniformly."""
    return _report_from_scores([_score_video(g, p, mode, strict) for g, p in pairs])

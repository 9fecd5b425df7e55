/**
 * Pure annotation state: tracks, their control segments, and the last
 * solve response. Every rule about which control kinds are legal where
 * lives here so the DOM layer stays thin and the logic stays testable.
 *
 * Invariants:
 *  - a track is "dirty" exactly when its controls changed after the
 *    last applied solve response;
 *  - solved paths are stored verbatim from the server and never edited.
 */

import type {
  ControlPoint,
  GapMode,
  SegmentPayload,
  SolveResponse,
} from "./types.js";

export type ControlKind = "ENTER" | "MOVE" | "EXIT";

export interface Segment {
  points: ControlPoint[];
  closed: boolean;
}

export interface TrackState {
  id: number;
  tag: string;
  segments: Segment[];
  mode: GapMode;
  solved: SolveResponse | null;
  dirty: boolean;
  /** Monotonic stamp of the controls; a solve response only applies if
   *  it was requested at the current stamp. */
  editSeq: number;
  lastSolvedSeq: number;
}

export type AddResult = { ok: true } | { ok: false; error: string };

let nextTrackId = 1;

export function resetTrackIds(): void {
  nextTrackId = 1;
}

export function newTrack(tag: string): TrackState {
  return {
    id: nextTrackId++,
    tag,
    segments: [],
    mode: "flow",
    solved: null,
    dirty: false,
    editSeq: 0,
    lastSolvedSeq: -1,
  };
}

function openSegment(track: TrackState): Segment | null {
  const last = track.segments[track.segments.length - 1];
  return last && !last.closed ? last : null;
}

function segmentSpanning(track: TrackState, t: number): Segment | null {
  for (const seg of track.segments) {
    const first = seg.points[0];
    const last = seg.points[seg.points.length - 1];
    if (first && last && first.t < t && t < last.t) return seg;
  }
  return null;
}

function frameTaken(track: TrackState, t: number): boolean {
  return track.segments.some((seg) => seg.points.some((p) => p.t === t));
}

function touch(track: TrackState): void {
  track.dirty = true;
  track.editSeq += 1;
}

/**
 * Apply one annotator click. ENTER opens a new segment (only when no
 * segment is open and the frame is past every existing segment's span).
 * MOVE extends the open segment forward, or splits: dropped inside an
 * already-solved span it becomes a new interpolation endpoint there.
 * EXIT closes the open segment.
 */
export function addControl(
  track: TrackState,
  kind: ControlKind,
  t: number,
  x: number,
  y: number,
): AddResult {
  const open = openSegment(track);
  if (kind === "ENTER") {
    if (open) return { ok: false, error: "a segment is already open; EXIT it first" };
    for (const seg of track.segments) {
      const last = seg.points[seg.points.length - 1];
      if (last && t <= last.t)
        return { ok: false, error: `ENTER must come after frame ${last.t}` };
    }
    track.segments.push({ points: [{ t, x, y }], closed: false });
    touch(track);
    return { ok: true };
  }

  if (kind === "MOVE") {
    const spanning = segmentSpanning(track, t);
    if (spanning) {
      if (frameTaken(track, t))
        return { ok: false, error: `frame ${t} already has a control` };
      const at = spanning.points.findIndex((p) => p.t > t);
      spanning.points.splice(at, 0, { t, x, y });
      touch(track);
      return { ok: true };
    }
    if (!open) return { ok: false, error: "MOVE needs an open segment (ENTER first)" };
    const last = open.points[open.points.length - 1];
    if (t <= last.t)
      return { ok: false, error: `MOVE must advance past frame ${last.t}` };
    open.points.push({ t, x, y });
    touch(track);
    return { ok: true };
  }

  // EXIT
  if (!open) return { ok: false, error: "EXIT needs an open segment" };
  const last = open.points[open.points.length - 1];
  if (t < last.t)
    return { ok: false, error: `EXIT cannot precede frame ${last.t}` };
  if (t > last.t) open.points.push({ t, x, y });
  open.closed = true;
  touch(track);
  return { ok: true };
}

export function setMode(track: TrackState, mode: GapMode): void {
  if (track.mode !== mode) {
    track.mode = mode;
    touch(track);
  }
}

/** Segments as the solve/save payload expects them. */
export function segmentsPayload(track: TrackState): SegmentPayload[] {
  return track.segments.map((seg) => ({
    points: seg.points.map((p) => ({ t: p.t, x: p.x, y: p.y })),
  }));
}

export function canSolve(track: TrackState): boolean {
  return track.segments.some((seg) => seg.points.length > 0);
}

/** Store a solve response verbatim; stale responses are dropped. */
export function applySolve(
  track: TrackState,
  requestedSeq: number,
  solved: SolveResponse,
): boolean {
  if (requestedSeq !== track.editSeq) return false;
  track.solved = solved;
  track.lastSolvedSeq = requestedSeq;
  track.dirty = false;
  return true;
}

/** Rebuild UI state from a saved annotation payload. */
export function trackFromSaved(
  tag: string,
  segments: SegmentPayload[],
): TrackState {
  const track = newTrack(tag);
  track.segments = segments.map((seg) => ({
    points: seg.points.map((p) => ({ t: p.t, x: p.x, y: p.y })),
    closed: true,
  }));
  track.dirty = track.segments.length > 0;
  track.editSeq = 1;
  return track;
}

export function firstControl(track: TrackState): ControlPoint | null {
  return track.segments[0]?.points[0] ?? null;
}

/**
 * Canvas drawing for tracks. Paths come straight from solve responses;
 * nothing is smoothed or resampled client-side. Visible spans are
 * colored by provenance (control / flow-solved / linear), occluded
 * spans draw as black solid segments, and the current-frame marker is a
 * cross matching the cursor.
 */

import type { SolveResponse } from "./types.js";
import type { TrackState } from "./state.js";

export const PROVENANCE_COLORS: Record<string, string> = {
  control: "#ffd23f",
  "flow-solved": "#3fe05f",
  linear: "#ff9f1c",
  occluded: "#000000",
};

export const TRACK_HUES = [200, 340, 45, 130, 270, 20, 90, 310];

export function trackColor(trackId: number): string {
  return `hsl(${TRACK_HUES[trackId % TRACK_HUES.length]}, 85%, 60%)`;
}

export interface ViewTransform {
  /** Device pixels per image pixel (already includes devicePixelRatio). */
  scale: number;
}

function segColor(solved: SolveResponse, i: number): string {
  const a = solved.visible[i];
  const b = solved.visible[i + 1];
  if (!a || !b) return PROVENANCE_COLORS.occluded;
  const prov = solved.provenance[i + 1] ?? "flow-solved";
  return PROVENANCE_COLORS[prov] ?? PROVENANCE_COLORS["flow-solved"];
}

export function drawTrackPath(
  ctx: CanvasRenderingContext2D,
  solved: SolveResponse,
  view: ViewTransform,
): void {
  const s = view.scale;
  for (let i = 0; i + 1 < solved.points.length; i++) {
    ctx.beginPath();
    ctx.strokeStyle = segColor(solved, i);
    ctx.lineWidth = Math.max(1, s);
    ctx.moveTo(solved.points[i][0] * s, solved.points[i][1] * s);
    ctx.lineTo(solved.points[i + 1][0] * s, solved.points[i + 1][1] * s);
    ctx.stroke();
  }
}

export function drawFrameMarker(
  ctx: CanvasRenderingContext2D,
  track: TrackState,
  frame: number,
  view: ViewTransform,
): void {
  const solved = track.solved;
  if (!solved || !solved.visible[frame]) return; // occluded: marker absent
  const s = view.scale;
  const [x, y] = solved.points[frame];
  const r = 6 * s;
  ctx.beginPath();
  ctx.strokeStyle = trackColor(track.id);
  ctx.lineWidth = Math.max(1, 1.5 * s);
  ctx.moveTo(x * s - r, y * s);
  ctx.lineTo(x * s + r, y * s);
  ctx.moveTo(x * s, y * s - r);
  ctx.lineTo(x * s, y * s + r);
  ctx.stroke();
}

export function drawControls(
  ctx: CanvasRenderingContext2D,
  track: TrackState,
  view: ViewTransform,
): void {
  const s = view.scale;
  ctx.fillStyle = PROVENANCE_COLORS.control;
  for (const seg of track.segments) {
    for (const p of seg.points) {
      ctx.beginPath();
      ctx.arc(p.x * s, p.y * s, 2.5 * s, 0, Math.PI * 2);
      ctx.fill();
    }
  }
}

/** Per-frame strip: track color while visible, black while occluded,
 * bright ticks on control frames. */
export function drawTimeline(
  ctx: CanvasRenderingContext2D,
  track: TrackState,
  numFrames: number,
  width: number,
  height: number,
  currentFrame: number,
): void {
  ctx.clearRect(0, 0, width, height);
  const cell = width / numFrames;
  const solved = track.solved;
  for (let t = 0; t < numFrames; t++) {
    const visible = solved ? !!solved.visible[t] : false;
    ctx.fillStyle = visible ? trackColor(track.id) : "#000000";
    ctx.fillRect(t * cell, 0, Math.ceil(cell), height);
  }
  ctx.fillStyle = PROVENANCE_COLORS.control;
  for (const seg of track.segments) {
    for (const p of seg.points) {
      ctx.fillRect(p.t * cell, 0, Math.max(1, cell / 3), height);
    }
  }
  ctx.fillStyle = "#ffffff";
  ctx.fillRect(currentFrame * cell, height - 3, Math.max(1, cell), 3);
}

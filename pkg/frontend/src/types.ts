/** Wire types mirrored from the annotation service API. */

export interface VideoInfo {
  id: string;
  width: number;
  height: number;
  num_frames: number;
  fps: number;
}

export interface ControlPoint {
  t: number;
  x: number;
  y: number;
}

export type GapMode = "flow" | "linear";

export interface SegmentPayload {
  points: ControlPoint[];
  modes?: GapMode[];
}

export interface SolveRequest {
  controls: SegmentPayload[];
  mode: GapMode;
}

export interface SolveResponse {
  points: [number, number][];
  visible: boolean[];
  provenance: string[];
  cost: number;
}

export interface AnnotationTrack {
  tag: string;
  query: ControlPoint;
  points: [number, number][];
  visible: boolean[];
  segments: SegmentPayload[];
}

export interface TracksPayload {
  revision: number;
  tracks: AnnotationTrack[];
}

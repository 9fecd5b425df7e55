/** Thin fetch client for the annotation service; the UI talks to the
 * server exclusively through these five calls. */

import type {
  SolveRequest,
  SolveResponse,
  TracksPayload,
  VideoInfo,
} from "./types.js";

export type SaveResult =
  | { kind: "saved"; revision: number }
  | { kind: "conflict"; currentRevision: number };

export class ApiClient {
  constructor(private base: string = "") {}

  async listVideos(): Promise<VideoInfo[]> {
    const resp = await fetch(`${this.base}/api/videos`);
    if (!resp.ok) throw new Error(`listVideos: HTTP ${resp.status}`);
    return (await resp.json()) as VideoInfo[];
  }

  frameUrl(videoId: string, t: number): string {
    return `${this.base}/api/videos/${encodeURIComponent(videoId)}/frames/${t}`;
  }

  async solve(videoId: string, request: SolveRequest): Promise<SolveResponse> {
    const resp = await fetch(
      `${this.base}/api/videos/${encodeURIComponent(videoId)}/solve`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(request),
      },
    );
    if (!resp.ok) throw new Error(`solve: HTTP ${resp.status}`);
    return (await resp.json()) as SolveResponse;
  }

  async getTracks(videoId: string): Promise<TracksPayload> {
    const resp = await fetch(
      `${this.base}/api/videos/${encodeURIComponent(videoId)}/tracks`,
    );
    if (!resp.ok) throw new Error(`getTracks: HTTP ${resp.status}`);
    return (await resp.json()) as TracksPayload;
  }

  async putTracks(videoId: string, payload: TracksPayload): Promise<SaveResult> {
    const resp = await fetch(
      `${this.base}/api/videos/${encodeURIComponent(videoId)}/tracks`,
      {
        method: "PUT",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      },
    );
    if (resp.status === 409) {
      const body = (await resp.json()) as {
        detail: { current_revision: number };
      };
      return { kind: "conflict", currentRevision: body.detail.current_revision };
    }
    if (!resp.ok) throw new Error(`putTracks: HTTP ${resp.status}`);
    const body = (await resp.json()) as { revision: number };
    return { kind: "saved", revision: body.revision };
  }
}

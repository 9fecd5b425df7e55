/**
 * Annotator UI: frame scrubbing, ENTER/MOVE/EXIT point entry on a
 * crosshair canvas, debounced live solving through the service, and
 * revision-checked saving with a reload-or-overwrite conflict dialog.
 *
 * The DOM layer delegates all rules to state.ts and all drawing to
 * overlay.ts; initApp() returns a handle the tests drive directly.
 */

import { ApiClient, SaveResult } from "./api.js";
import { debounce, Debounced } from "./debounce.js";
import {
  addControl,
  applySolve,
  canSolve,
  ControlKind,
  firstControl,
  newTrack,
  segmentsPayload,
  setMode,
  trackFromSaved,
  TrackState,
} from "./state.js";
import {
  drawControls,
  drawFrameMarker,
  drawTimeline,
  drawTrackPath,
  trackColor,
} from "./overlay.js";
import type { AnnotationTrack, TracksPayload, VideoInfo } from "./types.js";

const SOLVE_DEBOUNCE_MS = 300;

export interface AppHandle {
  state: {
    video: VideoInfo | null;
    frame: number;
    tracks: TrackState[];
    activeTrackId: number | null;
    kind: ControlKind;
    revision: number;
  };
  elements: Record<string, HTMLElement>;
  selectVideo(id: string): Promise<void>;
  setFrame(t: number): void;
  addTrack(tag: string): TrackState;
  setKind(kind: ControlKind): void;
  clickImage(x: number, y: number): void;
  toggleMode(trackId: number): void;
  save(): Promise<SaveResult | "retry" | "empty">;
  resolveConflict(choice: "reload" | "overwrite"): Promise<void>;
  whenIdle(): Promise<void>;
  render(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

export function initApp(root: HTMLElement, api: ApiClient): AppHandle {
  const status = el("div", { id: "status", class: "status" });
  const videoSelect = el("select", { id: "video-select" });
  const canvas = el("canvas", { id: "view" });
  canvas.style.cursor = "crosshair"; // cross-shaped cursor for precision
  const timeline = el("canvas", { id: "timeline", height: "14" });
  const slider = el("input", { id: "frame-slider", type: "range", min: "0", value: "0" });
  const frameLabel = el("span", { id: "frame-label" }, "0 / 0");
  const kindRow = el("div", { id: "kinds" });
  const kinds: ControlKind[] = ["ENTER", "MOVE", "EXIT"];
  const kindButtons = new Map<ControlKind, HTMLButtonElement>();
  for (const k of kinds) {
    const b = el("button", { id: `kind-${k.toLowerCase()}` }, k);
    kindButtons.set(k, b);
    kindRow.appendChild(b);
  }
  const tagInput = el("input", { id: "tag-input", placeholder: "tag" });
  const newButton = el("button", { id: "new-track" }, "NEW");
  const saveButton = el("button", { id: "save" }, "SUBMIT");
  const trackList = el("div", { id: "track-list" });
  const conflictBox = el("div", { id: "conflict", class: "hidden" });
  const reloadButton = el("button", { id: "conflict-reload" }, "Reload server version");
  const overwriteButton = el("button", { id: "conflict-overwrite" }, "Keep mine");
  conflictBox.append(
    el("span", {}, "Save conflict: the annotation changed on the server."),
    reloadButton,
    overwriteButton,
  );
  const info = el("div", { id: "info" });
  root.append(
    status, videoSelect, canvas, timeline, slider, frameLabel,
    kindRow, tagInput, newButton, saveButton, trackList, conflictBox, info,
  );

  const dpr = (globalThis as { devicePixelRatio?: number }).devicePixelRatio ?? 1;
  const frameImage = new Image();
  let frameLoaded = false;

  const handle: AppHandle = {
    state: {
      video: null,
      frame: 0,
      tracks: [],
      activeTrackId: null,
      kind: "ENTER",
      revision: 0,
    },
    elements: {
      status, videoSelect, canvas, timeline, slider, frameLabel,
      tagInput, newButton, saveButton, trackList, conflictBox,
      reloadButton, overwriteButton, info,
      kindEnter: kindButtons.get("ENTER")!,
      kindMove: kindButtons.get("MOVE")!,
      kindExit: kindButtons.get("EXIT")!,
    },
    selectVideo,
    setFrame,
    addTrack,
    setKind,
    clickImage,
    toggleMode,
    save,
    resolveConflict,
    whenIdle,
    render,
  };

  const inflight = new Set<Promise<unknown>>();
  function track_<T>(p: Promise<T>): Promise<T> {
    const wrapped: Promise<T> = p.finally(() => inflight.delete(wrapped));
    inflight.add(wrapped);
    return wrapped;
  }
  async function whenIdle(): Promise<void> {
    while (inflight.size > 0) await Promise.allSettled([...inflight]);
  }

  function say(text: string, isError = false): void {
    status.textContent = text;
    status.className = isError ? "status error" : "status";
  }

  const solvers = new Map<number, Debounced>();
  function scheduleSolve(track: TrackState): void {
    let deb = solvers.get(track.id);
    if (!deb) {
      deb = debounce(() => void solveNow(track), SOLVE_DEBOUNCE_MS);
      solvers.set(track.id, deb);
    }
    deb.call();
  }

  async function solveNow(track: TrackState): Promise<void> {
    const video = handle.state.video;
    if (!video || !canSolve(track)) return;
    const seq = track.editSeq;
    try {
      const solved = await track_(
        api.solve(video.id, { controls: segmentsPayload(track), mode: track.mode }),
      );
      if (applySolve(track, seq, solved)) render();
    } catch (err) {
      say(`solve failed: ${String(err)}`, true);
    }
  }

  async function selectVideo(id: string): Promise<void> {
    const videos = await track_(api.listVideos());
    const video = videos.find((v) => v.id === id) ?? null;
    if (!video) {
      say(`unknown video ${id}`, true);
      return;
    }
    handle.state.video = video;
    handle.state.frame = 0;
    handle.state.tracks = [];
    handle.state.activeTrackId = null;
    slider.setAttribute("max", String(video.num_frames - 1));
    canvas.width = video.width * dpr;
    canvas.height = video.height * dpr;
    canvas.style.width = `${video.width}px`;
    canvas.style.height = `${video.height}px`;
    timeline.width = video.width * dpr;

    const payload = await track_(api.getTracks(video.id));
    handle.state.revision = payload.revision;
    for (const saved of payload.tracks) {
      const t = trackFromSaved(saved.tag, saved.segments);
      handle.state.tracks.push(t);
      void solveNow(t); // purity: identical to the saved overlay
    }
    if (handle.state.tracks.length > 0)
      handle.state.activeTrackId = handle.state.tracks[0].id;
    loadFrame();
    render();
  }

  function loadFrame(): void {
    const video = handle.state.video;
    if (!video) return;
    frameLoaded = false;
    frameImage.onload = () => {
      frameLoaded = true;
      render();
    };
    frameImage.src = api.frameUrl(video.id, handle.state.frame);
  }

  function setFrame(t: number): void {
    const video = handle.state.video;
    if (!video) return;
    handle.state.frame = Math.min(Math.max(t, 0), video.num_frames - 1);
    (slider as HTMLInputElement).value = String(handle.state.frame);
    loadFrame();
    render();
  }

  function addTrack(tag: string): TrackState {
    const t = newTrack(tag || `track_${handle.state.tracks.length}`);
    handle.state.tracks.push(t);
    handle.state.activeTrackId = t.id;
    render();
    return t;
  }

  function setKind(kind: ControlKind): void {
    handle.state.kind = kind;
    render();
  }

  function activeTrack(): TrackState | null {
    return (
      handle.state.tracks.find((t) => t.id === handle.state.activeTrackId) ?? null
    );
  }

  function clickImage(x: number, y: number): void {
    const track = activeTrack();
    if (!track) {
      say("add a track first (NEW)", true);
      return;
    }
    const result = addControl(track, handle.state.kind, handle.state.frame, x, y);
    if (!result.ok) {
      say(result.error, true);
      return;
    }
    say(`${handle.state.kind} @ frame ${handle.state.frame} (${x.toFixed(1)}, ${y.toFixed(1)})`);
    if (handle.state.kind === "ENTER") handle.state.kind = "MOVE";
    scheduleSolve(track);
    render();
  }

  function toggleMode(trackId: number): void {
    const track = handle.state.tracks.find((t) => t.id === trackId);
    if (!track) return;
    setMode(track, track.mode === "flow" ? "linear" : "flow");
    scheduleSolve(track);
    render();
  }

  function savePayload(): TracksPayload {
    const tracks: AnnotationTrack[] = [];
    for (const t of handle.state.tracks) {
      const first = firstControl(t);
      if (!t.solved || !first) continue;
      tracks.push({
        tag: t.tag,
        query: first,
        points: t.solved.points,
        visible: t.solved.visible,
        segments: segmentsPayload(t),
      });
    }
    return { revision: handle.state.revision, tracks };
  }

  let pendingSave: TracksPayload | null = null;

  async function save(): Promise<SaveResult | "retry" | "empty"> {
    const video = handle.state.video;
    if (!video) return "empty";
    for (const deb of solvers.values()) deb.flush();
    await whenIdle();
    const payload = savePayload();
    try {
      const result = await track_(api.putTracks(video.id, payload));
      if (result.kind === "saved") {
        handle.state.revision = result.revision;
        say(`saved revision ${result.revision}`);
        conflictBox.className = "hidden";
      } else {
        pendingSave = payload;
        conflictBox.className = "conflict";
        say("save conflict: choose reload or overwrite", true);
      }
      return result;
    } catch (err) {
      // Network failure: keep local state, offer retry.
      say(`save failed (${String(err)}); local edits kept, press SUBMIT to retry`, true);
      return "retry";
    }
  }

  async function resolveConflict(choice: "reload" | "overwrite"): Promise<void> {
    const video = handle.state.video;
    if (!video || !pendingSave) return;
    const latest = await track_(api.getTracks(video.id));
    if (choice === "reload") {
      pendingSave = null;
      conflictBox.className = "hidden";
      await selectVideo(video.id);
      return;
    }
    const retry: TracksPayload = { revision: latest.revision, tracks: pendingSave.tracks };
    const result = await track_(api.putTracks(video.id, retry));
    if (result.kind === "saved") {
      handle.state.revision = result.revision;
      pendingSave = null;
      conflictBox.className = "hidden";
      say(`saved revision ${result.revision} (overwrote)`);
    } else {
      say("still conflicting; try again", true);
    }
  }

  function render(): void {
    const video = handle.state.video;
    const ctx = canvas.getContext("2d");
    if (video && ctx) {
      ctx.clearRect(0, 0, canvas.width, canvas.height);
      if (frameLoaded) {
        ctx.drawImage(frameImage, 0, 0, canvas.width, canvas.height);
      } else {
        ctx.fillStyle = "#202020";
        ctx.fillRect(0, 0, canvas.width, canvas.height);
      }
      const view = { scale: dpr };
      for (const t of handle.state.tracks) {
        if (t.solved) {
          drawTrackPath(ctx, t.solved, view);
          drawFrameMarker(ctx, t, handle.state.frame, view);
        }
        drawControls(ctx, t, view);
      }
    }
    const tctx = timeline.getContext("2d");
    const active = activeTrack();
    if (video && tctx && active) {
      drawTimeline(
        tctx, active, video.num_frames, timeline.width, timeline.height,
        handle.state.frame,
      );
    }
    frameLabel.textContent = video
      ? `${handle.state.frame} / ${video.num_frames - 1}`
      : "0 / 0";
    for (const [k, b] of kindButtons)
      b.className = k === handle.state.kind ? "active" : "";

    trackList.textContent = "";
    for (const t of handle.state.tracks) {
      const row = el("div", { class: "track-row", "data-track": String(t.id) });
      const pick = el("button", { class: "pick" }, t.tag);
      pick.style.color = trackColor(t.id);
      pick.addEventListener("click", () => {
        handle.state.activeTrackId = t.id;
        render();
      });
      const mode = el("button", { class: "mode" }, t.mode);
      mode.addEventListener("click", () => toggleMode(t.id));
      const dirty = el("span", { class: "dirty" }, t.dirty ? "*" : "");
      row.append(pick, mode, dirty);
      if (t.id === handle.state.activeTrackId) row.className += " active";
      trackList.appendChild(row);
    }
  }

  // DOM events
  videoSelect.addEventListener("change", () => {
    void selectVideo((videoSelect as HTMLSelectElement).value);
  });
  slider.addEventListener("input", () => {
    setFrame(Number((slider as HTMLInputElement).value));
  });
  canvas.addEventListener("click", (ev: MouseEvent) => {
    const rect = canvas.getBoundingClientRect();
    const video = handle.state.video;
    if (!video) return;
    const sx = rect.width > 0 ? video.width / rect.width : 1;
    const sy = rect.height > 0 ? video.height / rect.height : 1;
    clickImage((ev.clientX - rect.left) * sx, (ev.clientY - rect.top) * sy);
  });
  for (const [k, b] of kindButtons)
    b.addEventListener("click", () => setKind(k));
  newButton.addEventListener("click", () => {
    addTrack((tagInput as HTMLInputElement).value.trim());
    (tagInput as HTMLInputElement).value = "";
  });
  saveButton.addEventListener("click", () => void save());
  reloadButton.addEventListener("click", () => void resolveConflict("reload"));
  overwriteButton.addEventListener("click", () => void resolveConflict("overwrite"));
  document.addEventListener("keydown", (ev: KeyboardEvent) => {
    if (ev.key === "ArrowRight") setFrame(handle.state.frame + 1);
    if (ev.key === "ArrowLeft") setFrame(handle.state.frame - 1);
  });

  void track_(
    api.listVideos().then((videos) => {
      videoSelect.textContent = "";
      for (const v of videos) {
        videoSelect.appendChild(el("option", { value: v.id }, v.id));
      }
      info.textContent = `${videos.length} video(s)`;
    }),
  ).catch((err) => say(`failed to list videos: ${String(err)}`, true));

  return handle;
}

// Browser bootstrap (tests call initApp themselves).
const rootEl = typeof document !== "undefined" ? document.getElementById("app") : null;
if (rootEl) {
  const handle = initApp(rootEl, new ApiClient(""));
  const select = handle.elements.videoSelect as HTMLSelectElement;
  void (async () => {
    await handle.whenIdle();
    if (select.options.length > 0) {
      await handle.selectVideo(select.options[0].value);
    }
  })();
}

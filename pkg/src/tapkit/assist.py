"""Flow-guided track assist.

Given forward optical flow and annotator control points, find the
per-frame path between consecutive controls that minimizes the summed
squared discrepancy with the flow,

    sum_i || (p[i+1] - p[i]) - F_i(p[i]) ||^2,

over integer-grid paths whose endpoints are the (rounded) control
points.  Gaps shorter than 5 frames, and gaps the annotator marks as
linear, are linearly interpolated instead.  Frames outside every visible
segment are marked occluded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _gdt
from .interp import bilinear
from .tracks import FlowVolume, Query, Track

MIN_FLOW_GAP = 5  # below this many frames apart, flow is not trusted

PROV_CONTROL = "control"
PROV_FLOW = "flow-solved"
PROV_LINEAR = "linear"
PROV_OCCLUDED = "occluded"

# The exact DP materializes an (HW x HW) transition matrix per frame.
_MAX_EXACT_CELLS = 4096


class ControlPointError(ValueError):
    pass


@dataclass(frozen=True)
class ControlPoint:
    t: int
    x: float
    y: float


@dataclass(frozen=True)
class ControlSegment:
    """One visible span: ENTER point, MOVE points, EXIT point, in frame
    order.  gap_modes optionally overrides the interpolation mode
    ("flow" | "linear") for each of the len(points)-1 gaps."""

    points: tuple[ControlPoint, ...]
    gap_modes: tuple[str, ...] | None = None

    def __post_init__(self):
        pts = tuple(self.points)
        if not pts:
            raise ControlPointError("segment needs at least one point")
        for a, b in zip(pts, pts[1:]):
            if b.t <= a.t:
                raise ControlPointError(
                    f"segment frames must strictly increase ({a.t} -> {b.t})"
                )
        if self.gap_modes is not None:
            modes = tuple(self.gap_modes)
            if len(modes) != len(pts) - 1:
                raise ControlPointError(
                    f"{len(modes)} gap modes for {len(pts)} points"
                )
            for m in modes:
                if m not in ("flow", "linear"):
                    raise ControlPointError(f"unknown gap mode {m!r}")
            object.__setattr__(self, "gap_modes", modes)
        object.__setattr__(self, "points", pts)

    @property
    def start(self) -> int:
        return self.points[0].t

    @property
    def end(self) -> int:
        return self.points[-1].t


@dataclass(frozen=True)
class ControlPointSet:
    segments: tuple[ControlSegment, ...]

    def __post_init__(self):
        segs = tuple(sorted(self.segments, key=lambda s: s.start))
        for a, b in zip(segs, segs[1:]):
            if b.start <= a.end:
                raise ControlPointError(
                    f"segments overlap in time ({a.end} vs {b.start})"
                )
        object.__setattr__(self, "segments", segs)


@dataclass(frozen=True)
class SolvedPath:
    """Solved positions for frames start .. start+len-1.

    Endpoints equal the control points exactly; cost is the summed squared
    flow discrepancy of flow-solved transitions (0 for linear spans)."""

    start: int
    positions: np.ndarray
    provenance: tuple[str, ...]
    cost: float


@dataclass(frozen=True)
class AssistResult:
    track: Track
    provenance: tuple[str, ...]
    cost: float


def _round_cell(x: float, y: float, w: int, h: int) -> tuple[int, int]:
    cx = min(max(int(np.floor(x + 0.5)), 0), w - 1)
    cy = min(max(int(np.floor(y + 0.5)), 0), h - 1)
    return cx, cy


def path_cost(flow: FlowVolume, positions: np.ndarray, start: int) -> float:
    """Summed squared flow discrepancy along a path; flow is sampled
    bilinearly at fractional positions (clamped at the border)."""
    positions = np.asarray(positions, dtype=np.float64)
    total = 0.0
    for i in range(len(positions) - 1):
        f = bilinear(flow.uv[start + i], positions[i, 0], positions[i, 1])
        step = positions[i + 1] - positions[i]
        total += float((step[0] - f[0]) ** 2 + (step[1] - f[1]) ** 2)
    return total


def propagate_forward(flow: FlowVolume, p_s, s: int, t_end: int) -> np.ndarray:
    """Integrate flow from p_s at frame s through frame t_end.

    Returns (t_end - s + 1, 2) positions with p[i+1] = p[i] + F_i(p[i]),
    flow sampled bilinearly and clamped to the image rectangle."""
    if not 0 <= s < t_end <= flow.num_frames - 1:
        raise ValueError(f"bad frame range [{s}, {t_end}] for {flow.num_frames} frames")
    out = np.empty((t_end - s + 1, 2), dtype=np.float64)
    out[0] = p_s
    for i in range(t_end - s):
        f = bilinear(flow.uv[s + i], out[i, 0], out[i, 1])
        out[i + 1] = out[i] + f
    return out


def interpolate_linear(p_s, s: int, p_t, t: int) -> SolvedPath:
    if t <= s:
        raise ValueError(f"need s < t, got {s} >= {t}")
    p_s = np.asarray(p_s, dtype=np.float64)
    p_t = np.asarray(p_t, dtype=np.float64)
    alphas = np.arange(t - s + 1, dtype=np.float64) / (t - s)
    positions = p_s[None, :] + alphas[:, None] * (p_t - p_s)[None, :]
    positions[0] = p_s
    positions[-1] = p_t
    prov = (PROV_CONTROL,) + (PROV_LINEAR,) * (t - s - 1) + (PROV_CONTROL,)
    return SolvedPath(start=s, positions=positions, provenance=prov, cost=0.0)


def _check_segment_args(flow: FlowVolume, s: int, t: int) -> None:
    if t <= s:
        raise ValueError(f"need s < t, got {s} >= {t}")
    if s < 0 or t > flow.num_frames - 1:
        raise ValueError(
            f"segment [{s}, {t}] outside flow volume with {flow.num_frames} frames"
        )


def _finish_path(
    flow: FlowVolume, cells: list[tuple[int, int]], p_s, p_t, s: int
) -> SolvedPath:
    positions = np.array(cells, dtype=np.float64)
    positions[0] = p_s
    positions[-1] = p_t
    n = len(cells) - 1
    prov = (PROV_CONTROL,) + (PROV_FLOW,) * (n - 1) + (PROV_CONTROL,)
    return SolvedPath(
        start=s,
        positions=positions,
        provenance=prov,
        cost=path_cost(flow, positions, s),
    )


def solve_segment(flow: FlowVolume, p_s, s: int, p_t, t: int) -> SolvedPath:
    """Exact DP over the full integer grid.

    Minimizes the squared flow discrepancy over all integer-grid paths
    with the rounded control points as endpoints (the exact fractional
    controls are substituted back afterwards).  Ties pick the predecessor
    with the smallest (y, x).  Quadratic in the number of pixels: use
    solve_segment_fast beyond ~64x64.
    """
    _check_segment_args(flow, s, t)
    h, w = flow.height, flow.width
    hw = h * w
    if hw > _MAX_EXACT_CELLS:
        raise ValueError(
            f"{w}x{h} grid too large for the exact solver; use solve_segment_fast"
        )
    idx = np.arange(hw)
    gx = (idx % w).astype(np.float64)
    gy = (idx // w).astype(np.float64)
    sx, sy = _round_cell(p_s[0], p_s[1], w, h)
    ex, ey = _round_cell(p_t[0], p_t[1], w, h)

    d = np.full(hw, np.inf)
    d[sy * w + sx] = 0.0
    parents = np.empty((t - s, hw), dtype=np.int64)
    for i in range(t - s):
        uvf = flow.uv[s + i].astype(np.float64).reshape(hw, 2)
        cx = gx + uvf[:, 0]
        cy = gy + uvf[:, 1]
        quad = (gx[:, None] - cx[None, :]) ** 2 + (gy[:, None] - cy[None, :]) ** 2
        m = d[None, :] + quad
        parents[i] = np.argmin(m, axis=1)
        d = m[idx, parents[i]]

    cur = ey * w + ex
    chain = [cur]
    for i in reversed(range(t - s)):
        cur = int(parents[i][cur])
        chain.append(cur)
    chain.reverse()
    cells = [(c % w, c // w) for c in chain]
    return _finish_path(flow, cells, p_s, p_t, s)


def _fast_forward(flow: FlowVolume, s: int, n: int, start_flat: int, keep: bool):
    h, w = flow.height, flow.width
    ys, xs = np.indices((h, w))
    gx = xs.ravel().astype(np.float64)
    gy = ys.ravel().astype(np.float64)
    d = np.full(h * w, np.inf)
    d[start_flat] = 0.0
    planes = []
    for i in range(n):
        uvf = flow.uv[s + i].astype(np.float64).reshape(-1, 2)
        d_next, parent = _gdt.dp_transition(d, gx + uvf[:, 0], gy + uvf[:, 1], h, w)
        if keep:
            planes.append(parent)
        d = d_next.ravel()
    return d, planes


def _refine_window(
    flow: FlowVolume, cells: list[tuple[int, int]], s: int, radius: int
) -> list[tuple[int, int]]:
    # Exact DP restricted to a window around the rounded-proposal path,
    # scored with the true fractional centers.  Endpoints stay fixed.
    h, w = flow.height, flow.width
    n = len(cells) - 1
    cand: list[np.ndarray] = [np.array([cells[0]], dtype=np.int64)]
    for i in range(1, n):
        x0, y0 = cells[i]
        xs = np.arange(max(0, x0 - radius), min(w - 1, x0 + radius) + 1)
        ys = np.arange(max(0, y0 - radius), min(h - 1, y0 + radius) + 1)
        mx, my = np.meshgrid(xs, ys)
        cand.append(np.stack([mx.ravel(), my.ravel()], axis=1))
    cand.append(np.array([cells[n]], dtype=np.int64))

    d = np.zeros(1)
    parents = []
    for i in range(n):
        src = cand[i].astype(np.float64)
        dst = cand[i + 1].astype(np.float64)
        uvf = flow.uv[s + i].astype(np.float64)
        fvec = uvf[cand[i][:, 1], cand[i][:, 0]]
        c = src + fvec
        quad = (dst[:, None, 0] - c[None, :, 0]) ** 2 + (
            dst[:, None, 1] - c[None, :, 1]
        ) ** 2
        m = d[None, :] + quad
        parents.append(np.argmin(m, axis=1))
        d = m[np.arange(len(dst)), parents[-1]]

    out = [cells[n]]
    j = 0
    for i in reversed(range(n)):
        j = int(parents[i][j])
        out.append((int(cand[i][j, 0]), int(cand[i][j, 1])))
    out.reverse()
    return out


def solve_segment_fast(
    flow: FlowVolume,
    p_s,
    s: int,
    p_t,
    t: int,
    refine_radius: int = 2,
    store_parents: bool = True,
) -> SolvedPath:
    """Accelerated solver: each DP step snaps flow-propagated centers
    onto their surrounding grid cells (keeping the minimal offset per
    cell) and evaluates the paraboloid lower envelope with a two-pass 1D
    generalized squared distance transform per axis.

    Cost-exact whenever the flow is integer-valued; on fractional flow an
    iterated window refinement around the recovered path keeps the cost
    within 2*(t-s) of the exact optimum.  store_parents=False trades
    memory for an O(T^2) recompute-on-backtrack.
    """
    _check_segment_args(flow, s, t)
    h, w = flow.height, flow.width
    sx, sy = _round_cell(p_s[0], p_s[1], w, h)
    ex, ey = _round_cell(p_t[0], p_t[1], w, h)
    start_flat = sy * w + sx
    n = t - s

    _, planes = _fast_forward(flow, s, n, start_flat, keep=store_parents)

    chain = [ey * w + ex]
    for i in reversed(range(n)):
        cur = chain[-1]
        if store_parents:
            parent = planes[i]
        else:
            # Recompute-on-backtrack: replay the DP up to step i and re-run
            # that transition to recover its parent plane.
            d_i, _ = _fast_forward(flow, s, i, start_flat, keep=False)
            ys, xs = np.indices((h, w))
            uvf = flow.uv[s + i].astype(np.float64).reshape(-1, 2)
            _, parent = _gdt.dp_transition(
                d_i,
                xs.ravel().astype(np.float64) + uvf[:, 0],
                ys.ravel().astype(np.float64) + uvf[:, 1],
                h,
                w,
            )
        chain.append(int(parent[cur // w, cur % w]))
    chain.reverse()
    cells = [(c % w, c // w) for c in chain]
    if refine_radius > 0:
        # Iterate the window refinement to a fixpoint: each pass solves
        # exactly within a window around the current path, so the true
        # objective is non-increasing.
        prev_cost = None
        for _ in range(8):
            cells = _refine_window(flow, cells, s, refine_radius)
            cost = _chain_objective(flow, cells, s)
            if prev_cost is not None and cost >= prev_cost - 1e-12:
                break
            prev_cost = cost
    return _finish_path(flow, cells, p_s, p_t, s)


def _chain_objective(flow: FlowVolume, cells: list[tuple[int, int]], s: int) -> float:
    total = 0.0
    for i in range(len(cells) - 1):
        x, y = cells[i]
        u, v = flow.uv[s + i, y, x].astype(np.float64)
        total += (cells[i + 1][0] - x - u) ** 2 + (cells[i + 1][1] - y - v) ** 2
    return total


# ----------------------------------------------------------------------
# Track assembly
# ----------------------------------------------------------------------

def solve_gap(
    flow: FlowVolume,
    a: ControlPoint,
    b: ControlPoint,
    mode: str,
    solver: str = "fast",
    min_flow_gap: int = MIN_FLOW_GAP,
) -> SolvedPath:
    """Dispatch one control-point gap: flow DP for gaps of at least
    min_flow_gap frames in flow mode, linear interpolation otherwise."""
    gap = b.t - a.t
    if mode == "linear" or gap < min_flow_gap:
        return interpolate_linear((a.x, a.y), a.t, (b.x, b.y), b.t)
    if solver == "exact":
        return solve_segment(flow, (a.x, a.y), a.t, (b.x, b.y), b.t)
    return solve_segment_fast(flow, (a.x, a.y), a.t, (b.x, b.y), b.t)


def _scale_controls(controls: ControlPointSet, sx: float, sy: float) -> ControlPointSet:
    return ControlPointSet(
        tuple(
            ControlSegment(
                tuple(ControlPoint(p.t, p.x * sx, p.y * sy) for p in seg.points),
                seg.gap_modes,
            )
            for seg in controls.segments
        )
    )


def solve_track_full(
    flow: FlowVolume,
    controls: ControlPointSet,
    default_mode: str = "flow",
    solver: str = "fast",
    num_frames: int | None = None,
    tag: str = "",
    source_resolution: tuple[int, int] | None = None,
    working_resolution: tuple[int, int] | None = None,
) -> AssistResult:
    """Solve a whole track from its control points.

    Gaps inside a segment go to the flow solver or linear interpolation
    per gap mode; frames outside every segment are occluded and carry the
    nearest control position.  When working_resolution differs from the
    flow's, flow is area-average downsampled, solving happens there, and
    positions are scaled back (control frames keep their exact input
    coordinates).
    """
    if default_mode not in ("flow", "linear"):
        raise ControlPointError(f"unknown mode {default_mode!r}")
    if not controls.segments:
        raise ControlPointError("no control segments")
    src_w = flow.width if source_resolution is None else source_resolution[0]
    src_h = flow.height if source_resolution is None else source_resolution[1]

    solve_flow = flow
    solve_controls = controls
    back_sx = back_sy = 1.0
    if working_resolution is not None and (
        working_resolution != (flow.width, flow.height)
    ):
        ww, wh = working_resolution
        solve_flow = resample_flow(flow, ww, wh)
        solve_controls = _scale_controls(controls, ww / flow.width, wh / flow.height)
        back_sx = src_w / ww
        back_sy = src_h / wh

    T = num_frames if num_frames is not None else flow.num_frames
    first_frame = controls.segments[0].start
    if first_frame < 0:
        raise ControlPointError(f"control at negative frame {first_frame}")
    last = max(seg.end for seg in controls.segments)
    if last > T - 1:
        raise ControlPointError(f"control at frame {last} beyond video of {T} frames")

    positions = np.zeros((T, 2), dtype=np.float64)
    visible = np.zeros(T, dtype=bool)
    provenance = [PROV_OCCLUDED] * T
    total_cost = 0.0

    for seg, solve_seg in zip(controls.segments, solve_controls.segments):
        for p in seg.points:
            positions[p.t] = (p.x, p.y)
            visible[p.t] = True
            provenance[p.t] = PROV_CONTROL
        modes = seg.gap_modes or (default_mode,) * (len(seg.points) - 1)
        for a, b, sa, sb, mode in zip(
            seg.points, seg.points[1:], solve_seg.points, solve_seg.points[1:], modes
        ):
            path = solve_gap(solve_flow, sa, sb, mode)
            total_cost += path.cost
            inner = path.positions[1:-1] * np.array([back_sx, back_sy])
            positions[a.t + 1 : b.t] = inner
            visible[a.t + 1 : b.t] = True
            for off, prov in enumerate(path.provenance[1:-1], start=a.t + 1):
                provenance[off] = prov

    # Occluded frames carry the nearest control position (meaningless but
    # kept for continuity).
    carry = (controls.segments[0].points[0].x, controls.segments[0].points[0].y)
    seg_iter = iter(controls.segments)
    current = next(seg_iter)
    for t in range(T):
        if visible[t]:
            continue
        while current.end < t:
            carry = (current.points[-1].x, current.points[-1].y)
            nxt = next(seg_iter, None)
            if nxt is None:
                break
            current = nxt
        positions[t] = carry

    first = controls.segments[0].points[0]
    track = Track(
        points=positions,
        visible=visible,
        query=Query(first.t, first.x, first.y),
        tag=tag,
        source_resolution=(src_w, src_h),
    )
    return AssistResult(track=track, provenance=tuple(provenance), cost=total_cost)


def solve_track(
    flow: FlowVolume, controls: ControlPointSet, default_mode: str = "flow", **kwargs
) -> Track:
    return solve_track_full(flow, controls, default_mode, **kwargs).track


# ----------------------------------------------------------------------
# Simulated annotator and flow resampling
# ----------------------------------------------------------------------

def controls_from_track(track: Track, stride: int = 10) -> ControlPointSet:
    """Turn a ground-truth track into the control points an annotator
    following the workflow would supply: ENTER/EXIT at each visible run's
    boundaries plus a MOVE at every stride-th frame inside the run."""
    visible = track.visible
    segments = []
    t = 0
    T = track.num_frames
    while t < T:
        if not visible[t]:
            t += 1
            continue
        end = t
        while end + 1 < T and visible[end + 1]:
            end += 1
        frames = sorted({t, end, *range(t + (-t) % stride, end + 1, stride)})
        pts = tuple(
            ControlPoint(f, float(track.points[f, 0]), float(track.points[f, 1]))
            for f in frames
        )
        segments.append(ControlSegment(pts))
        t = end + 1
    if not segments:
        raise ControlPointError("track has no visible frames")
    return ControlPointSet(tuple(segments))


def read_controls(path) -> list[tuple[str, ControlPointSet]]:
    """Read a control-point file: {"tracks": [{"tag", "segments":
    [{"points": [{"t","x","y"}...], "modes": [...]?}...]}]}."""
    import json
    from pathlib import Path

    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    out = []
    for tr in obj.get("tracks", []):
        segments = []
        for seg in tr.get("segments", []):
            pts = tuple(
                ControlPoint(int(p["t"]), float(p["x"]), float(p["y"]))
                for p in seg["points"]
            )
            modes = seg.get("modes")
            segments.append(ControlSegment(pts, tuple(modes) if modes else None))
        out.append((str(tr.get("tag", "")), ControlPointSet(tuple(segments))))
    if not out:
        raise ControlPointError(f"{path}: no control tracks")
    return out


def write_controls(tracks: list[tuple[str, ControlPointSet]], path, video_id: str = "") -> None:
    import json
    from pathlib import Path

    obj = {
        "video_id": video_id,
        "tracks": [
            {
                "tag": tag,
                "segments": [
                    {
                        "points": [{"t": p.t, "x": p.x, "y": p.y} for p in seg.points],
                        **({"modes": list(seg.gap_modes)} if seg.gap_modes else {}),
                    }
                    for seg in controls.segments
                ],
            }
            for tag, controls in tracks
        ],
    }
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _box_weights(src: int, dst: int) -> np.ndarray:
    # Row i of the result holds the fraction of each source cell covered
    # by destination cell i under an exact area box filter.
    ratio = src / dst
    w = np.zeros((dst, src), dtype=np.float64)
    for i in range(dst):
        lo = i * ratio
        hi = (i + 1) * ratio
        j0 = int(np.floor(lo))
        j1 = min(int(np.ceil(hi)), src)
        for j in range(j0, j1):
            w[i, j] = max(0.0, min(hi, j + 1) - max(lo, j)) / ratio
    return w


def resample_flow(flow: FlowVolume, width: int, height: int) -> FlowVolume:
    """Area-average the flow fields to a new resolution and scale the
    vectors to the new pixel units."""
    wr = _box_weights(flow.height, height)
    wc = _box_weights(flow.width, width)
    sx = width / flow.width
    sy = height / flow.height
    out = np.empty((flow.uv.shape[0], height, width, 2), dtype=np.float32)
    for i in range(flow.uv.shape[0]):
        for ch, scale in ((0, sx), (1, sy)):
            out[i, :, :, ch] = (wr @ flow.uv[i, :, :, ch].astype(np.float64) @ wc.T) * scale
    return FlowVolume(out)

"""Independent oracles used across the test suite.

Everything here is deliberately written from scratch (plain loops,
brute-force enumeration, ray casting) so the library implementations are
checked against a second route, not against themselves.
"""

from __future__ import annotations

import math

import numpy as np

EVAL = 256
THRESHOLDS = (1.0, 2.0, 4.0, 8.0, 16.0)
STRIDE = 5


# ----------------------------------------------------------------------
# Scalar bilinear sampling (reference for interp/propagation)
# ----------------------------------------------------------------------

def bilinear_scalar(field, x, y):
    """Reference bilinear lookup with border clamping; field is (H, W)
    or (H, W, C)."""
    h, w = field.shape[0], field.shape[1]
    x = min(max(float(x), 0.0), w - 1.0)
    y = min(max(float(y), 0.0), h - 1.0)
    x0 = int(math.floor(x))
    y0 = int(math.floor(y))
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    v = (
        np.asarray(field[y0, x0], dtype=np.float64) * (1 - fx) * (1 - fy)
        + np.asarray(field[y0, x1], dtype=np.float64) * fx * (1 - fy)
        + np.asarray(field[y1, x0], dtype=np.float64) * (1 - fx) * fy
        + np.asarray(field[y1, x1], dtype=np.float64) * fx * fy
    )
    return v


# ----------------------------------------------------------------------
# Naive per-frame metrics tally
# ----------------------------------------------------------------------

def _naive_queries(tracks, mode):
    queries = []
    for i, tr in enumerate(tracks):
        vis = tr["visible"]
        if mode == "strided":
            for t in range(0, len(vis), STRIDE):
                if vis[t]:
                    queries.append((i, t))
        else:
            for t, v in enumerate(vis):
                if v:
                    queries.append((i, t))
                    break
    return queries


def naive_evaluate(gt_videos, pred_videos, mode, strict=True):
    """Brute-force reference for evaluate()/evaluate_videos().

    Videos are dicts {"width", "height", "tracks": [{"points", "visible",
    "tag"}]}; predictions carry one track per ground-truth tag.  Returns
    the same aggregate fields as MetricsReport."""
    per_video = []
    for gt, pred in zip(gt_videos, pred_videos):
        sx = EVAL / gt["width"]
        sy = EVAL / gt["height"]
        psx = EVAL / pred["width"]
        psy = EVAL / pred["height"]
        pred_by_tag = {tr["tag"]: tr for tr in pred["tracks"]}
        oa_list = []
        dx_lists = {d: [] for d in THRESHOLDS}
        jac_lists = {d: [] for d in THRESHOLDS}
        counts = {d: [0, 0, 0] for d in THRESHOLDS}
        nq = 0
        for (ti, qt) in _naive_queries(gt["tracks"], mode):
            g = gt["tracks"][ti]
            p = pred_by_tag[g["tag"]]
            T = len(g["visible"])
            frames = [t for t in range(T) if mode == "strided" or t >= qt]
            nq += 1
            agree = sum(
                1 for t in frames if bool(p["visible"][t]) == bool(g["visible"][t])
            )
            oa_list.append(agree / len(frames))
            err = {}
            for t in frames:
                dxv = p["points"][t][0] * psx - g["points"][t][0] * sx
                dyv = p["points"][t][1] * psy - g["points"][t][1] * sy
                err[t] = math.sqrt(dxv * dxv + dyv * dyv)
            vis_frames = [t for t in frames if g["visible"][t]]
            for d in THRESHOLDS:
                within = lambda t: (err[t] < d) if strict else (err[t] <= d)
                if vis_frames:
                    dx_lists[d].append(
                        sum(1 for t in vis_frames if within(t)) / len(vis_frames)
                    )
                tp = fp = fn = 0
                for t in frames:
                    gv = bool(g["visible"][t])
                    pv = bool(p["visible"][t])
                    if gv and pv and within(t):
                        tp += 1
                    if pv and (not gv or not within(t)):
                        fp += 1
                    if gv and (not pv or not within(t)):
                        fn += 1
                jac_lists[d].append(tp / (tp + fp + fn) if tp + fp + fn else 1.0)
                counts[d][0] += tp
                counts[d][1] += fp
                counts[d][2] += fn
        per_video.append((oa_list, dx_lists, jac_lists, counts, nq))

    per_video = [v for v in per_video if v[4] > 0]
    mean = lambda xs: sum(xs) / len(xs) if xs else float("nan")
    oa = mean([mean(v[0]) for v in per_video])
    delta_x = {}
    jaccard = {}
    counts_total = {d: [0, 0, 0] for d in THRESHOLDS}
    for d in THRESHOLDS:
        vids = [mean(v[1][d]) for v in per_video if v[1][d]]
        delta_x[d] = mean(vids)
        jaccard[d] = mean([mean(v[2][d]) for v in per_video])
        for v in per_video:
            for k in range(3):
                counts_total[d][k] += v[3][d][k]
    return {
        "oa": oa,
        "delta_x": delta_x,
        "delta_x_avg": mean([delta_x[d] for d in THRESHOLDS]),
        "jaccard": jaccard,
        "average_jaccard": mean([jaccard[d] for d in THRESHOLDS]),
        "counts": counts_total,
        "num_queries": sum(v[4] for v in per_video),
    }


# ----------------------------------------------------------------------
# Exhaustive path enumeration for the segment solver
# ----------------------------------------------------------------------

def _round_clamp(v, limit):
    return min(max(int(math.floor(v + 0.5)), 0), limit - 1)


def enumerate_solve(flow_uv, p_s, s, p_t, t):
    """Enumerate every integer-grid path between the rounded endpoints
    and minimize the summed squared flow discrepancy.

    Returns (min_cost, chain) where chain is the flat-index path with the
    smallest (rho_{t-1}, rho_{t-2}, ...) on cost ties, matching a
    backward walk that prefers the smallest predecessor index."""
    n_trans = t - s
    h, w = flow_uv.shape[1], flow_uv.shape[2]
    hw = h * w
    idx = np.arange(hw)
    gx = (idx % w).astype(np.float64)
    gy = (idx // w).astype(np.float64)
    start = _round_clamp(p_s[1], h) * w + _round_clamp(p_s[0], w)
    end = _round_clamp(p_t[1], h) * w + _round_clamp(p_t[0], w)

    mats = []
    for i in range(n_trans):
        uv = flow_uv[s + i].astype(np.float64).reshape(hw, 2)
        cx = gx + uv[:, 0]
        cy = gy + uv[:, 1]
        quad = (gx[None, :] - cx[:, None]) ** 2 + (gy[None, :] - cy[:, None]) ** 2
        mats.append(quad)  # quad[src, dst]

    m = n_trans - 1  # number of interior frames
    if m == 0:
        return float(mats[0][start, end]), [start, end]

    # cost tensor with axes (k_m, k_{m-1}, ..., k_1), built as a left fold
    # so per-path float rounding matches a forward DP exactly.
    cost = mats[0][start, :]  # axis (k_1,)
    for i in range(1, m):
        trans = mats[i].T  # (k_{i+1}, k_i)
        cost = trans.reshape((hw, hw) + (1,) * (i - 1)) + cost[None, ...]
    last = mats[m][:, end]  # (k_m,) aligns with the first axis of cost
    cost = last.reshape((hw,) + (1,) * (m - 1)) + cost
    flat = int(np.argmin(cost))
    interior = np.unravel_index(flat, cost.shape)
    chain = [start] + [int(k) for k in reversed(interior)] + [end]
    return float(cost.reshape(-1)[flat]), chain


def path_cost_reference(flow_uv, positions, s):
    """Reference objective on a fractional path with reference bilinear
    lookups."""
    total = 0.0
    for i in range(len(positions) - 1):
        f = bilinear_scalar(flow_uv[s + i], positions[i][0], positions[i][1])
        dx = (positions[i + 1][0] - positions[i][0]) - f[0]
        dy = (positions[i + 1][1] - positions[i][1]) - f[1]
        total += dx * dx + dy * dy
    return total


def chain_cost(mats, chain):
    """Evaluate a flat-index chain on the enumeration cost matrices with
    the same left-fold association."""
    total = mats[0][chain[0], chain[1]]
    for i in range(1, len(mats)):
        total = total + mats[i][chain[i], chain[i + 1]]
    return float(total)


# ----------------------------------------------------------------------
# Ray casting (independent of the rasterizer)
# ----------------------------------------------------------------------

def raycast_depth(scene, t, x, y):
    """Depth (camera-frame z) of the nearest surface along the ray through
    pixel (x, y) at frame t, by Moller-Trumbore against every triangle;
    +inf when nothing is hit."""
    cam = scene.camera
    d_cam = np.array([(x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0])
    rot = cam.rotations[t]
    origin = -(rot.T @ cam.translations[t])
    direction = rot.T @ d_cam

    best = np.inf
    eps = 1e-12
    for obj in scene.objects:
        verts = obj.local_to_world(t, obj.mesh.vertices)
        for face in obj.mesh.faces:
            v0, v1, v2 = verts[face[0]], verts[face[1]], verts[face[2]]
            e1 = v1 - v0
            e2 = v2 - v0
            pvec = np.cross(direction, e2)
            det = float(e1 @ pvec)
            if abs(det) < 1e-14:
                continue
            inv = 1.0 / det
            tvec = origin - v0
            u = float(tvec @ pvec) * inv
            if u < -eps or u > 1 + eps:
                continue
            qvec = np.cross(tvec, e1)
            v = float(direction @ qvec) * inv
            if v < -eps or u + v > 1 + eps:
                continue
            t_ray = float(e2 @ qvec) * inv
            if t_ray > 1e-9:
                best = min(best, t_ray)
    return best


def raycast_visible(scene, t, point_depth, x, y, width, height, margin=0.01):
    """Visibility oracle mirroring the 1%/4-neighbor rule but with depths
    obtained by ray casting instead of the z-buffer."""
    if not (0 <= x < width and 0 <= y < height):
        return False
    x0 = min(max(int(math.floor(x)), 0), width - 1)
    y0 = min(max(int(math.floor(y)), 0), height - 1)
    x1 = min(x0 + 1, width - 1)
    y1 = min(y0 + 1, height - 1)
    m = max(
        raycast_depth(scene, t, x0, y0),
        raycast_depth(scene, t, x1, y0),
        raycast_depth(scene, t, x0, y1),
        raycast_depth(scene, t, x1, y1),
    )
    return not point_depth > m * (1 + margin)


# ----------------------------------------------------------------------
# Reference agglomerative clustering
# ----------------------------------------------------------------------

def reference_cluster(xy, occ, dist_thresh):
    """Greedy single-linkage clustering of trajectories.

    xy: [N, T, 2] coordinates; occ: [N, T] True where occluded;
    merges the closest pair (distance = min over cross pairs of the
    mean-centered Euclidean track distance, undefined at <= 10 joint
    frames) until the minimum distance reaches dist_thresh."""

    def track_dist(i, j):
        vis = np.logical_and(~occ[i], ~occ[j])
        if np.sum(vis.astype(np.float32)) <= 10:
            return float("inf")
        xy1 = xy[i][vis]
        xy2 = xy[j][vis]
        offset = np.mean(xy1 - xy2, axis=0, keepdims=True)
        xy2 = xy2 + offset
        dist = np.sqrt(np.sum(np.square(xy1 - xy2), axis=-1))
        return float(np.mean(dist))

    def cluster_dist(c1, c2):
        min_dist = float("inf")
        for t1 in c1:
            for t2 in c2:
                min_dist = min(track_dist(t1, t2), min_dist)
        return min_dist

    def all_dists(clusters):
        n = len(clusters)
        dists = np.zeros((n, n)) + float("inf")
        for i in range(n - 1):
            for j in range(i + 1, n):
                dists[i, j] = cluster_dist(clusters[i], clusters[j])
        return dists

    clusters = [[i] for i in range(xy.shape[0])]
    if len(clusters) > 1:
        dists = all_dists(clusters)
        while np.min(dists) < dist_thresh:
            i, j = np.unravel_index(int(np.argmin(dists)), dists.shape)
            clusters[i] = clusters[i] + clusters[j]
            del clusters[j]
            if len(clusters) == 1:
                break
            dists = all_dists(clusters)

    labels = [0] * xy.shape[0]
    for label, members in enumerate(sorted(clusters, key=min)):
        for i in members:
            labels[i] = label
    return labels


def same_partition(a, b):
    """True when two label lists induce the same partition."""
    groups_a = {}
    groups_b = {}
    for i, (la, lb) in enumerate(zip(a, b)):
        groups_a.setdefault(la, set()).add(i)
        groups_b.setdefault(lb, set()).add(i)
    return sorted(map(frozenset, groups_a.values())) == sorted(
        map(frozenset, groups_b.values())
    )

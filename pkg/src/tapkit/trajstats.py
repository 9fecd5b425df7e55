"""Trajectory statistics and agglomerative clustering.

Track distance is the mean Euclidean distance between two tracks over
their jointly visible frames after removing the mean offset; it is
undefined (infinite) with 10 or fewer joint frames.  Clustering starts
with one cluster per track and greedily merges the closest pair
(single linkage) while the minimum distance is under the threshold,
2 px in 256x256 space by default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tracks import Track

CLUSTER_THRESHOLD = 2.0
MIN_JOINT_FRAMES = 10  # joint visibility must exceed this


@dataclass(frozen=True)
class TrajectoryStats:
    diameter: float
    num_segments: int


def diameter(track: Track) -> float:
    """Max pairwise Euclidean distance over visible positions (0 with
    fewer than two visible frames)."""
    pts = track.points[track.visible]
    if pts.shape[0] < 2:
        return 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).max())


def count_segments(track: Track) -> int:
    """Number of maximal runs of consecutive visible frames."""
    v = np.asarray(track.visible, dtype=bool)
    if not v.any():
        return 0
    starts = v & ~np.concatenate(([False], v[:-1]))
    return int(starts.sum())


def track_stats(track: Track) -> TrajectoryStats:
    return TrajectoryStats(diameter=diameter(track), num_segments=count_segments(track))


def track_distance(t1: Track, t2: Track) -> float:
    """Mean-centered Euclidean distance over jointly visible frames;
    +inf when 10 or fewer frames overlap."""
    joint = t1.visible & t2.visible
    if int(joint.sum()) <= MIN_JOINT_FRAMES:
        return float("inf")
    xy1 = t1.points[joint]
    xy2 = t2.points[joint]
    offset = np.mean(xy1 - xy2, axis=0)
    d = np.linalg.norm(xy1 - (xy2 + offset), axis=1)
    return float(np.mean(d))


def cluster(tracks: list[Track], threshold: float = CLUSTER_THRESHOLD) -> list[int]:
    """Single-linkage agglomerative clustering of tracks.

    Returns one cluster label per track (labels are 0..k-1 in order of
    each cluster's smallest track index).  The closest pair merges first
    (ties to the smallest index pair), distances are fully recomputed
    after each merge, and undefined (infinite) distances never merge.
    """
    n = len(tracks)
    if n == 0:
        return []
    clusters: list[list[int]] = [[i] for i in range(n)]
    pair = np.full((n, n), np.inf)
    for i in range(n - 1):
        for j in range(i + 1, n):
            pair[i, j] = pair[j, i] = track_distance(tracks[i], tracks[j])

    def cluster_dist(a: list[int], b: list[int]) -> float:
        return min(pair[i, j] for i in a for j in b)

    while len(clusters) > 1:
        best = float("inf")
        best_pair = None
        for i in range(len(clusters) - 1):
            for j in range(i + 1, len(clusters)):
                d = cluster_dist(clusters[i], clusters[j])
                if d < best:
                    best = d
                    best_pair = (i, j)
        if best_pair is None or not best < threshold:
            break
        i, j = best_pair
        clusters[i] = clusters[i] + clusters[j]
        del clusters[j]

    labels = [0] * n
    order = sorted(range(len(clusters)), key=lambda c: min(clusters[c]))
    for label, c in enumerate(order):
        for i in clusters[c]:
            labels[i] = label
    return labels

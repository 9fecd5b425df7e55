import struct

import numpy as np
import pytest

from tapkit.tracks import (
    BadMagicError,
    Dataset,
    DepthMap,
    FlowField,
    LengthMismatchError,
    NonFiniteValueError,
    Query,
    SchemaViolationError,
    Track,
    TruncatedFileError,
    ZeroResolutionError,
    read_depth,
    read_flo,
    read_ppm,
    read_tracks,
    rescale_to_eval,
    write_depth,
    write_flo,
    write_ppm,
    write_tracks,
)


def _make_track(points, visible, query_t=0, tag="t0", resolution=(256, 256)):
    points = np.asarray(points, dtype=np.float64)
    return Track(
        points=points,
        visible=np.asarray(visible, dtype=bool),
        query=Query(query_t, points[query_t, 0], points[query_t, 1]),
        tag=tag,
        source_resolution=resolution,
    )


# ----------------------------------------------------------------------
# .flo files
# ----------------------------------------------------------------------

def test_read_flo_hand_assembled_buffer(tmp_path):
    # 2x2 field, u = 1..4 row-major, v = 0: bytes assembled by hand.
    buf = struct.pack("<f", 202021.25) + struct.pack("<ii", 2, 2)
    for u in (1.0, 2.0, 3.0, 4.0):
        buf += struct.pack("<ff", u, 0.0)
    path = tmp_path / "hand.flo"
    path.write_bytes(buf)
    field = read_flo(path)
    assert field.width == 2 and field.height == 2
    np.testing.assert_array_equal(
        field.uv[..., 0], np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    )
    np.testing.assert_array_equal(field.uv[..., 1], np.zeros((2, 2), dtype=np.float32))


def test_read_flo_zero_field(tmp_path):
    buf = struct.pack("<f", 202021.25) + struct.pack("<ii", 1, 1)
    buf += struct.pack("<ff", 0.0, 0.0)
    path = tmp_path / "zero.flo"
    path.write_bytes(buf)
    field = read_flo(path)
    np.testing.assert_array_equal(field.uv, np.zeros((1, 1, 2), dtype=np.float32))


def test_flo_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(7)
    field = FlowField(rng.normal(size=(5, 4, 2)).astype(np.float32))
    p1 = tmp_path / "a.flo"
    p2 = tmp_path / "b.flo"
    write_flo(field, p1)
    write_flo(read_flo(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_flo_bad_magic(tmp_path):
    path = tmp_path / "bad.flo"
    path.write_bytes(struct.pack("<f", 1.0) + struct.pack("<ii", 1, 1) + b"\0" * 8)
    with pytest.raises(BadMagicError):
        read_flo(path)


def test_flo_truncated(tmp_path):
    path = tmp_path / "short.flo"
    path.write_bytes(struct.pack("<f", 202021.25) + struct.pack("<ii", 4, 4))
    with pytest.raises(TruncatedFileError):
        read_flo(path)


def test_flo_non_finite(tmp_path):
    buf = struct.pack("<f", 202021.25) + struct.pack("<ii", 1, 1)
    buf += struct.pack("<ff", float("nan"), 0.0)
    path = tmp_path / "nan.flo"
    path.write_bytes(buf)
    with pytest.raises(NonFiniteValueError):
        read_flo(path)


# ----------------------------------------------------------------------
# Depth and PPM
# ----------------------------------------------------------------------

def test_depth_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    depth = DepthMap(rng.uniform(0.5, 10.0, size=(6, 5)).astype(np.float32))
    p1 = tmp_path / "a.tapd"
    p2 = tmp_path / "b.tapd"
    write_depth(depth, p1)
    write_depth(read_depth(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_bytes()[:4] == b"TAPD"


def test_depth_bad_magic(tmp_path):
    path = tmp_path / "bad.tapd"
    path.write_bytes(b"NOPE" + struct.pack("<II", 1, 1) + b"\0" * 4)
    with pytest.raises(BadMagicError):
        read_depth(path)


def test_ppm_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    img = rng.integers(0, 256, size=(4, 7, 3), dtype=np.uint8)
    p1 = tmp_path / "a.ppm"
    write_ppm(img, p1)
    back = read_ppm(p1)
    np.testing.assert_array_equal(img, back)
    assert p1.read_bytes().startswith(b"P6\n7 4\n255\n")


# ----------------------------------------------------------------------
# Track files
# ----------------------------------------------------------------------

def test_tracks_empty_list(tmp_path):
    ds = Dataset(video_id="v", width=64, height=48, fps=25.0, tracks=())
    path = tmp_path / "empty.json"
    write_tracks(ds, path)
    back = read_tracks(path)
    assert back.video_id == "v" and back.tracks == ()
    assert '"tracks": []' in path.read_text()


def test_tracks_round_trip_exact(tmp_path):
    track = _make_track(
        [[0.1234567890123, 5.0], [1e-17, 47.999999999999], [3.5, 7.25]],
        [True, False, True],
        resolution=(64, 48),
    )
    ds = Dataset(video_id="v", width=64, height=48, fps=25.0, tracks=(track,))
    path = tmp_path / "one.json"
    write_tracks(ds, path)
    back = read_tracks(path)
    np.testing.assert_array_equal(back.tracks[0].points, track.points)
    np.testing.assert_array_equal(back.tracks[0].visible, track.visible)
    assert back.tracks[0].query == track.query


def test_tracks_length_mismatch(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(
        """
        {"video_id": "v", "width": 8, "height": 8, "fps": 25.0,
         "tracks": [{"tag": "x", "query": {"t": 0, "x": 1, "y": 1},
                     "points": [[1, 1], [2, 2]], "visible": [true]}]}
        """
    )
    with pytest.raises(LengthMismatchError):
        read_tracks(path)


def test_dataset_rejects_mixed_lengths():
    t1 = _make_track([[1, 1], [2, 2]], [True, True])
    t2 = _make_track([[1, 1]], [True])
    with pytest.raises(LengthMismatchError):
        Dataset(video_id="v", width=256, height=256, fps=25.0, tracks=(t1, t2))


def test_track_rejects_non_finite():
    with pytest.raises(NonFiniteValueError):
        _make_track([[np.nan, 0.0]], [True])


def test_track_immutable():
    track = _make_track([[1, 1], [2, 2]], [True, True])
    with pytest.raises(ValueError):
        track.points[0, 0] = 9.0


# ----------------------------------------------------------------------
# Rescaling
# ----------------------------------------------------------------------

def test_rescale_exact_ratio():
    track = _make_track([[512.0, 256.0]], [True], resolution=(1024, 512))
    out = rescale_to_eval(track)
    np.testing.assert_allclose(out.points[0], [128.0, 128.0])
    assert out.source_resolution == (256, 256)


def test_rescale_identity_at_eval_resolution():
    track = _make_track([[31.25, 200.5]], [True], resolution=(256, 256))
    out = rescale_to_eval(track)
    np.testing.assert_array_equal(out.points, track.points)


def test_rescale_derived_720x480():
    # Direct arithmetic: 100*256/720 and 100*256/480.
    track = _make_track([[100.0, 100.0]], [True], resolution=(720, 480))
    out = rescale_to_eval(track)
    np.testing.assert_allclose(out.points[0, 0], 100.0 * 256.0 / 720.0, rtol=0, atol=1e-12)
    np.testing.assert_allclose(out.points[0, 1], 100.0 * 256.0 / 480.0, rtol=0, atol=1e-12)
    assert abs(out.points[0, 0] - 35.5555555555) < 1e-6
    assert abs(out.points[0, 1] - 53.3333333333) < 1e-6


def test_rescale_zero_resolution():
    track = _make_track([[1.0, 1.0]], [True])
    with pytest.raises(ZeroResolutionError):
        rescale_to_eval(track, 0, 256)


def test_rescale_is_linear():
    rng = np.random.default_rng(5)
    pts = rng.uniform(0, 100, size=(4, 2))
    for a in (0.25, 1.0, 3.0):
        t1 = _make_track(pts, [True] * 4, resolution=(720, 480))
        t2 = _make_track(a * pts, [True] * 4, resolution=(720, 480))
        np.testing.assert_allclose(
            rescale_to_eval(t2).points, a * rescale_to_eval(t1).points, atol=1e-9
        )


def test_visible_out_of_bounds_rejected():
    track = _make_track([[300.0, 10.0]], [True], resolution=(256, 256))
    with pytest.raises(SchemaViolationError):
        Dataset(video_id="v", width=256, height=256, fps=25.0, tracks=(track,))


def test_occluded_out_of_bounds_allowed():
    pts = np.array([[10.0, 10.0], [300.0, 10.0]])
    track = Track(
        points=pts,
        visible=np.array([True, False]),
        query=Query(0, 10.0, 10.0),
        tag="t",
        source_resolution=(256, 256),
    )
    ds = Dataset(video_id="v", width=256, height=256, fps=25.0, tracks=(track,))
    assert ds.num_frames == 2

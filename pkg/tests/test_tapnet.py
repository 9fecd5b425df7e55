import numpy as np
import pytest

from tapkit.tapnet import (
    DegenerateMassError,
    argmax_cell,
    ball_mask,
    bce_with_logit,
    bilinear_lookup,
    check_suite,
    cost_volume,
    default_grid,
    frame_loss,
    huber,
    loss_gradient,
    soft_argmax,
    spatial_softmax,
    tap_loss,
    to_unit,
)
from tapkit.tracks import Query


# ----------------------------------------------------------------------
# Bilinear lookup
# ----------------------------------------------------------------------

def test_bilinear_integer_positions_exact():
    rng = np.random.default_rng(0)
    grid = rng.normal(size=(2, 5, 6, 3))
    np.testing.assert_array_equal(bilinear_lookup(grid, 4, 2, 1), grid[1, 2, 4])


def test_bilinear_midpoint_of_four_cells():
    grid = np.zeros((1, 2, 2, 1))
    grid[0, 1, 0, 0] = 4.0
    grid[0, 1, 1, 0] = 4.0
    assert bilinear_lookup(grid, 0.5, 0.5, 0)[0] == 2.0


def test_bilinear_reproduces_linear_ramp():
    xs = np.arange(8, dtype=np.float64)
    ys = np.arange(6, dtype=np.float64)
    ramp = 2.0 * xs[None, :] + 3.0 * ys[:, None] + 1.0
    grid = ramp[None, :, :, None]
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.uniform(0, 7)
        y = rng.uniform(0, 5)
        want = 2.0 * x + 3.0 * y + 1.0
        assert bilinear_lookup(grid, x, y, 0)[0] == pytest.approx(want, abs=1e-12)


# ----------------------------------------------------------------------
# Cost volume
# ----------------------------------------------------------------------

def test_cost_volume_one_hot_features():
    d = 4
    grid = np.zeros((1, 3, 3, d))
    grid[0, ..., 1] = np.eye(3)  # e2 on the diagonal cells
    grid[0, 0, 1, 0] = 1.0
    c = cost_volume(grid, Query(0, 0.0, 0.0))  # query feature = e2
    assert c[0, 0, 0] == 1.0 and c[0, 1, 1] == 1.0 and c[0, 2, 2] == 1.0
    assert c[0, 0, 1] == 0.0


def test_cost_volume_antiparallel_features_clamp_to_zero():
    # Query feature is antiparallel to every feature in the other frame,
    # so that whole slice lands below zero and the ReLU floors it.
    grid = np.ones((2, 4, 4, 2))
    grid[0] = -1.0
    c = cost_volume(grid, Query(0, 2.0, 2.0))
    assert (c[1] == 0.0).all()
    assert (c[0] > 0.0).all()  # self-similarity survives the ReLU


def test_cost_volume_matches_triple_loop_oracle():
    rng = np.random.default_rng(2)
    grid = rng.normal(size=(3, 5, 6, 7))
    q = Query(1, 2.3, 3.7)
    got = cost_volume(grid, q)
    # Independent scalar route: bilinear by hand, then explicit loops.
    x0, y0 = int(q.x), int(q.y)
    fx, fy = q.x - x0, q.y - y0
    fq = (
        grid[1, y0, x0] * (1 - fx) * (1 - fy)
        + grid[1, y0, x0 + 1] * fx * (1 - fy)
        + grid[1, y0 + 1, x0] * (1 - fx) * fy
        + grid[1, y0 + 1, x0 + 1] * fx * fy
    )
    for t in range(3):
        for i in range(5):
            for j in range(6):
                dot = sum(fq[k] * grid[t, i, j, k] for k in range(7))
                assert got[t, i, j] == pytest.approx(max(dot, 0.0), abs=1e-6)


def test_cost_volume_bilinear_in_query_for_nonnegative_features():
    # With nonnegative features the ReLU is inactive and the volume is a
    # bilinear blend of the four corner-query volumes.
    rng = np.random.default_rng(3)
    grid = rng.uniform(0.1, 1.0, size=(2, 6, 6, 4))
    x, y = 2.4, 3.3
    corners = {
        (cx, cy): cost_volume(grid, Query(0, float(cx), float(cy)))
        for cx in (2, 3)
        for cy in (3, 4)
    }
    fx, fy = x - 2, y - 3
    blend = (
        corners[(2, 3)] * (1 - fx) * (1 - fy)
        + corners[(3, 3)] * fx * (1 - fy)
        + corners[(2, 4)] * (1 - fx) * fy
        + corners[(3, 4)] * fx * fy
    )
    np.testing.assert_allclose(cost_volume(grid, Query(0, x, y)), blend, atol=1e-9)


# ----------------------------------------------------------------------
# Soft argmax
# ----------------------------------------------------------------------

def test_soft_argmax_one_hot_identity():
    s = np.zeros((12, 10))
    s[3, 7] = 1.0
    out = soft_argmax(s)
    assert out[0] == 7.0 and out[1] == 3.0


def test_soft_argmax_uniform_ball_centroid():
    # Uniform mass over the ball (with a hair extra at the center so the
    # argmax is unique there): the output is the ball's centroid, which
    # by symmetry is the center itself.
    s = np.zeros((16, 16))
    center = (8, 8)
    mask = ball_mask(s.shape, center, 5.0)
    s[mask] = 1.0 / mask.sum()
    s[center] += 1e-9
    coords = default_grid(16, 16)[mask]
    np.testing.assert_allclose(coords.mean(axis=0), [8.0, 8.0], atol=1e-12)
    np.testing.assert_allclose(soft_argmax(s), [8.0, 8.0], atol=1e-9)


def test_soft_argmax_second_peak_outside_ball():
    s = np.zeros((24, 24))
    s[4, 4] = 0.6
    s[20, 20] = 0.4
    np.testing.assert_array_equal(soft_argmax(s, tau=5.0), [4.0, 4.0])


def test_soft_argmax_tie_breaks_lexicographic():
    s = np.zeros((6, 6))
    s[2, 3] = 0.5
    s[4, 1] = 0.5
    # (2, 3) comes first in row-major order.
    assert argmax_cell(s) == (2, 3)


def test_soft_argmax_strict_ball_excludes_radius_tau():
    s = np.zeros((16, 16))
    s[8, 8] = 0.6
    s[8, 13] = 0.4  # exactly 5 cells away: excluded by the strict ball
    np.testing.assert_array_equal(soft_argmax(s, tau=5.0), [8.0, 8.0])


def test_soft_argmax_inside_hull_of_ball_coords():
    rng = np.random.default_rng(4)
    for _ in range(50):
        s = spatial_softmax(rng.normal(0, 2, size=(11, 13)))
        out = soft_argmax(s)
        mask = ball_mask(s.shape, argmax_cell(s), 5.0)
        coords = default_grid(11, 13)[mask]
        assert coords[:, 0].min() - 1e-12 <= out[0] <= coords[:, 0].max() + 1e-12
        assert coords[:, 1].min() - 1e-12 <= out[1] <= coords[:, 1].max() + 1e-12


def test_soft_argmax_shift_equivariance():
    rng = np.random.default_rng(5)
    z = rng.normal(0, 1, size=(20, 20))
    z[10, 9] += 6.0  # dominant peak well inside
    s = spatial_softmax(z)
    base = soft_argmax(s)
    for dy, dx in ((1, 2), (-2, 1), (3, -3)):
        shifted = soft_argmax(np.roll(s, (dy, dx), axis=(0, 1)))
        np.testing.assert_allclose(shifted, base + [dx, dy], atol=1e-9)


def test_soft_argmax_degenerate_mass_guard():
    with pytest.raises(DegenerateMassError):
        soft_argmax(np.zeros((8, 8)))


def test_spatial_softmax_normalized():
    rng = np.random.default_rng(6)
    for _ in range(10):
        s = spatial_softmax(rng.normal(0, 5, size=(9, 7)))
        assert s.sum() == pytest.approx(1.0, abs=1e-6)
        assert (s >= 0).all()


# ----------------------------------------------------------------------
# Loss
# ----------------------------------------------------------------------

def test_tap_loss_goes_to_zero_with_confident_logits():
    pos = np.zeros((4, 2))
    occ = np.array([0.0, 0.0, 1.0, 1.0])
    prev = None
    for scale in (1.0, 5.0, 20.0, 80.0):
        logits = (occ * 2 - 1) * scale
        loss = tap_loss(pos, logits, pos, occ)
        if prev is not None:
            assert loss < prev
        prev = loss
    assert prev < 1e-30


def test_tap_loss_huber_value_at_threshold():
    # One visible frame with distance exactly 1/32: quadratic branch.
    pred = np.array([[1.0 / 32.0, 0.0]])
    gt = np.array([[0.0, 0.0]])
    loss = tap_loss(pred, np.array([-50.0]), gt, np.array([0.0]))
    assert loss == pytest.approx(0.5 * (1.0 / 32.0) ** 2, rel=0, abs=1e-18)
    assert loss == pytest.approx(1.0 / 2048.0, abs=1e-18)


def test_tap_loss_occluded_frames_skip_position_term():
    pred = np.array([[0.9, -0.7]])
    gt = np.array([[0.0, 0.0]])
    occluded = tap_loss(pred, np.array([50.0]), gt, np.array([1.0]))
    assert occluded == pytest.approx(0.0, abs=1e-18)


def test_tap_loss_linear_branch():
    d = 0.5
    pred = np.array([[d, 0.0]])
    gt = np.array([[0.0, 0.0]])
    loss = tap_loss(pred, np.array([-50.0]), gt, np.array([0.0]))
    delta = 1.0 / 32.0
    assert loss == pytest.approx(delta * (d - delta / 2), abs=1e-15)


def test_tap_loss_nonnegative():
    rng = np.random.default_rng(7)
    for _ in range(50):
        pred = rng.uniform(-1, 1, size=(6, 2))
        gt = rng.uniform(-1, 1, size=(6, 2))
        logits = rng.normal(0, 3, size=6)
        occ = (rng.random(6) < 0.5).astype(float)
        assert tap_loss(pred, logits, gt, occ) >= 0.0


def test_huber_and_bce_shapes():
    assert huber(0.0) == 0.0
    assert bce_with_logit(0.0, 0.0) == pytest.approx(np.log(2.0))
    np.testing.assert_allclose(
        bce_with_logit(np.array([100.0]), np.array([1.0])), [0.0], atol=1e-12
    )


def test_to_unit_maps_corners():
    pts = np.array([[0.0, 0.0], [255.0, 255.0], [127.5, 127.5]])
    out = to_unit(pts, 256, 256)
    np.testing.assert_allclose(out, [[-1.0, -1.0], [1.0, 1.0], [0.0, 0.0]], atol=1e-12)


# ----------------------------------------------------------------------
# Gradients
# ----------------------------------------------------------------------

def test_occlusion_gradient_is_sigmoid_minus_target():
    z = np.zeros((8, 8))
    z[4, 4] = 5.0
    for logit in (-2.0, 0.0, 1.5):
        for occ in (False, True):
            grad = loss_gradient(z, logit, np.array([4.0, 4.0]), occ, lam=1.0)
            want = 1.0 / (1.0 + np.exp(-logit)) - float(occ)
            assert grad.d_occ_logit == pytest.approx(want, abs=1e-12)


def test_position_gradient_zero_at_exact_match():
    z = np.zeros((9, 9))
    z[4, 4] = 8.0
    s = spatial_softmax(z)
    p = soft_argmax(s)
    grad = loss_gradient(z, 0.0, p, False)
    np.testing.assert_allclose(grad.d_logits, 0.0, atol=1e-15)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(8)
    h = 1e-4
    checked = 0
    for _ in range(60):
        z = rng.normal(0, 2, size=(10, 10))
        occ_logit = float(rng.normal(0, 2))
        gt = np.array([rng.uniform(0, 9), rng.uniform(0, 9)])
        occluded = bool(rng.random() < 0.25)
        grad = loss_gradient(z, occ_logit, gt, occluded)
        if not grad.stable:
            continue
        checked += 1
        for _ in range(5):
            i = int(rng.integers(0, 10))
            j = int(rng.integers(0, 10))
            zp = z.copy()
            zp[i, j] += h
            zm = z.copy()
            zm[i, j] -= h
            fd = (
                frame_loss(zp, occ_logit, gt, occluded)
                - frame_loss(zm, occ_logit, gt, occluded)
            ) / (2 * h)
            got = grad.d_logits[i, j]
            assert abs(fd - got) <= 1e-4 * max(abs(fd), abs(got), 1e-5)
        fd_occ = (
            frame_loss(z, occ_logit + h, gt, occluded)
            - frame_loss(z, occ_logit - h, gt, occluded)
        ) / (2 * h)
        assert abs(fd_occ - grad.d_occ_logit) <= 1e-4 * max(
            abs(fd_occ), abs(grad.d_occ_logit), 1e-5
        )
    assert checked >= 50


def test_unstable_instances_are_flagged():
    z = np.zeros((6, 6))  # fully tied argmax
    grad = loss_gradient(z, 0.0, np.array([2.0, 2.0]), False)
    assert not grad.stable


def test_check_suite_report():
    report = check_suite(seed=0, instances=50)
    assert report["softmax_normalized"] == 50
    assert report["hull_pass"] == 50
    assert report["stable"] > 30
    assert report["gradient_pass"] >= 0.99 * report["stable"]
    assert report["max_rel_err"] < 1e-4

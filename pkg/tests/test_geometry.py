import numpy as np
import pytest

from tstlab.geometry import (AffinePlane, Ball, GeometryError, PointCloud,
                             UndefinedSideError, exact_diameter,
                             local_hausdorff_distance, orthonormal_frame,
                             plane_angle, plane_pair_distance)


def random_plane(rng, ambient, dim):
    base = rng.normal(size=ambient)
    vecs = rng.normal(size=(dim, ambient))
    return AffinePlane.from_spanning(base, vecs)


# ---------------------------------------------------------------- planes

def test_projection_is_idempotent_and_lands_on_plane(rng):
    for ambient, dim in [(2, 1), (3, 1), (3, 2), (5, 3)]:
        plane = random_plane(rng, ambient, dim)
        pts = rng.normal(size=(40, ambient))
        proj = plane.project(pts)
        np.testing.assert_allclose(plane.project(proj), proj, atol=1e-12)
        assert np.max(plane.dist(proj)) <= 1e-12


def test_frame_is_orthonormal(rng):
    frame = orthonormal_frame(rng.normal(size=(3, 5)))
    np.testing.assert_allclose(frame @ frame.T, np.eye(3), atol=1e-12)


def test_rank_deficient_span_rejected():
    with pytest.raises(GeometryError, match="rank deficient"):
        orthonormal_frame(np.array([[1.0, 0.0], [2.0, 0.0]]))


def test_plane_invariant_under_respanning(rng):
    # same plane from a different (ill-conditioned) spanning set: distances
    # agree to 1e-10
    plane = random_plane(rng, 4, 2)
    mix = plane.frame.T @ np.array([[3.0, 1e-4], [2.9999, 2e-4]]).T
    other = AffinePlane.from_spanning(plane.base + plane.frame[0] * 5.0, mix.T)
    pts = rng.normal(size=(60, 4)) * 3.0
    np.testing.assert_allclose(plane.dist(pts), other.dist(pts), atol=1e-10)


def test_point_plane_distance_matches_dense_sampling_oracle(rng):
    plane = random_plane(rng, 3, 2)
    pts = rng.normal(size=(10, 3)) * 2.0
    # oracle: min distance to a dense sample of the plane patch
    coords = rng.uniform(-40, 40, size=(400_000, 2))
    patch = plane.from_tangent(coords)
    oracle = np.min(np.linalg.norm(pts[:, None, :] - patch[None, :, :],
                                   axis=2), axis=1)
    np.testing.assert_allclose(plane.dist(pts), oracle, atol=1e-1, rtol=0.05)
    assert np.all(plane.dist(pts) <= oracle + 1e-12)


def test_tangent_round_trip(rng):
    plane = random_plane(rng, 5, 2)
    coords = rng.normal(size=(30, 2))
    np.testing.assert_allclose(
        plane.tangent_coords(plane.from_tangent(coords)), coords, atol=1e-12)


# ----------------------------------------------------------- plane_angle

def test_plane_angle_of_rotated_line_is_sine():
    theta = np.pi / 6
    p = AffinePlane.axis_aligned(1, 2)
    q = AffinePlane.from_spanning(
        np.zeros(2), np.array([[np.cos(theta), np.sin(theta)]]))
    assert plane_angle(p, q) == pytest.approx(0.5, abs=1e-12)


def test_plane_angle_extremes():
    p = AffinePlane.axis_aligned(1, 3)
    q = AffinePlane.from_spanning(np.zeros(3), np.array([[0.0, 0.0, 1.0]]))
    assert plane_angle(p, p) == pytest.approx(0.0, abs=1e-12)
    assert plane_angle(p, q) == pytest.approx(1.0, abs=1e-12)


def test_plane_angle_ignores_translation(rng):
    # sqrt(1 - sigma^2) can't resolve angles below ~sqrt(eps) when the
    # re-orthonormalized frame differs in the last bit
    p = random_plane(rng, 4, 2)
    q = p.translate_to(rng.normal(size=4))
    assert plane_angle(p, q) <= 1e-7


def test_plane_angle_triangle_inequality(rng):
    for _ in range(50):
        p, q, r = (random_plane(rng, 4, 2) for _ in range(3))
        assert plane_angle(p, r) <= plane_angle(p, q) + plane_angle(q, r) + 1e-9


def test_plane_angle_dimension_mismatch_rejected(rng):
    with pytest.raises(GeometryError):
        plane_angle(random_plane(rng, 3, 1), random_plane(rng, 3, 2))


# ------------------------------------------------- local Hausdorff metric

def test_two_singletons_at_radius_give_one():
    r = 0.7
    ball = Ball(np.zeros(2), r)
    e = np.zeros((1, 2))
    f = np.array([[r, 0.0]])
    assert local_hausdorff_distance(e, f, ball) == pytest.approx(1.0, rel=1e-12)


def test_local_hausdorff_is_symmetric_and_zero_on_self(rng):
    ball = Ball(np.zeros(3), 1.0)
    e = rng.uniform(-0.9, 0.9, size=(50, 3))
    f = rng.uniform(-0.9, 0.9, size=(40, 3))
    assert local_hausdorff_distance(e, e, ball) == 0.0
    assert (local_hausdorff_distance(e, f, ball)
            == pytest.approx(local_hausdorff_distance(f, e, ball), rel=1e-12))


def test_local_hausdorff_triangle_inequality(rng):
    ball = Ball(np.zeros(2), 1.0)
    for _ in range(30):
        e, f, g = (rng.uniform(-0.8, 0.8, size=(25, 2)) for _ in range(3))
        d_eg = local_hausdorff_distance(e, g, ball)
        d_ef = local_hausdorff_distance(e, f, ball)
        d_fg = local_hausdorff_distance(f, g, ball)
        assert d_eg <= d_ef + d_fg + 1e-9


def test_local_hausdorff_against_plane_uses_grid(rng):
    # set = plane samples displaced by h: distance ~ 2h/diam up to pitch
    plane = AffinePlane.axis_aligned(1, 2)
    ball = Ball(np.zeros(2), 1.0)
    h = 0.05
    xs = np.linspace(-1, 1, 2001)
    e = np.column_stack([xs, np.full_like(xs, h)])
    value = local_hausdorff_distance(e, plane, ball)
    assert h <= value <= 1.2 * h + 2 * 0.015625


def test_empty_side_raises_named_error():
    ball = Ball(np.zeros(2), 1.0)
    inside = np.zeros((1, 2))
    outside = np.array([[5.0, 5.0]])
    with pytest.raises(UndefinedSideError) as info:
        local_hausdorff_distance(inside, outside, ball)
    assert info.value.side == "second"
    with pytest.raises(UndefinedSideError) as info:
        local_hausdorff_distance(outside, inside, ball)
    assert info.value.side == "first"


def test_plane_pair_distance_scales_with_angle():
    ball = Ball(np.zeros(2), 2.0)
    p = AffinePlane.axis_aligned(1, 2)
    for theta in (0.01, 0.05, 0.2):
        q = AffinePlane.from_spanning(
            np.zeros(2), np.array([[np.cos(theta), np.sin(theta)]]))
        value = plane_pair_distance(p, q, ball)
        assert np.sin(theta) / 2 <= value <= 2 * np.sin(theta)


# ------------------------------------------------------------ primitives

def test_ball_contains_and_scaled():
    ball = Ball(np.array([1.0, 0.0]), 2.0)
    pts = np.array([[1.0, 1.9], [1.0, 2.1], [4.9, 0.0]])
    np.testing.assert_array_equal(ball.contains(pts), [True, False, False])
    assert ball.scaled(2.5).radius == 5.0
    np.testing.assert_array_equal(ball.scaled(2.5).center, ball.center)


def test_ball_rejects_bad_radius():
    with pytest.raises(GeometryError):
        Ball(np.zeros(2), -1.0)
    with pytest.raises(GeometryError):
        Ball(np.zeros(2), np.inf)


def test_cloud_rejects_non_finite():
    with pytest.raises(GeometryError):
        PointCloud(np.array([[0.0, np.nan]]))


def test_exact_diameter_matches_brute_force(rng):
    pts = rng.normal(size=(300, 3))
    gaps = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    assert exact_diameter(pts) == pytest.approx(gaps.max(), rel=1e-12)


def test_grid_in_ball_lies_on_plane_with_default_pitch(rng):
    plane = random_plane(rng, 3, 2)
    center = plane.project(rng.normal(size=3))
    ball = Ball(center, 2.0)
    grid = plane.grid_in_ball(ball)
    assert len(grid) > 0
    assert np.max(plane.dist(grid)) <= 1e-9
    assert np.all(ball.contains(grid, tol=1e-9))
    # default pitch is r/64: nearest-neighbor spacing equals it
    from scipy.spatial import cKDTree
    spacing = cKDTree(grid).query(grid, k=2)[0][:, 1]
    assert spacing.min() == pytest.approx(ball.radius / 64, rel=1e-9)

"""Primitive geometry: balls, affine planes, and scale-free local distances.

Conventions used throughout the package:

* point sets are (N, n) float64 arrays, or ``PointCloud`` wrappers around one;
* balls are closed, so "E inside B" always means distance <= radius;
* a d-plane is a base point plus an orthonormal (d, n) row frame;
* the bilateral distance between two sets inside a ball carries the
  2/diam(B) normalization: a reading of t means the sets track each other to
  within t * r_B there;
* suprema over the continuous side of a plane are taken on a deterministic
  lattice of pitch ``pitch_frac * r_B``.  The lattice under-reads the true
  supremum by at most one pitch; callers that compare against analytic values
  budget for that in their tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

# Lattice pitch for plane-side suprema, as a fraction of the ball radius.
# 1/64 keeps one-dimensional grids at ~129 points and keeps the sampling
# error an order of magnitude below the certificate tolerances used here.
DEFAULT_PITCH_FRAC = 1.0 / 64.0

# Refuse to materialize plane lattices beyond this size; the caller should
# coarsen the pitch instead of silently burning memory.
_MAX_LATTICE_POINTS = 2_000_000


class GeometryError(ValueError):
    """Malformed geometric input."""


class UndefinedSideError(GeometryError):
    """A bilateral distance was requested but one side misses the ball."""

    def __init__(self, side: str, message: str):
        super().__init__(message)
        self.side = side


@dataclass(frozen=True)
class ToleranceConfig:
    """Absolute/relative slack for geometric predicates and certificates."""

    abs_tol: float = 1e-9
    rel_tol: float = 1e-7

    def close(self, a: float, b: float) -> bool:
        return abs(a - b) <= self.abs_tol + self.rel_tol * max(abs(a), abs(b))

    def leq(self, a: float, b: float) -> bool:
        return a <= b + self.abs_tol + self.rel_tol * abs(b)


DEFAULT_TOL = ToleranceConfig()


@dataclass(frozen=True, eq=False)
class Ball:
    """Closed ball. Zero radius is allowed (it shows up in cover reports);
    operations that need an interior reject it explicitly."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).reshape(-1)
        if center.size == 0 or not np.all(np.isfinite(center)):
            raise GeometryError("ball center must be a finite vector")
        radius = float(self.radius)
        if not (radius >= 0.0 and math.isfinite(radius)):
            raise GeometryError(f"ball radius must be finite and >= 0, got {radius}")
        center = center.copy()
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", radius)

    @property
    def ambient_dim(self) -> int:
        return self.center.shape[0]

    def scaled(self, factor: float) -> "Ball":
        """Concentric ball with the radius scaled by ``factor``."""
        return Ball(self.center, self.radius * float(factor))

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.norm(pts - self.center, axis=1) <= self.radius + tol

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"


class PointCloud:
    """Immutable (N, n) sample array with cached spatial queries."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise GeometryError("point cloud must be a nonempty (N, n) array")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("point cloud contains non-finite coordinates")
        pts = pts.copy()
        pts.setflags(write=False)
        self.points = pts
        self._tree = None
        self._diameter = None

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.points)
        return self._tree

    def indices_in_ball(self, ball: Ball) -> np.ndarray:
        """Sorted cloud indices inside the closed ball."""
        idx = self.tree.query_ball_point(ball.center, ball.radius)
        return np.sort(np.asarray(idx, dtype=np.intp))

    def nearest_distance(self, queries) -> np.ndarray:
        """Distance from each query point to the cloud."""
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        dist, _ = self.tree.query(q)
        return np.asarray(dist, dtype=float).reshape(-1)

    def diameter(self) -> float:
        if self._diameter is None:
            self._diameter = exact_diameter(self.points)
        return self._diameter

    def __repr__(self):
        return f"PointCloud(n_points={len(self)}, ambient_dim={self.ambient_dim})"


def as_cloud(obj) -> PointCloud:
    return obj if isinstance(obj, PointCloud) else PointCloud(obj)


def exact_diameter(points: np.ndarray) -> float:
    """Max pairwise distance, chunked so the distance matrix never
    materializes whole."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[0]
    if n < 2:
        return 0.0
    sq = np.einsum("ij,ij->i", pts, pts)
    chunk = max(16, int(4_000_000 // n))
    best = 0.0
    for start in range(0, n, chunk):
        block = pts[start : start + chunk]
        d2 = sq[start : start + chunk, None] + sq[None, :] - 2.0 * (block @ pts.T)
        best = max(best, float(d2.max()))
    return math.sqrt(max(best, 0.0))


def orthonormal_frame(vectors) -> np.ndarray:
    """Orthonormalize spanning rows; raises on rank deficiency."""
    v = np.atleast_2d(np.asarray(vectors, dtype=float))
    if not np.all(np.isfinite(v)):
        raise GeometryError("spanning vectors must be finite")
    q, r = np.linalg.qr(v.T)
    diag = np.abs(np.diag(r))
    scale = max(float(np.max(np.abs(v))), 1.0)
    if np.any(diag <= 1e-12 * scale):
        raise GeometryError("spanning vectors are rank deficient")
    return np.ascontiguousarray(q.T[: v.shape[0]])


@dataclass(frozen=True, eq=False)
class AffinePlane:
    """d-plane through ``base`` spanned by the orthonormal rows of ``frame``."""

    base: np.ndarray
    frame: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float).reshape(-1)
        frame = np.atleast_2d(np.asarray(self.frame, dtype=float))
        n = base.shape[0]
        d = frame.shape[0]
        if frame.shape[1] != n:
            raise GeometryError("frame and base ambient dimensions disagree")
        if not 1 <= d < n:
            raise GeometryError(f"plane dimension must satisfy 1 <= d < n, got d={d}, n={n}")
        if not (np.all(np.isfinite(base)) and np.all(np.isfinite(frame))):
            raise GeometryError("plane data must be finite")
        gram = frame @ frame.T
        if not np.allclose(gram, np.eye(d), atol=1e-10):
            raise GeometryError("plane frame rows must be orthonormal")
        base = base.copy()
        frame = frame.copy()
        base.setflags(write=False)
        frame.setflags(write=False)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "frame", frame)

    @property
    def dim(self) -> int:
        return self.frame.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.frame.shape[1]

    @classmethod
    def from_spanning(cls, base, vectors) -> "AffinePlane":
        return cls(base, orthonormal_frame(vectors))

    @classmethod
    def axis_aligned(cls, dim: int, ambient_dim: int, base=None) -> "AffinePlane":
        """Span of the first ``dim`` coordinate axes."""
        if base is None:
            base = np.zeros(ambient_dim)
        return cls(base, np.eye(ambient_dim)[:dim])

    def tangent_coords(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (pts - self.base) @ self.frame.T

    def from_tangent(self, coords) -> np.ndarray:
        t = np.atleast_2d(np.asarray(coords, dtype=float))
        return self.base + t @ self.frame

    def project(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts2 = np.atleast_2d(pts)
        out = self.base + ((pts2 - self.base) @ self.frame.T) @ self.frame
        return out[0] if single else out

    def dist(self, points):
        """Euclidean distance to the plane; scalar in, scalar out."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts2 = np.atleast_2d(pts)
        res = pts2 - self.base
        res = res - (res @ self.frame.T) @ self.frame
        d = np.linalg.norm(res, axis=1)
        return float(d[0]) if single else d

    def translate_to(self, point) -> "AffinePlane":
        """Parallel plane through ``point``."""
        return AffinePlane(point, self.frame)

    def disk_in_ball(self, ball: Ball):
        """(tangent center, radius) of plane ∩ ball, or None when disjoint."""
        t0 = self.frame @ (ball.center - self.base)
        perp = self.dist(ball.center)
        if perp > ball.radius:
            return None
        return t0, math.sqrt(max(ball.radius ** 2 - perp ** 2, 0.0))

    def grid_in_ball(self, ball: Ball, pitch: float | None = None,
                     pitch_frac: float = DEFAULT_PITCH_FRAC) -> np.ndarray:
        """Deterministic lattice sample of plane ∩ ball.

        Empty iff the plane misses the closed ball. Always contains the
        projection of the ball center otherwise.
        """
        if ball.radius <= 0.0:
            raise GeometryError("plane lattice needs a ball of positive radius")
        if pitch is None:
            pitch = ball.radius * pitch_frac
        if not (pitch > 0.0 and math.isfinite(pitch)):
            raise GeometryError(f"lattice pitch must be positive, got {pitch}")
        disk = self.disk_in_ball(ball)
        if disk is None:
            return np.empty((0, self.ambient_dim))
        t0, s = disk
        m = int(math.floor(s / pitch))
        d = self.dim
        if (2 * m + 1) ** d > _MAX_LATTICE_POINTS:
            raise GeometryError(
                f"plane lattice would need {(2 * m + 1) ** d} points; pass a coarser pitch")
        axis = np.arange(-m, m + 1) * pitch
        mesh = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
        keep = np.einsum("ij,ij->i", mesh, mesh) <= s * s * (1.0 + 1e-12)
        return self.base + (t0 + mesh[keep]) @ self.frame

    def __repr__(self):
        return f"AffinePlane(dim={self.dim}, ambient_dim={self.ambient_dim})"


def dist_point_plane(points, plane: AffinePlane):
    """Distance from one point (or a batch) to a plane."""
    return plane.dist(points)


def plane_angle(p: AffinePlane, q: AffinePlane) -> float:
    """Sine of the largest principal angle between two planes of equal dim.

    Equals the bilateral unit-ball distance between the planes after moving
    both through the origin: 0 for parallel, 1 for orthogonal directions.
    """
    if p.dim != q.dim:
        raise GeometryError("plane_angle needs planes of equal dimension")
    if p.ambient_dim != q.ambient_dim:
        raise GeometryError("plane_angle needs planes in the same ambient space")
    sig = np.linalg.svd(p.frame @ q.frame.T, compute_uv=False)
    smin = float(np.clip(sig.min(), -1.0, 1.0))
    return math.sqrt(max(1.0 - smin * smin, 0.0))


def _sphere_directions(dim: int, samples: int) -> np.ndarray:
    """Deterministic unit directions in R^dim: exact endpoints for dim 1, a
    regular polygon for dim 2, a fixed-seed normalized Gaussian cloud above."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        angles = 2.0 * math.pi * np.arange(samples) / samples
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)
    rng = np.random.default_rng(1234567891)
    v = rng.standard_normal((samples, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def plane_pair_distance(first: AffinePlane, second: AffinePlane, ball: Ball,
                        boundary_samples: int = 256) -> float:
    """Normalized bilateral distance between two planes over a ball.

    (1/r) * max over both plane-ball disks of the distance to the other
    plane. Distance to a plane is convex, so each disk's sup sits on its
    boundary sphere: exact for lines, boundary-sampled otherwise. Empty
    intersections contribute zero.
    """
    if ball.radius <= 0.0:
        raise GeometryError("plane distance needs a ball of positive radius")
    sups = []
    for plane, other in ((first, second), (second, first)):
        disk = plane.disk_in_ball(ball)
        if disk is None:
            sups.append(0.0)
            continue
        t0, s = disk
        dirs = _sphere_directions(plane.dim, boundary_samples)
        pts = plane.from_tangent(t0 + s * dirs)
        sups.append(float(np.max(other.dist(pts))) if pts.shape[0] else 0.0)
    return max(sups) / ball.radius


def _side_samples(side, ball: Ball, pitch_frac: float, label: str) -> np.ndarray:
    """Restriction of one side (cloud or plane) to the ball; raises if empty."""
    if isinstance(side, AffinePlane):
        samples = side.grid_in_ball(ball, pitch_frac=pitch_frac)
        if samples.shape[0] == 0:
            raise UndefinedSideError(label, f"{label} plane misses the ball")
        return samples
    cloud = as_cloud(side)
    idx = cloud.indices_in_ball(ball)
    if idx.size == 0:
        raise UndefinedSideError(label, f"{label} point set misses the ball")
    return cloud.points[idx]


def _sup_dist_to(samples: np.ndarray, target) -> float:
    """sup over samples of the distance to the (unrestricted) target set."""
    if isinstance(target, AffinePlane):
        return float(np.max(target.dist(samples)))
    return float(np.max(as_cloud(target).nearest_distance(samples)))


def local_hausdorff_distance(first, second, ball: Ball,
                             pitch_frac: float = DEFAULT_PITCH_FRAC) -> float:
    """Bilateral sup-distance between two sets inside ``ball``, times 2/diam(B).

    Each side may be a point set or an AffinePlane; the sup on each side runs
    over that side's intersection with the ball, measured against the other
    side as a whole. Raises UndefinedSideError when a side misses the ball.
    """
    if ball.radius <= 0.0:
        raise GeometryError("local distance needs a ball of positive radius")
    first_samples = _side_samples(first, ball, pitch_frac, "first")
    second_samples = _side_samples(second, ball, pitch_frac, "second")
    sup = max(_sup_dist_to(first_samples, second), _sup_dist_to(second_samples, first))
    return sup / ball.radius

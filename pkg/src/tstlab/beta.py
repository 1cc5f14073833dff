"""Flatness functionals over balls, and their multiscale sums over cube trees.

Four local quantities, each an infimum over d-planes L (r = ball radius):

* ``beta_inf``   (2/r) * sup distance from the sample inside the ball to L;
* ``beta_dp``    ((1/r^d) * int_0^1 H^d({dist(.,L) > t r}) t^(p-1) dt)^(1/p),
                 the content-Choquet average of dist/r;
* ``bbeta``      bilateral: max of sup dist(sample, L) and sup dist(L, sample)
                 inside the ball, normalized by r;
* ``eta_inf``    (1/r) * sup over L inside the ball of the distance back to
                 the sample (the "plane has no holes" half of bbeta).

The infimum is approximated by a deterministic search: a content-weighted PCA
plane refined by coordinate descent over base offsets along normal candidate
directions and rotations of each frame vector toward them, candidates drawn
from the top 2d principal directions of the local sample.

``tst_report`` walks a cube subtree and accumulates the two sides of the
traveling-salesman comparison: side(root)^d + sum of beta^2 side^d against a
measure proxy plus the bilaterally-non-flat cube sum at inflation ``a_factor``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .content import ContentIndex
from .cubes import Cube, CubeTree
from .geometry import (DEFAULT_PITCH_FRAC, AffinePlane, Ball, GeometryError,
                       PointCloud, as_cloud, orthonormal_frame, plane_angle)
from .util import format_float, worker_count


def critical_exponent(dimension: int) -> float:
    """Largest usable Choquet exponent: 2d/(d-2) above dimension two,
    unbounded otherwise."""
    d = float(dimension)
    if d > 2.0:
        return 2.0 * d / (d - 2.0)
    return math.inf


@dataclass(frozen=True)
class PlaneSearchConfig:
    max_iterations: int = 200      # coordinate line searches, total
    rel_improvement: float = 1e-6  # sweep gain below this stops the search
    angle_bound: float = 0.6       # radians, per rotation line search
    offset_fraction: float = 0.25  # base offset bound as a fraction of r
    line_search_steps: int = 24


DEFAULT_SEARCH = PlaneSearchConfig()


@dataclass
class BetaValue:
    value: float
    plane: AffinePlane
    kind: str
    dimension: int
    ball: Ball
    p: float | None = None
    degenerate: bool = False
    n_points: int = 0

    def to_dict(self):
        return {
            "value": self.value,
            "kind": self.kind,
            "dimension": self.dimension,
            "p": self.p,
            "degenerate": self.degenerate,
            "n_points": self.n_points,
            "plane_base": [float(x) for x in self.plane.base],
            "plane_frame": [[float(x) for x in row] for row in self.plane.frame],
        }


def _completed_frame(vectors, dimension: int, ambient_dim: int) -> np.ndarray:
    """Orthonormal (d, n) frame extending ``vectors``; axis directions fill
    the remaining rows deterministically."""
    rows = []
    for v in list(vectors) + [np.eye(ambient_dim)[j] for j in range(ambient_dim)]:
        c = np.asarray(v, dtype=float).copy()
        for u in rows:
            c -= (c @ u) * u
        norm = np.linalg.norm(c)
        if norm > 1e-10:
            rows.append(c / norm)
        if len(rows) == dimension:
            break
    return np.asarray(rows)


def _weighted_pca(pts: np.ndarray, weights: np.ndarray, dimension: int):
    """(plane, principal directions in descending order)."""
    w = weights / weights.sum()
    mu = w @ pts
    x = pts - mu
    cov = (x * w[:, None]).T @ x
    _, vecs = np.linalg.eigh(cov)
    principal = vecs[:, ::-1].T  # descending eigenvalue order
    frame = _completed_frame(principal[:dimension], dimension, pts.shape[1])
    return AffinePlane(mu, frame), principal


def _content_weights(index: ContentIndex) -> np.ndarray:
    """Per-point weight: finest-group cover cost shared across the group.

    De-biases sampling density: a dense clump and a sparse stretch of the
    same extent carry the same total weight. Radii are floored at a quarter
    of the resolution so isolated points keep a voice.
    """
    k = index.n_levels - 1
    group = index.group_of[k]
    dist = index.site_dist[k]
    radii = np.zeros(index.n_groups[k])
    np.maximum.at(radii, group, dist)
    radii = np.maximum(radii, index.resolution / 4.0)
    counts = np.bincount(group, minlength=index.n_groups[k])
    cost = (2.0 * radii) ** index.dimension
    return cost[group] / counts[group]


def _normal_candidates(plane: AffinePlane, principal: np.ndarray, limit: int):
    """Unit directions orthogonal to the plane, drawn from the leading
    principal directions."""
    out = []
    for v in principal[:limit]:
        c = v - plane.frame.T @ (plane.frame @ v)
        for u in out:
            c -= (c @ u) * u
        norm = np.linalg.norm(c)
        if norm > 1e-9:
            out.append(c / norm)
    return out


def _rotated(plane: AffinePlane, row: int, normal: np.ndarray, angle: float) -> AffinePlane:
    frame = plane.frame.copy()
    frame[row] = math.cos(angle) * frame[row] + math.sin(angle) * normal
    gram = frame @ frame.T
    if not np.allclose(gram, np.eye(frame.shape[0]), atol=1e-12):
        frame = orthonormal_frame(frame)
    return AffinePlane(plane.base, frame)


def _line_search(evaluate, bound: float, steps: int):
    """Bounded scalar minimization around 0; returns (best_t, best_value)."""
    res = minimize_scalar(evaluate, bounds=(-bound, bound), method="bounded",
                          options={"xatol": bound * 1e-6, "maxiter": steps})
    t = float(res.x)
    v = float(res.fun)
    v0 = evaluate(0.0)
    if v0 <= v:
        return 0.0, v0
    return t, v


def _search_plane(objective, pts: np.ndarray, weights: np.ndarray, dimension: int,
                  ball: Ball, config: PlaneSearchConfig):
    """Minimize ``objective`` over d-planes; returns (value, witness plane)."""
    plane, principal = _weighted_pca(pts, weights, dimension)
    best = objective(plane)
    iterations = 0
    while iterations < config.max_iterations and best > 0.0:
        sweep_start = best
        for row in range(dimension):
            for normal in _normal_candidates(plane, principal, 2 * dimension):
                if iterations >= config.max_iterations:
                    break
                iterations += 1
                t, v = _line_search(
                    lambda a: objective(_rotated(plane, row, normal, a)),
                    config.angle_bound, config.line_search_steps)
                if v < best:
                    best, plane = v, _rotated(plane, row, normal, t)
        for normal in _normal_candidates(plane, principal, 2 * dimension):
            if iterations >= config.max_iterations:
                break
            iterations += 1
            bound = config.offset_fraction * ball.radius
            t, v = _line_search(
                lambda s: objective(AffinePlane(plane.base + s * normal, plane.frame)),
                bound, config.line_search_steps)
            if v < best:
                best, plane = v, AffinePlane(plane.base + t * normal, plane.frame)
        if sweep_start - best < config.rel_improvement * max(sweep_start, 1e-30):
            break
    return best, plane


def _local_sample(cloud: PointCloud, ball: Ball):
    idx = cloud.indices_in_ball(ball)
    return cloud.points[idx], idx


def _degenerate_result(pts: np.ndarray, kind: str, dimension: int, ball: Ball,
                       p: float | None) -> BetaValue:
    if pts.shape[0] == 0:
        base = ball.center
        vectors = []
    else:
        base = pts[0]
        vectors = [v - base for v in pts[1:]]
    frame = _completed_frame(vectors, dimension, ball.ambient_dim)
    return BetaValue(value=0.0, plane=AffinePlane(base, frame), kind=kind,
                     dimension=dimension, ball=ball, p=p, degenerate=True,
                     n_points=int(pts.shape[0]))


def _validate_ball(ball: Ball):
    if ball.radius <= 0.0:
        raise GeometryError("flatness functionals need a ball of positive radius")


def beta_inf(cloud, ball: Ball, dimension: int, plane: AffinePlane | None = None,
             config: PlaneSearchConfig = DEFAULT_SEARCH) -> BetaValue:
    """(2/r) * inf over d-planes of the sup distance from cloud ∩ ball."""
    _validate_ball(ball)
    cloud = as_cloud(cloud)
    pts, _ = _local_sample(cloud, ball)
    if pts.shape[0] <= dimension and plane is None:
        return _degenerate_result(pts, "beta_inf", dimension, ball, None)
    r = ball.radius

    def objective(candidate: AffinePlane) -> float:
        return 2.0 / r * float(np.max(candidate.dist(pts)))

    if plane is not None:
        return BetaValue(value=objective(plane), plane=plane, kind="beta_inf",
                         dimension=dimension, ball=ball, n_points=pts.shape[0])
    weights = np.ones(pts.shape[0])
    value, witness = _search_plane(objective, pts, weights, dimension, ball, config)
    return BetaValue(value=value, plane=witness, kind="beta_inf",
                     dimension=dimension, ball=ball, n_points=pts.shape[0])


def beta_dp(cloud, ball: Ball, dimension: int, p: float,
            plane: AffinePlane | None = None,
            config: PlaneSearchConfig = DEFAULT_SEARCH,
            resolution: float | None = None) -> BetaValue:
    """Content-Choquet flatness: the L^p average of dist(., L)/r against
    H^d, thresholds running over [0, 1]."""
    _validate_ball(ball)
    if not 1.0 <= p < critical_exponent(dimension):
        raise GeometryError(
            f"p must lie in [1, {critical_exponent(dimension)}), got {p}")
    cloud = as_cloud(cloud)
    pts, _ = _local_sample(cloud, ball)
    if pts.shape[0] <= dimension and plane is None:
        return _degenerate_result(pts, "beta_dp", dimension, ball, p)
    r = ball.radius
    index = ContentIndex(pts, dimension, resolution=resolution)
    scale = 1.0 / r ** dimension

    def objective(candidate: AffinePlane) -> float:
        integral = index.choquet(candidate.dist(pts) / r, p, t_max=1.0)
        return (scale * integral) ** (1.0 / p)

    if plane is not None:
        return BetaValue(value=objective(plane), plane=plane, kind="beta_dp",
                         dimension=dimension, ball=ball, p=p, n_points=pts.shape[0])
    weights = _content_weights(index)
    value, witness = _search_plane(objective, pts, weights, dimension, ball, config)
    return BetaValue(value=value, plane=witness, kind="beta_dp",
                     dimension=dimension, ball=ball, p=p, n_points=pts.shape[0])


def bbeta(cloud, ball: Ball, dimension: int, plane: AffinePlane | None = None,
          config: PlaneSearchConfig = DEFAULT_SEARCH,
          pitch_frac: float = DEFAULT_PITCH_FRAC) -> BetaValue:
    """Bilateral flatness: inf over planes of the two-sided sup distance
    inside the ball, normalized by r. The plane side is lattice-sampled and
    measured against the whole cloud."""
    _validate_ball(ball)
    cloud = as_cloud(cloud)
    pts, _ = _local_sample(cloud, ball)
    if pts.shape[0] <= dimension and plane is None:
        return _degenerate_result(pts, "bbeta", dimension, ball, None)
    r = ball.radius

    def objective(candidate: AffinePlane) -> float:
        grid = candidate.grid_in_ball(ball, pitch_frac=pitch_frac)
        if grid.shape[0] == 0:
            return math.inf
        sup_cloud = float(np.max(candidate.dist(pts)))
        sup_plane = float(np.max(cloud.nearest_distance(grid)))
        return max(sup_cloud, sup_plane) / r

    if plane is not None:
        return BetaValue(value=objective(plane), plane=plane, kind="bbeta",
                         dimension=dimension, ball=ball, n_points=pts.shape[0])
    weights = np.ones(pts.shape[0])
    value, witness = _search_plane(objective, pts, weights, dimension, ball, config)
    return BetaValue(value=value, plane=witness, kind="bbeta",
                     dimension=dimension, ball=ball, n_points=pts.shape[0])


def eta_inf(cloud, ball: Ball, dimension: int, plane: AffinePlane | None = None,
            config: PlaneSearchConfig = DEFAULT_SEARCH,
            pitch_frac: float = DEFAULT_PITCH_FRAC) -> BetaValue:
    """(1/r) * inf over planes of the sup, over the plane inside the ball, of
    the distance back to the cloud."""
    _validate_ball(ball)
    cloud = as_cloud(cloud)
    pts, _ = _local_sample(cloud, ball)
    r = ball.radius

    def objective(candidate: AffinePlane) -> float:
        grid = candidate.grid_in_ball(ball, pitch_frac=pitch_frac)
        if grid.shape[0] == 0:
            return math.inf
        return float(np.max(cloud.nearest_distance(grid))) / r

    if plane is not None:
        return BetaValue(value=objective(plane), plane=plane, kind="eta_inf",
                         dimension=dimension, ball=ball, n_points=pts.shape[0])
    if pts.shape[0] == 0:
        raise GeometryError("eta_inf needs sample points in the ball to seed a plane")
    weights = np.ones(pts.shape[0])
    value, witness = _search_plane(objective, pts, weights, dimension, ball, config)
    return BetaValue(value=value, plane=witness, kind="eta_inf",
                     dimension=dimension, ball=ball, n_points=pts.shape[0])


@dataclass
class PackingCheck:
    ratio: float
    n_balls: int
    enclosing: Ball


def env_packing_check(balls, plane: AffinePlane, enclosing: Ball, dimension: int,
                      tol: float = 1e-9) -> PackingCheck:
    """Validate a near-plane packing and return sum r_i^d / R^d.

    Requirements checked, with the offending index in the error: pairwise
    disjointness, containment in the enclosing ball, and center-to-plane
    distance below half the ball's own radius.
    """
    balls = list(balls)
    centers = np.asarray([b.center for b in balls], dtype=float)
    radii = np.asarray([b.radius for b in balls], dtype=float)
    if np.any(radii <= 0):
        bad = int(np.argmax(radii <= 0))
        raise GeometryError(f"packing ball {bad} has non-positive radius")
    for i in range(len(balls)):
        for j in range(i + 1, len(balls)):
            gap = float(np.linalg.norm(centers[i] - centers[j]))
            if gap < radii[i] + radii[j] - tol * (radii[i] + radii[j]):
                raise GeometryError(f"packing balls {i} and {j} overlap")
    reach = np.linalg.norm(centers - enclosing.center, axis=1) + radii
    if np.any(reach > enclosing.radius * (1.0 + tol)):
        bad = int(np.argmax(reach))
        raise GeometryError(f"packing ball {bad} escapes the enclosing ball")
    off = plane.dist(centers)
    if np.any(off >= radii / 2.0 + tol * radii):
        bad = int(np.argmax(off - radii / 2.0))
        raise GeometryError(
            f"packing ball {bad} has center {off[bad]:.6g} from the plane, "
            f"needs < {radii[bad] / 2.0:.6g}")
    ratio = float(np.sum(radii ** dimension) / enclosing.radius ** dimension)
    return PackingCheck(ratio=ratio, n_balls=len(balls), enclosing=enclosing)


@dataclass
class AngleControl:
    met: bool
    reason: str
    angle: float | None = None
    sup_beta: float | None = None
    plane_q: AffinePlane | None = None
    plane_r: AffinePlane | None = None


def angle_control_check(tree: CubeTree, cube_q: Cube, cube_r: Cube, *,
                        dimension: int, m_factor: float, lam: float,
                        epsilon: float,
                        config: PlaneSearchConfig = DEFAULT_SEARCH) -> AngleControl:
    """Angle between the witness planes of two nearby comparable cubes.

    Preconditions (a skip, not an error, when violated): the cubes are within
    lam * max(side) of each other, their sides are within a factor lam of
    each other in the lam^2 sense, and every ancestor of either cube carries
    beta^{d,1}(m_factor * B) below epsilon.
    """
    from scipy.spatial import cKDTree as _Tree

    side_q, side_r = cube_q.side, cube_r.side
    big, small = max(side_q, side_r), min(side_q, side_r)
    gap = float(np.min(_Tree(cube_r.member_points()).query(cube_q.member_points())[0]))
    if gap > lam * big:
        return AngleControl(met=False,
                            reason=f"cubes are {gap:.6g} apart, beyond lam*max_side")
    if lam * big > lam * lam * small:
        return AngleControl(met=False,
                            reason="cube sides straddle more than one lam factor")

    sup_beta = 0.0
    planes = {}
    for cube in (cube_q, cube_r):
        walk = cube
        while walk is not None:
            result = beta_dp(tree.cloud, walk.scaled_ball(m_factor), dimension,
                             p=1.0, config=config)
            sup_beta = max(sup_beta, result.value)
            if walk.cube_id == cube.cube_id:
                planes[cube.cube_id] = result.plane
            walk = walk.parent
    if sup_beta >= epsilon:
        return AngleControl(met=False, sup_beta=sup_beta,
                            reason=f"ancestor beta {sup_beta:.6g} >= epsilon")
    angle = plane_angle(planes[cube_q.cube_id], planes[cube_r.cube_id])
    return AngleControl(met=True, reason="", angle=angle, sup_beta=sup_beta,
                        plane_q=planes[cube_q.cube_id],
                        plane_r=planes[cube_r.cube_id])


@dataclass
class TSTReport:
    parameters: dict
    rows: list            # per-cube dicts, sorted by (level, index)
    side_term: float
    beta_square_sum: float
    tst_sum: float
    bwgl_sum: float
    measure_estimate: float
    depth: int

    def to_dict(self):
        return {
            "parameters": self.parameters,
            "side_term": self.side_term,
            "beta_square_sum": self.beta_square_sum,
            "tst_sum": self.tst_sum,
            "bwgl_sum": self.bwgl_sum,
            "measure_estimate": self.measure_estimate,
            "depth": self.depth,
            "upper_ratio": self.upper_ratio(),
            "lower_ratio": self.lower_ratio(),
            "two_sided_ratio": self.two_sided_ratio(),
            "n_cubes": len(self.rows),
        }

    def upper_ratio(self) -> float:
        """tst_sum against measure + non-flat sum; bounded above in theory."""
        rhs = self.measure_estimate + self.bwgl_sum
        return self.tst_sum / rhs if rhs > 0 else math.inf

    def lower_ratio(self) -> float:
        """measure + non-flat sum against tst_sum; bounded above in theory."""
        lhs = self.measure_estimate + self.bwgl_sum
        return lhs / self.tst_sum if self.tst_sum > 0 else math.inf

    def two_sided_ratio(self) -> float:
        """(side + beta sum + non-flat sum) / (measure + non-flat sum); the
        two-sided comparison pins this inside [1/C, C]."""
        rhs = self.measure_estimate + self.bwgl_sum
        return (self.tst_sum + self.bwgl_sum) / rhs if rhs > 0 else math.inf

    def write_csv(self, path):
        columns = ["level", "index", "side", "members", "beta", "bbeta",
                   "bwgl", "ell_d", "beta_sq_ell_d"]
        lines = [",".join(columns)]
        for row in self.rows:
            lines.append(",".join([
                str(row["level"]), str(row["index"]), format_float(row["side"]),
                str(row["members"]), format_float(row["beta"]),
                format_float(row["bbeta"]), str(int(row["bwgl"])),
                format_float(row["ell_d"]), format_float(row["beta_sq_ell_d"]),
            ]))
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def cube_row(cloud, cube: Cube, *, dimension: int, p: float, c0_factor: float,
             a_factor: float, epsilon: float,
             config: PlaneSearchConfig = DEFAULT_SEARCH) -> dict:
    """Per-cube measurements feeding the traveling-salesman report."""
    beta = beta_dp(cloud, cube.scaled_ball(c0_factor), dimension, p, config=config)
    bilateral = bbeta(cloud, cube.scaled_ball(a_factor), dimension, config=config)
    ell_d = cube.side ** dimension
    return {
        "level": cube.level,
        "index": cube.index,
        "side": cube.side,
        "members": int(len(cube.members)),
        "beta": beta.value,
        "bbeta": bilateral.value,
        "bwgl": bool(bilateral.value >= epsilon),
        "ell_d": ell_d,
        "beta_sq_ell_d": beta.value ** 2 * ell_d,
    }


def bwgl_classify(cloud, cubes, *, dimension: int, a_factor: float,
                  epsilon: float,
                  config: PlaneSearchConfig = DEFAULT_SEARCH) -> list:
    """(cube, bilateral flatness, flag) for each cube; flag means the cube is
    bilaterally non-flat at inflation a_factor and threshold epsilon."""
    out = []
    for cube in cubes:
        value = bbeta(cloud, cube.scaled_ball(a_factor), dimension, config=config).value
        out.append((cube, value, bool(value >= epsilon)))
    return out


def tst_report(tree: CubeTree, root: Cube | None = None, *, dimension: int,
               p: float, c0_factor: float, a_factor: float, epsilon: float,
               config: PlaneSearchConfig = DEFAULT_SEARCH) -> TSTReport:
    """Two-sided traveling-salesman comparison over the subtree of ``root``."""
    if root is None:
        root = tree.roots()[0]
    if c0_factor < 1.0 or a_factor < 1.0:
        raise GeometryError("ball inflation factors must be >= 1")
    cubes = tree.descendants(root)
    cloud = tree.cloud

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(
                lambda cube: cube_row(cloud, cube, dimension=dimension, p=p,
                                      c0_factor=c0_factor, a_factor=a_factor,
                                      epsilon=epsilon, config=config), cubes))
    else:
        rows = [cube_row(cloud, cube, dimension=dimension, p=p,
                         c0_factor=c0_factor, a_factor=a_factor,
                         epsilon=epsilon, config=config) for cube in cubes]
    rows.sort(key=lambda row: (row["level"], row["index"]))

    side_term = root.side ** dimension
    beta_square_sum = float(sum(row["beta_sq_ell_d"] for row in rows))
    bwgl_sum = float(sum(row["ell_d"] for row in rows if row["bwgl"]))
    finest = tree.depth
    measure = float(sum(row["ell_d"] for row in rows if row["level"] == finest))
    parameters = {
        "dimension": dimension,
        "p": p,
        "c0_factor": c0_factor,
        "a_factor": a_factor,
        "epsilon": epsilon,
        "rho": tree.rho,
        "scale_0": tree.scale_0,
        "root": list(root.cube_id),
    }
    return TSTReport(parameters=parameters, rows=rows, side_term=side_term,
                     beta_square_sum=beta_square_sum,
                     tst_sum=side_term + beta_square_sum, bwgl_sum=bwgl_sum,
                     measure_estimate=measure, depth=tree.depth)

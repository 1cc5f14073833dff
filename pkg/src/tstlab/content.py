"""Hausdorff-content estimation at a fixed resolution, and Choquet integrals.

The content of a finite sample is estimated from above by greedy covers read
off a net hierarchy of the sample: at each level the cover sets are the
nearest-net-point groups, a group costs (2 * max distance to its net point)^d,
and the estimate is the cheapest level total.  The hierarchy stops at a
resolution floor (default: 4x the median nearest-neighbor spacing) because a
saturated level would price every cover set at zero; finite samples have zero
content at infinite resolution and that number is useless.

Choquet integrals

    integral over E of f^p dH^d  :=  int_0^T  H^d({x in E : f(x) > t}) t^(p-1) dt

are evaluated exactly: superlevel sets only change at the finitely many values
of f, each interval integrates t^(p-1) in closed form, and every superlevel
content reuses the enclosing set's hierarchy (its groups restricted to the
superlevel subset).  That reuse is what makes monotonicity, translation,
homogeneity, and the Jensen inequality hold exactly rather than up to
estimator noise.  T defaults to infinity; the beta numbers pin T = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cubes import DEFAULT_RHO, build_nets, round_up_to_power, _nearest_assignment
from .geometry import Ball, GeometryError, PointCloud, as_cloud

# Content covers never go below this many net levels worth of structure.
_MAX_LEVELS = 40

# Default resolution floor, in units of the median nearest-neighbor spacing.
# Cover balls end at sample points, so each net ball under-covers its cell by
# up to one sample spacing per side; the finest level then undercounts by
# roughly spacing/separation = 1/floor.  16 keeps that sampling discount
# below ~6%, small against the net covers' own constant-factor slack.
_RESOLUTION_NN_FACTOR = 16.0


def ball_volume(dimension: int, radius: float) -> float:
    """Lebesgue volume of a solid d-ball."""
    d = int(dimension)
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0) * float(radius) ** d


@dataclass
class ContentEstimate:
    value: float
    dimension: float
    resolution: float
    cover: list  # list[Ball]; value == sum over cover of (2*radius)^dimension
    level_totals: list  # candidate cover cost per hierarchy level

    def to_dict(self):
        return {
            "value": self.value,
            "dimension": self.dimension,
            "resolution": self.resolution,
            "cover_size": len(self.cover),
            "level_totals": list(self.level_totals),
        }


@dataclass(frozen=True)
class ChoquetConfig:
    """Threshold policy for Choquet integrals.

    t_max None integrates over [0, inf); beta numbers pass 1.0.
    t_grid None keeps exact breakpoints; a positive integer quantizes the
    integrand values up onto that many uniform bins (an upper sum).
    """

    t_max: float | None = None
    t_grid: int | None = None
    rho: float = DEFAULT_RHO
    resolution: float | None = None


class ContentIndex:
    """Net hierarchy plus per-level group assignments for a fixed point set.

    Supports content of the full set, content of arbitrary subsets, and exact
    Choquet integrals of per-point values, all against the same cover groups.
    """

    def __init__(self, points, dimension: float, rho: float = DEFAULT_RHO,
                 resolution: float | None = None):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[0] == 0:
            raise GeometryError("content index needs at least one point")
        if dimension <= 0:
            raise GeometryError(f"content dimension must be positive, got {dimension}")
        self.points = pts
        self.dimension = float(dimension)
        self.rho = float(rho)
        cloud = PointCloud(pts)
        if resolution is None:
            resolution = _default_resolution(cloud)
        if not (resolution > 0 and math.isfinite(resolution)):
            raise GeometryError(f"resolution must be positive, got {resolution}")
        self.resolution = float(resolution)

        scale = round_up_to_power(cloud.diameter(), self.rho)
        k_max = 0
        while (k_max < _MAX_LEVELS
               and scale * self.rho ** (k_max + 1) >= self.resolution):
            k_max += 1
        nets = build_nets(cloud, rho=self.rho, k_max=k_max, scale_0=scale)
        self.nets = nets
        self.group_of = []   # per level: (M,) site position per point
        self.site_dist = []  # per level: (M,) distance to that site
        self.n_groups = []
        for level_idx in nets.levels:
            sites = pts[level_idx]
            assign = _nearest_assignment(pts, sites)
            self.group_of.append(assign)
            self.site_dist.append(np.linalg.norm(pts - sites[assign], axis=1))
            self.n_groups.append(len(level_idx))
        # one extra single-ball candidate at the bounding-box midpoint: the
        # level-0 net ball sits on a cloud point (possibly a far corner) and
        # can overprice the trivial cover by 2^d
        self.midpoint = 0.5 * (pts.min(axis=0) + pts.max(axis=0))
        self.group_of.append(np.zeros(pts.shape[0], dtype=np.intp))
        self.site_dist.append(np.linalg.norm(pts - self.midpoint, axis=1))
        self.n_groups.append(1)

    @property
    def n_levels(self) -> int:
        return len(self.group_of)

    def level_totals(self, mask=None) -> np.ndarray:
        """Cover cost of each level, optionally restricted to a subset."""
        d = self.dimension
        totals = np.empty(self.n_levels)
        for k in range(self.n_levels):
            group = self.group_of[k]
            dist = self.site_dist[k]
            if mask is not None:
                group = group[mask]
                dist = dist[mask]
            radii = np.zeros(self.n_groups[k])
            np.maximum.at(radii, group, dist)
            totals[k] = float(np.sum((2.0 * radii) ** d))
        return totals

    def content(self, mask=None) -> float:
        if mask is not None and not np.any(mask):
            return 0.0
        return float(self.level_totals(mask).min())

    def best_cover(self):
        """(value, cover balls) for the cheapest level of the full set."""
        totals = self.level_totals()
        k = int(np.argmin(totals))
        group = self.group_of[k]
        dist = self.site_dist[k]
        radii = np.zeros(self.n_groups[k])
        np.maximum.at(radii, group, dist)
        occupied = np.zeros(self.n_groups[k], dtype=bool)
        occupied[group] = True
        if k == self.n_levels - 1:
            sites = self.midpoint[None, :]
        else:
            sites = self.points[self.nets.levels[k]]
        cover = [Ball(sites[g], float(radii[g]))
                 for g in range(self.n_groups[k]) if occupied[g]]
        value = float(np.sum((2.0 * radii[occupied]) ** self.dimension))
        totals[k] = value  # keep the reported value and its level total in sync
        return value, cover, totals

    def choquet(self, values, p: float, t_max: float | None = None,
                t_grid: int | None = None) -> float:
        """Exact piecewise evaluation of int_0^t_max H({f > t}) t^(p-1) dt."""
        if not (p >= 1 and math.isfinite(p)):
            raise GeometryError(f"choquet exponent p must be finite and >= 1, got {p}")
        v = np.asarray(values, dtype=float)
        if v.shape != (self.points.shape[0],):
            raise GeometryError("choquet values must align with the indexed points")
        if not np.all(np.isfinite(v)):
            raise GeometryError("choquet values must be finite")
        v = np.clip(v, 0.0, None)
        if t_max is not None:
            if t_max <= 0:
                raise GeometryError(f"t_max must be positive, got {t_max}")
            # values above t_max act like t_max: superlevels below t_max agree
            v = np.minimum(v, t_max)
        if t_grid is not None:
            if t_grid < 1:
                raise GeometryError("t_grid must be a positive bin count")
            top = float(v.max())
            if top > 0.0:
                h = top / t_grid
                v = np.ceil(v / h - 1e-12) * h
        top = float(v.max())
        if top <= 0.0:
            return 0.0

        order = np.argsort(-v, kind="stable")
        d = self.dimension
        n_levels = self.n_levels
        running = [0.0] * n_levels
        radii = [np.zeros(g) for g in self.n_groups]
        total = 0.0
        i = 0
        m = v.shape[0]
        while i < m:
            u = v[order[i]]
            if u <= 0.0:
                break
            # absorb every point with value == u, maintaining each level's
            # running cover cost
            while i < m and v[order[i]] == u:
                idx = order[i]
                for k in range(n_levels):
                    g = self.group_of[k][idx]
                    dist = self.site_dist[k][idx]
                    old = radii[k][g]
                    if dist > old:
                        running[k] += (2.0 * dist) ** d - (2.0 * old) ** d
                        radii[k][g] = dist
                i += 1
            u_next = v[order[i]] if i < m else 0.0
            if u_next < 0.0:
                u_next = 0.0
            content_here = min(running)
            total += content_here * (u ** p - u_next ** p) / p
        return total


def _default_resolution(cloud: PointCloud) -> float:
    if len(cloud) < 2:
        return 1.0
    nn = cloud.tree.query(cloud.points, k=2)[0][:, 1]
    nn = nn[nn > 0.0]
    if nn.size == 0:
        return 1.0
    return _RESOLUTION_NN_FACTOR * float(np.median(nn))


def hausdorff_content(cloud, dimension: float, ball: Ball | None = None, *,
                      rho: float = DEFAULT_RHO,
                      resolution: float | None = None) -> ContentEstimate:
    """Greedy multiscale cover estimate of H^d(cloud ∩ ball), from above.

    Empty intersection gives value 0 with an empty cover.
    """
    cloud = as_cloud(cloud)
    if ball is not None:
        idx = cloud.indices_in_ball(ball)
        if idx.size == 0:
            return ContentEstimate(value=0.0, dimension=float(dimension),
                                   resolution=0.0, cover=[], level_totals=[])
        pts = cloud.points[idx]
    else:
        pts = cloud.points
    index = ContentIndex(pts, dimension, rho=rho, resolution=resolution)
    value, cover, totals = index.best_cover()
    return ContentEstimate(value=value, dimension=float(dimension),
                           resolution=index.resolution, cover=cover,
                           level_totals=[float(t) for t in totals])


def choquet_integral(f, cloud, ball: Ball | None, dimension: float, p: float,
                     config: ChoquetConfig | None = None) -> float:
    """Choquet integral of f over cloud ∩ ball against H^d content.

    ``f`` is a callable on points or an array aligned with the full cloud.
    Follows the p-convention int H({f > t}) t^(p-1) dt (no leading p), so
    homogeneity reads choquet(a*f) = a^p * choquet(f) on [0, inf).
    """
    if config is None:
        config = ChoquetConfig()
    cloud = as_cloud(cloud)
    if ball is not None:
        idx = cloud.indices_in_ball(ball)
    else:
        idx = np.arange(len(cloud), dtype=np.intp)
    if idx.size == 0:
        return 0.0
    pts = cloud.points[idx]
    if callable(f):
        values = np.asarray([float(x) for x in np.atleast_1d(f(pts))], dtype=float)
        if values.shape[0] != pts.shape[0]:
            raise GeometryError("callable f must return one value per point")
    else:
        arr = np.asarray(f, dtype=float)
        if arr.shape[0] != len(cloud):
            raise GeometryError("array f must align with the full cloud")
        values = arr[idx]
    if np.any(values < 0.0):
        raise GeometryError("choquet integrand must be nonnegative on the cloud")
    index = ContentIndex(pts, dimension, rho=config.rho, resolution=config.resolution)
    return index.choquet(values, p, t_max=config.t_max, t_grid=config.t_grid)

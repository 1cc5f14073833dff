"""Separated-net hierarchies and the cube trees built over them.

A hierarchy holds, for each level k, a maximal subset of the cloud whose
points are pairwise >= rho^k * scale_0 apart, grown greedily in cloud order
and seeded with the previous level so the nets are nested.  scale_0 is the
cloud diameter rounded up to the nearest power of rho, so level 0 is a single
point except when the diameter lands exactly on a power.

Cubes partition the cloud at every level.  Assignment is top-down, one level
at a time, with side length

    side(Q) = 5 * rho^level * scale_0.

A point lying closer than c0 * side to its globally nearest level-k net point
is claimed by that net point outright, adopting the net point's coarser chain
so nesting survives; every other point goes to the nearest net point whose
chain passes through the point's current cube (nonempty: a cube's center is
itself a net point at every finer level).  Ties always break to the lowest
candidate index.  Forcing the protected zone is what keeps the interior-ball
axiom honest near cell boundaries; both ball axioms are still checked, never
assumed, and the builder aborts naming the offending cube on violation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Ball, GeometryError, PointCloud, as_cloud
from .util import format_float

MAX_RHO = 0.8  # keeps the chain bound rho^k/(1-rho) <= 5 rho^k
DEFAULT_RHO = 0.5
DEFAULT_C0 = 1.0 / 30.0
SIDE_FACTOR = 5.0

# Greedy insertion scans the whole cloud per accepted point while the net is
# small, then switches to KD-tree neighborhood checks once that would start
# costing O(N^2).
_GREEDY_SWITCH = 192


class CubeAxiomError(GeometryError):
    """A constructed tree violated one of the cube axioms."""


@dataclass(eq=False)
class NetHierarchy:
    cloud: PointCloud
    rho: float
    scale_0: float
    levels: list  # list of np.intp arrays of cloud indices, acceptance order
    saturated: bool

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def separation(self, level: int) -> float:
        return self.scale_0 * self.rho ** level

    def level_points(self, level: int) -> np.ndarray:
        return self.cloud.points[self.levels[level]]


def round_up_to_power(value: float, rho: float) -> float:
    """Smallest rho^m (m integer, possibly negative) that is >= value."""
    if value <= 0.0:
        return 1.0
    m = math.floor(math.log(value) / math.log(rho))
    # guard against log rounding placing us one power off in either direction
    while rho ** m < value:
        m -= 1
    while rho ** (m + 1) >= value:
        m += 1
    return rho ** m


def _greedy_net(cloud: PointCloud, order, threshold: float) -> np.ndarray:
    """Greedy maximal separated subset, scanning candidates in ``order``.

    A candidate is accepted iff its distance to every already-accepted point
    is >= threshold (ties at exactly the threshold are kept).
    """
    pts = cloud.points
    n = len(cloud)
    accepted: list[int] = []
    min_dist = np.full(n, np.inf)
    tree = None
    accepted_mask = None
    for i in order:
        if tree is None:
            if min_dist[i] >= threshold:
                accepted.append(i)
                np.minimum(min_dist, np.linalg.norm(pts - pts[i], axis=1), out=min_dist)
                if len(accepted) > _GREEDY_SWITCH and n > 4 * _GREEDY_SWITCH:
                    tree = cloud.tree
                    accepted_mask = np.zeros(n, dtype=bool)
                    accepted_mask[accepted] = True
        else:
            neighbors = tree.query_ball_point(pts[i], threshold * (1.0 + 1e-9))
            near = [j for j in neighbors if accepted_mask[j]]
            if near:
                gaps = np.linalg.norm(pts[near] - pts[i], axis=1)
                if np.any(gaps < threshold):
                    continue
            accepted.append(i)
            accepted_mask[i] = True
    return np.asarray(accepted, dtype=np.intp)


def build_nets(cloud, rho: float = DEFAULT_RHO, k_max: int = 8,
               scale_0: float | None = None) -> NetHierarchy:
    """Nested greedy nets at separations rho^k * scale_0 for k = 0..k_max."""
    cloud = as_cloud(cloud)
    if not 0.0 < rho <= MAX_RHO:
        raise GeometryError(f"rho must lie in (0, {MAX_RHO}], got {rho}")
    if k_max < 0:
        raise GeometryError("k_max must be >= 0")
    if scale_0 is None:
        scale_0 = round_up_to_power(cloud.diameter(), rho)
    if scale_0 <= 0.0:
        raise GeometryError("scale_0 must be positive")
    levels = []
    previous: list[int] = []
    for k in range(k_max + 1):
        threshold = scale_0 * rho ** k
        in_prev = np.zeros(len(cloud), dtype=bool)
        in_prev[previous] = True
        order = list(previous) + [i for i in range(len(cloud)) if not in_prev[i]]
        accepted = _greedy_net(cloud, order, threshold)
        levels.append(accepted)
        previous = accepted.tolist()
    saturated = len(levels[-1]) == len(cloud)
    return NetHierarchy(cloud=cloud, rho=rho, scale_0=scale_0,
                        levels=levels, saturated=saturated)


def _nearest_assignment(points: np.ndarray, sites: np.ndarray) -> np.ndarray:
    """Index of the nearest site per point; distance ties pick the lowest
    site index (checked among the k nearest, enough for lattice-style ties)."""
    from scipy.spatial import cKDTree

    m = sites.shape[0]
    if m == 1:
        return np.zeros(points.shape[0], dtype=np.intp)
    tree = cKDTree(sites)
    k = min(9, m)
    dist, idx = tree.query(points, k=k)
    dist = dist.reshape(points.shape[0], k)
    idx = idx.reshape(points.shape[0], k)
    cutoff = dist[:, :1] * (1.0 + 1e-12)
    candidates = np.where(dist <= cutoff, idx, np.iinfo(np.int64).max)
    return candidates.min(axis=1).astype(np.intp)


@dataclass(eq=False)
class Cube:
    level: int
    index: int
    center_index: int
    center: np.ndarray
    side: float
    members: np.ndarray  # sorted cloud indices
    cloud: PointCloud = field(repr=False)
    parent: "Cube | None" = field(default=None, repr=False)
    children: list = field(default_factory=list, repr=False)

    @property
    def cube_id(self):
        return (self.level, self.index)

    @property
    def ball(self) -> Ball:
        return Ball(self.center, self.side)

    def scaled_ball(self, factor: float) -> Ball:
        return Ball(self.center, self.side * factor)

    def member_points(self) -> np.ndarray:
        return self.cloud.points[self.members]

    def __repr__(self):
        return (f"Cube(level={self.level}, index={self.index}, "
                f"side={self.side:.6g}, members={len(self.members)})")


@dataclass(eq=False)
class CubeTree:
    cloud: PointCloud
    nets: NetHierarchy
    c0: float
    levels: list  # list of list[Cube]

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def rho(self) -> float:
        return self.nets.rho

    @property
    def scale_0(self) -> float:
        return self.nets.scale_0

    def roots(self) -> list:
        return self.levels[0]

    def all_cubes(self):
        for level in self.levels:
            yield from level

    def side(self, level: int) -> float:
        return SIDE_FACTOR * self.nets.scale_0 * self.nets.rho ** level

    def descendants(self, cube: Cube):
        """The subtree under ``cube``, including it, in (level, index) order."""
        stack = [cube]
        out = []
        while stack:
            q = stack.pop()
            out.append(q)
            stack.extend(reversed(q.children))
        out.sort(key=lambda q: q.cube_id)
        return out

    def to_lines(self):
        """Line-oriented dump: level, index, center coords, parent index,
        member count."""
        lines = ["# level\tindex\tcenter\tparent\tmembers"]
        for cube in self.all_cubes():
            center = ",".join(format_float(c) for c in cube.center)
            parent = cube.parent.index if cube.parent is not None else -1
            lines.append(
                f"{cube.level}\t{cube.index}\t{center}\t{parent}\t{len(cube.members)}")
        return lines

    def save(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(self.to_lines()) + "\n")


def _assign_chains(nets: NetHierarchy, c0: float) -> np.ndarray:
    """chain[x, k] = position within nets.levels[k] of x's level-k cube.

    Every point takes its globally nearest level-k net point; if that net
    point's chain runs through a different coarser cube, the point adopts the
    net point's chain (nesting is restored retroactively).  The exception is
    a point pinned inside the interior ball of some coarser cube: its chain
    up there must not move, so an incompatible nearest net point is replaced
    by the nearest one whose chain passes through the point's current cube
    (nonempty: a cube's center is itself a net point at every finer level).

    Because membership is nested level by level, agreement at level k-1
    implies agreement all the way up, so one comparison per level suffices.
    """
    cloud = nets.cloud
    pts = cloud.points
    n = len(cloud)
    depth = nets.depth
    rho = nets.rho
    # Points that become net points at some level (nets are nested, so the
    # finest net collects them all) can later pull members of a coarse
    # interior ball into their own fine cube, so their own chain rows must
    # already agree with that ball's cube.  They are therefore pinned over a
    # wider ring: a thief center t levels down can first be distinct from
    # the pinned one once rho^t < 5*c0/(1 - 5*c0), and repeated thefts drift
    # by at most rho^t/(1-rho) interior radii (5% slack for float noise).
    # Ordinary points pin only at the interior radius, where membership is
    # actually mandatory; a wider claim would strand them with a far-off
    # center when a much nearer zone opens up at finer levels.
    is_site = np.zeros(n, dtype=bool)
    is_site[nets.levels[depth]] = True
    reach = 5.0 * c0 / (1.0 - 5.0 * c0)
    t_min = max(1, math.ceil(math.log(reach) / math.log(rho)))
    ring_factor = np.where(
        is_site, 1.0 + 1.05 * rho ** t_min / (1.0 - rho), 1.0)
    chain = np.empty((n, depth + 1), dtype=np.intp)
    chain[:, 0] = _nearest_assignment(pts, pts[nets.levels[0]])
    gaps = np.linalg.norm(pts - pts[nets.levels[0]][chain[:, 0]], axis=1)
    # pin_level[x]: finest level whose interior ball already holds x; the
    # chain at (hence above, by nesting) that level is frozen
    pin_level = np.where(
        gaps < ring_factor * c0 * SIDE_FACTOR * nets.separation(0), 0, -1)
    for k in range(1, depth + 1):
        sites_idx = nets.levels[k]
        sites = pts[sites_idx]
        # a net point is its own nearest net point at every level at or below
        # its coarsest appearance, so these rows of chain are already final
        parent_pos = chain[sites_idx, k - 1]
        nearest = _nearest_assignment(pts, sites)
        gaps = np.linalg.norm(pts - sites[nearest], axis=1)
        pin_radius = c0 * SIDE_FACTOR * nets.separation(k)
        compatible = parent_pos[nearest] == chain[:, k - 1]
        # adopting the nearest net point's chain is fine as long as it agrees
        # at the pinned level (nesting makes coarser agreement automatic);
        # a point inside the interior ball itself must transfer regardless
        pl = np.maximum(pin_level, 0)
        agrees = chain[sites_idx[nearest], pl] == chain[np.arange(n), pl]
        take_nearest = compatible | (pin_level < 0) | agrees | (gaps < pin_radius)
        assign = np.where(take_nearest, nearest, -1)
        for idx in np.flatnonzero(~take_nearest):
            group = np.flatnonzero(
                chain[sites_idx, pin_level[idx]] == chain[idx, pin_level[idx]])
            local = _nearest_assignment(pts[idx][None, :], pts[sites_idx[group]])
            assign[idx] = group[local[0]]
        mismatch = parent_pos[assign] != chain[:, k - 1]
        if np.any(mismatch):
            chain[mismatch, :k] = chain[sites_idx[assign[mismatch]], :k]
        chain[:, k] = assign
        pin_level[(gaps < ring_factor * pin_radius) & take_nearest] = k
    return chain


def build_cubes(nets: NetHierarchy, c0: float = DEFAULT_C0,
                validate: bool = True) -> CubeTree:
    """Cube tree over a net hierarchy; validates the two ball axioms."""
    if not 0.0 < c0 <= 0.1:
        raise GeometryError(f"c0 must lie in (0, 0.1], got {c0}")
    cloud = nets.cloud
    pts = cloud.points
    depth = nets.depth
    chain = _assign_chains(nets, c0)

    levels: list[list[Cube]] = []
    for k in range(depth + 1):
        side = SIDE_FACTOR * nets.scale_0 * nets.rho ** k
        order = np.argsort(chain[:, k], kind="stable")
        bounds = np.searchsorted(chain[order, k], np.arange(len(nets.levels[k]) + 1))
        cubes_k = []
        for pos, cloud_idx in enumerate(nets.levels[k]):
            members = np.sort(order[bounds[pos]:bounds[pos + 1]])
            cube = Cube(level=k, index=pos, center_index=int(cloud_idx),
                        center=pts[cloud_idx], side=side,
                        members=members, cloud=cloud)
            cubes_k.append(cube)
        levels.append(cubes_k)
    for k in range(1, depth + 1):
        parent_pos = chain[nets.levels[k], k - 1]
        for pos, cube in enumerate(levels[k]):
            parent = levels[k - 1][parent_pos[pos]]
            cube.parent = parent
            parent.children.append(cube)

    tree = CubeTree(cloud=cloud, nets=nets, c0=c0, levels=levels)
    if validate:
        validate_ball_axioms(tree)
    return tree


def validate_ball_axioms(tree: CubeTree, tol: float = 1e-9):
    """Enclosing ball Q ⊆ B(center, side) and interior ball
    B(center, c0*side) ∩ cloud ⊆ Q; aborts naming the failing cube."""
    cloud = tree.cloud
    for cube in tree.all_cubes():
        if len(cube.members) == 0:
            raise CubeAxiomError(f"{cube} has no members")
        gaps = np.linalg.norm(cube.member_points() - cube.center, axis=1)
        if float(gaps.max()) > cube.side * (1.0 + tol):
            raise CubeAxiomError(
                f"enclosing-ball axiom failed for {cube}: member at distance "
                f"{gaps.max():.6g} > side {cube.side:.6g}")
        inner = cloud.tree.query_ball_point(cube.center, tree.c0 * cube.side * (1.0 - tol))
        missing = set(map(int, inner)) - set(map(int, cube.members))
        if missing:
            raise CubeAxiomError(
                f"interior-ball axiom failed for {cube}: cloud points {sorted(missing)} "
                f"lie within {tree.c0 * cube.side:.6g} of the center but are not members")


def cube_distance(target, cubes, default: float = math.inf) -> float:
    """min over the collection of (side(R) + dist(target, R)).

    ``target`` is a point or a Cube; distances are between member point sets.
    Empty collection returns ``default`` (inf).
    """
    cubes = list(cubes)
    if not cubes:
        return default
    if isinstance(target, Cube):
        tgt_pts = target.member_points()
    else:
        tgt_pts = np.atleast_2d(np.asarray(target, dtype=float))
    best = default
    for cube in cubes:
        from scipy.spatial import cKDTree

        tree = cKDTree(cube.member_points())
        dist = float(np.min(tree.query(tgt_pts)[0]))
        best = min(best, cube.side + dist)
    return best


@dataclass(eq=False)
class StoppingTimeRegion:
    top: Cube
    members: list  # BFS order
    _member_ids: set = field(repr=False)

    def __contains__(self, cube: Cube) -> bool:
        return cube.cube_id in self._member_ids

    def minimal_cubes(self) -> list:
        """Members none of whose children are members."""
        out = []
        for cube in self.members:
            if not any(child.cube_id in self._member_ids for child in cube.children):
                out.append(cube)
        return out

    def residual_indices(self) -> np.ndarray:
        """Member points of the top cube not covered by any minimal cube."""
        covered = set()
        for cube in self.minimal_cubes():
            covered.update(map(int, cube.members))
        rest = [i for i in map(int, self.top.members) if i not in covered]
        return np.asarray(sorted(rest), dtype=np.intp)

    def cubes_at_level(self, level: int) -> list:
        return [q for q in self.members if q.level == level]


def build_stopping_time(tree: CubeTree, top: Cube, keep) -> StoppingTimeRegion:
    """Grow a stopping-time region from ``top``.

    A whole child family joins iff the parent is a member and every child
    satisfies ``keep``; this keeps the region closed under siblings. The top
    cube is always a member.
    """
    members = [top]
    member_ids = {top.cube_id}
    queue = [top]
    while queue:
        cube = queue.pop(0)
        kids = cube.children
        if kids and all(bool(keep(child)) for child in kids):
            for child in kids:
                members.append(child)
                member_ids.add(child.cube_id)
                queue.append(child)
    return StoppingTimeRegion(top=top, members=members, _member_ids=member_ids)

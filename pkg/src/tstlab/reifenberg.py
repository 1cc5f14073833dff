"""Reifenberg-style parametrization machinery: layered ball/plane systems,
their coherence profile, the projection-blend maps, the surface iteration,
and measured certificates for the parametrization theorem's guarantees.

A system consists of a base d-plane and layers k = 0..K of centers with
attached d-planes through them, radii r_k = 10^-k, with per-layer separation
|x_i - x_j| >= r_k and each center within 2 r_{k-1} of the previous layer.
Coherence is summarized by a per-center profile

    eps_k(x) = sup of the local plane distance d_{x_il, 1e4 r_l}(P_jk, P_il)
               over j in layer k, |l - k| <= 2, i in layer l,
               with x in 100 B_jk and 100 B_il,

plus the layer-0 comparisons against the base plane. The blend map is

    sigma_k(y) = psi_k(y) y + sum_j theta_jk(y) pi_jk(y),

where theta weights come from a C^2 radial bump (1 inside 8 r_k, 0 outside
10 r_k) normalized by the local bump mass, and pi_jk is orthogonal projection
onto P_jk. Iterating f_{k+1} = sigma_k o f_k on a base-plane lattice produces
the surface sample; every step moves points at most 10 r_k, unconditionally.

Certificates re-measure the theorem's inequalities (identity far from the
base plane, sup displacement, bi-Hoelder envelopes, local flatness, per-step
and projection-consistency bounds, content lower bounds) as observed
constants against configurable ceilings — measurements, not proofs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .beta import bbeta
from .content import hausdorff_content
from .cubes import CubeTree, StoppingTimeRegion, _greedy_net
from .geometry import (AffinePlane, Ball, GeometryError, PointCloud,
                       plane_pair_distance)
from .util import format_float

_PAIR_WINDOW = 2          # |l - k| <= 2 in the coherence profile
_PROFILE_FACTOR = 100.0   # ball inflation entering eps_k
_PRIME_FACTOR = 10.0      # ball inflation entering eps'_k
_PAIR_BALL_FACTOR = 1e4   # plane distances measured over 1e4 r_l balls


class CCBPError(GeometryError):
    """A structural condition of the layered system failed."""


def smooth_bump(t):
    """C^2 radial profile: 1 on [0, 8], 0 on [10, inf), quintic in between.

    Exact at the endpoints in floating point (arguments are clipped), which
    is what makes the identity-outside-support guarantees exact.
    """
    t = np.asarray(t, dtype=float)
    u = np.clip((t - 8.0) / 2.0, 0.0, 1.0)
    s = u * u * u * (u * (6.0 * u - 15.0) + 10.0)
    out = 1.0 - s
    return float(out) if out.ndim == 0 else out


@dataclass
class CCBPLayer:
    k: int
    centers: np.ndarray            # (m, n)
    planes: list                   # m planes, each through its center

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))

    @property
    def radius(self) -> float:
        return 10.0 ** (-self.k)

    @property
    def count(self) -> int:
        return self.centers.shape[0]


@dataclass
class CCBP:
    base_plane: AffinePlane
    layers: list                   # CCBPLayer, consecutive k starting at 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for pos, layer in enumerate(self.layers):
            if layer.k != pos:
                raise CCBPError(f"layer {pos} carries index k={layer.k}")
        self._trees = [cKDTree(layer.centers) for layer in self.layers]
        self._pair_values: dict = {}

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def dim(self) -> int:
        return self.base_plane.dim

    @property
    def ambient_dim(self) -> int:
        return self.base_plane.ambient_dim

    def radius(self, k: int) -> float:
        return 10.0 ** (-k)

    def in_v(self, k: int, factor: float, points) -> np.ndarray:
        """Membership of point(s) in the factor-inflated layer-k ball union."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        dist = self._trees[k].query(points)[0]
        return dist <= factor * self.radius(k)

    def pair_values(self, k: int, l: int) -> np.ndarray:
        """(count_k, count_l) local plane distances d_{x_il, 1e4 r_l}; NaN
        where the 100-ball reach can never overlap."""
        key = (k, l)
        if key not in self._pair_values:
            lay_k, lay_l = self.layers[k], self.layers[l]
            reach = _PROFILE_FACTOR * (lay_k.radius + lay_l.radius)
            values = np.full((lay_k.count, lay_l.count), np.nan)
            for i in range(lay_l.count):
                ball = Ball(lay_l.centers[i], _PAIR_BALL_FACTOR * lay_l.radius)
                gaps = np.linalg.norm(lay_k.centers - lay_l.centers[i], axis=1)
                for j in np.flatnonzero(gaps <= reach):
                    values[j, i] = plane_pair_distance(
                        lay_k.planes[j], lay_l.planes[i], ball)
            self._pair_values[key] = values
        return self._pair_values[key]

    def epsilon_at(self, k: int, points, factor: float = _PROFILE_FACTOR) -> np.ndarray:
        """Coherence profile eps_k (factor 100) or eps'_k (factor 10) at
        point(s): the sup of cached pair distances over qualifying pairs."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(points.shape[0])
        for l in range(max(0, k - _PAIR_WINDOW),
                       min(self.depth, k + _PAIR_WINDOW + 1)):
            values = np.nan_to_num(self.pair_values(k, l), nan=0.0)
            near_k = self._member_mask(k, points, factor)
            near_l = self._member_mask(l, points, factor)
            chunk = max(1, 50_000_000 // max(values.size, 1))
            for start in range(0, points.shape[0], chunk):
                stop = min(start + chunk, points.shape[0])
                masked = (values[None, :, :]
                          * near_k[start:stop, :, None]
                          * near_l[start:stop, None, :])
                out[start:stop] = np.maximum(out[start:stop],
                                             masked.max(axis=(1, 2)))
        return out

    def _member_mask(self, k: int, points: np.ndarray, factor: float) -> np.ndarray:
        layer = self.layers[k]
        gaps = np.linalg.norm(points[:, None, :] - layer.centers[None, :, :], axis=2)
        return gaps <= factor * layer.radius


@dataclass
class EpsilonProfile:
    entries: dict                  # (k, j) -> eps_k(x_{j,k})
    epsilon: float

    @property
    def profile_max(self) -> float:
        return max(self.entries.values()) if self.entries else 0.0

    @property
    def passed(self) -> bool:
        return self.profile_max < self.epsilon

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "profile_max": self.profile_max,
            "passed": self.passed,
            "entries": [
                {"k": k, "j": j, "value": value}
                for (k, j), value in sorted(self.entries.items())
            ],
        }


def validate_ccbp(ccbp: CCBP, epsilon: float) -> EpsilonProfile:
    """Check the structural conditions and compute the coherence profile.

    Structural failures (separation, layer descent, center off its plane)
    raise with the condition and indices; the profile comparison against
    epsilon is reported, not raised.
    """
    if epsilon <= 0:
        raise CCBPError("epsilon must be positive")
    for layer in ccbp.layers:
        r = layer.radius
        for j in range(layer.count):
            off = float(layer.planes[j].dist(layer.centers[j]))
            if off > 1e-9 * r:
                raise CCBPError(
                    f"plane condition: center (k={layer.k}, j={j}) sits "
                    f"{off:.3g} off its plane")
        if layer.count > 1:
            tree = cKDTree(layer.centers)
            gap, nbr = tree.query(layer.centers, k=2)
            worst = int(np.argmin(gap[:, 1]))
            if gap[worst, 1] < r * (1.0 - 1e-12):
                raise CCBPError(
                    f"separation condition: centers (k={layer.k}, "
                    f"j={worst}) and (k={layer.k}, j={int(nbr[worst, 1])}) are "
                    f"{gap[worst, 1]:.6g} apart, need {r:.6g}")
    for k in range(1, ccbp.depth):
        prev = ccbp.layers[k - 1]
        dist = cKDTree(prev.centers).query(ccbp.layers[k].centers)[0]
        bad = dist > 2.0 * prev.radius * (1.0 + 1e-12)
        if bad.any():
            j = int(np.argmax(bad))
            raise CCBPError(
                f"descent condition: center (k={k}, j={j}) lies "
                f"{dist[j]:.6g} from layer {k - 1}, limit {2.0 * prev.radius:.6g}")

    entries = {}
    for layer in ccbp.layers:
        values = ccbp.epsilon_at(layer.k, layer.centers)
        if layer.k == 0:
            base_gap = ccbp.base_plane.dist(layer.centers) / layer.radius
            base_d = np.array([
                plane_pair_distance(plane, ccbp.base_plane,
                                    Ball(center, _PROFILE_FACTOR * layer.radius))
                for plane, center in zip(layer.planes, layer.centers)])
            values = np.maximum(values, np.maximum(base_gap, base_d))
        for j in range(layer.count):
            entries[(layer.k, j)] = float(values[j])
    return EpsilonProfile(entries=entries, epsilon=epsilon)


def partition_of_unity(ccbp: CCBP, k: int, y):
    """(theta weights over layer-k centers, psi) at a point; they sum to one
    exactly, with psi = 1 where no bump reaches."""
    if not 0 <= k < ccbp.depth:
        raise CCBPError(f"layer {k} out of range")
    y = np.asarray(y, dtype=float)
    layer = ccbp.layers[k]
    raw = smooth_bump(np.linalg.norm(layer.centers - y, axis=1) / layer.radius)
    mass = float(raw.sum())
    if mass <= 0.0:
        return np.zeros(layer.count), 1.0
    theta = raw / mass
    return theta, 1.0 - float(theta.sum())


def apply_sigma(ccbp: CCBP, k: int, points: np.ndarray) -> np.ndarray:
    """Vectorized blend map over a batch: identity where no bump reaches,
    otherwise the theta-weighted average of the plane projections."""
    if not 0 <= k < ccbp.depth:
        raise CCBPError(f"layer {k} out of range")
    points = np.asarray(points, dtype=float)
    layer = ccbp.layers[k]
    r = layer.radius
    tree = cKDTree(points)
    mass = np.zeros(points.shape[0])
    # accumulate weighted displacements, not weighted targets: the blend is
    # then exact (bitwise identity) wherever every projection is a no-op
    shift = np.zeros_like(points)
    for j in range(layer.count):
        idx = tree.query_ball_point(layer.centers[j], 10.0 * r)
        if not idx:
            continue
        idx = np.asarray(sorted(idx), dtype=np.intp)
        local = points[idx]
        w = smooth_bump(np.linalg.norm(local - layer.centers[j], axis=1) / r)
        alive = w > 0.0
        if not alive.any():
            continue
        idx, local, w = idx[alive], local[alive], w[alive]
        mass[idx] += w
        shift[idx] += w[:, None] * (layer.planes[j].project(local) - local)
    covered = mass > 0.0
    out = points.copy()
    out[covered] += shift[covered] / mass[covered, None]
    return out


def sigma_k(ccbp: CCBP, k: int, y) -> np.ndarray:
    """The blend map at a single point."""
    return apply_sigma(ccbp, k, np.asarray(y, dtype=float)[None, :])[0]


@dataclass
class SurfaceIterate:
    ccbp: CCBP
    tangent: np.ndarray            # (N, d) base-plane lattice coordinates
    grid_shape: tuple              # lattice points per axis
    pitch: float
    levels: list                   # [f_0(grid), ..., f_K(grid)], each (N, n)
    displacements: list            # sup |f_{k+1} - f_k| per step

    @property
    def n_steps(self) -> int:
        return len(self.levels) - 1

    @property
    def surface(self) -> np.ndarray:
        return self.levels[-1]

    def surface_cloud(self) -> PointCloud:
        return PointCloud(self.surface)

    def refined_surface(self, factor: int = 16, max_points: int = 400_000) -> np.ndarray:
        """Multilinear upsampling of the final surface on its lattice.

        Bilateral measurements against the bare vertex set bottom out at
        half the lattice pitch; refining along the known connectivity cuts
        that floor by ``factor`` (auto-reduced to respect ``max_points``).
        """
        arr = self.surface.reshape(*self.grid_shape, -1)
        d = len(self.grid_shape)
        n = self.surface.shape[0]
        factor = max(1, min(factor, int((max_points / max(n, 1)) ** (1.0 / d))))
        for axis in range(d):
            m = arr.shape[axis]
            if m < 2 or factor == 1:
                continue
            coords = np.arange((m - 1) * factor + 1) / factor
            lo = np.minimum(coords.astype(int), m - 2)
            shape = [1] * arr.ndim
            shape[axis] = coords.size
            w = (coords - lo).reshape(shape)
            a = np.take(arr, lo, axis=axis)
            b = np.take(arr, lo + 1, axis=axis)
            arr = a * (1.0 - w) + b * w
        return arr.reshape(-1, self.surface.shape[1])

    def save_csv(self, directory):
        """One CSV point list per level: level_00.csv .. level_KK.csv."""
        import os
        from .io import write_points_csv
        os.makedirs(directory, exist_ok=True)
        paths = []
        for k, pts in enumerate(self.levels):
            path = os.path.join(directory, f"level_{k:02d}.csv")
            write_points_csv(pts, path)
            paths.append(path)
        return paths

    def export_off(self, path):
        """Triangle mesh of the final surface (2-dimensional lattices only)."""
        if len(self.grid_shape) != 2:
            raise GeometryError("mesh export needs a 2-dimensional lattice")
        nx, ny = self.grid_shape
        verts = self.surface
        faces = []
        for i in range(nx - 1):
            for j in range(ny - 1):
                a = i * ny + j
                b = a + 1
                c = a + ny
                d = c + 1
                faces.append((a, b, d))
                faces.append((a, d, c))
        with open(path, "w", newline="\n") as fh:
            fh.write("OFF\n")
            fh.write(f"{len(verts)} {len(faces)} 0\n")
            for v in verts:
                fh.write(" ".join(format_float(x) for x in v) + "\n")
            for f in faces:
                fh.write("3 " + " ".join(str(i) for i in f) + "\n")
        return path


def stopping_layer(ccbp: CCBP, pitch: float) -> int:
    """Deepest layer worth applying: steps move points at most 10 r_k, so
    once that falls below a tenth of the lattice pitch the motion is
    sub-resolution."""
    k = 0
    while k < ccbp.depth and 10.0 * ccbp.radius(k) >= pitch / 10.0:
        k += 1
    return k


def iterate(ccbp: CCBP, pitch: float, k_max: int | None = None,
            extent: float | None = None) -> SurfaceIterate:
    """Run the surface iteration on a base-plane lattice.

    The lattice is a square patch of the base plane wide enough to cover
    every layer's influence region (override with ``extent``). Applies
    sigma_0 .. sigma_{K-1} with K capped by the sub-resolution rule and by
    ``k_max``; the unconditional 10 r_k step bound is enforced, a violation
    is an internal error, not a data property.
    """
    if pitch <= 0:
        raise GeometryError("lattice pitch must be positive")
    plane = ccbp.base_plane
    if extent is None:
        extent = 1.0
        for layer in ccbp.layers:
            coords = (layer.centers - plane.base) @ plane.frame.T
            reach = (np.abs(coords).max() if coords.size else 0.0) + 12.0 * layer.radius
            extent = max(extent, reach)
    m = int(math.ceil(extent / pitch))
    axis = np.arange(-m, m + 1) * pitch
    mesh = np.meshgrid(*([axis] * plane.dim), indexing="ij")
    tangent = np.stack([ax.ravel() for ax in mesh], axis=1)
    grid_shape = tuple(len(axis) for _ in range(plane.dim))

    k_stop = stopping_layer(ccbp, pitch)
    if k_max is not None:
        k_stop = min(k_stop, k_max)
    levels = [plane.from_tangent(tangent)]
    displacements = []
    for k in range(k_stop):
        nxt = apply_sigma(ccbp, k, levels[-1])
        step = float(np.max(np.linalg.norm(nxt - levels[-1], axis=1)))
        limit = 10.0 * ccbp.radius(k)
        if step > limit * (1.0 + 1e-9):
            raise CCBPError(
                f"step {k} moved a point {step:.6g} > 10 r_k = {limit:.6g}; "
                "this bound is unconditional, the blend map is broken")
        displacements.append(step)
        levels.append(nxt)
    return SurfaceIterate(ccbp=ccbp, tangent=tangent, grid_shape=grid_shape,
                          pitch=pitch, levels=levels,
                          displacements=displacements)


@dataclass
class CertificateItem:
    name: str
    measured: float
    bound: float
    direction: str                 # "upper": pass iff measured <= bound
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {"name": self.name, "measured": self.measured,
                "bound": self.bound, "direction": self.direction,
                "passed": self.passed, "details": self.details}


@dataclass
class CertificateReport:
    epsilon: float
    items: list

    @property
    def passed(self) -> bool:
        return all(item.passed for item in self.items)

    def item(self, name: str) -> CertificateItem:
        for entry in self.items:
            if entry.name == name:
                return entry
        raise KeyError(name)

    def to_dict(self):
        return {"epsilon": self.epsilon, "passed": self.passed,
                "items": [item.to_dict() for item in self.items]}


DEFAULT_CEILINGS = {
    "far_identity": 1e-12,         # absolute displacement, exact-zero design
    "sup_displacement": 20.0,      # x epsilon
    "bi_holder": 0.9,              # envelope exponent tau must stay below 1
    "step_displacement": 20.0,     # x epsilon r_k
    "projection_consistency": 20.0,   # x eps_k(y) r_k
    "reifenberg_flat": 20.0,       # x epsilon
    "content_lower": 0.5,          # lower bound on content / r^d
}


def _far_probes(ccbp: CCBP, extent: float) -> np.ndarray:
    """Deterministic points with base-plane distance > 2 and clear of every
    layer's influence region, so the map must fix them exactly."""
    plane = ccbp.base_plane
    normal_dir = None
    for axis in np.eye(plane.ambient_dim):
        residual = axis - plane.frame.T @ (plane.frame @ axis)
        norm = np.linalg.norm(residual)
        if norm > 1e-9:
            normal_dir = residual / norm
            break
    if normal_dir is None:
        raise GeometryError("base plane fills the ambient space; no normal side")
    anchors = [np.zeros(plane.dim)]
    for axis in np.eye(plane.dim):
        anchors.append(extent * axis)
        anchors.append(-extent * axis)
    probes = []
    for anchor in anchors:
        base_pt = plane.from_tangent(anchor[None, :])[0]
        for sign in (1.0, -1.0):
            offset = 2.5
            for _ in range(60):
                candidate = base_pt + sign * offset * normal_dir
                clear = all(
                    not ccbp.in_v(k, 10.0 + 1e-9, candidate)[0]
                    for k in range(ccbp.depth))
                if clear:
                    probes.append(candidate)
                    break
                offset *= 1.5
    if not probes:
        raise GeometryError("no identity-zone probe cleared the influence regions")
    return np.asarray(probes)


def _apply_chain(ccbp: CCBP, k_stop: int, points: np.ndarray) -> np.ndarray:
    out = points
    for k in range(k_stop):
        out = apply_sigma(ccbp, k, out)
    return out


def _interior_mask(surface: SurfaceIterate, margin: float) -> np.ndarray:
    extent = np.abs(surface.tangent).max() if surface.tangent.size else 0.0
    return np.max(np.abs(surface.tangent), axis=1) <= extent - margin


def _pair_sample(rng, count: int, n_pairs: int):
    first = rng.integers(0, count, size=n_pairs)
    second = rng.integers(0, count, size=n_pairs)
    keep = first != second
    return first[keep], second[keep]


def certify(surface: SurfaceIterate, ccbp: CCBP, epsilon: float,
            ceilings: dict | None = None, seed: int = 0,
            n_pairs: int = 4000, flat_scales=(0.1, 0.2, 0.4, 0.8),
            flat_points: int = 5,
            content_scales=(0.05, 0.1, 0.2), content_points: int = 5,
            pitch_frac: float = 1.0 / 32.0) -> CertificateReport:
    """Measure the parametrization guarantees on the computed surface.

    Every item reports an observed constant against a ceiling (or floor for
    the content item); the report never raises on a failed comparison.
    """
    bounds = dict(DEFAULT_CEILINGS)
    if ceilings:
        bounds.update(ceilings)
    rng = np.random.default_rng(seed)
    items = []
    d = ccbp.dim
    grid0 = surface.levels[0]
    final = surface.surface
    extent = float(np.abs(surface.tangent).max()) if surface.tangent.size else 1.0

    probes = _far_probes(ccbp, 1.2 * extent)
    moved = _apply_chain(ccbp, surface.n_steps, probes)
    far_measure = float(np.max(np.linalg.norm(moved - probes, axis=1)))
    items.append(CertificateItem(
        name="far_identity", measured=far_measure, bound=bounds["far_identity"],
        direction="upper", passed=far_measure <= bounds["far_identity"],
        details={"n_probes": int(probes.shape[0])}))

    sup_disp = float(np.max(np.linalg.norm(final - grid0, axis=1)))
    measured = sup_disp / epsilon
    items.append(CertificateItem(
        name="sup_displacement", measured=measured,
        bound=bounds["sup_displacement"], direction="upper",
        passed=measured <= bounds["sup_displacement"],
        details={"sup_abs": sup_disp}))

    first, second = _pair_sample(rng, grid0.shape[0], n_pairs)
    sep = np.linalg.norm(grid0[first] - grid0[second], axis=1)
    gap = np.linalg.norm(final[first] - final[second], axis=1)
    keep = (sep >= 1e-3) & (sep <= 0.9)
    sep, gap = sep[keep], gap[keep]
    if sep.size:
        logs, logg = np.log(sep), np.log(np.maximum(gap, 1e-300))
        slope = float(np.polyfit(logs, logg, 1)[0])
        tau_low = np.log(np.maximum(4.0 * gap, 1e-300)) / logs - 1.0
        tau_up = 1.0 - np.log(np.maximum(gap / 10.0, 1e-300)) / logs
        tau_req = float(max(np.max(tau_low), np.max(tau_up), 0.0))
    else:
        slope, tau_req = 1.0, 0.0
    items.append(CertificateItem(
        name="bi_holder", measured=tau_req, bound=bounds["bi_holder"],
        direction="upper", passed=tau_req <= bounds["bi_holder"],
        details={"loglog_slope": slope, "tau_fit": abs(1.0 - slope),
                 "n_pairs": int(sep.size)}))

    step_consts = [
        disp / (epsilon * ccbp.radius(k))
        for k, disp in enumerate(surface.displacements)
    ]
    step_measure = float(max(step_consts)) if step_consts else 0.0
    items.append(CertificateItem(
        name="step_displacement", measured=step_measure,
        bound=bounds["step_displacement"], direction="upper",
        passed=step_measure <= bounds["step_displacement"],
        details={"per_step": step_consts}))

    proj_measure = 0.0
    proj_detail = []
    for k in range(surface.n_steps):
        level = surface.levels[k]
        if level.shape[0] > 2000:
            pick = rng.choice(level.shape[0], size=2000, replace=False)
            pick.sort()
            level = level[pick]
        layer = ccbp.layers[k]
        r = layer.radius
        dist, nearest = cKDTree(layer.centers).query(level)
        inside = dist <= 8.0 * r
        if not inside.any():
            continue
        pts = level[inside]
        sigma = apply_sigma(ccbp, k, pts)
        proj = np.stack([
            layer.planes[j].project(pt) for pt, j in zip(pts, nearest[inside])
        ])
        num = np.linalg.norm(sigma - proj, axis=1)
        eps_loc = ccbp.epsilon_at(k, pts)
        ratio = np.zeros_like(num)
        alive = eps_loc > 0
        ratio[alive] = num[alive] / (eps_loc[alive] * r)
        dead_bad = (~alive) & (num > 1e-12 * r)
        if dead_bad.any():
            ratio[dead_bad] = math.inf
        level_max = float(ratio.max()) if ratio.size else 0.0
        proj_detail.append(level_max)
        proj_measure = max(proj_measure, level_max)
    items.append(CertificateItem(
        name="projection_consistency", measured=proj_measure,
        bound=bounds["projection_consistency"], direction="upper",
        passed=proj_measure <= bounds["projection_consistency"],
        details={"per_level": proj_detail}))

    # bilateral flatness is measured against the interpolated lattice
    # surface: the vertex set alone carries a half-pitch resolution floor
    # that would register as spurious non-flatness at the smaller scales
    cloud = PointCloud(surface.refined_surface())
    flat_measure = 0.0
    flat_rows = []
    for t in flat_scales:
        ok = _interior_mask(surface, t + 2.0 * surface.pitch)
        idx = np.flatnonzero(ok)
        if idx.size == 0:
            continue
        pick = rng.choice(idx, size=min(flat_points, idx.size), replace=False)
        for z in sorted(int(i) for i in pick):
            value = bbeta(cloud, Ball(final[z], t), d,
                          pitch_frac=pitch_frac).value
            flat_rows.append({"t": t, "z": z, "value": value})
            flat_measure = max(flat_measure, value / epsilon)
    items.append(CertificateItem(
        name="reifenberg_flat", measured=flat_measure,
        bound=bounds["reifenberg_flat"], direction="upper",
        passed=flat_measure <= bounds["reifenberg_flat"],
        details={"samples": flat_rows}))

    content_measure = math.inf
    content_rows = []
    for r in content_scales:
        ok = _interior_mask(surface, r + 2.0 * surface.pitch)
        idx = np.flatnonzero(ok)
        if idx.size == 0:
            continue
        pick = rng.choice(idx, size=min(content_points, idx.size), replace=False)
        for z in sorted(int(i) for i in pick):
            estimate = hausdorff_content(cloud, d, Ball(final[z], r),
                                         resolution=4.0 * surface.pitch)
            ratio = estimate.value / r ** d
            content_rows.append({"r": r, "z": z, "ratio": ratio})
            content_measure = min(content_measure, ratio)
    if not content_rows:
        content_measure = 0.0
    items.append(CertificateItem(
        name="content_lower", measured=content_measure,
        bound=bounds["content_lower"], direction="lower",
        passed=content_measure >= bounds["content_lower"],
        details={"samples": content_rows}))

    return CertificateReport(epsilon=epsilon, items=items)


class NotAGraphError(GeometryError):
    """The local sample is not a graph over the attached plane."""


@dataclass
class GraphFit:
    center_offset: float           # |A| at the nearest sample to the center
    lipschitz: float               # empirical slope over tangential pairs
    residual: float                # worst within-bucket normal spread
    floor: float                   # residual the lattice itself can explain
    n_samples: int


def local_graph_fit(surface: SurfaceIterate, ccbp: CCBP, k: int, j: int,
                    floor: float | None = None,
                    max_pair_samples: int = 1500) -> GraphFit:
    """Read the level-k surface inside the cylinder D(x_jk, P_jk, 49 r_k) as
    a graph over the plane and measure its size, slope, and residual.

    Samples sharing a tangential lattice cell must agree in the normal
    direction up to ``floor`` (default: four lattice diameters); a larger
    spread means two sheets pass over one tangential spot and the sample is
    not a graph.
    """
    if not 0 <= k < surface.n_steps + 1 or k >= ccbp.depth:
        raise CCBPError(f"layer {k} out of range")
    layer = ccbp.layers[k]
    if not 0 <= j < layer.count:
        raise CCBPError(f"center {j} out of range in layer {k}")
    plane = layer.planes[j]
    center = layer.centers[j]
    r = 49.0 * layer.radius
    level = surface.levels[min(k, surface.n_steps)]
    rel = level - center
    tang = rel @ plane.frame.T
    normal = rel - tang @ plane.frame
    inside = (np.linalg.norm(tang, axis=1) <= r) \
        & (np.linalg.norm(normal, axis=1) <= r)
    if inside.sum() < ccbp.dim + 1:
        raise NotAGraphError(
            f"cylinder around (k={k}, j={j}) holds {int(inside.sum())} samples; "
            "cannot read a graph")
    tang, normal = tang[inside], normal[inside]
    bucket = surface.pitch
    if floor is None:
        floor = 4.0 * math.sqrt(ccbp.dim) * bucket

    keys = np.round(tang / bucket).astype(np.int64)
    order = np.lexsort(keys.T[::-1])
    keys, tang, normal = keys[order], tang[order], normal[order]
    residual = 0.0   # worst distance of a sample to its cell's graph value
    worst_gap = 0.0  # worst sample-to-sample normal gap sharing a cell
    start = 0
    for stop in range(1, keys.shape[0] + 1):
        if stop == keys.shape[0] or not np.array_equal(keys[stop], keys[start]):
            if stop - start > 1:
                block = normal[start:stop]
                mean = block.mean(axis=0)
                residual = max(residual, float(
                    np.max(np.linalg.norm(block - mean, axis=1))))
                gaps = np.linalg.norm(block[:, None, :] - block[None, :, :], axis=2)
                worst_gap = max(worst_gap, float(gaps.max()))
            start = stop
    if worst_gap > floor:
        raise NotAGraphError(
            f"normal gap {worst_gap:.6g} between samples sharing a tangential "
            f"cell exceeds the lattice floor {floor:.6g}; two sheets cross the "
            f"cylinder of (k={k}, j={j})")

    anchor = int(np.argmin(np.linalg.norm(tang, axis=1)))
    center_offset = float(np.linalg.norm(normal[anchor]))
    n = tang.shape[0]
    if n > max_pair_samples:
        stride = int(math.ceil(n / max_pair_samples))
        tang_s, normal_s = tang[::stride], normal[::stride]
    else:
        tang_s, normal_s = tang, normal
    dt = np.linalg.norm(tang_s[:, None, :] - tang_s[None, :, :], axis=2)
    dn = np.linalg.norm(normal_s[:, None, :] - normal_s[None, :, :], axis=2)
    far = dt >= bucket
    lipschitz = float((dn[far] / dt[far]).max()) if far.any() else 0.0
    return GraphFit(center_offset=center_offset, lipschitz=lipschitz,
                    residual=residual, floor=floor, n_samples=int(n))


@dataclass
class BiLipCertificate:
    m_estimate: float              # sup over grid of sum_k eps'_k(f_k(z))^2
    distortion: float              # max stretch x max compression of f
    ratio_sup: float
    ratio_inf: float
    per_level_sup: list            # sup_z eps'_k(f_k(z)) per level

    def to_dict(self):
        return {"m_estimate": self.m_estimate, "distortion": self.distortion,
                "ratio_sup": self.ratio_sup, "ratio_inf": self.ratio_inf,
                "per_level_sup": self.per_level_sup}


def bilip_certificate(surface: SurfaceIterate, ccbp: CCBP,
                      n_pairs: int = 4000, seed: int = 0,
                      max_grid: int = 4000) -> BiLipCertificate:
    """Accumulated squared eps' along trajectories, plus the measured
    distortion of the final map on random lattice pairs."""
    rng = np.random.default_rng(seed)
    n = surface.tangent.shape[0]
    if n > max_grid:
        pick = np.sort(rng.choice(n, size=max_grid, replace=False))
    else:
        pick = np.arange(n)
    total = np.zeros(pick.size)
    per_level = []
    for k in range(surface.n_steps):
        eps = ccbp.epsilon_at(k, surface.levels[k][pick], factor=_PRIME_FACTOR)
        per_level.append(float(eps.max()) if eps.size else 0.0)
        total += eps ** 2
    m_estimate = float(total.max()) if total.size else 0.0

    first, second = _pair_sample(rng, n, n_pairs)
    sep = np.linalg.norm(surface.levels[0][first] - surface.levels[0][second], axis=1)
    gap = np.linalg.norm(surface.surface[first] - surface.surface[second], axis=1)
    good = sep > 0
    ratios = gap[good] / sep[good]
    ratio_sup = float(ratios.max()) if ratios.size else 1.0
    ratio_inf = float(ratios.min()) if ratios.size else 1.0
    distortion = ratio_sup / ratio_inf if ratio_inf > 0 else math.inf
    return BiLipCertificate(m_estimate=m_estimate, distortion=distortion,
                            ratio_sup=ratio_sup, ratio_inf=ratio_inf,
                            per_level_sup=per_level)


def ccbp_from_tree(tree: CubeTree, region: StoppingTimeRegion,
                   witnesses: dict, k_max: int | None = None) -> CCBP:
    """Build a layered system from a stopping-time region and per-cube
    witness planes (keyed by cube_id).

    The region's top cube is rescaled to side 5 at the origin. Layer k picks
    a maximal r_k-separated subset of the rescaled centers of region cubes
    at the tree level where sides first drop to r_k; their witness planes,
    translated through the centers, ride along. Runs until a needed tree
    level is missing (a warning, not an error).
    """
    top = region.top
    if top.cube_id not in witnesses:
        raise GeometryError("the top cube needs a witness plane")
    scale = 5.0 / top.side
    shift = top.center
    rho = tree.rho

    def rescale_point(x):
        return (np.asarray(x, dtype=float) - shift) * scale

    def rescale_plane(plane: AffinePlane, through) -> AffinePlane:
        return AffinePlane(rescale_point(plane.base), plane.frame).translate_to(through)

    base_plane = rescale_plane(witnesses[top.cube_id], rescale_point(top.center))
    layers = []
    k = 0
    while k_max is None or k <= k_max:
        r_k = 10.0 ** (-k)
        s = 0
        while 5.0 * rho ** s > r_k:
            s += 1
        level = top.level + s
        if level > tree.depth:
            warnings.warn(
                f"layer {k} needs tree level {level} beyond depth {tree.depth}; "
                "stopping the layered system here", stacklevel=2)
            break
        candidates = region.cubes_at_level(level)
        if not candidates:
            warnings.warn(f"layer {k} is empty; stopping the layered system here",
                          stacklevel=2)
            break
        missing = [c.cube_id for c in candidates if c.cube_id not in witnesses]
        if missing:
            raise GeometryError(
                f"missing witness planes for {len(missing)} cubes, "
                f"first {missing[0]}")
        centers = np.stack([rescale_point(c.center) for c in candidates])
        keep = _greedy_net(PointCloud(centers),
                           np.arange(centers.shape[0]), r_k)
        layer_centers = centers[keep]
        layer_planes = [
            rescale_plane(witnesses[candidates[i].cube_id], centers[i])
            for i in keep
        ]
        layers.append(CCBPLayer(k=k, centers=layer_centers, planes=layer_planes))
        k += 1
    if not layers:
        raise GeometryError("no layers could be built from the region")
    metadata = {
        "scale": scale,
        "shift": [float(v) for v in shift],
        "top_cube": list(top.cube_id),
        "levels_used": len(layers),
    }
    return CCBP(base_plane=base_plane, layers=layers, metadata=metadata)


def plane_to_dict(plane: AffinePlane) -> dict:
    return {
        "base": [float(v) for v in plane.base],
        "frame": [[float(v) for v in row] for row in plane.frame],
    }


def plane_from_dict(data: dict) -> AffinePlane:
    return AffinePlane(np.asarray(data["base"], dtype=float),
                       np.asarray(data["frame"], dtype=float))


def ccbp_to_dict(ccbp: CCBP) -> dict:
    return {
        "base_plane": plane_to_dict(ccbp.base_plane),
        "layers": [
            {
                "k": layer.k,
                "centers": [[float(v) for v in c] for c in layer.centers],
                "planes": [plane_to_dict(p) for p in layer.planes],
            }
            for layer in ccbp.layers
        ],
        "metadata": ccbp.metadata,
    }


def ccbp_from_dict(data: dict) -> CCBP:
    layers = [
        CCBPLayer(k=int(entry["k"]),
                  centers=np.asarray(entry["centers"], dtype=float),
                  planes=[plane_from_dict(p) for p in entry["planes"]])
        for entry in data["layers"]
    ]
    return CCBP(base_plane=plane_from_dict(data["base_plane"]), layers=layers,
                metadata=dict(data.get("metadata", {})))

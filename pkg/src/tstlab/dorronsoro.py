"""Affine-approximation numbers for sampled maps, dyadic sums, and the
bridge from them to flatness of the image set.

For a map f: R^d -> R^m sampled on a regular lattice and a ball B in the
domain with radius r,

    omega_p(f, B) = inf over affine A of ( avg_{x in B} (|f(x)-A(x)|/r)^p )^(1/p)

with the average over lattice samples in B (quadrature error O(pitch * Lip);
the pitch rides along in every result). p = infinity takes the sup instead.

The dyadic sum decomposes the support cube ``depth`` times, measures
omega_p(3 B_I) on each occupied cell I (B_I is the ball around the cell
center of radius diam I), and reports both the squared-weight and the
p-power-weight totals against the natural normalization diam(supp)^d * Lip^2.

For bi-Lipschitz samples two comparisons are exposed: the flatness of a
half-ball against the p=1 number to the power 1/(d+1), and the image-set
beta number at a fixed witness plane (the image of the affine minimizer)
against (vol(B)/r^d)^(1/p) * omega_p(B).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, minimize

from .beta import beta_dp
from .content import ball_volume
from .geometry import (AffinePlane, Ball, GeometryError, PointCloud,
                       orthonormal_frame)

_IRLS_MAX_ITER = 60
_IRLS_TOL = 1e-12
_MINIMAX_LADDER = (2.0, 4.0, 8.0, 16.0, 32.0, 64.0)


@dataclass(frozen=True)
class AffineMap:
    """x -> matrix @ x + offset, matrix (m, d), offset (m,)."""
    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        offset = np.atleast_1d(np.asarray(self.offset, dtype=float))
        if matrix.shape[0] != offset.shape[0]:
            raise GeometryError("affine map matrix and offset disagree on codomain")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "offset", offset)

    @property
    def domain_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def codomain_dim(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        vals = np.atleast_2d(x) @ self.matrix.T + self.offset
        return vals[0] if single else vals

    def image_plane(self) -> AffinePlane:
        """The affine d-plane A(R^d) in the codomain; needs full rank."""
        if np.linalg.matrix_rank(self.matrix, tol=1e-10) < self.domain_dim:
            raise GeometryError("affine map is rank-deficient; image is not a d-plane")
        return AffinePlane(self.offset, orthonormal_frame(self.matrix.T))

    def to_dict(self):
        return {
            "matrix": [[float(v) for v in row] for row in self.matrix],
            "offset": [float(v) for v in self.offset],
        }


def _pairwise_ratio_range(domain: np.ndarray, values: np.ndarray):
    """(min, max) of |f(x)-f(y)| / |x-y| over distinct sample pairs, chunked."""
    n = domain.shape[0]
    lo, hi = math.inf, 0.0
    chunk = max(16, 2_000_000 // max(n, 1))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        dx = np.linalg.norm(domain[start:stop, None, :] - domain[None, :, :], axis=2)
        dv = np.linalg.norm(values[start:stop, None, :] - values[None, :, :], axis=2)
        mask = dx > 0
        if mask.any():
            ratios = dv[mask] / dx[mask]
            lo = min(lo, float(ratios.min()))
            hi = max(hi, float(ratios.max()))
    return (0.0 if lo is math.inf else lo), hi


class SampledFunction:
    """A map R^d -> R^m known on a regular lattice of domain points."""

    def __init__(self, domain, values, lipschitz: float | None = None,
                 bilipschitz: float | None = None, validate: bool = True):
        domain = np.asarray(domain, dtype=float)
        if domain.ndim == 1:
            domain = domain[:, None]
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if domain.shape[0] != values.shape[0]:
            raise GeometryError("domain and value sample counts disagree")
        if domain.shape[0] < 2:
            raise GeometryError("need at least two lattice samples")
        self.domain = domain
        self.values = values
        self.lipschitz = lipschitz
        self.bilipschitz = bilipschitz
        self._cloud = PointCloud(domain)
        nn = self._cloud.tree.query(domain, k=2)[0][:, 1]
        self.pitch = float(np.min(nn[nn > 0])) if np.any(nn > 0) else 0.0
        self._ratio_range = None
        if validate:
            self._validate_lattice()
            if lipschitz is not None:
                hi = self.ratio_range()[1]
                if hi > lipschitz * 1.01:
                    raise GeometryError(
                        f"empirical Lipschitz ratio {hi:.6g} exceeds the declared "
                        f"constant {lipschitz:.6g} beyond the 1% allowance")

    @classmethod
    def on_lattice(cls, fn, low: float, high: float, count: int,
                   domain_dim: int = 1, **kwargs) -> "SampledFunction":
        """Sample ``fn`` on a regular lattice with ``count`` points per axis."""
        axes = [np.linspace(low, high, count) for _ in range(domain_dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        domain = np.stack([m.ravel() for m in mesh], axis=1)
        vals = np.asarray([fn(x) for x in (domain[:, 0] if domain_dim == 1 else domain)],
                          dtype=float)
        return cls(domain if domain_dim > 1 else domain[:, 0], vals, **kwargs)

    def _validate_lattice(self):
        if self.pitch <= 0:
            raise GeometryError("lattice pitch is zero; duplicate sample points")
        rel = (self.domain - self.domain.min(axis=0)) / self.pitch
        err = np.abs(rel - np.round(rel))
        if float(err.max()) > 1e-6:
            raise GeometryError(
                f"samples stray {err.max():.3g} lattice units from a regular grid")

    @property
    def domain_dim(self) -> int:
        return self.domain.shape[1]

    @property
    def codomain_dim(self) -> int:
        return self.values.shape[1]

    @property
    def n_samples(self) -> int:
        return self.domain.shape[0]

    def ratio_range(self):
        if self._ratio_range is None:
            self._ratio_range = _pairwise_ratio_range(self.domain, self.values)
        return self._ratio_range

    def support_diameter(self) -> float:
        alive = np.linalg.norm(self.values, axis=1) > 0
        if not alive.any():
            return 0.0
        return PointCloud(self.domain[alive]).diameter()

    def indices_in_ball(self, ball: Ball) -> np.ndarray:
        return self._cloud.indices_in_ball(ball)

    def image_cloud(self) -> PointCloud:
        return PointCloud(self.values)

    def scaled(self, factor: float) -> "SampledFunction":
        return SampledFunction(self.domain, self.values * factor,
                               lipschitz=None if self.lipschitz is None
                               else abs(factor) * self.lipschitz,
                               validate=False)


@dataclass
class OmegaValue:
    value: float
    affine: AffineMap
    p: float
    ball: Ball
    n_samples: int
    pitch: float
    degenerate: bool = False

    def to_dict(self):
        return {
            "value": self.value,
            "p": None if math.isinf(self.p) else self.p,
            "n_samples": self.n_samples,
            "pitch": self.pitch,
            "degenerate": self.degenerate,
            "affine": self.affine.to_dict(),
        }


def _residual_norms(x, f, affine: AffineMap) -> np.ndarray:
    return np.linalg.norm(f - affine(x), axis=1)


def _lstsq_affine(x, f, weights=None) -> AffineMap:
    design = np.hstack([x, np.ones((x.shape[0], 1))])
    if weights is not None:
        root = np.sqrt(weights)[:, None]
        sol = np.linalg.lstsq(design * root, f * root, rcond=None)[0]
    else:
        sol = np.linalg.lstsq(design, f, rcond=None)[0]
    return AffineMap(sol[:-1].T, sol[-1])


def _irls_affine(x, f, p: float, seed: AffineMap) -> AffineMap:
    affine = seed
    floor = max(float(np.abs(f).max()), 1.0) * 1e-12
    prev = math.inf
    for _ in range(_IRLS_MAX_ITER):
        res = np.maximum(_residual_norms(x, f, affine), floor)
        weights = res ** (p - 2.0)
        weights /= weights.max()
        affine = _lstsq_affine(x, f, weights)
        cost = float(np.mean(_residual_norms(x, f, affine) ** p))
        if abs(prev - cost) <= _IRLS_TOL * max(cost, 1e-300):
            break
        prev = cost
    return affine


def _minimax_affine_1d_codomain(x, f) -> AffineMap:
    """Exact Chebyshev affine fit (codomain dimension 1) by linear program."""
    n, d = x.shape
    # variables: slope (d), intercept, t; minimize t with |res_i| <= t
    c = np.zeros(d + 2)
    c[-1] = 1.0
    block = np.hstack([x, np.ones((n, 1)), -np.ones((n, 1))])
    a_ub = np.vstack([-block[:, :-1], block[:, :-1]])
    a_ub = np.hstack([a_ub, -np.ones((2 * n, 1))])
    b_ub = np.concatenate([-f[:, 0], f[:, 0]])
    bounds = [(None, None)] * (d + 1) + [(0, None)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        raise GeometryError(f"minimax affine fit failed: {res.message}")
    return AffineMap(res.x[:d][None, :], res.x[d:d + 1])


def _minimax_affine(x, f, seed: AffineMap) -> AffineMap:
    if f.shape[1] == 1:
        return _minimax_affine_1d_codomain(x, f)
    affine = seed
    for p in _MINIMAX_LADDER:
        affine = _irls_affine(x, f, p, affine)
    m, d = affine.codomain_dim, affine.domain_dim

    def unpack(theta):
        return AffineMap(theta[:m * d].reshape(m, d), theta[m * d:])

    def cost(theta):
        return float(np.max(_residual_norms(x, f, unpack(theta))))

    theta0 = np.concatenate([affine.matrix.ravel(), affine.offset])
    out = minimize(cost, theta0, method="Nelder-Mead",
                   options={"maxiter": 400 * theta0.size, "xatol": 1e-10,
                            "fatol": 1e-12})
    return unpack(out.x) if out.fun <= cost(theta0) else affine


def omega_p(func: SampledFunction, ball: Ball, p: float,
            witness: AffineMap | None = None) -> OmegaValue:
    """Best-affine approximation number of ``func`` on a domain ball.

    With ``witness`` given the value is evaluated at that affine map with no
    optimization. Rank-deficient local sample sets yield value 0 with the
    degenerate flag (any affine extension of the local fit is as good).
    """
    if ball.radius <= 0:
        raise GeometryError("omega needs a ball of positive radius")
    if not (p == math.inf or p >= 1.0):
        raise GeometryError(f"p must be in [1, inf], got {p}")
    if ball.ambient_dim != func.domain_dim:
        raise GeometryError("ball lives in the wrong ambient dimension")
    idx = func.indices_in_ball(ball)
    d = func.domain_dim
    if idx.shape[0] < d + 1:
        raise GeometryError(
            f"need at least {d + 1} samples in the ball, found {idx.shape[0]}")
    x = func.domain[idx]
    f = func.values[idx]
    r = ball.radius

    def finish(affine: AffineMap, degenerate: bool = False) -> OmegaValue:
        res = _residual_norms(x, f, affine) / r
        if math.isinf(p):
            value = float(res.max())
        else:
            value = float(np.mean(res ** p) ** (1.0 / p))
        if degenerate:
            value = 0.0
        return OmegaValue(value=value, affine=affine, p=p, ball=ball,
                          n_samples=int(idx.shape[0]), pitch=func.pitch,
                          degenerate=degenerate)

    if witness is not None:
        return finish(witness)
    design_rank = np.linalg.matrix_rank(
        np.hstack([x, np.ones((x.shape[0], 1))]), tol=1e-10)
    seed = _lstsq_affine(x, f)
    if design_rank < d + 1:
        return finish(seed, degenerate=True)
    if p == 2.0:
        return finish(seed)
    if math.isinf(p):
        return finish(_minimax_affine(x, f, seed))
    return finish(_irls_affine(x, f, p, seed))


@dataclass
class OmegaReport:
    p: float
    depth: int
    rows: list
    square_sum: float
    power_sum: float | None
    normalization: float
    domain_dim: int
    lipschitz: float

    def ratio(self) -> float:
        if self.normalization > 0:
            return self.square_sum / self.normalization
        return 0.0 if self.square_sum == 0 else math.inf

    def to_dict(self):
        return {
            "p": None if math.isinf(self.p) else self.p,
            "depth": self.depth,
            "square_sum": self.square_sum,
            "power_sum": self.power_sum,
            "normalization": self.normalization,
            "ratio": self.ratio(),
            "domain_dim": self.domain_dim,
            "lipschitz": self.lipschitz,
            "n_cells": len(self.rows),
            "rows": [
                {"level": level, "cell": list(cell), "omega": omega}
                for level, cell, omega in self.rows
            ],
        }


def omega_sum(func: SampledFunction, p: float, depth: int) -> OmegaReport:
    """Dyadic decomposition of the support cube with omega_p(3 B_I) on each
    occupied cell, reporting both the squared and p-power weighted totals."""
    if depth < 1:
        raise GeometryError("depth must be at least 1")
    d = func.domain_dim
    alive = np.linalg.norm(func.values, axis=1) > 0
    support = func.domain[alive] if alive.any() else func.domain
    origin = support.min(axis=0)
    span = float(max((support.max(axis=0) - origin).max(), func.pitch))
    lip = func.lipschitz if func.lipschitz is not None else func.ratio_range()[1]

    rows = []
    square_sum = 0.0
    power_sum = 0.0 if not math.isinf(p) else None
    for level in range(depth + 1):
        side = span / 2 ** level
        cells = np.floor((support - origin) / side).astype(np.int64)
        cells = np.minimum(cells, 2 ** level - 1)
        for cell in sorted({tuple(c) for c in cells}):
            center = origin + (np.asarray(cell, dtype=float) + 0.5) * side
            diam = side * math.sqrt(d)
            ball = Ball(center, 3.0 * diam)
            if func.indices_in_ball(ball).shape[0] < d + 1:
                continue
            value = omega_p(func, ball, p).value
            rows.append((level, tuple(int(c) for c in cell), value))
            square_sum += value ** 2 * side ** d
            if power_sum is not None:
                power_sum += value ** p * side ** d
    normalization = func.support_diameter() ** d * lip ** 2
    return OmegaReport(p=p, depth=depth, rows=rows, square_sum=float(square_sum),
                       power_sum=None if power_sum is None else float(power_sum),
                       normalization=float(normalization), domain_dim=d,
                       lipschitz=float(lip))


@dataclass
class BoundPair:
    lhs: float
    rhs: float

    def constant(self) -> float:
        """Smallest C with lhs <= C * rhs; zero when both sides vanish."""
        if self.rhs > 0:
            return self.lhs / self.rhs
        return 0.0 if self.lhs <= 1e-12 else math.inf


def _require_bilipschitz(func: SampledFunction) -> float:
    if func.bilipschitz is None:
        raise GeometryError("a declared bi-Lipschitz constant is required")
    lo, hi = func.ratio_range()
    bound = func.bilipschitz
    if lo < 1.0 / (2.0 * bound):
        raise GeometryError(
            f"empirical lower ratio {lo:.6g} falls below 1/(2L) = "
            f"{1.0 / (2.0 * bound):.6g}; samples are not bi-Lipschitz at L = {bound}")
    if hi > bound * 1.01:
        raise GeometryError(
            f"empirical upper ratio {hi:.6g} exceeds the declared bi-Lipschitz "
            f"constant {bound:.6g}")
    return bound


def omega_infty_bound_check(func: SampledFunction, ball: Ball) -> BoundPair:
    """Sup-norm number of the half ball against the p=1 number of the full
    ball raised to 1/(d+1); needs bi-Lipschitz samples."""
    _require_bilipschitz(func)
    lhs = omega_p(func, ball.scaled(0.5), math.inf).value
    rhs = omega_p(func, ball, 1.0).value ** (1.0 / (func.domain_dim + 1))
    return BoundPair(lhs=lhs, rhs=rhs)


@dataclass
class OmegaBetaBound(BoundPair):
    omega: OmegaValue | None = None
    plane: AffinePlane | None = None
    domain_ball: Ball | None = None


def beta_from_omega(func: SampledFunction, center, radius: float, p: float,
                    slack: float = 1.001) -> OmegaBetaBound:
    """Flatness of the image samples inside B(center, radius), measured at
    the witness plane A(R^d) of the domain-side affine fit, against
    (vol(B)/radius^d)^(1/p) * omega_p(B) for a domain ball B covering the
    preimage."""
    bound = _require_bilipschitz(func)
    if radius <= 0:
        raise GeometryError("radius must be positive")
    center = np.asarray(center, dtype=float)
    if center.shape != (func.codomain_dim,):
        raise GeometryError("center must live in the codomain")
    d = func.domain_dim
    image_dist = np.linalg.norm(func.values - center, axis=1)
    inside = np.flatnonzero(image_dist <= radius)
    if inside.shape[0] < d + 1:
        raise GeometryError("too few image samples inside the ball")
    anchor = int(np.argmin(image_dist))
    z = func.domain[anchor]
    r_dom = bound * (radius + float(image_dist[anchor])) * slack
    reach = np.linalg.norm(func.domain[inside] - z, axis=1)
    if float(reach.max()) > r_dom:
        raise GeometryError(
            "preimage of the image ball escapes the bi-Lipschitz domain ball; "
            "the declared constant is too small")
    domain_ball = Ball(z, r_dom)
    omega = omega_p(func, domain_ball, p)
    plane = omega.affine.image_plane()
    image_ball = Ball(center, radius)
    lhs = beta_dp(func.image_cloud(), image_ball, d, p, plane=plane).value
    rhs = (ball_volume(d, r_dom) / radius ** d) ** (1.0 / p) * omega.value
    return OmegaBetaBound(lhs=lhs, rhs=rhs, omega=omega, plane=plane,
                          domain_ball=domain_ball)

"""Synthetic point-cloud families used by the experiments.

Every generator is deterministic given its seed. Families:

* ``segment``          evenly spaced points on a unit-direction segment;
* ``circle``           evenly spaced points on a circle;
* ``lipschitz_graph``  graph of a random Fourier profile whose Lipschitz
                       constant is clamped to lambda analytically (the sum of
                       |coefficient| * frequency bounds the derivative), so
                       the empirical pairwise ratios can never exceed it;
* ``koch``             the angle-parameterized von Koch polyline: each
                       segment is replaced by four of length ratio
                       1/(2(1+cos angle)); angle 60 gives the classic curve,
                       smaller angles give flatter, lower-dimension curves;
* ``cantor4``          four-corner Cantor set: cell centers after depth
                       rounds of the 1/4-contraction toward the unit-square
                       corners (exactly 4^depth points);
* ``perturbed_plane``  a square lattice on a 2-plane with uniform noise of a
                       given amplitude in the remaining coordinates.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import GeometryError
from .util import spawn_rng


def _embed(points: np.ndarray, ambient: int) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if ambient < points.shape[1]:
        raise GeometryError(
            f"ambient dimension {ambient} below intrinsic {points.shape[1]}")
    if ambient == points.shape[1]:
        return points
    out = np.zeros((points.shape[0], ambient))
    out[:, :points.shape[1]] = points
    return out


def segment(count: int, length: float = 1.0, ambient: int = 2,
            noise: float = 0.0, seed: int = 0) -> np.ndarray:
    """Evenly spaced samples of [0, length] x {0}, optional uniform noise of
    amplitude ``noise`` in the normal coordinates."""
    if count < 2 or length <= 0:
        raise GeometryError("segment needs count >= 2 and positive length")
    pts = np.zeros((count, ambient))
    pts[:, 0] = np.linspace(0.0, length, count)
    if noise > 0:
        rng = spawn_rng(seed, "segment")
        pts[:, 1:] += rng.uniform(-noise, noise, size=(count, ambient - 1))
    return pts


def circle(count: int, radius: float = 1.0, ambient: int = 2,
           noise: float = 0.0, seed: int = 0) -> np.ndarray:
    """Evenly spaced samples of a circle, optional radial uniform noise."""
    if count < 3 or radius <= 0:
        raise GeometryError("circle needs count >= 3 and positive radius")
    angles = 2.0 * math.pi * np.arange(count) / count
    r = np.full(count, radius)
    if noise > 0:
        rng = spawn_rng(seed, "circle")
        r = r + rng.uniform(-noise, noise, size=count)
    return _embed(np.stack([r * np.cos(angles), r * np.sin(angles)], axis=1),
                  ambient)


def fourier_profile(lam: float, harmonics: int = 3, seed: int = 0):
    """A callable g with Lipschitz constant exactly clamped to ``lam``.

    g(x) = lam * sum_j a_j sin(2 pi j x + phase_j) / Z with
    Z = sum_j |a_j| * 2 pi j, so |g'| <= lam pointwise.
    """
    if lam < 0:
        raise GeometryError("lambda must be nonnegative")
    if harmonics < 1:
        raise GeometryError("need at least one harmonic")
    rng = spawn_rng(seed, "fourier")
    amp = rng.uniform(0.5, 1.0, size=harmonics)
    phase = rng.uniform(0.0, 2.0 * math.pi, size=harmonics)
    freq = np.arange(1, harmonics + 1, dtype=float)
    z = float(np.sum(np.abs(amp) * 2.0 * math.pi * freq))

    def profile(x):
        x = np.asarray(x, dtype=float)
        waves = np.sin(2.0 * math.pi * np.multiply.outer(x, freq) + phase)
        return lam * (waves @ amp) / z

    return profile


def lipschitz_graph(count: int, lam: float = 0.1, harmonics: int = 3,
                    ambient: int = 2, seed: int = 0) -> np.ndarray:
    """Graph {(x, g(x)) : x in [0, 1]} of a lam-Lipschitz Fourier profile."""
    if count < 2:
        raise GeometryError("graph needs count >= 2")
    x = np.linspace(0.0, 1.0, count)
    g = fourier_profile(lam, harmonics, seed)
    return _embed(np.stack([x, g(x)], axis=1), ambient)


def koch(depth: int, angle: float = 30.0, ambient: int = 2) -> np.ndarray:
    """Vertices of the von Koch polyline at the given generation depth.

    The four-segment generator uses length ratio r = 1/(2(1+cos angle));
    total length grows by 4r per generation and the limit curve has
    dimension log 4 / log(1/r).
    """
    if depth < 0:
        raise GeometryError("depth must be nonnegative")
    if not 0.0 < angle < 90.0:
        raise GeometryError("angle must lie in (0, 90) degrees")
    theta = math.radians(angle)
    ratio = 1.0 / (2.0 * (1.0 + math.cos(theta)))
    pts = np.array([0.0 + 0.0j, 1.0 + 0.0j])
    rot_up = complex(math.cos(theta), math.sin(theta))
    rot_down = complex(math.cos(theta), -math.sin(theta))
    for _ in range(depth):
        nxt = [pts[0]]
        for a, b in zip(pts[:-1], pts[1:]):
            v = (b - a) * ratio
            c = a + v
            d = c + v * rot_up
            e = d + v * rot_down
            nxt.extend([c, d, e, b])
        pts = np.asarray(nxt)
    return _embed(np.stack([pts.real, pts.imag], axis=1), ambient)


def koch_dimension(angle: float = 30.0) -> float:
    """Similarity dimension of the angle-parameterized von Koch curve."""
    ratio = 1.0 / (2.0 * (1.0 + math.cos(math.radians(angle))))
    return math.log(4.0) / math.log(1.0 / ratio)


def cantor4(depth: int, ambient: int = 2) -> np.ndarray:
    """Centers of the 4^depth cells of the four-corner Cantor iteration on
    the unit square (contraction 1/4 toward each corner)."""
    if depth < 0:
        raise GeometryError("depth must be nonnegative")
    corners = np.array([[0.0, 0.0], [0.75, 0.0], [0.0, 0.75], [0.75, 0.75]])
    pts = np.array([[0.5, 0.5]])
    for _ in range(depth):
        pts = (pts[None, :, :] / 4.0 + corners[:, None, :]).reshape(-1, 2)
    return _embed(pts, ambient)


def perturbed_plane(side_count: int, noise: float = 0.01, ambient: int = 3,
                    seed: int = 0) -> np.ndarray:
    """Unit-square lattice in the first two coordinates with uniform noise
    of amplitude ``noise`` in the remaining ones."""
    if side_count < 2:
        raise GeometryError("lattice needs side_count >= 2")
    if ambient < 3:
        raise GeometryError("perturbed plane needs ambient dimension >= 3")
    if noise < 0:
        raise GeometryError("noise amplitude must be nonnegative")
    axis = np.linspace(0.0, 1.0, side_count)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    pts = np.zeros((side_count * side_count, ambient))
    pts[:, 0] = xx.ravel()
    pts[:, 1] = yy.ravel()
    if noise > 0:
        rng = spawn_rng(seed, "plane")
        pts[:, 2:] += rng.uniform(-noise, noise,
                                  size=(pts.shape[0], ambient - 2))
    return pts


FAMILIES = {
    "segment": segment,
    "circle": circle,
    "lipschitz_graph": lipschitz_graph,
    "koch": koch,
    "cantor4": cantor4,
    "perturbed_plane": perturbed_plane,
}


def make_dataset(family: str, seed: int | None = None, **params) -> np.ndarray:
    """Build a cloud by family name; unknown names or parameters raise."""
    if family not in FAMILIES:
        raise GeometryError(
            f"unknown dataset family {family!r}; choose from {sorted(FAMILIES)}")
    fn = FAMILIES[family]
    if seed is not None:
        import inspect
        if "seed" in inspect.signature(fn).parameters:
            params["seed"] = seed
    return fn(**params)

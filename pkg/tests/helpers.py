"""Shared builders for the test suite.

The CCBP builders construct small coherent families by hand so the engine
tests exercise known geometry: a trivial family (every plane equals the
base plane), a tilt chain (per-level direction converging geometrically to
a final angle, so every refinement step does nonzero work), a single-layer
zigzag (alternating plane tilts, the minimal system with a nonzero eps'
profile), and a folded family whose final surface is not a graph over the
base plane.

Layer extents are capped at ``cap * r_k``: coherence profiles compare all
center pairs within a fixed multiple of r_k, so the per-layer center count
— not the geometry — sets the cost, and a cap keeps every layer at O(cap)
centers while leaving all structural conditions intact (deep layers simply
refine a shrinking neighborhood of the origin).
"""
from __future__ import annotations

import numpy as np

from tstlab.geometry import AffinePlane, Ball
from tstlab.reifenberg import CCBP, CCBPLayer


def line_plane(angle: float, base=(0.0, 0.0)) -> AffinePlane:
    direction = np.array([np.cos(angle), np.sin(angle)])
    return AffinePlane.from_spanning(np.asarray(base, dtype=float),
                                     direction[None, :])


def _line_centers(angle: float, spacing: float, extent: float) -> np.ndarray:
    count = int(np.floor(extent / spacing))
    s = spacing * np.arange(-count, count + 1)
    return np.column_stack([s * np.cos(angle), s * np.sin(angle)])


def trivial_ccbp(k_max: int = 2, extent: float = 1.0,
                 cap: float = 50.0) -> CCBP:
    """All planes equal the hyperplane of first coordinates: every blend
    projects points already on the base plane onto itself."""
    base = AffinePlane.axis_aligned(1, 2)
    layers = []
    for k in range(k_max + 1):
        r = 10.0 ** (-k)
        centers = _line_centers(0.0, r, min(extent, cap * r))
        layers.append(CCBPLayer(k, centers, [base] * len(centers)))
    return CCBP(base, layers)


def tilt_ccbp(eps: float, k_max: int = 5, extent: float = 2.0,
              cap: float = 50.0) -> CCBP:
    """Tilt chain: layer-k planes and centers share the direction
    theta_k = a*(1 - 10^-(k+1)), a geometric approach to the limit angle a.

    Each consecutive pair of layers disagrees by 0.9a*10^-k, so descent
    (within 2*r_{k-1}) holds at any extent while no blend is a no-op.  The
    coherence profile is dominated by the layer-0 comparison against the
    base plane, roughly extent*sin(theta_0) ~ 1.8a; a = eps/2 keeps the
    profile below eps.
    """
    a = eps / 2.0
    base = AffinePlane.axis_aligned(1, 2)
    layers = []
    for k in range(k_max + 1):
        r = 10.0 ** (-k)
        theta = a * (1.0 - 10.0 ** (-(k + 1)))
        centers = _line_centers(theta, r, min(extent, cap * r))
        layers.append(CCBPLayer(k, centers,
                                [line_plane(theta)] * len(centers)))
    return CCBP(base, layers)


def zigzag_ccbp(eps: float, extent: float = 2.0) -> CCBP:
    """Single layer with planes tilted alternately by +-eps/2 through
    on-base centers: neighboring planes disagree by eps, so the eps'
    profile is ~eps and the accumulated square sum ~eps^2."""
    base = AffinePlane.axis_aligned(1, 2)
    centers = _line_centers(0.0, 1.0, extent)
    planes = [line_plane((eps / 2.0) * (-1.0) ** j, base=c)
              for j, c in enumerate(centers)]
    return CCBP(base, [CCBPLayer(0, centers, planes)])


def folded_ccbp(extent: float = 3.0) -> CCBP:
    """Structurally valid family whose layer-1 plane at the origin is
    orthogonal to the base plane, collapsing nearby points onto a vertical
    line: the final surface is not a graph there."""
    base = AffinePlane.axis_aligned(1, 2)
    layers = [CCBPLayer(0, _line_centers(0.0, 1.0, extent),
                        [base] * (2 * int(extent) + 1))]
    centers = _line_centers(0.0, 0.1, extent)
    planes = []
    for c in centers:
        if abs(c[0]) < 1e-12:
            planes.append(AffinePlane.from_spanning(c, np.array([[0.0, 1.0]])))
        else:
            planes.append(base)
    layers.append(CCBPLayer(1, centers, planes))
    return CCBP(base, layers)


def fold_center_index(ccbp: CCBP) -> int:
    gaps = np.linalg.norm(ccbp.layers[1].centers, axis=1)
    return int(np.argmin(gaps))


def ball_2d(x: float, y: float, r: float) -> Ball:
    return Ball(np.array([x, y]), r)

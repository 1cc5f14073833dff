"""Coherent layered systems and the flat-surface iteration built on them.

Tilted-line systems make every quantity explicit, so they serve as oracles
throughout:

* a chain whose layer-k planes all tilt by theta_k = a(1 - 10^-(k+1)) has
  adjacent-layer gaps |theta_k - theta_{k-1}| = 0.9a * 10^-k, which shows
  up verbatim in coherence profiles and in local graph slopes;
* a system whose centers all sit on the base plane with parallel planes is
  perfectly coherent: profile 0, the iteration is the identity bitwise, and
  every certificate is exactly zero;
* a single tilted plane inserted into such a system contributes a profile
  within [a/2, 2a] of its tilt a;
* a single layer of alternating +/-eps/2 tilts ("zigzag") has profile ~ eps
  and square-sum estimate M = eps^2 exactly (one layer, sup over pairs).

The smoothed cutoff is the quintic smoothstep, so its values at dyadic
points (0.5 at 9, 0.896484375 at 8.5) are exact binary fractions.
"""

import json
import re

import numpy as np
import pytest

from helpers import (
    fold_center_index,
    folded_ccbp,
    line_plane,
    tilt_ccbp,
    trivial_ccbp,
    zigzag_ccbp,
)
from tstlab.beta import beta_inf
from tstlab.cubes import build_cubes, build_nets, build_stopping_time
from tstlab.datasets import koch, lipschitz_graph, segment
from tstlab.geometry import AffinePlane, GeometryError, PointCloud
from tstlab.reifenberg import (
    CCBP,
    CCBPError,
    CCBPLayer,
    NotAGraphError,
    apply_sigma,
    bilip_certificate,
    ccbp_from_dict,
    ccbp_from_tree,
    ccbp_to_dict,
    certify,
    iterate,
    local_graph_fit,
    partition_of_unity,
    plane_from_dict,
    plane_to_dict,
    sigma_k,
    smooth_bump,
    stopping_layer,
    validate_ccbp,
)

X_AXIS = AffinePlane.axis_aligned(1, 2)


def tilt_angles(eps, k_max):
    a = eps / 2.0
    return [a * (1.0 - 10.0 ** (-(k + 1))) for k in range(k_max + 1)]


# ---------------------------------------------------------------------------
# smoothed cutoff


def test_smooth_bump_exact_values():
    # plateau and support endpoints are exact
    for t in (0.0, 3.0, 8.0):
        assert smooth_bump(t) == 1.0
    for t in (10.0, 11.0, 250.0):
        assert smooth_bump(t) == 0.0
    # quintic smoothstep at dyadic interior points: binary fractions
    assert smooth_bump(9.0) == 0.5
    assert smooth_bump(8.5) == 0.896484375
    assert smooth_bump(9.5) == 0.103515625


def test_smooth_bump_monotone_and_vectorized():
    grid = np.linspace(0.0, 12.0, 601)
    vals = smooth_bump(grid)
    assert vals.shape == grid.shape
    assert np.all(np.diff(vals) <= 0.0)
    assert np.all((vals >= 0.0) & (vals <= 1.0))
    assert isinstance(smooth_bump(4.0), float)


# ---------------------------------------------------------------------------
# partition of unity


def test_partition_isolated_center():
    solo = trivial_ccbp(k_max=0, extent=0.0)
    assert solo.layers[0].count == 1
    theta, psi = partition_of_unity(solo, 0, np.array([0.0, 0.0]))
    assert theta.tolist() == [1.0] and psi == 0.0
    theta, psi = partition_of_unity(solo, 0, np.array([25.0, 0.0]))
    assert theta.tolist() == [0.0] and psi == 1.0
    # normalization saturates a lone bump all the way to its support edge
    theta, psi = partition_of_unity(solo, 0, np.array([9.0, 0.0]))
    assert theta.tolist() == [1.0] and psi == 0.0
    # with several centers the weights genuinely split, still summing to one
    row = trivial_ccbp(k_max=0, extent=2.0)
    theta, psi = partition_of_unity(row, 0, np.array([9.5, 0.0]))
    assert np.all(theta < 1.0) and theta.sum() > 0.0
    assert theta.sum() + psi == 1.0


def test_partition_sums_to_one_exactly():
    chain = tilt_ccbp(0.01, k_max=3)
    rng = np.random.default_rng(77)
    worst = 0.0
    for k in range(4):
        for y in rng.uniform(-3.0, 3.0, size=(200, 2)):
            theta, psi = partition_of_unity(chain, k, y)
            worst = max(worst, abs(theta.sum() + psi - 1.0))
            assert psi >= -1e-15 and np.all(theta >= 0.0)
    assert worst == 0.0  # psi is defined as the exact complement


def test_partition_layer_range_errors():
    triv = trivial_ccbp()
    with pytest.raises(CCBPError, match="layer 9 out of range"):
        partition_of_unity(triv, 9, np.zeros(2))
    with pytest.raises(CCBPError, match="layer -1 out of range"):
        partition_of_unity(triv, -1, np.zeros(2))


# ---------------------------------------------------------------------------
# the local moves sigma_k


def test_sigma_single_bump_is_projection():
    # one center, weight saturated at 1 inside the plateau: sigma == projection
    plane = line_plane(0.3)
    solo = CCBP(X_AXIS, [CCBPLayer(0, np.zeros((1, 2)), [plane])])
    y = np.array([0.5, 0.3])
    moved = sigma_k(solo, 0, y)
    assert np.allclose(moved, plane.project(y), atol=1e-14)


def test_sigma_identity_far_from_centers():
    chain = tilt_ccbp(0.01, k_max=3)
    far = np.array([[50.0, 5.0], [-40.0, 2.0], [30.0, -30.0]])
    for k in range(4):
        out = apply_sigma(chain, k, far)
        assert np.array_equal(out, far)  # bitwise: the mass is exactly zero
    with pytest.raises(CCBPError, match="layer -1 out of range"):
        apply_sigma(chain, -1, far)


# ---------------------------------------------------------------------------
# structural validation


def test_validate_reports_plane_violation():
    layer = CCBPLayer(0, np.array([[0.0, 0.5]]), [X_AXIS])
    bad = CCBP(X_AXIS, [layer])
    with pytest.raises(CCBPError, match=re.escape(
            "plane condition: center (k=0, j=0) sits 0.5 off its plane")):
        validate_ccbp(bad, 0.1)


def test_validate_reports_separation_violation():
    layer = CCBPLayer(0, np.array([[0.0, 0.0], [0.9, 0.0]]), [X_AXIS, X_AXIS])
    bad = CCBP(X_AXIS, [layer])
    with pytest.raises(CCBPError, match=re.escape(
            "separation condition: centers (k=0, j=0) and (k=0, j=1) "
            "are 0.9 apart, need 1")):
        validate_ccbp(bad, 0.1)


def test_validate_reports_descent_violation():
    layer0 = CCBPLayer(0, np.zeros((1, 2)), [X_AXIS])
    layer1 = CCBPLayer(1, np.array([[5.0, 0.0]]), [X_AXIS])
    bad = CCBP(X_AXIS, [layer0, layer1])
    with pytest.raises(CCBPError, match=re.escape(
            "descent condition: center (k=1, j=0) lies 5 from layer 0, "
            "limit 2")):
        validate_ccbp(bad, 0.1)


def test_validate_requires_positive_epsilon_and_ordered_layers():
    triv = trivial_ccbp(k_max=1)
    with pytest.raises(CCBPError, match="epsilon must be positive"):
        validate_ccbp(triv, 0.0)
    with pytest.raises(CCBPError, match="layer 0 carries index k=1"):
        CCBP(X_AXIS, [CCBPLayer(1, np.zeros((1, 2)), [X_AXIS])])


# ---------------------------------------------------------------------------
# perfectly coherent system: everything is exactly zero / exactly identity


def test_trivial_profile_zero(trivial_system):
    profile = validate_ccbp(trivial_system["ccbp"], 1e-9)
    assert profile.profile_max == 0.0
    assert profile.passed  # passes at any positive epsilon
    assert len(profile.entries) == 125  # 3 + 21 + 101 centers
    assert set(profile.entries.values()) == {0.0}
    as_dict = profile.to_dict()
    assert as_dict["passed"] and len(as_dict["entries"]) == 125


def test_trivial_iteration_is_identity(trivial_system):
    surface = trivial_system["surface"]
    assert surface.n_steps == 3
    assert surface.grid_shape == (49,)
    assert np.array_equal(surface.surface, surface.levels[0])
    assert surface.displacements == [0.0, 0.0, 0.0]


def test_trivial_stopping_layer():
    triv = trivial_ccbp()
    assert stopping_layer(triv, 200.0) == 0  # 10 r_0 < pitch / 10
    assert stopping_layer(triv, 20.0) == 1
    assert stopping_layer(triv, 0.05) == 3  # capped by the depth


def test_trivial_certificate_exact_zeros(trivial_system):
    report = trivial_system["report"]
    assert report.passed and report.epsilon == 0.01
    for name in ("far_identity", "sup_displacement", "step_displacement",
                 "projection_consistency", "bi_holder"):
        assert report.item(name).measured == 0.0
    holder = report.item("bi_holder")
    assert holder.details["tau_fit"] <= 1e-3
    assert holder.details["loglog_slope"] == pytest.approx(1.0, abs=1e-9)
    assert report.item("reifenberg_flat").measured <= 1e-9
    content = report.item("content_lower")
    assert content.direction == "lower"
    assert content.measured == pytest.approx(1.875, rel=1e-9)
    with pytest.raises(KeyError):
        report.item("no_such_item")
    payload = report.to_dict()
    assert payload["passed"] and len(payload["items"]) == 7
    json.dumps(payload)  # serializable as-is


def test_certify_ceiling_override(trivial_system):
    report = certify(trivial_system["surface"], trivial_system["ccbp"], 0.01,
                     ceilings={"content_lower": 5.0})
    item = report.item("content_lower")
    assert item.bound == 5.0 and not item.passed
    assert not report.passed


def test_trivial_bilip_certificate(trivial_system):
    cert = bilip_certificate(trivial_system["surface"],
                             trivial_system["ccbp"])
    assert cert.m_estimate == 0.0
    assert cert.distortion == 1.0
    assert cert.ratio_sup == 1.0 and cert.ratio_inf == 1.0
    assert cert.per_level_sup == [0.0, 0.0, 0.0]


def test_trivial_graph_fits_are_flat(trivial_system):
    surface, ccbp = trivial_system["surface"], trivial_system["ccbp"]
    fit = local_graph_fit(surface, ccbp, 0, 1)
    assert (fit.center_offset, fit.lipschitz, fit.residual) == (0.0, 0.0, 0.0)
    assert fit.floor == pytest.approx(4 * 0.05)  # 4 sqrt(d) * pitch
    assert fit.n_samples == 49
    fit2 = local_graph_fit(surface, ccbp, 2, 0)
    assert fit2.lipschitz == 0.0 and fit2.n_samples == 19


# ---------------------------------------------------------------------------
# profile scales linearly with a single inserted tilt


def test_single_tilted_plane_profile_tracks_tilt():
    for a in (0.005, 0.02, 0.1):
        triv = trivial_ccbp(k_max=1)
        layer = triv.layers[1]
        mid = layer.count // 2
        planes = list(layer.planes)
        planes[mid] = line_plane(a, base=tuple(layer.centers[mid]))
        bumped = CCBP(triv.base_plane,
                      [triv.layers[0], CCBPLayer(1, layer.centers, planes)])
        profile = validate_ccbp(bumped, 1.0)
        assert a / 2 <= profile.profile_max <= 2 * a


# ---------------------------------------------------------------------------
# zigzag layer: single-scale square sum M = eps^2


def test_zigzag_square_sum_matches_tilt():
    for eps in (0.002, 0.01, 0.05):
        zig = zigzag_ccbp(eps)
        profile = validate_ccbp(zig, 1.0)
        assert profile.profile_max == pytest.approx(eps, rel=0.02)
        surface = iterate(zig, 0.05, extent=2.0)
        assert surface.n_steps == 1
        cert = bilip_certificate(surface, zig)
        assert cert.m_estimate == pytest.approx(eps ** 2, rel=0.05)
        assert 1.0 <= cert.distortion <= 1.0 + eps


# ---------------------------------------------------------------------------
# tilt chain at eps = 0.01: the main worked example


def test_tilt_chain_profile(tilt_system):
    eps, chain = tilt_system["epsilon"], tilt_system["ccbp"]
    profile = validate_ccbp(chain, eps)
    # dominated by the layer-0 comparison against the base plane: 0.9 eps
    assert profile.profile_max == pytest.approx(0.008999969625030756, rel=1e-9)
    assert profile.passed
    assert 0.85 <= profile.profile_max / eps <= 0.95


def test_tilt_chain_iteration_steps(tilt_system):
    surface = tilt_system["surface"]
    eps = tilt_system["epsilon"]
    assert surface.n_steps == 5 and len(surface.levels) == 6
    assert surface.grid_shape == (4401,)
    expected = [9.899967e-03, 9.899899e-04, 2.699972e-05, 2.699972e-07,
                2.699972e-09]
    assert surface.displacements == pytest.approx(expected, rel=1e-4)
    for k, step in enumerate(surface.displacements):
        assert step <= 10.0 * 10.0 ** (-k)          # hard per-step bound
        assert step <= 1.0 * eps * 10.0 ** (-k)     # measured: < eps r_k here
    sup = float(np.max(np.linalg.norm(surface.surface - surface.levels[0],
                                      axis=1)))
    assert sup == pytest.approx(0.010889956439264456, rel=1e-9)


def test_tilt_chain_cauchy_tails(tilt_system):
    surface = tilt_system["surface"]
    final = surface.levels[-1]
    for m in range(surface.n_steps):
        gap = float(np.max(np.linalg.norm(final - surface.levels[m], axis=1)))
        tail = sum(10.0 * 10.0 ** (-k) for k in range(m, surface.n_steps))
        assert gap <= tail + 1e-15  # geometric-series envelope


def test_tilt_chain_certificate(tilt_system):
    report = tilt_system["report"]
    assert report.passed
    assert report.item("far_identity").measured == 0.0
    sup = report.item("sup_displacement")
    assert sup.measured == pytest.approx(1.0889956439264454, rel=1e-9)
    assert sup.bound == 20.0 and sup.direction == "upper"
    assert report.item("bi_holder").measured == 0.0
    step = report.item("step_displacement")
    assert step.measured == pytest.approx(0.9899966587533834, rel=1e-9)
    assert len(step.details["per_step"]) == 5
    assert report.item("projection_consistency").measured <= 1e-8
    flat = report.item("reifenberg_flat")
    assert flat.measured == pytest.approx(0.01342247518787266, rel=1e-6)
    assert flat.measured <= 20.0
    assert report.item("content_lower").measured == pytest.approx(
        1.9999795455112461, rel=1e-6)


def test_tilt_chain_bilip_certificate(tilt_system):
    cert = bilip_certificate(tilt_system["surface"], tilt_system["ccbp"])
    assert cert.m_estimate == pytest.approx(6.959197533883535e-07, rel=1e-6)
    assert cert.distortion == pytest.approx(1.0000000974397125, rel=1e-9)
    assert 1.0 < cert.distortion < 1.0 + 1e-6
    assert cert.per_level_sup == pytest.approx(
        [4.974749796843633e-04, 4.500899848094610e-04, 4.950989797813937e-04,
         4.954949997976561e-05, 4.954949999980671e-06], rel=1e-6)


def test_tilt_chain_graph_fits(tilt_system):
    surface, chain = tilt_system["surface"], tilt_system["ccbp"]
    eps = tilt_system["epsilon"]
    angles = tilt_angles(eps, 5)
    # expected slope: theta_0 against the flat start, then adjacent gaps
    expected = [angles[0]] + [angles[k] - angles[k - 1] for k in (1, 2, 3, 4)]
    for k in range(5):
        r_k = 10.0 ** (-k)
        for j in range(chain.layers[k].count):
            fit = local_graph_fit(surface, chain, k, j)
            assert fit.lipschitz == pytest.approx(expected[k], rel=1e-4)
            assert fit.lipschitz <= 10.0 * eps
            assert fit.center_offset <= eps * r_k
    # the final layer is below this lattice's resolution
    with pytest.raises(NotAGraphError,
                       match="holds 1 samples; cannot read a graph"):
        local_graph_fit(surface, chain, 5, 50)


def test_tilt_chain_last_layer_on_finer_lattice(tilt_system):
    chain, eps = tilt_system["ccbp"], tilt_system["epsilon"]
    fine = iterate(chain, 1e-4, extent=0.15)
    gap5 = 0.9 * (eps / 2.0) * 1e-5
    for j in range(chain.layers[5].count):
        fit = local_graph_fit(fine, chain, 5, j)
        assert fit.lipschitz == pytest.approx(gap5, rel=1e-3)
        assert fit.n_samples >= 9
        assert fit.center_offset <= 1e-3 * eps * 1e-5
    cross = local_graph_fit(fine, chain, 4, chain.layers[4].count // 2)
    assert cross.lipschitz == pytest.approx(0.9 * (eps / 2.0) * 1e-4, rel=1e-3)


# ---------------------------------------------------------------------------
# folded system: structurally valid, fails coherence, breaks graph reading


def test_folded_system_profile_and_steps():
    folded = folded_ccbp()
    assert [layer.count for layer in folded.layers] == [7, 61]
    profile = validate_ccbp(folded, 0.5)
    assert profile.profile_max == pytest.approx(1.003, rel=0.05)
    assert not profile.passed
    surface = iterate(folded, 0.02, extent=3.2)
    assert surface.displacements[0] == 0.0
    assert surface.displacements[1] == pytest.approx(0.0451656, rel=1e-5)
    assert surface.displacements[1] <= 10.0 * 0.1


def test_folded_system_is_not_a_graph():
    folded = folded_ccbp()
    surface = iterate(folded, 0.02, extent=3.2)
    with pytest.raises(NotAGraphError, match="two sheets cross the cylinder"):
        local_graph_fit(surface, folded, 1, fold_center_index(folded))
    # away from the fold the sheet is flat
    fit = local_graph_fit(surface, folded, 1, 5)
    assert fit.lipschitz == 0.0 and fit.center_offset == 0.0
    with pytest.raises(CCBPError, match="layer 7 out of range"):
        local_graph_fit(surface, folded, 7, 0)
    with pytest.raises(CCBPError,
                       match="center 999 out of range in layer 1"):
        local_graph_fit(surface, folded, 1, 999)


# ---------------------------------------------------------------------------
# certificates grow with the tilt


def test_certificates_monotone_in_tilt():
    sups, flats, squares, distortions = [], [], [], []
    for eps in (0.002, 0.01, 0.05):
        chain = tilt_ccbp(eps, k_max=2)
        surface = iterate(chain, 1e-3, extent=2.2)
        report = certify(surface, chain, eps)
        assert report.passed
        cert = bilip_certificate(surface, chain)
        sups.append(report.item("sup_displacement").details["sup_abs"])
        flats.append(report.item("reifenberg_flat").measured * eps)
        squares.append(cert.m_estimate)
        distortions.append(cert.distortion - 1.0)
    assert sups == pytest.approx([0.002178, 0.01089, 0.0544446], rel=1e-4)
    assert squares == pytest.approx(
        [2.78074e-08, 6.95185e-07, 1.73796e-05], rel=1e-3)
    assert distortions == pytest.approx(
        [3.89719e-09, 9.74296e-08, 2.43574e-06], rel=1e-3)
    for series in (sups, flats, squares, distortions):
        assert series[0] < series[1] < series[2]


# ---------------------------------------------------------------------------
# serialization


def test_ccbp_dict_round_trip():
    chain = tilt_ccbp(0.03, k_max=2)
    chain.metadata["note"] = "round-trip me"
    payload = json.loads(json.dumps(ccbp_to_dict(chain)))
    back = ccbp_from_dict(payload)
    assert np.array_equal(back.base_plane.base, chain.base_plane.base)
    assert np.array_equal(back.base_plane.frame, chain.base_plane.frame)
    assert back.depth == chain.depth
    for old, new in zip(chain.layers, back.layers):
        assert np.array_equal(new.centers, old.centers)
        for p_old, p_new in zip(old.planes, new.planes):
            assert np.array_equal(p_new.base, p_old.base)
            assert np.array_equal(p_new.frame, p_old.frame)
    assert back.metadata == chain.metadata


def test_plane_dict_round_trip():
    plane = line_plane(0.3, base=(0.2, -0.1))
    back = plane_from_dict(json.loads(json.dumps(plane_to_dict(plane))))
    assert np.array_equal(back.base, plane.base)
    assert np.array_equal(back.frame, plane.frame)


# ---------------------------------------------------------------------------
# iteration controls


def test_iterate_guards_and_overrides():
    triv = trivial_ccbp(k_max=1)
    with pytest.raises(GeometryError, match="lattice pitch must be positive"):
        iterate(triv, 0.0)
    with pytest.raises(GeometryError, match="lattice pitch must be positive"):
        iterate(triv, -1.0)
    chain = tilt_ccbp(0.01, k_max=3)
    capped = iterate(chain, 1e-3, k_max=2, extent=1.0)
    assert capped.n_steps == 2 and len(capped.levels) == 3
    # default extent covers every center plus its bump support
    auto = iterate(triv, 0.5)
    assert float(np.abs(auto.tangent).max()) == 13.0  # max center 1 + 12 r_0


def test_surface_exports(tmp_path):
    base = AffinePlane.axis_aligned(2, 3)
    mini = CCBP(base, [CCBPLayer(0, np.zeros((1, 3)), [base])])
    surface = iterate(mini, 0.5, extent=1.0)
    assert surface.grid_shape == (5, 5)
    assert surface.surface.shape == (25, 3)
    assert np.array_equal(surface.surface, surface.levels[0])
    paths = surface.save_csv(tmp_path / "levels")
    assert [p.split("/")[-1] for p in paths] == ["level_00.csv",
                                                 "level_01.csv"]
    off = surface.export_off(str(tmp_path / "mini.off"))
    head = open(off).read().splitlines()[:2]
    assert head == ["OFF", "25 32 0"]
    refined = surface.refined_surface()
    assert refined.shape == (65 * 65, 3)
    cloud = surface.surface_cloud()
    assert isinstance(cloud, PointCloud) and cloud.points.shape == (25, 3)
    line = iterate(trivial_ccbp(k_max=0), 0.5, extent=1.0)
    with pytest.raises(GeometryError,
                       match="mesh export needs a 2-dimensional lattice"):
        line.export_off(str(tmp_path / "line.off"))


# ---------------------------------------------------------------------------
# layered systems read off a stopping-time region


def region_with_witnesses(points, dimension=1, k_max=6):
    tree = build_cubes(build_nets(points, rho=0.5, k_max=k_max))
    top = tree.roots()[0]
    region = build_stopping_time(tree, top, lambda c: True)
    cloud = PointCloud(points)
    witnesses = {
        cube.cube_id: beta_inf(cloud, cube.scaled_ball(3.0), dimension).plane
        for cube in region.members
    }
    return tree, region, witnesses


def test_ccbp_from_tree_flat_segment():
    tree, region, witnesses = region_with_witnesses(segment(800, seed=3))
    with pytest.warns(UserWarning, match="layer 2 needs tree level 9 beyond "
                                         "depth 6"):
        chain = ccbp_from_tree(tree, region, witnesses)
    assert [layer.count for layer in chain.layers] == [1, 4]
    meta = chain.metadata
    assert meta["top_cube"] == [0, 0] and meta["levels_used"] == 2
    assert meta["scale"] == pytest.approx(1.0, rel=1e-12)
    assert np.allclose(meta["shift"], 0.0)
    # a sampled line is coherent at any positive epsilon
    profile = validate_ccbp(chain, 1e-6)
    assert profile.profile_max == 0.0 and profile.passed
    surface = iterate(chain, 0.25, extent=4.0)
    assert surface.n_steps == 2
    assert max(surface.displacements) <= 1e-12
    # capping the depth keeps just the top layer, still perfectly coherent
    single = ccbp_from_tree(tree, region, witnesses, k_max=0)
    assert single.depth == 1
    assert validate_ccbp(single, 1e-6).profile_max == 0.0


def test_ccbp_from_tree_witness_errors():
    tree, region, witnesses = region_with_witnesses(segment(800, seed=3))
    missing_top = dict(witnesses)
    del missing_top[region.top.cube_id]
    with pytest.raises(GeometryError,
                       match="the top cube needs a witness plane"):
        ccbp_from_tree(tree, region, missing_top)
    partial = dict(witnesses)
    del partial[(3, 0)]
    with pytest.raises(GeometryError, match=re.escape(
            "missing witness planes for 1 cubes, first (3, 0)")):
        ccbp_from_tree(tree, region, partial)
    lone = build_stopping_time(tree, region.top, lambda c: False)
    with pytest.warns(UserWarning, match="layer 0 is empty"):
        with pytest.raises(GeometryError,
                           match="no layers could be built from the region"):
            ccbp_from_tree(tree, lone, witnesses)


def test_ccbp_from_tree_graph_profile_scales_with_lambda():
    lam = 0.05
    tree, region, witnesses = region_with_witnesses(
        lipschitz_graph(900, lam=lam, seed=7))
    with pytest.warns(UserWarning, match="beyond depth"):
        chain = ccbp_from_tree(tree, region, witnesses)
    assert chain.depth == 2
    profile = validate_ccbp(chain, 1.0)
    assert profile.profile_max == pytest.approx(0.017528421171632075, rel=1e-6)
    assert profile.profile_max <= lam  # constant 0.35 recorded below one


def test_ccbp_from_tree_rough_curve_fails_coherence():
    tree, region, witnesses = region_with_witnesses(koch(5))
    with pytest.warns(UserWarning, match="beyond depth"):
        chain = ccbp_from_tree(tree, region, witnesses)
    assert chain.depth == 2
    profile = validate_ccbp(chain, 0.1)
    assert profile.profile_max == pytest.approx(0.6091909645855555, rel=1e-6)
    assert not profile.passed

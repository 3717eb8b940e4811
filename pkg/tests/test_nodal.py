import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speclab.eigensolve import solve_lowest
from speclab.errors import InvalidInput
from speclab.geometry import HHNParams, make_disk, make_hhn, make_narrow_convex, make_rectangle
from speclab.mesh import refine, triangulate
from speclab.nodal import (
    angle_quantization_check,
    angle_set,
    boundary_neumann_trace,
    classify_payne,
    count_nodal_domains,
    extract_nodal_set,
    inradius_nodal,
    junction_angles,
    nodal_hausdorff,
    nodal_svg,
    segments_csv,
    wavelength_density_check,
)
from speclab.reference import bessel_zero, hhn_radius_search

PI = math.pi


def mode(m, p, q, a=PI, b=PI):
    x, y = m.vertices.T
    v = np.sin(p * PI * x / a) * np.sin(q * PI * y / b)
    v[m.is_boundary_vertex] = 0.0
    return v


@pytest.fixture(scope="module")
def sq03():
    return triangulate(make_rectangle(PI, PI, spacing=0.03), 0.03)


def test_mode21_single_vertical_line(square_mesh):
    ns = extract_nodal_set(square_mesh, mode(square_mesh, 2, 1))
    assert ns.n_components == 1
    assert np.abs(ns.nodes[:, 0] - PI / 2).max() <= square_mesh.h_max


def test_segments_conforming(square_mesh):
    ns = extract_nodal_set(square_mesh, mode(square_mesh, 3, 2))
    # each node is shared by at most two segments away from crossings
    _, counts = np.unique(ns.segment_nodes.ravel(), return_counts=True)
    assert counts.max() <= 4
    tri = square_mesh.vertices[square_mesh.triangles[ns.segment_triangles]]
    for s, t in zip(ns.segments[:50], tri[:50]):
        for pnt in s:
            lam = np.linalg.solve(np.column_stack([t[1] - t[0], t[2] - t[0]]), pnt - t[0])
            assert lam.min() >= -1e-9 and lam.sum() <= 1 + 1e-9


def test_mode22_crossing(square_mesh):
    ns = extract_nodal_set(square_mesh, mode(square_mesh, 2, 2))
    assert len(ns.interior_crossings) == 1
    c = ns.interior_crossings[0]
    assert np.linalg.norm(c.point - PI / 2) <= square_mesh.h_max
    assert len(c.angles) == 4
    np.testing.assert_allclose(c.angles, PI / 2, atol=0.05)


def test_first_eigenfunction_has_empty_nodal_set(disk_mesh, disk_spec):
    ns = extract_nodal_set(disk_mesh, disk_spec.vector(1))
    assert ns.is_empty
    assert count_nodal_domains(disk_mesh, disk_spec.vector(1)).count == 1


def test_zero_vector_rejected(square_mesh):
    with pytest.raises(InvalidInput):
        extract_nodal_set(square_mesh, np.zeros(square_mesh.n_vertices))


@pytest.mark.parametrize("p,q", [(1, 1), (2, 1), (2, 2), (3, 2), (4, 3)])
def test_product_mode_domain_count(square_mesh, p, q):
    assert count_nodal_domains(square_mesh, mode(square_mesh, p, q)).count == p * q


def test_disk_phi2_two_domains_and_courant(disk_mesh, disk_spec):
    assert count_nodal_domains(disk_mesh, disk_spec.vector(2)).count == 2
    for k in range(1, disk_spec.k + 1):
        assert count_nodal_domains(disk_mesh, disk_spec.vector(k)).count <= k


def test_domain_areas_sum(square_mesh):
    v = mode(square_mesh, 2, 2)
    nd = count_nodal_domains(square_mesh, v)
    # zero corner triangles and the split saddle cell carry no sign
    assert PI**2 * (1 - 1e-3) <= nd.areas.sum() <= PI**2
    np.testing.assert_allclose(nd.areas, PI**2 / 4, rtol=0.02)


def test_inradius_half_square(square_mesh):
    v = mode(square_mesh, 2, 1)
    nd = count_nodal_domains(square_mesh, v)
    left = nd.triangle_labels[np.argmin(square_mesh.centroids[:, 0])]
    assert inradius_nodal(square_mesh, v, left, nd) == pytest.approx(PI / 4, abs=2 * square_mesh.h_max)
    with pytest.raises(InvalidInput):
        inradius_nodal(square_mesh, v, 7, nd)


def test_inradius_half_disk(disk_mesh, disk_spec):
    # the unit half-disk holds the circle of radius 1/2 centered on its symmetry axis
    g = np.linspace(-1, 1, 801)
    X, Y = np.meshgrid(g, g[400:])
    inside = np.hypot(X, Y) < 1
    oracle = np.minimum(Y, 1 - np.hypot(X, Y))[inside].max()
    assert oracle == pytest.approx(0.5, abs=3e-3)
    v = disk_spec.vector(2)
    nd = count_nodal_domains(disk_mesh, v)
    for label in range(nd.count):
        r = inradius_nodal(disk_mesh, v, label, nd)
        assert r == pytest.approx(oracle, abs=2 * disk_mesh.h_max)
        assert r * math.sqrt(disk_spec.value(2)) <= bessel_zero(0, 1) + 0.1


def test_wavelength_density_cells(sq03):
    r44 = wavelength_density_check(sq03, mode(sq03, 4, 4), 32.0)
    assert r44.scaled <= 2.3
    assert r44.scaled == pytest.approx(PI / 8 * math.sqrt(32), rel=0.05)
    r88 = wavelength_density_check(sq03, mode(sq03, 8, 8), 128.0)
    assert r88.scaled == pytest.approx(r44.scaled, rel=0.1)


def test_wavelength_skips_first_mode(disk_mesh, disk_spec):
    assert wavelength_density_check(disk_mesh, disk_spec.vector(1), disk_spec.value(1)).skipped


def test_nodal_set_converges_under_refinement():
    m = triangulate(make_rectangle(PI, PI), 0.1)
    r = refine(m)
    a = extract_nodal_set(m, mode(m, 2, 1))
    b = extract_nodal_set(r, mode(r, 2, 1))
    assert nodal_hausdorff(a, b, 0.01) <= 2 * m.h_max


def test_trace_mode11(sq03):
    tr = boundary_neumann_trace(sq03, mode(sq03, 1, 1))
    bottom = np.abs(tr.midpoints[:, 1]) < 1e-12
    x = tr.midpoints[bottom, 0]
    # outward normal is -y on the bottom edge, so the trace is -sin(x)
    exact = -np.sin(x)
    assert np.abs(tr.values[bottom] - exact).max() <= 0.05
    assert x[np.argmin(tr.values[bottom])] == pytest.approx(PI / 2, abs=0.1)


def test_trace_mode21_and_payne(sq03):
    tr = boundary_neumann_trace(sq03, mode(sq03, 2, 1))
    bottom = np.abs(tr.midpoints[:, 1]) < 1e-12
    vals = tr.values[bottom][np.argsort(tr.midpoints[bottom, 0])]
    assert np.count_nonzero(np.diff(np.sign(vals))) == 1
    pv = classify_payne(tr)
    assert pv.kind == "SP" and pv.n_sign_changes == 2
    xs = [tr.midpoints[np.argmin(np.abs(tr.arc - a))] for _, a in pv.sign_change_points]
    for pnt in xs:
        assert pnt[0] == pytest.approx(PI / 2, abs=0.1)


def test_first_mode_trace_single_signed(disk_mesh, disk_spec):
    tr = boundary_neumann_trace(disk_mesh, disk_spec.vector(1))
    assert np.all(tr.values < 0)
    assert classify_payne(tr).kind == "NP"


@given(st.floats(1e-3, 1e3))
@settings(max_examples=20, deadline=None)
def test_payne_scale_invariant(c):
    vals = np.sin(np.linspace(0, 2 * PI, 200, endpoint=False) + 0.1)
    assert classify_payne(c * vals).kind == classify_payne(vals).kind
    assert classify_payne(c * (2 + vals)).kind == "NP"


def test_payne_invariants():
    pv = classify_payne(np.sin(np.linspace(0, 2 * PI, 100, endpoint=False) + 0.05))
    assert pv.kind == "SP" and pv.n_sign_changes % 2 == 0 and pv.n_sign_changes >= 2
    np_ = classify_payne(1.5 + np.cos(np.linspace(0, 2 * PI, 100)))
    assert np_.kind == "NP" and np_.margin > np_.band
    touch = classify_payne(1 - np.cos(np.linspace(0, 2 * PI, 100, endpoint=False)))
    assert touch.kind == "INDETERMINATE"


@pytest.fixture(scope="module")
def ellipse():
    d = make_narrow_convex(1.0, 0.2, 512)
    m = triangulate(d, 0.02)
    return m, solve_lowest(m, 2)


def test_ellipse_phi2_sp_with_right_angles(ellipse):
    m, sr = ellipse
    v = sr.vector(2)
    assert classify_payne(boundary_neumann_trace(m, v)).kind == "SP"
    ns = extract_nodal_set(m, v)
    fits = junction_angles(ns, m)
    assert len(fits) == 2
    for f in fits:
        np.testing.assert_allclose(f.angles, PI / 2, atol=0.09)


def test_hhn_second_mode_not_touching_boundary():
    d = make_hhn(HHNParams(1.0, hhn_radius_search(1.0), 16, 0.02))
    m = triangulate(d, 0.03)
    v = solve_lowest(m, 2).vector(2)
    assert classify_payne(boundary_neumann_trace(m, v)).kind == "NP"
    ns = extract_nodal_set(m, v)
    assert np.hypot(*ns.nodes.T).max() < 1.0


def test_rectangle_junction_angles_and_consistency():
    m = triangulate(make_rectangle(2.0, 1.0, spacing=0.025), 0.025)
    v = mode(m, 2, 1, 2.0, 1.0)
    ns = extract_nodal_set(m, v)
    h = m.meta["h"]
    for model in ("line", "quadratic"):
        fits = junction_angles(ns, m, model=model, v=v)
        assert len(fits) == 2
        for f in fits:
            assert f.resolved and f.smooth and not f.flagged
            np.testing.assert_allclose(f.angles, PI / 2, atol=0.03)
            assert angle_quantization_check(float(f.angles[0]), 12.0)[1] <= 0.05
    res = []
    for r in (12 * h, 6 * h, 3 * h):
        fits = junction_angles(ns, m, r_fit=r)
        res.append(max(angle_quantization_check(float(a), 12.0)[1] for f in fits for a in f.angles))
    assert res[1] <= res[0] + 0.02 and res[2] <= res[1] + 0.02


def test_quadratic_fit_removes_curvature_bias():
    # nodal line x = 1 + 0.8 (y - 0)^2 meets y = 0 at a right angle but bends away
    m = triangulate(make_rectangle(2.0, 1.0, spacing=0.02), 0.02)
    x, y = m.vertices.T
    v = x - 1.0 - 0.8 * y * y
    v[m.is_boundary_vertex] = 0.0
    ns = extract_nodal_set(m, v)
    bottom = [f for f in junction_angles(ns, m, model="quadratic") if f.point[1] < 0.5]
    line = [f for f in junction_angles(ns, m, model="line") if f.point[1] < 0.5]
    assert abs(bottom[0].angles[0] - PI / 2) < 0.02
    assert abs(line[0].angles[0] - PI / 2) > abs(bottom[0].angles[0] - PI / 2)


def test_corner_junctions_marked_non_smooth():
    m = triangulate(make_rectangle(PI, PI, spacing=0.05), 0.05)
    x, y = m.vertices.T
    v = np.sin(2 * x) * np.sin(y) - np.sin(x) * np.sin(2 * y)
    v[m.is_boundary_vertex] = 0.0
    fits = junction_angles(extract_nodal_set(m, v), m)
    assert fits and not any(f.smooth for f in fits)


def test_angle_set_and_quantization():
    assert angle_set(3) == [Fraction(1, 3), Fraction(1, 2), Fraction(2, 3)]
    frac, res = angle_quantization_check(1.571, 5.0)
    assert frac == Fraction(1, 2) and res == pytest.approx(2e-4, abs=1e-4)
    frac, res = angle_quantization_check(1.047, 9.0)
    assert frac == Fraction(1, 3) and res < 1e-3


@given(st.floats(0.01, PI - 0.01), st.floats(1.0, 400.0))
@settings(max_examples=60, deadline=None)
def test_quantization_residual_is_distance_to_set(angle, lam):
    frac, res = angle_quantization_check(angle, lam)
    n0 = max(2, int(math.floor(math.sqrt(lam))))
    best = min(abs(angle - float(f) * PI) for f in angle_set(n0))
    assert res == pytest.approx(best, abs=1e-12)
    assert 0 < frac < 1


def test_exports(square_mesh):
    ns = extract_nodal_set(square_mesh, mode(square_mesh, 2, 1))
    svg = nodal_svg(square_mesh, ns)
    assert 'stroke="red"' in svg and svg.count("<circle") == len(ns.junctions)
    rows = segments_csv(ns).strip().splitlines()
    assert len(rows) == 1 + len(ns.segments)

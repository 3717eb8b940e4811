import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speclab.errors import GeometryError, InvalidParameter
from speclab.geometry import (
    DomainSpec,
    DumbbellParams,
    HHNParams,
    PerturbationField,
    apply_perturbation,
    area,
    bump_profile,
    constant_field,
    convexity_check,
    diameter,
    from_json,
    inradius_domain,
    make_disk,
    make_dumbbell,
    make_hhn,
    make_narrow_convex,
    make_rectangle,
    to_json,
)

PI = math.pi


def test_disk_sagitta_and_scaling():
    d = make_disk(1.0, 256)
    r = np.hypot(*d.outer.T)
    np.testing.assert_allclose(r, 1.0, atol=1e-14)
    mids = 0.5 * (d.outer + np.roll(d.outer, -1, axis=0))
    assert 1 - np.hypot(*mids.T).min() < 4e-4
    assert diameter(make_disk(2.0, 64)) == pytest.approx(4.0, abs=1e-3)


@pytest.mark.parametrize("args", [(0.0, 64), (-1.0, 64), (1.0, 8)])
def test_disk_rejects_bad_parameters(args):
    with pytest.raises(InvalidParameter):
        make_disk(*args)


def test_rectangle_measures():
    d = make_rectangle(PI, PI)
    assert area(d) == pytest.approx(PI**2, abs=1e-12)
    assert diameter(d) == pytest.approx(PI * math.sqrt(2), abs=1e-12)
    assert convexity_check(make_rectangle(2 * PI, PI))
    with pytest.raises(InvalidParameter):
        make_rectangle(0.0, 1.0)


def test_unit_square_and_disk_inradius():
    sq = make_rectangle(1.0, 1.0)
    assert diameter(sq) == pytest.approx(math.sqrt(2))
    assert inradius_domain(sq) == pytest.approx(0.5, abs=0.01)
    d = make_disk(1.0, 256)
    assert diameter(d) == pytest.approx(2.0, abs=1e-12)
    assert inradius_domain(d) == pytest.approx(1.0, abs=0.01)


def test_spacing_subdivides_rectangle():
    d = make_rectangle(PI, PI, spacing=0.05)
    e = np.linalg.norm(np.diff(np.vstack([d.outer, d.outer[:1]]), axis=0), axis=1)
    assert e.max() <= 0.05 + 1e-12
    assert area(d) == pytest.approx(PI**2, rel=1e-12)


def test_narrow_convex():
    d = make_narrow_convex(1.0, 0.05, 512)
    assert convexity_check(d)
    assert diameter(d) / inradius_domain(d, pitch=0.001) == pytest.approx(20, rel=0.03)
    with pytest.raises(InvalidParameter):
        make_narrow_convex(1.0, 0.5)


@given(st.floats(0.05, 0.49))
@settings(max_examples=20, deadline=None)
def test_narrow_convex_diameter_within_sagitta(rho):
    d = make_narrow_convex(1.0, rho, 512)
    sagitta = 0.5 * (1 - math.cos(PI / 512))
    assert convexity_check(d)
    assert abs(diameter(d) - 1.0) <= 2 * sagitta + 1e-12


def test_bump_profile():
    q = np.linspace(-2, 0, 201)
    r = bump_profile(q)
    assert bump_profile(np.array([0.0]))[0] == 2.0
    np.testing.assert_array_equal(r[q <= -1], 1.0)
    assert np.all(np.diff(r) >= 0)


def test_dumbbell_area_and_symmetry():
    p = DumbbellParams(eps=0.05)
    d = make_dumbbell(p)
    L = 3 * p.xi

    def hull(r):
        # disk plus the two tangent wedges reaching the ends of the flat facing segment
        return PI * r * r + 2 * (r * L - r * r * math.atan(L / r))

    expected = hull(p.lobe1) + hull(p.lobe2) + 2 * p.eps * p.connector_length
    assert area(d) == pytest.approx(expected, rel=0.02)
    assert not convexity_check(d)
    swapped = make_dumbbell(DumbbellParams(lobe1=0.8, lobe2=1.0, eps=0.05))
    assert area(swapped) == pytest.approx(area(d), abs=1e-12)


@given(st.floats(0.02, 0.19))
@settings(max_examples=10, deadline=None)
def test_dumbbell_area_monotone_in_eps(eps):
    a = area(make_dumbbell(DumbbellParams(eps=eps)))
    b = area(make_dumbbell(DumbbellParams(eps=eps / 2)))
    assert b < a


def test_dumbbell_area_monotone_in_length():
    a = area(make_dumbbell(DumbbellParams(connector_length=1.5)))
    b = area(make_dumbbell(DumbbellParams(connector_length=2.0)))
    assert b >= a


def test_dumbbell_invariants():
    with pytest.raises(InvalidParameter, match="eps < xi"):
        make_dumbbell(DumbbellParams(eps=0.25))
    with pytest.raises(InvalidParameter):
        make_dumbbell(DumbbellParams(xi=0.3, lobe2=0.8))


def test_hhn_topology():
    d = make_hhn(HHNParams(1.0, 2.0, 4, 0.05))
    assert len(d.holes) == 4
    for h in d.holes:
        assert h.shape[1] == 2
    with pytest.raises(InvalidParameter):
        HHNParams(1.0, 2.0, 4, PI / 4).check()


def test_hhn_gates_widen_to_cover_circle():
    def wall_length(eps):
        d = make_hhn(HHNParams(1.0, 2.0, 4, eps))
        return 4 * (PI / 2 - 2 * eps), d

    narrow, _ = wall_length(0.05)
    wide, d = wall_length(PI / 4 - 1e-3)
    assert wide < 0.01 * narrow
    assert len(d.holes) == 4


def test_invalid_loops_rejected():
    bow = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], float)
    with pytest.raises(GeometryError):
        DomainSpec(bow)
    cw = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], float)
    with pytest.raises(GeometryError):
        DomainSpec(cw)
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    with pytest.raises(GeometryError):
        DomainSpec(sq, (np.array([[2, 2], [2, 3], [3, 3]], float),))


def test_perturbation_identity_and_offset():
    d = make_disk(1.0, 256)
    V = constant_field(d)
    assert apply_perturbation(d, V, 0.0) is d
    assert diameter(apply_perturbation(d, V, 0.1)) == pytest.approx(2.2, abs=1e-3)


@given(st.floats(-0.2, 0.2))
@settings(max_examples=20, deadline=None)
def test_constant_offset_on_disk_adds_2ct(c):
    d = make_disk(1.0, 128)
    t = 0.1
    out = apply_perturbation(d, constant_field(d, c), t)
    assert diameter(out) == pytest.approx(2 + 2 * c * t, abs=2e-3)


def test_perturbation_field_support():
    with pytest.raises(InvalidParameter):
        PerturbationField(np.array([1.0, 0.0, 2.0]), support=np.array([0]))
    with pytest.raises(InvalidParameter):
        PerturbationField(np.array([np.nan, 0.0]))


def test_self_intersection_reports_vertex():
    d = make_rectangle(1.0, 1.0, spacing=0.1)
    v = np.zeros(d.n_boundary)
    v[5] = -3.0
    with pytest.raises(GeometryError) as err:
        apply_perturbation(d, PerturbationField(v), 1.0)
    assert err.value.vertex is not None


def test_json_roundtrip():
    d = make_hhn(HHNParams(1.0, 2.0, 4, 0.05))
    e = from_json(to_json(d))
    np.testing.assert_array_equal(e.outer, d.outer)
    assert len(e.holes) == 4 and e.family == "hhn" and e.params["N"] == 4
    for a, b in zip(d.holes, e.holes):
        np.testing.assert_array_equal(a, b)

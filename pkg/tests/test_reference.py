import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speclab.errors import InvalidParameter
from speclab.reference import (
    annulus_first,
    bessel_j,
    bessel_y0,
    bessel_zero,
    disk_spectrum,
    hhn_radius_interval,
    hhn_radius_search,
    rectangle_spectrum,
)

scipy_special = pytest.importorskip("scipy.special")


@pytest.mark.parametrize("nu,m,expected", [(0, 1, 2.404825558), (1, 1, 3.831705970), (0, 2, 5.520078110)])
def test_bessel_zero_tabulated(nu, m, expected):
    assert bessel_zero(nu, m) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("nu", [0, 1, 2, 5])
def test_bessel_zeros_match_scipy(nu):
    ours = [bessel_zero(nu, m) for m in range(1, 7)]
    np.testing.assert_allclose(ours, scipy_special.jn_zeros(nu, 6), atol=1e-10)


@given(st.integers(0, 4), st.floats(0.01, 40.0))
@settings(max_examples=60, deadline=None)
def test_bessel_j_matches_scipy(nu, x):
    assert bessel_j(nu, x) == pytest.approx(scipy_special.jv(nu, x), abs=1e-11)


@given(st.floats(0.05, 40.0))
@settings(max_examples=60, deadline=None)
def test_bessel_y0_matches_scipy(x):
    assert bessel_y0(x) == pytest.approx(scipy_special.y0(x), abs=1e-10, rel=1e-10)


def test_bessel_zero_rejects_bad_index():
    with pytest.raises(InvalidParameter):
        bessel_zero(0, 0)
    with pytest.raises(InvalidParameter):
        bessel_zero(-1, 1)


def test_disk_spectrum_values_and_multiplicity():
    s = disk_spectrum(1.0, 6)
    np.testing.assert_allclose(s.eigenvalues, [5.7832, 14.6820, 14.6820, 26.3746, 26.3746, 30.4713], atol=1e-3)
    assert s.multiplicities[0] == 1 and s.multiplicities[1] == 2
    assert disk_spectrum(2.0, 1).eigenvalues[0] == pytest.approx(5.78318596 / 4, rel=1e-8)


def test_rectangle_spectrum():
    np.testing.assert_allclose(rectangle_spectrum(math.pi, math.pi, 4).eigenvalues, [2, 5, 5, 8], rtol=1e-12)
    assert rectangle_spectrum(2 * math.pi, math.pi, 1).eigenvalues[0] == pytest.approx(1.25)
    s = rectangle_spectrum(math.pi, math.pi, 3)
    assert set(s.modes[1:3]) == {(1, 2), (2, 1)}


@given(st.floats(0.3, 5.0), st.floats(0.3, 5.0), st.integers(1, 12))
@settings(max_examples=40, deadline=None)
def test_spectra_ascending_and_positive(a, b, k):
    for s in (rectangle_spectrum(a, b, k), disk_spectrum(a, k)):
        ev = np.array(s.eigenvalues)
        assert len(ev) == k and np.all(ev > 0) and np.all(np.diff(ev) >= 0)


@given(st.floats(0.3, 5.0), st.floats(0.3, 5.0))
@settings(max_examples=40, deadline=None)
def test_faber_krahn_spot_check(a, b):
    lam_rect = rectangle_spectrum(a, b, 1).eigenvalues[0]
    lam_disk = disk_spectrum(math.sqrt(a * b / math.pi), 1).eigenvalues[0]
    assert lam_disk <= lam_rect


@given(st.floats(0.2, 3.0), st.floats(1.01, 4.0))
@settings(max_examples=30, deadline=None)
def test_domain_monotonicity_disks(r, f):
    assert disk_spectrum(r * f, 1).eigenvalues[0] <= disk_spectrum(r, 1).eigenvalues[0]


def test_annulus_first_sandwich_and_scaling():
    lam = annulus_first(1.0, 2.0)
    assert lam == pytest.approx(9.75, abs=0.02)
    assert 5.783 < lam < 14.682
    assert annulus_first(2.0, 4.0) == pytest.approx(lam / 4, rel=1e-9)


def test_annulus_thin_limit():
    delta = 0.05
    assert annulus_first(1.0, 1.0 + delta) == pytest.approx((math.pi / delta) ** 2, rel=0.05)


def test_annulus_root_of_cross_product():
    k = math.sqrt(annulus_first(1.0, 2.0))
    f = scipy_special.j0(k) * scipy_special.y0(2 * k) - scipy_special.j0(2 * k) * scipy_special.y0(k)
    assert abs(f) < 1e-10


def test_hhn_radius_search():
    R2 = hhn_radius_search(1.0)
    lo, hi = hhn_radius_interval(1.0)
    assert lo < 2.0 < hi and lo < R2 < hi
    assert 6.36 < annulus_first(1.0, R2) < 13.35
    assert hhn_radius_search(2.0) == pytest.approx(2 * R2, rel=1e-9)

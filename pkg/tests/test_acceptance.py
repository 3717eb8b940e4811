"""Acceptance criteria 1-12, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line (also visible under ``-s``-less
runs) and then re-asserts the numbers behind the verdict. Run alone with
``pytest tests/test_acceptance.py -v``; it takes a few minutes.
"""
import math

import numpy as np
import pytest

from speclab.lab.checks import CHECKS, CONVEX, Context
from speclab.reference import bessel_zero, disk_spectrum

pytestmark = pytest.mark.slow

J01 = bessel_zero(0, 1)


@pytest.fixture(scope="module")
def ctx():
    return Context(seed=0, jobs=1)


@pytest.fixture
def check(ctx, capsys):
    def run(number):
        res = CHECKS[number](ctx)
        with capsys.disabled():
            print(f"\n{res.line()}")
        return res

    return run


def test_criterion_01_fem_accuracy(check):
    res = check(1)
    d = res.details
    assert np.max(d["disk_rel_err"]) <= 0.01
    assert np.max(d["square_rel_err"]) <= 0.01
    assert all(3.5 <= r <= 4.5 for r in d["ratios"])
    assert res.passed


def test_criterion_02_courant(check):
    res = check(2)
    for name, counts in res.details["counts"].items():
        assert all(c <= k for k, c in enumerate(counts, start=1)), name
    assert res.passed


def test_criterion_03_payne(check):
    res = check(3)
    for name, v in res.details["convex"].items():
        assert v["verdict"] == "SP" and v["sign_changes"] >= 2, name
    hhn = res.details["hhn"]
    assert hhn["verdict"] == "NP", f"HHN(N=8) second eigenfunction classified {hhn['verdict']}"
    assert hhn["nodal_r_max"] < 0.98
    assert res.passed


def test_criterion_04_openness(check):
    res = check(4)
    ell, hhn = res.details["ellipse"], res.details["hhn"]
    assert ell["base"] == "SP" and hhn["base"] == "NP"
    assert ell["flips"] == 0 and hhn["flips"] == 0
    assert max(r["t"] for r in ell["rows"]) >= 1e-2
    assert res.passed


def test_criterion_05_angles(check):
    res = check(5)
    d = res.details
    assert d["rays"] > 0
    assert d["misses"] == []
    assert d["err21"] <= 0.05
    assert d["err22"] <= 0.05
    assert res.passed


def test_criterion_06_hadamard(check):
    res = check(6)
    cases = res.details["cases"]
    assert len(cases) == 5
    assert all(c["rel_error"] <= 0.02 for c in cases)
    lam1 = disk_spectrum(1.0, 1).eigenvalues[0]
    assert abs(cases[0]["fd"] + 2 * lam1) <= 0.01 * 2 * lam1
    assert res.passed


def test_criterion_07_degenerate(check):
    res = check(7)
    fd = res.details["fd"]
    assert tuple(fd["signature"][:2]) == (1, 1)
    lo, hi = fd["attempts"][0]["shift_plus"]
    assert fd["attempts"][0]["t"] == 1e-3
    assert lo < 0 < hi
    assert res.passed


def test_criterion_08_gap(check):
    res = check(8)
    norm = res.details["normalized"]
    assert set(norm) == set(CONVEX)
    assert min(norm.values()) >= 3 * math.pi**2 * 0.99
    by_rho = res.details["ellipse_by_rho"]
    rhos = sorted(by_rho)
    assert all(by_rho[a] > by_rho[b] for a, b in zip(rhos, rhos[1:]))
    assert res.passed


def test_criterion_09_dumbbell(check):
    res = check(9)
    rows, target = res.details["rows"], res.details["target"]
    assert target == pytest.approx(9.036, abs=1e-3)
    dist = [abs(r["lambda_2"] - target) for r in rows]
    assert all(a > b for a, b in zip(dist, dist[1:]))
    assert rows[-1]["eps"] == 0.025
    assert dist[-1] / target <= 0.05
    assert rows[-1]["mass_fraction_lobe2"] >= 0.95
    assert res.passed


def test_criterion_10_genericity(check):
    res = check(10)
    d = res.details
    assert d["trials"] == 50 and d["amplitude"] == 0.02
    assert d["fraction"] >= 0.9
    assert res.passed


def test_criterion_11_rotational(check):
    res = check(11)
    v0, v1 = res.details["values"]
    assert abs(v0) <= 0.05
    assert abs(v1) <= 0.5 * abs(v0)
    assert res.passed


def test_criterion_12_inradius(check):
    res = check(12)
    d = res.details
    assert d["count"] > 0
    assert d["max"] <= J01 + 0.1
    assert d["violations"] == []
    assert res.passed

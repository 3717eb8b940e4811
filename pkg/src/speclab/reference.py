"""Closed-form and semi-analytic Dirichlet spectra used as oracles.

Bessel functions are evaluated from their power series for ``x <= 12`` and
from the Hankel asymptotic expansion beyond (orders 0 and 1, with upward
recurrence for higher orders); all roots are found by bracketing and
bisection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidParameter, NumericError

__all__ = [
    "AnalyticSpectrum",
    "bessel_j",
    "bessel_y0",
    "bessel_zero",
    "disk_spectrum",
    "rectangle_spectrum",
    "annulus_first",
    "hhn_radius_interval",
    "hhn_radius_search",
]

_SERIES_LIMIT = 12.0
_EULER_GAMMA = 0.57721566490153286061


def _hankel_pq(nu: int, x: float) -> tuple[float, float]:
    mu = 4.0 * nu * nu
    p, q = 1.0, 0.0
    term = 1.0
    last = math.inf
    k = 1
    while k < 60:
        term *= (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(term) > last:
            break
        if k % 2 == 1:
            q += term if (k // 2) % 2 == 0 else -term
        else:
            p += -term if (k // 2) % 2 == 1 else term
        last = abs(term)
        if last < 1e-17:
            break
        k += 1
    return p, q


def _j_series(nu: int, x: float) -> float:
    half = 0.5 * x
    term = half**nu / math.factorial(nu)
    total = term
    k = 1
    while True:
        term *= -(half * half) / (k * (k + nu))
        total += term
        if abs(term) < 1e-17 * max(abs(total), 1e-300) and k > half:
            break
        k += 1
    return total


def bessel_j(nu: int, x: float) -> float:
    """Bessel function of the first kind J_nu(x) for integer nu >= 0."""
    if nu < 0 or int(nu) != nu:
        raise InvalidParameter("only non-negative integer orders are supported")
    x = float(x)
    if x < 0:
        return (-1) ** nu * bessel_j(nu, -x)
    if x <= _SERIES_LIMIT:
        return _j_series(nu, x)
    if nu <= 1:
        p, q = _hankel_pq(nu, x)
        chi = x - (0.5 * nu + 0.25) * math.pi
        return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))
    if nu > x:
        return _j_series(nu, x)
    # upward recurrence from the asymptotic J0, J1 is stable while nu < x
    jm, j = bessel_j(0, x), bessel_j(1, x)
    for n in range(1, nu):
        jm, j = j, (2.0 * n / x) * j - jm
    return j


def bessel_y0(x: float) -> float:
    """Bessel function of the second kind Y_0(x), x > 0."""
    x = float(x)
    if x <= 0:
        raise InvalidParameter("Y0 is defined for x > 0")
    if x <= _SERIES_LIMIT:
        q = 0.25 * x * x
        term = 1.0
        harmonic = 0.0
        tail = 0.0
        k = 1
        while True:
            term *= -q / (k * k)
            harmonic += 1.0 / k
            contrib = -term * harmonic
            tail += contrib
            if abs(contrib) < 1e-17 * max(abs(tail), 1e-300) and k > 0.5 * x:
                break
            k += 1
        return (2.0 / math.pi) * ((math.log(0.5 * x) + _EULER_GAMMA) * bessel_j(0, x) + tail)
    p, q = _hankel_pq(0, x)
    chi = x - 0.25 * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.sin(chi) + q * math.cos(chi))


def _bisect(f, a: float, b: float, fa: float | None = None, xtol: float = 1e-14) -> float:
    fa = f(a) if fa is None else fa
    for _ in range(200):
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
        if b - a <= xtol * max(1.0, abs(m)):
            break
    return 0.5 * (a + b)


@lru_cache(maxsize=256)
def _bessel_zeros(nu: int, count: int) -> tuple:
    # every positive zero of J_nu exceeds nu; consecutive zeros are > 2.9 apart
    def f(x):
        return bessel_j(nu, x)

    step = 0.25
    x = max(float(nu), step)
    fx = f(x)
    zeros = []
    limit = 4 * ((count + 1) * math.pi + nu)
    while len(zeros) < count:
        xn = x + step
        fn = f(xn)
        if fx == 0.0:
            zeros.append(x)
        elif fn != 0.0 and (fx > 0) != (fn > 0):
            zeros.append(_bisect(f, x, xn, fx))
        x, fx = xn, fn
        if x > limit:
            raise NumericError(f"could not bracket zero {len(zeros) + 1} of J_{nu}")
    return tuple(zeros)


def bessel_zero(nu: int, m: int) -> float:
    """m-th positive zero j_{nu,m} of J_nu.

    Sign changes are scanned on a 0.25-step grid from ``nu`` upward, well
    inside the window ((m-1) pi, (m+1) pi + nu), then refined by bisection.
    """
    if nu < 0 or int(nu) != nu or m < 1:
        raise InvalidParameter("need integer nu >= 0 and m >= 1")
    return _bessel_zeros(int(nu), int(m))[m - 1]


@dataclass(frozen=True)
class AnalyticSpectrum:
    """Ascending Dirichlet eigenvalues with multiplicities and mode labels.

    ``multiplicities[i]`` is the multiplicity of the value ``eigenvalues[i]``
    and ``modes[i]`` the index tuple of its closed-form eigenfunction:
    ``(nu, m)`` for Bessel modes J_nu(j_{nu,m} r / R) cos/sin(nu theta) and
    ``(p, q)`` for sin(p pi x / a) sin(q pi y / b).
    """

    eigenvalues: tuple
    multiplicities: tuple
    modes: tuple

    def as_array(self) -> np.ndarray:
        return np.array(self.eigenvalues)


def disk_spectrum(R: float, k: int) -> AnalyticSpectrum:
    """First k Dirichlet eigenvalues (with repetition) of the disk of radius R."""
    if not R > 0:
        raise InvalidParameter("radius must be positive")
    if k < 1:
        raise InvalidParameter("k must be >= 1")
    entries = []
    for nu in range(k + 1):
        for m, z in enumerate(_bessel_zeros(nu, k), start=1):
            entries.extend([(z * z, nu, m)] * (1 if nu == 0 else 2))
    entries.sort()
    entries = entries[:k]
    return AnalyticSpectrum(
        tuple(e[0] / R**2 for e in entries),
        tuple(1 if e[1] == 0 else 2 for e in entries),
        tuple((e[1], e[2]) for e in entries),
    )


def rectangle_spectrum(a: float, b: float, k: int) -> AnalyticSpectrum:
    """First k values of pi^2 (p^2/a^2 + q^2/b^2), p, q >= 1."""
    if not (a > 0 and b > 0):
        raise InvalidParameter("sides must be positive")
    n = k + 2
    entries = sorted(
        (math.pi**2 * (p * p / a**2 + q * q / b**2), p, q) for p in range(1, n + 1) for q in range(1, n + 1)
    )
    values = [e[0] for e in entries]
    mult = [sum(1 for w in values if abs(w - v) <= 1e-12 * v) for v in values[:k]]
    entries = entries[:k]
    return AnalyticSpectrum(tuple(values[:k]), tuple(mult), tuple((e[1], e[2]) for e in entries))


def annulus_first(R1: float, R2: float) -> float:
    """First Dirichlet eigenvalue of the annulus R1 < r < R2.

    The root k of J0(k R1) Y0(k R2) - J0(k R2) Y0(k R1) is the first sign
    change on a fine scan of [pi / (2 delta), 2 pi / delta], delta = R2 - R1.
    """
    if not 0 < R1 < R2:
        raise InvalidParameter("need 0 < R1 < R2")
    delta = R2 - R1

    def f(k):
        return bessel_j(0, k * R1) * bessel_y0(k * R2) - bessel_j(0, k * R2) * bessel_y0(k * R1)

    for lo, hi in ((math.pi / (2 * delta), 2 * math.pi / delta), (math.pi / (4 * delta), 4 * math.pi / delta)):
        grid = np.linspace(lo, hi, 401)
        prev = f(grid[0])
        for a, b in zip(grid[:-1], grid[1:]):
            cur = f(b)
            if prev == 0.0:
                return a * a
            if (prev > 0) != (cur > 0):
                k = _bisect(f, a, b, prev)
                return k * k
            prev = cur
    raise NumericError(f"annulus root not bracketed for R1={R1}, R2={R2}")


def hhn_radius_interval(R1: float, margin: float = 0.10) -> tuple[float, float]:
    """R2 range on which (1+margin) lam1(B_R1) < lam1(annulus) < lam2(B_R1)/(1+margin)."""
    if not R1 > 0:
        raise InvalidParameter("R1 must be positive")
    lam1 = (bessel_zero(0, 1) / R1) ** 2
    lam2 = (bessel_zero(1, 1) / R1) ** 2
    upper_target = lam2 / (1 + margin)
    lower_target = lam1 * (1 + margin)

    def solve(target):
        # annulus_first decreases in R2
        a, b = R1 * (1 + 1e-3), R1 * 2.0
        while annulus_first(R1, b) > target:
            b *= 1.5
        fa = annulus_first(R1, a) - target
        return _bisect(lambda r: annulus_first(R1, r) - target, a, b, fa, xtol=1e-13)

    return solve(upper_target), solve(lower_target)


def hhn_radius_search(R1: float) -> float:
    """Midpoint of the R2 interval where the eigenvalue sandwich holds with 10% margin."""
    lo, hi = hhn_radius_interval(R1)
    return 0.5 * (lo + hi)

"""The twelve acceptance checks, shared by ``lab validate`` and the test suite.

Every check takes a :class:`Context` (which caches corpus meshes, spectra
and nodal sets across checks) and returns a :class:`CheckResult`.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from ..eigensolve import SpectralResult, solve_lowest
from ..errors import QualityWarning
from ..geometry import (
    DomainSpec,
    DumbbellParams,
    HHNParams,
    constant_field,
    make_disk,
    make_dumbbell,
    make_hhn,
    make_narrow_convex,
    make_rectangle,
)
from ..mesh import TriMesh, refine, triangulate
from ..nodal import (
    angle_quantization_check,
    boundary_neumann_trace,
    classify_payne,
    count_nodal_domains,
    extract_nodal_set,
    inradius_nodal,
    junction_angles,
)
from ..reference import bessel_zero, disk_spectrum, hhn_radius_search, rectangle_spectrum
from ..shapecalc import (
    bump_field,
    directional_matrix,
    dumbbell_h_rule,
    dumbbell_sweep,
    fd_cluster_validate,
    gap_functional,
    genericity_trial,
    hadamard_check,
    payne_stability_sweep,
    rotational_identity,
)

__all__ = ["CheckResult", "Context", "CORPUS", "CHECKS", "angle_audit", "run_checks"]

PI = math.pi
J01 = bessel_zero(0, 1)
ELLIPSE_RHOS = (0.4, 0.2, 0.1, 0.05)
DUMBBELL_EPS = (0.2, 0.1, 0.05, 0.025)
HHN_WALL = 1.0 / 200


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} criterion {self.number:2d} [{self.name}] {self.summary}"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": bool(self.passed), "summary": self.summary,
                "wall_time": round(self.wall_time, 3), "details": _plain(self.details)}


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


# ----------------------------------------------------------------------------
# corpus


def _hhn(N: int) -> DomainSpec:
    return make_hhn(HHNParams(1.0, hhn_radius_search(1.0), N, 0.02), wall=HHN_WALL)


def _corpus():
    c = {
        "disk": (lambda: make_disk(1.0, 256), 0.03, True),
        "square": (lambda: make_rectangle(PI, PI, spacing=0.05), 0.05, True),
        "rect21": (lambda: make_rectangle(2.0, 1.0, spacing=0.025), 0.025, True),
    }
    for rho in ELLIPSE_RHOS:
        c[f"ellipse_{rho:g}"] = (lambda rho=rho: make_narrow_convex(1.0, rho, 512 if rho > 0.1 else 1024),
                                 rho / 10, True)
    c["dumbbell"] = (lambda: make_dumbbell(DumbbellParams(eps=0.05), ds=0.032), None, False)
    c["hhn"] = (lambda: _hhn(8), 0.02, False)
    return c


CORPUS = _corpus()
CONVEX = [k for k, v in CORPUS.items() if v[2]]


class Context:
    """Shared state for one validation run.

    Parameters
    ----------
    inject : float
        Test hook: relative perturbation applied to every eigenvalue that
        passes through :meth:`solve` (0 disables it).
    seed : int
        Seed for the randomized checks.
    jobs : int
        Worker processes for sweeps.
    """

    def __init__(self, inject: float = 0.0, seed: int = 0, jobs: int = 1):
        self.inject = float(inject)
        self.seed = int(seed)
        self.jobs = int(jobs)
        self._cache: dict = {}

    def _memo(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def solve(self, m: TriMesh, k: int) -> SpectralResult:
        sr = solve_lowest(m, k)
        if self.inject:
            sr = replace(sr, eigenvalues=np.asarray(sr.eigenvalues) * (1.0 + self.inject))
        return sr

    def domain(self, name: str) -> DomainSpec:
        return self._memo(("domain", name), CORPUS[name][0])

    def mesh(self, name: str) -> TriMesh:
        def build():
            d = self.domain(name)
            h = CORPUS[name][1]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", QualityWarning)
                if h is None:
                    hmax, size_fn = dumbbell_h_rule(DumbbellParams(eps=0.05))
                    return triangulate(d, hmax, size_fn=size_fn)
                return triangulate(d, h)

        return self._memo(("mesh", name), build)

    def spectrum(self, name: str, k: int = 8) -> SpectralResult:
        return self._memo(("spectrum", name, k), lambda: self.solve(self.mesh(name), k))

    def nodal(self, name: str, i: int):
        def build():
            m = self.mesh(name)
            v = self.spectrum(name).vector(i)
            return extract_nodal_set(m, v), count_nodal_domains(m, v)

        return self._memo(("nodal", name, i), build)


def _timed(fn):
    def wrapper(ctx: Context) -> CheckResult:
        t0 = time.perf_counter()
        res = fn(ctx)
        res.wall_time = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ----------------------------------------------------------------------------
# checks


@_timed
def check_fem_accuracy(ctx: Context) -> CheckResult:
    """Disk (h=0.02) and square eigenvalues within 1 %; O(h^2) refinement ratios."""
    d = make_disk(1.0, 256)
    sr = ctx.solve(triangulate(d, 0.02), 6)
    ref = np.array(disk_spectrum(1.0, 6).eigenvalues)
    disk_err = np.abs(sr.eigenvalues - ref) / ref
    sq = make_rectangle(PI, PI)
    sr_sq = ctx.solve(triangulate(sq, 0.05), 4)
    ref_sq = np.array(rectangle_spectrum(PI, PI, 4).eigenvalues)
    sq_err = np.abs(sr_sq.eigenvalues - ref_sq) / ref_sq
    m = triangulate(sq, 0.2)
    errs = []
    for level in range(3):
        errs.append(abs(ctx.solve(m, 1).value(1) - 2.0))
        if level < 2:
            m = refine(m)
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    ok = bool(disk_err.max() <= 0.01 and sq_err.max() <= 0.01 and all(3.5 <= r <= 4.5 for r in ratios))
    return CheckResult(1, "fem-accuracy", ok,
                       f"disk max rel err {disk_err.max():.2e}, square {sq_err.max():.2e}, "
                       f"refinement ratios {ratios[0]:.2f}, {ratios[1]:.2f}",
                       {"disk_rel_err": disk_err, "square_rel_err": sq_err, "refinement_errors": errs,
                        "ratios": ratios})


@_timed
def check_courant(ctx: Context) -> CheckResult:
    """Nodal-domain count of phi_k at most k for k <= 8 on every corpus domain."""
    counts = {}
    violations = []
    for name in CORPUS:
        row = []
        for k in range(1, 9):
            c = ctx.nodal(name, k)[1].count
            row.append(c)
            if c > k:
                violations.append((name, k, c))
        counts[name] = row
    return CheckResult(2, "courant", not violations,
                       f"{len(violations)} violations over {len(CORPUS)} domains x 8 eigenfunctions",
                       {"counts": counts, "violations": violations})


@_timed
def check_payne(ctx: Context) -> CheckResult:
    """phi_2 is SP with >= 2 sign changes on convex domains; NP strictly inside R1 on HHN (N=8)."""
    convex = {}
    ok = True
    for name in CONVEX:
        m = ctx.mesh(name)
        pv = classify_payne(boundary_neumann_trace(m, ctx.spectrum(name).vector(2)))
        good = pv.kind == "SP" and pv.n_sign_changes >= 2
        ok &= good
        convex[name] = {"verdict": pv.kind, "sign_changes": pv.n_sign_changes, "margin": pv.margin}
    m = ctx.mesh("hhn")
    v = ctx.spectrum("hhn").vector(2)
    pv = classify_payne(boundary_neumann_trace(m, v))
    ns = ctx.nodal("hhn", 2)[0]
    r_max = float(np.max(np.hypot(*ns.nodes.T))) if not ns.is_empty else 0.0
    hhn_ok = pv.kind == "NP" and r_max < 1.0 * (1 - 0.02)
    ok &= hhn_ok
    bad = [k for k, v in convex.items() if not (v["verdict"] == "SP" and v["sign_changes"] >= 2)]
    return CheckResult(3, "payne", bool(ok),
                       f"convex SP {len(CONVEX) - len(bad)}/{len(CONVEX)}; HHN(N=8) verdict {pv.kind}, "
                       f"nodal radius {r_max:.4f} (need NP and < 0.98)",
                       {"convex": convex, "hhn": {"verdict": pv.kind, "margin": pv.margin,
                                                  "sign_changes": pv.n_sign_changes, "nodal_r_max": r_max}})


@_timed
def check_openness(ctx: Context) -> CheckResult:
    """SP (ellipse) and NP (HHN) verdicts survive perturbations up to 1e-2 of the domain scale."""
    t_list = [1e-3, 3e-3, 1e-2]
    d = make_narrow_convex(1.0, 0.2)
    V = bump_field(d, [(0.0, 0.2), (0.3, -0.2 * math.sqrt(1 - 0.36))], [1, -1], 0.05)
    ell = payne_stability_sweep(d, V, t_list, k=2, h=0.02)
    d = _hhn(16)
    R2 = d.params["R2"]
    V = bump_field(d, [(R2, 0.0), (0.0, R2)], [1, -1], 0.2)
    hhn = payne_stability_sweep(d, V, t_list, k=2, h=0.03)
    ok = ell["base"] == "SP" and hhn["base"] == "NP" and ell["flips"] == 0 and hhn["flips"] == 0
    return CheckResult(4, "openness", bool(ok),
                       f"ellipse {ell['base']} flips {ell['flips']}, HHN(N=16) {hhn['base']} flips {hhn['flips']} "
                       f"for t <= {max(t_list):g}",
                       {"ellipse": ell, "hhn": hhn})


def angle_audit(ctx: Context, kmax: int = 8) -> tuple[list[dict], dict]:
    """One row per fitted ray at the boundary junctions of phi_2..phi_kmax on the corpus.

    Junctions at input corners or in regions below the Payne band are
    counted in the second return value and produce no rows.
    """
    rows = []
    excluded = {"unresolved": 0, "corner": 0, "flagged": 0}
    for name in CORPUS:
        m = ctx.mesh(name)
        sr = ctx.spectrum(name)
        for k in range(2, kmax + 1):
            ns = ctx.nodal(name, k)[0]
            for jf in junction_angles(ns, m, model="quadratic", v=sr.vector(k)):
                excluded["flagged"] += int(jf.flagged)
                if not jf.resolved:
                    excluded["unresolved"] += 1
                    continue
                if not jf.smooth:
                    excluded["corner"] += 1
                    continue
                for a in jf.angles:
                    frac, res = angle_quantization_check(float(a), sr.value(k))
                    rows.append({"domain": name, "k": k, "x": float(jf.point[0]), "y": float(jf.point[1]),
                                 "angle": float(a), "nearest": f"{frac.numerator}/{frac.denominator}",
                                 "residual": float(res)})
    return rows, excluded


@_timed
def check_angles(ctx: Context) -> CheckResult:
    """Junction angles near the admissible set; (2,1) junctions and the (2,2) crossing."""
    rows, excluded = angle_audit(ctx)
    rays = len(rows)
    worst = max((r["residual"] for r in rows), default=0.0)
    misses = [(r["domain"], r["k"], r["angle"], r["nearest"], r["residual"]) for r in rows if r["residual"] > 0.1]
    flagged = excluded["flagged"]
    ns21 = ctx.nodal("rect21", 2)[0]
    a21 = np.concatenate([jf.angles for jf in junction_angles(ns21, ctx.mesh("rect21"))])
    err21 = float(np.max(np.abs(a21 - PI / 2))) if len(a21) else math.inf
    ns22 = ctx.nodal("square", 4)[0]
    cross = ns22.interior_crossings
    if len(cross) == 1 and len(cross[0].angles) == 4:
        err22 = float(np.max(np.abs(cross[0].angles - PI / 2)))
    else:
        err22 = math.inf
    ok = not misses and rays > 0 and err21 <= 0.05 and err22 <= 0.05
    return CheckResult(5, "angles", bool(ok),
                       f"{rays - len(misses)}/{rays} rays within 0.1 of P (worst {worst:.3f}; "
                       f"{excluded['corner']} corner and {excluded['unresolved']} unresolved junctions skipped); "
                       f"(2,1) junction error {err21:.3f}; (2,2) crossing spacing error {err22:.3f}",
                       {"rays": rays, "misses": misses, "worst": worst, "flagged_junctions": flagged,
                        "excluded": excluded, "rect21_junction_angles": a21, "square22_crossings": len(cross), "err21": err21,
                        "err22": err22})


@_timed
def check_hadamard(ctx: Context) -> CheckResult:
    """Boundary-integral derivative against transported-mesh FD on five (domain, field) pairs."""
    disk = make_disk(1.0, 256)
    sq = make_rectangle(PI, PI, spacing=0.05)
    ell = make_narrow_convex(1.0, 0.4)
    r21 = make_rectangle(2.0, 1.0, spacing=0.025)
    cases = [
        ("disk dilation", disk, constant_field(disk), 1, 0.03),
        ("square offset", sq, constant_field(sq), 1, 0.05),
        ("square bottom bump", sq, bump_field(sq, [(PI / 2, 0.0)], [1], 0.3), 1, 0.05),
        ("ellipse end bump", ell, bump_field(ell, [(0.5, 0.0)], [1], 0.05), 1, 0.04),
        ("rect21 side bump k=2", r21, bump_field(r21, [(2.0, 0.5)], [1], 0.15), 2, 0.05),
    ]
    rows = []
    ok = True
    for label, d, V, k, h in cases:
        rep = hadamard_check(d, V, k, h=h)
        rows.append({"case": label, "k": k, "predicted": rep.predicted, "fd": rep.fd, "rel_error": rep.rel_error})
        ok &= rep.rel_error <= 0.02
    lam1 = disk_spectrum(1.0, 1).eigenvalues[0]
    dil_err = abs(rows[0]["fd"] + 2 * lam1) / (2 * lam1)
    ok &= dil_err <= 0.01
    worst = max(r["rel_error"] for r in rows)
    return CheckResult(6, "hadamard", bool(ok),
                       f"worst rel error {worst:.2e} over {len(rows)} pairs; disk dilation FD vs -2 lam1 {dil_err:.2e}",
                       {"cases": rows, "disk_dilation_vs_exact": dil_err})


@_timed
def check_degenerate(ctx: Context) -> CheckResult:
    """Disk cluster {2,3} with a (+,-) bump pair: signature (1,1), lam2 down and lam3 up at t=1e-3."""
    d = make_disk(1.0, 256)
    m = triangulate(d, 0.04)
    V = bump_field(d, [(1.0, 0.0), (0.0, 1.0)], [1, -1], 0.1)
    sr = ctx.solve(m, 4)
    dm = directional_matrix(m, sr, [2, 3], V)
    fd = fd_cluster_validate(d, V, [2, 3], t=1e-3, mesh=m)
    first = fd["attempts"][0]
    moves = first["shift_plus"][0] < 0 < first["shift_plus"][1]
    ok = tuple(dm.signature) == (1, 1, 0) and fd["consistent"] and fd["t"] == 1e-3 and moves
    return CheckResult(7, "degenerate", bool(ok),
                       f"signature {tuple(dm.signature)}, shifts at t=1e-3: "
                       f"{first['shift_plus'][0]:+.2e}, {first['shift_plus'][1]:+.2e}",
                       {"matrix": dm.entries, "eigenvalues": dm.eigenvalues, "fd": fd})


@_timed
def check_gap(ctx: Context) -> CheckResult:
    """Normalized gap >= 0.99 * 3 pi^2 on convex domains; decreasing in rho along the ellipses."""
    bound = 3 * PI**2 * 0.99
    vals = {}
    for name in CONVEX:
        vals[name] = gap_functional(ctx.domain(name), mesh=ctx.mesh(name))[1]
    ell = [vals[f"ellipse_{rho:g}"] for rho in sorted(ELLIPSE_RHOS)]
    monotone = all(a > b for a, b in zip(ell, ell[1:]))
    low = min(vals.values())
    ok = low >= bound and monotone
    return CheckResult(8, "gap", bool(ok),
                       f"min normalized gap {low:.3f} (bound {bound:.3f}); ellipse gaps decreasing in rho: {monotone}",
                       {"normalized": vals, "ellipse_by_rho": dict(zip(sorted(ELLIPSE_RHOS), ell))})


@_timed
def check_dumbbell(ctx: Context) -> CheckResult:
    """lam2 approaches lam1 of the r=0.8 disk monotonically; phi2 localizes in that lobe."""
    target = disk_spectrum(0.8, 1).eigenvalues[0]
    rows = dumbbell_sweep(DumbbellParams(), DUMBBELL_EPS, k=3, jobs=ctx.jobs)
    dist = [abs(r["lambda_2"] - target) for r in rows]
    monotone = all(a > b for a, b in zip(dist, dist[1:]))
    final = dist[-1] / target
    frac = rows[-1]["mass_fraction_lobe2"]
    ok = monotone and final <= 0.05 and frac >= 0.95
    return CheckResult(9, "dumbbell", bool(ok),
                       f"|lam2 - {target:.4f}| decreasing: {monotone}; final gap {final:.2%}; "
                       f"mass fraction {frac:.4f}",
                       {"rows": rows, "target": target, "distance": dist})


@_timed
def check_genericity(ctx: Context) -> CheckResult:
    """Random smooth perturbations of the square split its {2,3} cluster in >= 90 % of trials."""
    sq = make_rectangle(PI, PI, spacing=0.05)
    res = genericity_trial(sq, 0.02, trials=50, seed=ctx.seed, h=0.05)
    ok = res["fraction"] >= 0.9
    return CheckResult(10, "genericity", bool(ok),
                       f"split fraction {res['fraction']:.2f} (budget {res['budget']:.2e}, seed {ctx.seed})",
                       res)


@_timed
def check_rotational(ctx: Context) -> CheckResult:
    """Rotational boundary identity on the square cluster: <= 0.05 at h=0.03, halving on refinement."""
    sq = make_rectangle(PI, PI, spacing=0.03)
    m = triangulate(sq, 0.03)
    vals = []
    for level in range(2):
        sr = ctx.solve(m, 4)
        vals.append(rotational_identity(m, sr, 2, 3, center=(10.0, 10.0)))
        if level == 0:
            m = refine(m)
    ok = abs(vals[0]) <= 0.05 and abs(vals[1]) <= 0.5 * abs(vals[0])
    return CheckResult(11, "rotational", bool(ok),
                       f"normalized value {vals[0]:.2e} at h=0.03, {vals[1]:.2e} refined",
                       {"values": vals})


@_timed
def check_inradius(ctx: Context) -> CheckResult:
    """inradius * sqrt(lam) <= j01 + 0.1 for every nodal domain of phi_k, k <= 8."""
    upper = J01 + 0.1
    worst_hi, worst_lo = 0.0, math.inf
    violations = []
    n = 0
    for name in CORPUS:
        m = ctx.mesh(name)
        sr = ctx.spectrum(name)
        for k in range(1, 9):
            ns, doms = ctx.nodal(name, k)
            for label in range(doms.count):
                r = inradius_nodal(m, sr.vector(k), label, doms, ns)
                s = r * math.sqrt(sr.value(k))
                n += 1
                worst_hi = max(worst_hi, s)
                worst_lo = min(worst_lo, s)
                if s > upper:
                    violations.append((name, k, label, s))
    return CheckResult(12, "inradius", not violations,
                       f"{n} nodal domains, max scaled inradius {worst_hi:.3f} (bound {upper:.3f}), "
                       f"min {worst_lo:.3f} (reported)",
                       {"count": n, "max": worst_hi, "min": worst_lo, "lower_0_5_holds": worst_lo >= 0.5,
                        "violations": violations})


CHECKS = {
    1: check_fem_accuracy,
    2: check_courant,
    3: check_payne,
    4: check_openness,
    5: check_angles,
    6: check_hadamard,
    7: check_degenerate,
    8: check_gap,
    9: check_dumbbell,
    10: check_genericity,
    11: check_rotational,
    12: check_inradius,
}


def run_checks(ctx: Context | None = None, only=None, on_result=None) -> list[CheckResult]:
    """Run the selected checks (all by default) in numeric order."""
    ctx = ctx or Context()
    out = []
    for num in sorted(CHECKS if only is None else only):
        res = CHECKS[num](ctx)
        out.append(res)
        if on_result is not None:
            on_result(res)
    return out

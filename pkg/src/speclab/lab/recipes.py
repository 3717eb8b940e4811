"""Sweep recipes behind ``lab sweep``.

Each recipe maps a run configuration to a table (one dict per row), a
summary, an optional SVG figure and the verdict of its built-in expectation
(``None`` when the recipe only reports).
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..eigensolve import solve_lowest
from ..errors import InvalidParameter
from ..geometry import make_hhn, make_narrow_convex
from ..mesh import triangulate
from ..nodal import boundary_neumann_trace, classify_payne, extract_nodal_set
from ..reference import disk_spectrum
from ..shapecalc import dumbbell_sweep, fourier_field, gap_functional, genericity_trial, payne_stability_sweep
from .checks import Context, angle_audit
from .config import ConfigError, build_domain, build_mesh, dumbbell_params, hhn_params
from .figures import line_chart_svg

__all__ = ["RECIPES", "SweepOutcome", "run_recipe"]

GAP_BOUND = 3 * math.pi**2 * 0.99


@dataclass
class SweepOutcome:
    rows: list
    summary: dict
    figure: str | None = None
    passed: bool | None = None
    stage_times: dict = field(default_factory=dict)


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        return list(ex.map(fn, items))


def _floats(cfg: dict, key: str) -> list[float]:
    vals = cfg["sweep"].get(key)
    if not isinstance(vals, list) or not vals or not all(isinstance(v, (int, float)) for v in vals):
        raise ConfigError(f"sweep.{key} must be a non-empty list of numbers (got {vals!r})")
    return [float(v) for v in vals]


def _dumbbell(cfg, seed, jobs):
    sec = cfg["domain"] if cfg["domain"].get("family") == "dumbbell" else {}
    p = dumbbell_params(sec)
    eps_list = _floats(cfg, "eps_list")
    for e in eps_list:
        dumbbell_params({**sec, "eps": e})
    rows = dumbbell_sweep(p, eps_list, k=3, jobs=jobs)
    times = {f"eps={r['eps']:g}": r.pop("wall_time") for r in rows}
    target = disk_spectrum(p.lobe2, 1).eigenvalues[0]
    for r in rows:
        r["rel_gap"] = abs(r["lambda_2"] - target) / target
    frac = rows[-1]["mass_fraction_lobe2"]
    fig = line_chart_svg([r["eps"] for r in rows], {"lambda_2": [r["lambda_2"] for r in rows],
                                                    "target": [target] * len(rows)},
                         "connector half-width", "eigenvalue", logx=True)
    summary = {"target": target, "smallest_eps": rows[-1]["eps"], "final_rel_gap": rows[-1]["rel_gap"],
               "mass_fraction_lobe2": frac}
    return SweepOutcome(rows, summary, fig, frac >= 0.95, times)


def _hhn_point(args):
    sec, h = args
    p = hhn_params(sec)
    d = make_hhn(p, wall=sec.get("wall", p.R1 / 200))
    m = triangulate(d, h)
    sr = solve_lowest(m, 2)
    v = sr.vector(2)
    pv = classify_payne(boundary_neumann_trace(m, v))
    ns = extract_nodal_set(m, v)
    r_max = float(np.max(np.hypot(*ns.nodes.T))) if not ns.is_empty else 0.0
    return {"N": p.N, "R2": p.R2, "lambda_1": sr.value(1), "lambda_2": sr.value(2), "verdict": pv.kind,
            "margin": pv.margin, "sign_changes": pv.n_sign_changes, "nodal_r_max": r_max,
            "n_vertices": m.n_vertices}


def _hhn(cfg, seed, jobs):
    sec = cfg["domain"] if cfg["domain"].get("family") == "hhn" else {}
    h = cfg["sweep"].get("h", 0.02)
    Ns = sorted({int(n) for n in _floats(cfg, "N_list")})
    rows = _map(_hhn_point, [({**sec, "N": n}, h) for n in Ns], jobs)
    summary = {"verdicts": {str(r["N"]): r["verdict"] for r in rows}, "h": h}
    return SweepOutcome(rows, summary)


def _gap_point(args):
    D, rho = args
    d = make_narrow_convex(D, rho, 512 if rho > 0.1 * D else 1024)
    gap, norm = gap_functional(d, mesh=triangulate(d, rho / 10))
    return {"rho": rho, "D": D, "h": rho / 10, "gap": gap, "normalized_gap": norm, "bound": GAP_BOUND}


def _gap(cfg, seed, jobs):
    D = float(cfg["domain"].get("D", 1.0)) if cfg["domain"].get("family") == "ellipse" else 1.0
    rhos = sorted({float(r) for r in _floats(cfg, "rho_list")}, reverse=True)
    rows = _map(_gap_point, [(D, r) for r in rhos], jobs)
    norm = [r["normalized_gap"] for r in rows]
    above = all(g >= GAP_BOUND for g in norm)
    # rows run from large to small rho, so the gap must grow down the table
    decreasing_in_rho = all(a < b for a, b in zip(norm, norm[1:]))
    fig = line_chart_svg(rhos, {"normalized gap": norm, "0.99 * 3 pi^2": [GAP_BOUND] * len(rows)},
                         "semi-minor axis", "(lam2 - lam1) D^2", logx=True)
    summary = {"min_normalized_gap": min(norm), "bound": GAP_BOUND, "above_bound": above,
               "decreasing_in_rho": decreasing_in_rho}
    return SweepOutcome(rows, summary, fig, above and decreasing_in_rho)


def _genericity(cfg, seed, jobs):
    d = build_domain(cfg["domain"])
    m = build_mesh(cfg, d)
    cluster = cfg["sweep"].get("cluster", [2, 3])
    res = genericity_trial(d, float(cfg["sweep"]["amplitude"]), trials=int(cfg["sweep"]["trials"]), seed=seed,
                           cluster=cluster, mesh=m)
    rows = [{"trial": i, "rel_split": s, "split": s > 5 * res["budget"]} for i, s in enumerate(res["splits"])]
    summary = {k: res[k] for k in ("fraction", "budget", "amplitude", "trials", "seed")}
    return SweepOutcome(rows, summary, passed=res["fraction"] >= 0.9)


def _payne_stability(cfg, seed, jobs):
    d = build_domain(cfg["domain"])
    m = build_mesh(cfg, d)
    V = fourier_field(d, 1.0, np.random.default_rng(seed))
    res = payne_stability_sweep(d, V, _floats(cfg, "t_list"), k=int(cfg["nodal"]["index"]), mesh=m)
    summary = {"base": res["base"], "largest_stable_t": res["largest_stable_t"], "flips": res["flips"]}
    return SweepOutcome(res["rows"], summary, passed=res["flips"] == 0)


def _angle_audit(cfg, seed, jobs):
    rows, excluded = angle_audit(Context(seed=seed, jobs=jobs))
    within = sum(r["residual"] <= 0.1 for r in rows)
    summary = {"rays": len(rows), "within_0.1": within, "excluded_junctions": excluded,
               "worst": max((r["residual"] for r in rows), default=0.0)}
    return SweepOutcome(rows, summary, passed=bool(rows) and within == len(rows))


RECIPES = {
    "dumbbell": _dumbbell,
    "hhn": _hhn,
    "gap": _gap,
    "genericity": _genericity,
    "payne-stability": _payne_stability,
    "angle-audit": _angle_audit,
}


def run_recipe(name: str, cfg: dict, seed: int = 0, jobs: int = 1) -> SweepOutcome:
    if name not in RECIPES:
        raise ConfigError(f"sweep.recipe must be one of {sorted(RECIPES)} (got {name!r})")
    t0 = time.perf_counter()
    try:
        out = RECIPES[name](cfg, seed, jobs)
    except ConfigError:
        raise
    except InvalidParameter as exc:
        raise ConfigError(str(exc)) from exc
    out.stage_times.setdefault("sweep", time.perf_counter() - t0)
    return out

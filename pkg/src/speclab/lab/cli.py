"""``lab`` command line: spectrum, nodal, sweep and validate.

Every command writes ``results.csv`` and ``manifest.json`` (plus SVG
figures) under ``--out``. Exit codes: 0 pass, 1 acceptance failure,
2 configuration or validation error, 3 numeric error.
"""
from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import time
import warnings

from .. import __version__
from ..eigensolve import solve_lowest, spectrum_csv
from ..errors import (
    ClusteredEigenvalue,
    CrossingError,
    GeometryError,
    InvalidConstraints,
    InvalidInput,
    InvalidParameter,
    MeshTooCoarse,
    NumericError,
    QualityWarning,
)
from ..mesh import to_svg
from ..nodal import (
    boundary_neumann_trace,
    classify_payne,
    count_nodal_domains,
    extract_nodal_set,
    junction_angles,
    nodal_svg,
    segments_csv,
)
from ..shapecalc import table_csv
from .checks import CHECKS, Context, _plain, run_checks
from .config import DEFAULTS, ConfigError, build_domain, build_mesh, load_config
from .manifest import RunManifest, Writer
from .recipes import RECIPES, run_recipe

__all__ = ["main", "build_parser"]

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
CONFIG_ERRORS = (ConfigError, InvalidParameter, InvalidInput, InvalidConstraints, GeometryError)
NUMERIC_ERRORS = (NumericError, MeshTooCoarse, CrossingError, ClusteredEigenvalue, ArithmeticError)


class _Stages:
    def __init__(self):
        self.times = {}

    def run(self, name, fn, *args, **kw):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kw)
        finally:
            self.times[name] = self.times.get(name, 0.0) + time.perf_counter() - t0


def _only(text: str) -> list[int]:
    try:
        nums = sorted({int(x) for x in text.split(",") if x.strip()})
    except ValueError:
        raise argparse.ArgumentTypeError(f"--only expects comma-separated check numbers (got {text!r})")
    bad = [n for n in nums if n not in CHECKS]
    if bad or not nums:
        raise argparse.ArgumentTypeError(f"unknown check numbers {bad or text!r}; valid are 1-{len(CHECKS)}")
    return nums


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML run configuration, or a manifest.json to re-run")
    common.add_argument("--out", metavar="DIR", default="lab_out", help="output directory (default: lab_out)")
    common.add_argument("--jobs", metavar="N", type=int, default=os.cpu_count() or 1,
                        help="worker processes for sweeps (default: logical cores)")
    common.add_argument("--seed", metavar="S", type=int, default=None, help="seed for randomized steps (default 0)")
    common.add_argument("--json", action="store_true", help="print the manifest as JSON on stdout")

    ap = argparse.ArgumentParser(prog="lab", description="Dirichlet spectral-geometry laboratory.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="lowest eigenvalues of the configured domain")
    sub.add_parser("nodal", parents=[common], help="nodal set, Payne verdict and junction angles of one eigenfunction")
    sp = sub.add_parser("sweep", parents=[common], help="run an experiment recipe")
    sp.add_argument("recipe", nargs="?", choices=sorted(RECIPES), help="overrides sweep.recipe")
    vp = sub.add_parser("validate", parents=[common], help="run the acceptance checks")
    vp.add_argument("--only", type=_only, metavar="LIST", help="comma-separated check numbers")
    # test hook: scales every eigenvalue the checks see by (1 + X)
    vp.add_argument("--inject-eigen-perturbation", type=float, default=0.0, metavar="X", help=argparse.SUPPRESS)
    return ap


def _load(args):
    """Configuration and seed, from TOML or from a previous manifest."""
    seed = 0
    if args.config and args.config.endswith(".json"):
        try:
            with open(args.config, encoding="utf-8") as fh:
                old = RunManifest.from_json(fh.read())
        except (OSError, ValueError, TypeError) as exc:
            raise ConfigError(f"cannot read manifest {args.config}: {exc}") from exc
        if old.command != args.command:
            raise ConfigError(f"manifest records command {old.command!r}, not {args.command!r}")
        if not isinstance(old.config, dict):
            raise ConfigError(f"manifest {args.config} has no config snapshot")
        # the snapshot is complete; only sections added since it was written come from the defaults
        cfg = copy.deepcopy(old.config)
        for key, val in DEFAULTS.items():
            cfg.setdefault(key, copy.deepcopy(val))
        seed = old.seed
    else:
        cfg = load_config(args.config)
    if args.seed is not None:
        seed = args.seed
    return cfg, seed


def _spectrum(args, cfg, seed, w: Writer, st: _Stages) -> int:
    d = st.run("domain", build_domain, cfg["domain"])
    m = st.run("mesh", build_mesh, cfg, d)
    sr = st.run("solve", solve_lowest, m, int(cfg["solve"]["k"]), float(cfg["solve"]["tol"]))
    w.write("results.csv", spectrum_csv(sr))
    w.write("mesh.svg", to_svg(m))
    w.manifest.summary = {"eigenvalues": [float(x) for x in sr.eigenvalues], "converged": sr.converged,
                          "n_vertices": m.n_vertices, "h_max": m.h_max}
    if not sr.converged:
        w.manifest.status = "error"
        return EXIT_NUMERIC
    return EXIT_PASS


def _nodal(args, cfg, seed, w: Writer, st: _Stages) -> int:
    i = int(cfg["nodal"]["index"])
    if i < 1:
        raise ConfigError(f"nodal.index must be at least 1 (got {i})")
    d = st.run("domain", build_domain, cfg["domain"])
    m = st.run("mesh", build_mesh, cfg, d)
    sr = st.run("solve", solve_lowest, m, max(i, int(cfg["solve"]["k"])), float(cfg["solve"]["tol"]))
    v = sr.vector(i)

    def analyze():
        ns = extract_nodal_set(m, v)
        doms = count_nodal_domains(m, v)
        pv = classify_payne(boundary_neumann_trace(m, v))
        fits = junction_angles(ns, m, model="quadratic", v=v) if ns.junctions else []
        return ns, doms, pv, fits

    ns, doms, pv, fits = st.run("nodal", analyze)
    verdict = {
        "index": i,
        "eigenvalue": sr.value(i),
        "payne": pv.to_dict(),
        "nodal_domains": doms.count,
        "components": ns.n_components,
        "junctions": [{"point": f.point, "angles": f.angles, "flagged": f.flagged, "resolved": f.resolved,
                       "smooth": f.smooth} for f in fits],
        "interior_crossings": [{"point": c.point, "angles": c.angles} for c in ns.interior_crossings],
    }
    w.write("results.csv", segments_csv(ns))
    w.write("nodal.svg", nodal_svg(m, ns))
    w.write("payne.json", json.dumps(_plain(verdict), indent=2, sort_keys=True) + "\n")
    w.manifest.summary = {"verdict": pv.kind, "nodal_domains": doms.count, "junctions": len(fits)}
    return EXIT_PASS


def _sweep(args, cfg, seed, w: Writer, st: _Stages) -> int:
    name = args.recipe or cfg["sweep"].get("recipe")
    cfg["sweep"]["recipe"] = name
    out = run_recipe(name, cfg, seed=seed, jobs=args.jobs)
    st.times.update(out.stage_times)
    w.write("results.csv", table_csv(out.rows))
    if out.figure is not None:
        w.write(f"{name}.svg", out.figure)
    w.manifest.summary = _plain({"recipe": name, "expectation_met": out.passed, **out.summary})
    if out.passed is False:
        w.manifest.status = "fail"
        return EXIT_FAIL
    return EXIT_PASS


def _validate(args, cfg, seed, w: Writer, st: _Stages) -> int:
    only = args.only
    inject = args.inject_eigen_perturbation
    prev = cfg.get("validate", {})
    if only is None and prev.get("only"):
        only = sorted({int(n) for n in prev["only"]})
        if any(n not in CHECKS for n in only):
            raise ConfigError(f"validate.only lists unknown checks {only}")
    if not inject:
        inject = float(prev.get("inject", 0.0))
    cfg["validate"] = {"only": only or [], "inject": inject}
    ctx = Context(inject=inject, seed=seed, jobs=args.jobs)
    echo = None if args.json else (lambda r: print(r.line(), flush=True))
    results = st.run("checks", run_checks, ctx, only, echo)
    for r in results:
        st.times[f"check_{r.number}"] = r.wall_time
    rows = [{"number": r.number, "name": r.name, "passed": r.passed, "summary": r.summary} for r in results]
    w.write("results.csv", table_csv(rows))
    w.write("checks.json", json.dumps([_strip_times(r.to_dict()) for r in results], indent=2, sort_keys=True) + "\n")
    w.manifest.checks = [{**row, "wall_time": round(r.wall_time, 3)} for row, r in zip(rows, results)]
    failed = [r.name for r in results if not r.passed]
    w.manifest.summary = {"passed": len(results) - len(failed), "total": len(results), "failed": failed}
    if failed:
        w.manifest.status = "fail"
        return EXIT_FAIL
    return EXIT_PASS


def _strip_times(x):
    if isinstance(x, dict):
        return {k: _strip_times(v) for k, v in x.items() if k != "wall_time"}
    if isinstance(x, list):
        return [_strip_times(v) for v in x]
    return x


COMMANDS = {"spectrum": _spectrum, "nodal": _nodal, "sweep": _sweep, "validate": _validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    warnings.simplefilter("ignore", QualityWarning)
    try:
        cfg, seed = _load(args)
    except CONFIG_ERRORS as exc:
        print(f"lab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        print("lab: config error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    manifest = RunManifest(args.command, cfg, __version__, seed)
    w = Writer(args.out, manifest)
    st = _Stages()
    try:
        code = COMMANDS[args.command](args, cfg, seed, w, st)
    except CONFIG_ERRORS as exc:
        print(f"lab: config error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"lab: numeric error: {exc}", file=sys.stderr)
        code = EXIT_NUMERIC
    if code in (EXIT_CONFIG, EXIT_NUMERIC):
        manifest.status = "error"
    manifest.config = _plain(cfg)
    manifest.stage_times = {k: round(v, 4) for k, v in st.times.items()}
    w.close()
    if args.json:
        print(manifest.to_json(), end="")
    else:
        print(f"{args.command}: {manifest.status}; outputs in {w.out_dir}: {', '.join(manifest.outputs)}")
    return code


if __name__ == "__main__":
    sys.exit(main())

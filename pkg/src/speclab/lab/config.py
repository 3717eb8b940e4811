"""Run configuration: one TOML file with flat sections per module.

Schema (every key optional; defaults below)::

    [domain]
    family = "disk"        # disk | rectangle | ellipse | dumbbell | hhn
    radius = 1.0           # disk
    n = 256                # disk / ellipse boundary vertex count
    a = 3.141592653589793  # rectangle sides
    b = 3.141592653589793
    D = 1.0                # ellipse length
    rho = 0.2              # ellipse semi-minor axis
    lobe1 = 1.0            # dumbbell (see DumbbellParams)
    lobe2 = 0.8
    xi = 0.201
    eps = 0.05
    connector_length = 2.0
    R1 = 1.0               # hhn; R2 = "auto" picks the eigenvalue-sandwich midpoint
    R2 = "auto"
    N = 16
    gate = 0.02            # gate half-angle
    wall = 0.005

    [mesh]
    h = 0.05               # ignored for dumbbells, which follow their h rule

    [solve]
    k = 6
    tol = 1e-8

    [nodal]
    index = 2

    [sweep]
    recipe = "gap"         # dumbbell | hhn | gap | genericity | payne-stability | angle-audit
    eps_list = [0.2, 0.1, 0.05, 0.025]
    rho_list = [0.4, 0.2, 0.1, 0.05]
    t_list = [0.001, 0.01]
    amplitude = 0.02
    trials = 50
    N_list = [8, 16]
    h = 0.02               # hhn recipe mesh size
    cluster = [2, 3]       # genericity recipe

    [validate]
    only = []              # check numbers; empty runs all twelve
"""
from __future__ import annotations

import copy
import math
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import InvalidParameter
from ..geometry import (
    DomainSpec,
    DumbbellParams,
    HHNParams,
    make_disk,
    make_dumbbell,
    make_hhn,
    make_narrow_convex,
    make_rectangle,
)
from ..mesh import TriMesh, triangulate
from ..reference import hhn_radius_search

__all__ = ["ConfigError", "DEFAULTS", "load_config", "merge", "build_domain", "build_mesh"]

DEFAULTS = {
    "domain": {"family": "disk", "radius": 1.0, "n": 256},
    "mesh": {"h": 0.05},
    "solve": {"k": 6, "tol": 1e-8},
    "nodal": {"index": 2},
    "sweep": {
        "recipe": "gap",
        "eps_list": [0.2, 0.1, 0.05, 0.025],
        "rho_list": [0.4, 0.2, 0.1, 0.05],
        "t_list": [1e-3, 1e-2],
        "amplitude": 0.02,
        "trials": 50,
        "N_list": [8, 16],
        "h": 0.02,
        "cluster": [2, 3],
    },
    "validate": {"only": []},
}

FAMILIES = ("disk", "rectangle", "ellipse", "dumbbell", "hhn")


class ConfigError(InvalidParameter):
    """Configuration file cannot be read or violates a parameter invariant."""


def merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults merged with the TOML file at ``path`` (if any), then ``overrides``."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path, "rb") as fh:
                user = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config {path} is not valid TOML: {exc}") from exc
        unknown = set(user) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config sections {sorted(unknown)}")
        # a new domain family must not inherit the default family's keys
        if "domain" in user:
            cfg["domain"] = {}
        cfg = merge(cfg, user)
    if overrides:
        cfg = merge(cfg, overrides)
    return cfg


def _num(sec: dict, key: str, default):
    val = sec.get(key, default)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"domain.{key} must be a number (got {val!r})")
    return val


def build_domain(sec: dict) -> DomainSpec:
    """DomainSpec from a ``[domain]`` section; invariant violations become ConfigError."""
    family = sec.get("family", "disk")
    if family not in FAMILIES:
        raise ConfigError(f"domain.family must be one of {FAMILIES} (got {family!r})")
    try:
        if family == "disk":
            return make_disk(_num(sec, "radius", 1.0), int(_num(sec, "n", 256)))
        if family == "rectangle":
            a, b = _num(sec, "a", math.pi), _num(sec, "b", math.pi)
            return make_rectangle(a, b, sec.get("spacing"))
        if family == "ellipse":
            return make_narrow_convex(_num(sec, "D", 1.0), _num(sec, "rho", 0.2), int(_num(sec, "n", 512)))
        if family == "dumbbell":
            p = dumbbell_params(sec)
            return make_dumbbell(p, ds=min(0.04 * min(p.lobe1, p.lobe2), p.eps))
        p = hhn_params(sec)
        return make_hhn(p, wall=_num(sec, "wall", p.R1 / 200))
    except ConfigError:
        raise
    except InvalidParameter as exc:
        raise ConfigError(f"invalid {family} parameters: {exc}") from exc


def dumbbell_params(sec: dict) -> DumbbellParams:
    base = DumbbellParams()
    p = DumbbellParams(
        lobe1=_num(sec, "lobe1", base.lobe1),
        lobe2=_num(sec, "lobe2", base.lobe2),
        xi=_num(sec, "xi", base.xi),
        eps=_num(sec, "eps", base.eps),
        connector_length=_num(sec, "connector_length", base.connector_length),
    )
    try:
        p.check()
    except InvalidParameter as exc:
        raise ConfigError(f"invalid dumbbell parameters: {exc}") from exc
    return p


def hhn_params(sec: dict) -> HHNParams:
    R1 = _num(sec, "R1", 1.0)
    R2 = sec.get("R2", "auto")
    if R2 == "auto":
        R2 = hhn_radius_search(R1)
    elif isinstance(R2, bool) or not isinstance(R2, (int, float)):
        raise ConfigError(f'domain.R2 must be a number or "auto" (got {R2!r})')
    p = HHNParams(R1, float(R2), int(_num(sec, "N", 16)), _num(sec, "gate", 0.02))
    try:
        p.check()
    except InvalidParameter as exc:
        raise ConfigError(f"invalid hhn parameters: {exc}") from exc
    return p


def build_mesh(cfg: dict, d: DomainSpec) -> TriMesh:
    from ..shapecalc import dumbbell_h_rule

    if d.family == "dumbbell":
        hmax, size_fn = dumbbell_h_rule(dumbbell_params(cfg["domain"]))
        return triangulate(d, hmax, size_fn=size_fn)
    h = cfg["mesh"].get("h", 0.05)
    if isinstance(h, bool) or not isinstance(h, (int, float)) or not h > 0:
        raise ConfigError(f"mesh.h must be a positive number (got {h!r})")
    return triangulate(d, float(h))

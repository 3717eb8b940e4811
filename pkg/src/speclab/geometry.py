"""Planar domain families as discretized boundary polygons.

Every domain is a :class:`DomainSpec`: a counterclockwise outer loop plus
clockwise holes, so the domain always lies to the left of the direction of
travel. Constructors cover the reference shapes (disk, rectangle, ellipse)
and the two non-convex families used in the experiments: the dumbbell with a
flared connector and the annulus-with-gated-wall domain.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import GeometryError, InvalidParameter

__all__ = [
    "DomainSpec",
    "DumbbellParams",
    "HHNParams",
    "PerturbationField",
    "make_disk",
    "make_rectangle",
    "make_dumbbell",
    "make_hhn",
    "make_narrow_convex",
    "apply_perturbation",
    "boundary_displacement",
    "diameter",
    "diameter_pair",
    "inradius_domain",
    "convexity_check",
    "area",
    "perimeter",
    "points_in_domain",
    "distance_to_boundary",
    "bump_profile",
    "constant_field",
    "to_json",
    "from_json",
]


def _as_loop(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 3:
        raise GeometryError("a boundary loop needs at least 3 points of shape (n, 2)")
    return arr


def signed_area(loop: np.ndarray) -> float:
    x, y = loop[:, 0], loop[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """Piecewise-linear planar domain.

    Parameters
    ----------
    outer : (n, 2) array
        Outer boundary, counterclockwise, not repeating the first point.
    holes : sequence of (m, 2) arrays
        Inner boundaries, each clockwise and strictly inside ``outer``.
    family : str
        Tag of the constructor family (``"disk"``, ``"dumbbell"``, ...).
    params : dict
        Constructor parameters, kept for provenance and serialization.
    """

    outer: np.ndarray
    holes: tuple = ()
    family: str = "polygon"
    params: dict = field(default_factory=dict)
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        outer = _as_loop(self.outer)
        holes = tuple(_as_loop(h) for h in self.holes)
        outer.setflags(write=False)
        for h in holes:
            h.setflags(write=False)
        object.__setattr__(self, "outer", outer)
        object.__setattr__(self, "holes", holes)
        object.__setattr__(self, "params", dict(self.params))
        if self.validate:
            _validate(self)

    @property
    def loops(self) -> list[np.ndarray]:
        return [self.outer, *self.holes]

    @property
    def boundary_points(self) -> np.ndarray:
        """All boundary vertices, outer loop first, then holes in order."""
        return np.vstack(self.loops)

    @property
    def loop_offsets(self) -> np.ndarray:
        sizes = [len(l) for l in self.loops]
        return np.concatenate([[0], np.cumsum(sizes)])

    @property
    def n_boundary(self) -> int:
        return int(self.loop_offsets[-1])

    def edges(self) -> np.ndarray:
        """Boundary edges as index pairs into :attr:`boundary_points`."""
        out = []
        offs = self.loop_offsets
        for a, b in zip(offs[:-1], offs[1:]):
            idx = np.arange(a, b)
            out.append(np.column_stack([idx, np.roll(idx, -1)]))
        return np.vstack(out)

    def loop_of_vertex(self) -> np.ndarray:
        offs = self.loop_offsets
        return np.repeat(np.arange(len(offs) - 1), np.diff(offs))

    def min_edge(self) -> float:
        p = self.boundary_points
        e = self.edges()
        return float(np.min(np.linalg.norm(p[e[:, 1]] - p[e[:, 0]], axis=1)))

    def with_boundary(self, points: np.ndarray, **params) -> "DomainSpec":
        """Same loop structure with moved vertices."""
        offs = self.loop_offsets
        loops = [points[a:b] for a, b in zip(offs[:-1], offs[1:])]
        new_params = {**self.params, **params}
        return DomainSpec(loops[0], tuple(loops[1:]), self.family, new_params)


# ----------------------------------------------------------------------------
# validation


def _segments_intersect(p1, p2, q1, q2):
    """Vectorized proper/improper intersection test of p1p2 against q1q2 rows."""

    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (
            c[..., 0] - a[..., 0]
        )

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    proper = (d1 * d2 < 0) & (d3 * d4 < 0)

    def on_seg(a, b, c, d):
        return (
            (np.abs(d) <= 1e-14 * (1 + np.abs(a).max()))
            & (np.minimum(a[..., 0], b[..., 0]) <= c[..., 0])
            & (c[..., 0] <= np.maximum(a[..., 0], b[..., 0]))
            & (np.minimum(a[..., 1], b[..., 1]) <= c[..., 1])
            & (c[..., 1] <= np.maximum(a[..., 1], b[..., 1]))
        )

    touch = on_seg(q1, q2, p1, d1) | on_seg(q1, q2, p2, d2) | on_seg(p1, p2, q1, d3) | on_seg(p1, p2, q2, d4)
    return proper | touch


def find_intersection(points: np.ndarray, edges: np.ndarray):
    """Return the first pair of non-adjacent intersecting edges, or None.

    Sweep over edges sorted by their left x-extent; only edges whose x-ranges
    overlap are tested.
    """
    a = points[edges[:, 0]]
    b = points[edges[:, 1]]
    xmin = np.minimum(a[:, 0], b[:, 0])
    xmax = np.maximum(a[:, 0], b[:, 0])
    ymin = np.minimum(a[:, 1], b[:, 1])
    ymax = np.maximum(a[:, 1], b[:, 1])
    order = np.argsort(xmin, kind="stable")
    xs = xmin[order]
    for pos, i in enumerate(order):
        stop = np.searchsorted(xs, xmax[i], side="right")
        cand = order[pos + 1 : stop]
        if len(cand) == 0:
            continue
        cand = cand[(ymin[cand] <= ymax[i]) & (ymax[cand] >= ymin[i])]
        shared = (
            (edges[cand, 0] == edges[i, 0])
            | (edges[cand, 0] == edges[i, 1])
            | (edges[cand, 1] == edges[i, 0])
            | (edges[cand, 1] == edges[i, 1])
        )
        cand = cand[~shared]
        if len(cand) == 0:
            continue
        hit = _segments_intersect(a[i][None], b[i][None], a[cand], b[cand])
        if hit.any():
            return int(i), int(cand[np.argmax(hit)])
    return None


def _point_in_loop(pts: np.ndarray, loop: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    x0, y0 = loop[:, 0][None], loop[:, 1][None]
    x1, y1 = np.roll(loop[:, 0], -1)[None], np.roll(loop[:, 1], -1)[None]
    cond = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    return (np.count_nonzero(cond & (x < xint), axis=1) % 2) == 1


def _validate(d: DomainSpec) -> None:
    for li, loop in enumerate(d.loops):
        seg = np.roll(loop, -1, axis=0) - loop
        if np.any(np.hypot(seg[:, 0], seg[:, 1]) <= 0):
            raise GeometryError(f"loop {li} has repeated consecutive vertices")
        sa = signed_area(loop)
        if li == 0 and sa <= 0:
            raise GeometryError("outer loop must be counterclockwise")
        if li > 0 and sa >= 0:
            raise GeometryError(f"hole {li - 1} must be clockwise")
    hit = find_intersection(d.boundary_points, d.edges())
    if hit is not None:
        raise GeometryError(f"boundary edges {hit[0]} and {hit[1]} intersect", vertex=int(d.edges()[hit[0], 0]))
    for hi, hole in enumerate(d.holes):
        if not _point_in_loop(hole[:1], d.outer)[0]:
            raise GeometryError(f"hole {hi} is not inside the outer loop", vertex=int(d.loop_offsets[hi + 1]))
        for hj, other in enumerate(d.holes):
            if hj != hi and _point_in_loop(hole[:1], other)[0]:
                raise GeometryError(f"hole {hi} lies inside hole {hj}")


# ----------------------------------------------------------------------------
# measurements


def area(d: DomainSpec) -> float:
    return signed_area(d.outer) + sum(signed_area(h) for h in d.holes)


def perimeter(d: DomainSpec) -> float:
    return float(sum(np.sum(np.linalg.norm(np.roll(l, -1, axis=0) - l, axis=1)) for l in d.loops))


def diameter_pair(d: DomainSpec) -> tuple[int, int]:
    """Indices (into the outer loop) of a pair of vertices realizing the diameter."""
    from scipy.spatial import ConvexHull

    hull = ConvexHull(d.outer).vertices
    q = d.outer[hull]
    dist = np.linalg.norm(q[:, None] - q[None], axis=2)
    i, j = np.unravel_index(np.argmax(dist), dist.shape)
    return int(hull[i]), int(hull[j])


def diameter(d: DomainSpec) -> float:
    i, j = diameter_pair(d)
    return float(np.linalg.norm(d.outer[i] - d.outer[j]))


def convexity_check(d: DomainSpec) -> bool:
    if d.holes:
        return False
    p = d.outer
    e1 = np.roll(p, -1, axis=0) - p
    e2 = np.roll(e1, -1, axis=0)
    cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    scale = np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1)
    return bool(np.all(cross >= -1e-12 * scale))


def points_in_domain(d: DomainSpec, pts) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    inside = _point_in_loop(pts, d.outer)
    for h in d.holes:
        inside &= ~_point_in_loop(pts, h)
    return inside


def segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Distance from each point to the nearest of the segments ``a[i]b[i]``."""
    pts = np.atleast_2d(pts)
    out = np.empty(len(pts))
    if len(a) == 0:
        out.fill(np.inf)
        return out
    ab = b - a
    ab2 = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
    for s in range(0, len(pts), chunk):
        p = pts[s : s + chunk]
        ap = p[:, None, :] - a[None]
        t = np.clip(np.einsum("pij,ij->pi", ap, ab) / ab2, 0.0, 1.0)
        diff = ap - t[..., None] * ab[None]
        out[s : s + chunk] = np.sqrt(np.min(np.einsum("pij,pij->pi", diff, diff), axis=1))
    return out


def distance_to_boundary(d: DomainSpec, pts) -> np.ndarray:
    p = d.boundary_points
    e = d.edges()
    return segment_distance(np.atleast_2d(pts), p[e[:, 0]], p[e[:, 1]])


def inradius_domain(d: DomainSpec, pitch: float | None = None) -> float:
    """Radius of the largest inscribed disk.

    The distance function is maximized on a coarse interior grid, then locally
    re-gridded around the best candidates until the pitch is at most half the
    shortest boundary edge (or ``pitch`` if given).
    """
    target = pitch if pitch is not None else 0.5 * d.min_edge()
    lo = d.outer.min(axis=0)
    hi = d.outer.max(axis=0)
    n = 120
    step = float(np.max(hi - lo)) / n
    gx = np.arange(lo[0] + step / 2, hi[0], step)
    gy = np.arange(lo[1] + step / 2, hi[1], step)
    cand = np.array(np.meshgrid(gx, gy)).reshape(2, -1).T
    cand = cand[points_in_domain(d, cand)]
    if len(cand) == 0:
        cand = d.outer.mean(axis=0)[None]
    vals = distance_to_boundary(d, cand)
    while True:
        keep = np.argsort(vals)[::-1][:12]
        centers = cand[keep]
        best = float(vals[keep[0]])
        if step <= target:
            return best
        step_new = max(step / 5.0, target)
        offs = np.arange(-2.5 * step, 2.5 * step + 1e-15, step_new)
        local = np.array(np.meshgrid(offs, offs)).reshape(2, -1).T
        cand = (centers[:, None, :] + local[None]).reshape(-1, 2)
        cand = cand[points_in_domain(d, cand)]
        vals = distance_to_boundary(d, cand)
        step = step_new


def vertex_normals(d: DomainSpec) -> np.ndarray:
    """Outward unit normals at vertices (bisector of adjacent edge normals)."""
    out = []
    for loop in d.loops:
        nxt = np.roll(loop, -1, axis=0)
        t = nxt - loop
        t /= np.linalg.norm(t, axis=1)[:, None]
        n_edge = np.column_stack([t[:, 1], -t[:, 0]])
        n_prev = np.roll(n_edge, 1, axis=0)
        nv = n_edge + n_prev
        nv /= np.linalg.norm(nv, axis=1)[:, None]
        out.append(nv)
    return np.vstack(out)


def _miter_vectors(d: DomainSpec) -> np.ndarray:
    # Along the bisector, scaled so both adjacent edges move by exactly one unit.
    out = []
    for loop in d.loops:
        nxt = np.roll(loop, -1, axis=0)
        t = nxt - loop
        t /= np.linalg.norm(t, axis=1)[:, None]
        n_edge = np.column_stack([t[:, 1], -t[:, 0]])
        n_prev = np.roll(n_edge, 1, axis=0)
        denom = 1.0 + np.einsum("ij,ij->i", n_edge, n_prev)
        if np.any(denom < 1e-6):
            raise GeometryError("boundary has a cusp (turn angle near pi)")
        out.append((n_edge + n_prev) / denom[:, None])
    return np.vstack(out)


# ----------------------------------------------------------------------------
# constructors


def make_disk(radius: float, n: int = 256) -> DomainSpec:
    """Regular n-gon inscribed in the circle of the given radius."""
    if not radius > 0 or n < 16:
        raise InvalidParameter(f"make_disk needs radius > 0 and n >= 16 (got {radius}, {n})")
    th = 2 * np.pi * np.arange(n) / n
    pts = radius * np.column_stack([np.cos(th), np.sin(th)])
    return DomainSpec(pts, (), "disk", {"radius": float(radius), "n": int(n)})


def make_rectangle(a: float, b: float, spacing: float | None = None) -> DomainSpec:
    """Axis-aligned rectangle [0, a] x [0, b].

    With ``spacing`` the sides are subdivided into equal pieces no longer than
    ``spacing`` so that per-vertex perturbation fields can resolve them.
    """
    if not (a > 0 and b > 0):
        raise InvalidParameter(f"rectangle sides must be positive (got {a}, {b})")
    corners = np.array([[0.0, 0.0], [a, 0.0], [a, b], [0.0, b]])
    params = {"a": float(a), "b": float(b)}
    if spacing is None:
        return DomainSpec(corners, (), "rectangle", params)
    params["spacing"] = float(spacing)
    pts = []
    for k in range(4):
        p, q = corners[k], corners[(k + 1) % 4]
        m = max(1, int(math.ceil(np.linalg.norm(q - p) / spacing)))
        s = np.arange(m)[:, None] / m
        pts.append(p + s * (q - p))
    return DomainSpec(np.vstack(pts), (), "rectangle", params)


def make_narrow_convex(D: float, rho: float, n: int = 512) -> DomainSpec:
    """Ellipse with semi-axes D/2 and rho, sampled at uniform parameter angle."""
    if not (D > 0 and 0 < rho < D / 2):
        raise InvalidParameter(f"need 0 < rho < D/2 (got D={D}, rho={rho})")
    if n < 16 or n % 4:
        raise InvalidParameter("vertex count must be a multiple of 4 and >= 16")
    th = 2 * np.pi * np.arange(n) / n
    pts = np.column_stack([0.5 * D * np.cos(th), rho * np.sin(th)])
    return DomainSpec(pts, (), "narrow_convex", {"D": float(D), "rho": float(rho), "n": int(n)})


def bump_profile(q: np.ndarray) -> np.ndarray:
    """Connector flare: 1 on [-2, -1], cubic Hermite rise to 2 at q = 0."""
    q = np.asarray(q, dtype=float)
    tau = np.clip(q + 1.0, 0.0, 1.0)
    return 1.0 + tau * tau * (3.0 - 2.0 * tau)


@dataclass(frozen=True)
class DumbbellParams:
    """Two disk lobes joined along the x-axis by a flared connector.

    ``lobe1`` and ``lobe2`` are the lobe radii. Each lobe carries a flat facing
    segment of half-width ``3 * xi`` (the convex hull of the disk with the
    tangent segment); the connector has half-width ``eps`` and flares to
    ``2 * eps`` over a length ``eps`` at both mouths.
    """

    lobe1: float = 1.0
    lobe2: float = 0.8
    # just above the widest swept connector (eps = 0.2); larger flats pull the lobes away from disks
    xi: float = 0.201
    eps: float = 0.05
    connector_length: float = 2.0

    def check(self) -> None:
        a = 3 * self.xi
        if not (self.eps > 0 and self.xi > 0 and self.lobe1 > 0 and self.lobe2 > 0):
            raise InvalidParameter("dumbbell radii, xi and eps must be positive")
        if not self.eps < self.xi:
            raise InvalidParameter(f"connector half-width must satisfy 0 < eps < xi (got eps={self.eps:g}, xi={self.xi:g})")
        if not a < min(self.lobe1, self.lobe2):
            raise InvalidParameter(f"flat half-width 3*xi={a:g} exceeds a lobe radius")
        if not self.connector_length > 4 * self.eps:
            raise InvalidParameter("connector_length must exceed the two flares (4*eps)")


def _arc(center, r, a0, a1, ds):
    n = max(2, int(math.ceil(abs(a1 - a0) * r / ds)) + 1)
    th = np.linspace(a0, a1, n)
    return center + r * np.column_stack([np.cos(th), np.sin(th)])


def make_dumbbell(p: DumbbellParams, ds: float | None = None) -> DomainSpec:
    """Single simple closed curve: lobe1, lower wall, lobe2, upper wall."""
    p.check()
    eps, L = p.eps, p.connector_length
    a = 3 * p.xi
    r1, r2 = p.lobe1, p.lobe2
    if ds is None:
        ds = min(r1, r2) * 2 * np.pi / 256
    xl, xr = -L / 2, L / 2

    # lower wall, left to right; flare samples are shared by both walls
    s = np.linspace(0.0, eps, 9)
    hw = eps * bump_profile(-s / eps)
    n_mid = max(1, int(math.ceil((L - 2 * eps) / max(ds, eps / 2))))
    mid = np.linspace(xl + eps, xr - eps, n_mid + 1)[1:-1]
    xs = np.concatenate([xl + s, mid, (xr - s)[::-1]])
    ys = -np.concatenate([hw, np.full(len(mid), eps), hw[::-1]])
    lower = np.column_stack([xs, ys])
    upper = np.column_stack([xs[::-1], -ys[::-1]])

    al2 = math.atan2(a, r2)
    c2 = np.array([xr + r2, 0.0])
    arc2 = _arc(c2, r2, -np.pi + 2 * al2, np.pi - 2 * al2, ds)
    al1 = math.atan2(a, r1)
    c1 = np.array([xl - r1, 0.0])
    arc1 = _arc(c1, r1, 2 * al1, 2 * np.pi - 2 * al1, ds)

    pts = np.vstack(
        [
            lower,
            [[xr, -a]],
            arc2,
            [[xr, a]],
            upper,
            [[xl, a]],
            arc1,
            [[xl, -a]],
        ]
    )
    params = {
        "lobe1": r1,
        "lobe2": r2,
        "xi": p.xi,
        "eps": eps,
        "connector_length": L,
        "ds": float(ds),
    }
    try:
        return DomainSpec(pts, (), "dumbbell", params)
    except GeometryError as exc:
        raise GeometryError(f"dumbbell construction failed: {exc}", exc.vertex) from exc


@dataclass(frozen=True)
class HHNParams:
    """Disk of radius R1 inside an annulus out to R2, separated by a wall with N gates."""

    R1: float = 1.0
    R2: float = 2.0
    N: int = 8
    eps: float = 0.02

    def check(self) -> None:
        if not (0 < self.R1 < self.R2):
            raise InvalidParameter("need 0 < R1 < R2")
        if int(self.N) != self.N or self.N < 2:
            raise InvalidParameter("gate count N must be an integer >= 2")
        if not (0 < self.eps < np.pi / self.N):
            raise InvalidParameter(f"gate half-angle eps must lie in (0, pi/N) (got {self.eps})")


def make_hhn(p: HHNParams, wall: float | None = None, ds: float | None = None, ds_outer: float | None = None) -> DomainSpec:
    """Annulus-enclosed disk whose separating circle is opened by N gates.

    The wall is N annular sectors of thickness ``wall`` (default R1/200)
    centered on radius R1; the gaps are centered at angles 2*pi*j/N with
    angular half-width eps.
    """
    p.check()
    w = p.R1 / 200 if wall is None else float(wall)
    if not 0 < w < 0.5 * (p.R2 - p.R1):
        raise InvalidParameter("wall thickness must be positive and well inside the annulus")
    ds = p.R1 / 100 if ds is None else ds
    ds_outer = p.R2 * 2 * np.pi / 512 if ds_outer is None else ds_outer
    n_out = max(16, int(math.ceil(2 * np.pi * p.R2 / ds_outer)))
    th = 2 * np.pi * np.arange(n_out) / n_out
    outer = p.R2 * np.column_stack([np.cos(th), np.sin(th)])
    holes = []
    ri, ro = p.R1 - w / 2, p.R1 + w / 2
    for j in range(p.N):
        a0 = 2 * np.pi * j / p.N + p.eps
        a1 = 2 * np.pi * (j + 1) / p.N - p.eps
        top = _arc(np.zeros(2), ro, a1, a0, ds)
        bot = _arc(np.zeros(2), ri, a0, a1, ds)
        holes.append(np.vstack([top, bot]))
    params = {"R1": p.R1, "R2": p.R2, "N": int(p.N), "eps": p.eps, "wall": w, "ds": ds}
    return DomainSpec(outer, tuple(holes), "hhn", params)


# ----------------------------------------------------------------------------
# perturbations


@dataclass(frozen=True, eq=False)
class PerturbationField:
    """Normal speed V.eta at each boundary vertex of a domain.

    ``normal_speed`` follows the concatenated vertex numbering of
    :attr:`DomainSpec.boundary_points`. Positive values push the boundary
    outward.
    """

    normal_speed: np.ndarray
    support: np.ndarray | None = None
    lipschitz: float | None = None

    def __post_init__(self):
        v = np.asarray(self.normal_speed, dtype=float).copy()
        if not np.all(np.isfinite(v)):
            raise InvalidParameter("perturbation field has non-finite values")
        sup = np.flatnonzero(v) if self.support is None else np.asarray(self.support, dtype=int)
        outside = np.ones(len(v), dtype=bool)
        outside[sup] = False
        if np.any(v[outside] != 0):
            raise InvalidParameter("perturbation field is nonzero outside its support")
        v.setflags(write=False)
        object.__setattr__(self, "normal_speed", v)
        object.__setattr__(self, "support", sup)

    def check_against(self, d: DomainSpec) -> None:
        if len(self.normal_speed) != d.n_boundary:
            raise InvalidParameter(
                f"field has {len(self.normal_speed)} values but domain has {d.n_boundary} boundary vertices"
            )
        if self.lipschitz is not None:
            p = d.boundary_points
            e = d.edges()
            jump = np.abs(self.normal_speed[e[:, 1]] - self.normal_speed[e[:, 0]])
            length = np.linalg.norm(p[e[:, 1]] - p[e[:, 0]], axis=1)
            if np.any(jump > self.lipschitz * length * (1 + 1e-9)):
                raise InvalidParameter("perturbation field exceeds its declared Lipschitz constant")

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.normal_speed))) if len(self.normal_speed) else 0.0


def constant_field(d: DomainSpec, c: float = 1.0, loops: Sequence[int] | None = None) -> PerturbationField:
    """V.eta = c on the selected loops (all loops by default)."""
    v = np.zeros(d.n_boundary)
    which = d.loop_of_vertex()
    sel = np.ones(d.n_boundary, bool) if loops is None else np.isin(which, loops)
    v[sel] = c
    return PerturbationField(v)


def boundary_displacement(d: DomainSpec, V: PerturbationField) -> np.ndarray:
    """Vertex velocity field generated by ``V`` (unit-time displacement)."""
    V.check_against(d)
    return V.normal_speed[:, None] * _miter_vectors(d)


def apply_perturbation(d: DomainSpec, V: PerturbationField, t: float) -> DomainSpec:
    """Move every boundary vertex by ``t * V`` along its (mitered) vertex normal."""
    if t == 0:
        return d
    disp = boundary_displacement(d, V)
    new = d.boundary_points + t * disp
    try:
        return d.with_boundary(new, perturbation_t=float(t))
    except GeometryError as exc:
        vertex = exc.vertex
        if vertex is None:
            moved = np.flatnonzero(np.abs(V.normal_speed) > 0)
            vertex = int(moved[0]) if len(moved) else None
        raise GeometryError(f"perturbed boundary is not simple: {exc}", vertex) from exc


# ----------------------------------------------------------------------------
# serialization


def to_json(d: DomainSpec) -> str:
    def loop(a):
        return [[float(f"{x:.17g}"), float(f"{y:.17g}")] for x, y in a]

    payload = {"family": d.family, "params": d.params, "outer": loop(d.outer), "holes": [loop(h) for h in d.holes]}
    return json.dumps(payload)


def from_json(text: str) -> DomainSpec:
    data = json.loads(text)
    return DomainSpec(
        np.array(data["outer"], dtype=float),
        tuple(np.array(h, dtype=float) for h in data.get("holes", [])),
        data.get("family", "polygon"),
        data.get("params", {}),
    )

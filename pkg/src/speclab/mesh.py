"""Conforming triangulations of :class:`~speclab.geometry.DomainSpec` domains.

Meshing is delegated to Shewchuk's Triangle (constrained Delaunay with
Ruppert refinement) through the ``triangle`` bindings. Every mesh remembers
which input boundary segment each of its boundary vertices sits on, so
boundary fields defined on the domain polygon can be carried to the mesh and
meshes can be transported by boundary motion without remeshing.
"""
from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp
import triangle as tr

from .errors import InvalidInput, InvalidParameter, QualityWarning
from .geometry import DomainSpec, boundary_displacement

__all__ = [
    "TriMesh",
    "triangulate",
    "refine",
    "boundary_trace_weights",
    "transport",
    "harmonic_extension",
    "mesh_boundary_field",
    "min_angles",
    "euler_characteristic",
    "to_off",
    "from_off",
    "to_svg",
]

MIN_ANGLE = 20.0
SHARP_CORNER = 40.0
_EQUILATERAL = math.sqrt(3.0) / 4.0


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Triangulation with boundary bookkeeping.

    Attributes
    ----------
    vertices : (nv, 2) array
    triangles : (nt, 3) int array
        Counterclockwise index triples.
    boundary_edges : (nb, 2) int array
        Oriented with the domain on the left, so the outward normal of
        ``(a, b)`` is the tangent rotated clockwise.
    edge_normals, edge_lengths : arrays, one row per boundary edge
    is_boundary_vertex : (nv,) bool array
    vertex_segment : (nv,) int array
        Index of the domain boundary segment (of ``domain.edges()``) a boundary
        vertex lies on, ``-1`` for interior vertices.
    vertex_param : (nv,) float array
        Position along that segment in [0, 1).
    domain : DomainSpec or None
        Domain the mesh was generated from (moved along with it by
        :func:`transport`).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_normals: np.ndarray
    edge_lengths: np.ndarray
    is_boundary_vertex: np.ndarray
    vertex_segment: np.ndarray
    vertex_param: np.ndarray
    domain: DomainSpec | None = None
    n_holes: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("vertices", "triangles", "boundary_edges", "edge_normals", "edge_lengths",
                     "is_boundary_vertex", "vertex_segment", "vertex_param"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def interior(self) -> np.ndarray:
        """Indices of the free (non-boundary) vertices."""
        return np.flatnonzero(~self.is_boundary_vertex)

    @property
    def edges(self) -> np.ndarray:
        """All unique edges as sorted index pairs."""
        return _unique_edges(self.triangles)[0]

    @property
    def h_max(self) -> float:
        return float(self.edge_length_stats()[1])

    @property
    def h_min(self) -> float:
        return float(self.edge_length_stats()[0])

    @property
    def h_mean(self) -> float:
        return float(self.edge_length_stats()[2])

    def edge_length_stats(self) -> tuple[float, float, float]:
        cache = self.meta.setdefault("_cache", {})
        if "edge_stats" not in cache:
            e = self.edges
            length = np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)
            cache["edge_stats"] = (float(length.min()), float(length.max()), float(length.mean()))
        return cache["edge_stats"]

    @property
    def triangle_areas(self) -> np.ndarray:
        p = self.vertices
        t = self.triangles
        d1 = p[t[:, 1]] - p[t[:, 0]]
        d2 = p[t[:, 2]] - p[t[:, 0]]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @property
    def mesh_id(self) -> str:
        cache = self.meta.setdefault("_cache", {})
        if "id" not in cache:
            hsh = hashlib.sha1(np.ascontiguousarray(self.vertices).tobytes())
            hsh.update(np.ascontiguousarray(self.triangles).tobytes())
            cache["id"] = hsh.hexdigest()[:12]
        return cache["id"]

    def edge_triangles(self) -> np.ndarray:
        """Triangle adjacent to each boundary edge."""
        cache = self.meta.setdefault("_cache", {})
        if "edge_tri" not in cache:
            t = self.triangles
            local = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
            owner = np.tile(np.arange(len(t)), 3)
            lookup = {(int(a), int(b)): int(o) for (a, b), o in zip(local, owner)}
            cache["edge_tri"] = np.array([lookup[(int(a), int(b))] for a, b in self.boundary_edges])
        return cache["edge_tri"]

    def cached(self, key: str, build: Callable):
        """Memoize a derived quantity on this (immutable) mesh."""
        cache = self.meta.setdefault("_cache", {})
        if key not in cache:
            cache[key] = build()
        return cache[key]


def _unique_edges(triangles: np.ndarray):
    local = np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    key = np.sort(local, axis=1)
    uniq, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return uniq, local, inverse.ravel(), counts


def _interior_point(loop: np.ndarray) -> np.ndarray:
    n = len(loop)
    seg = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    t = tr.triangulate({"vertices": np.array(loop, dtype=float), "segments": seg}, "pQ")
    pts = t["vertices"][t["triangles"]]
    d1 = pts[:, 1] - pts[:, 0]
    d2 = pts[:, 2] - pts[:, 0]
    areas = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    return pts[np.argmax(areas)].mean(axis=0)


def _loop_angles(d: DomainSpec) -> np.ndarray:
    """Interior angle (degrees) of the domain at each boundary vertex."""
    out = []
    for loop in d.loops:
        prev = np.roll(loop, 1, axis=0) - loop
        nxt = np.roll(loop, -1, axis=0) - loop
        # domain on the left of travel: interior angle swept from next to prev
        ang = np.arctan2(nxt[:, 0] * prev[:, 1] - nxt[:, 1] * prev[:, 0], np.einsum("ij,ij->i", nxt, prev))
        out.append(np.degrees(np.mod(ang, 2 * np.pi)))
    return np.concatenate(out)


def min_angles(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Smallest interior angle (degrees) of each triangle."""
    p = vertices[triangles]
    res = []
    for i in range(3):
        a = p[:, (i + 1) % 3] - p[:, i]
        b = p[:, (i + 2) % 3] - p[:, i]
        cosang = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        res.append(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
    return np.min(res, axis=0)


def _build(d: DomainSpec | None, p: np.ndarray, t: np.ndarray, seg: np.ndarray, param: np.ndarray,
           meta: dict) -> TriMesh:
    uniq, local, inverse, counts = _unique_edges(t)
    bmask = counts[inverse] == 1
    bedges = local[bmask]
    tang = p[bedges[:, 1]] - p[bedges[:, 0]]
    lengths = np.linalg.norm(tang, axis=1)
    normals = np.column_stack([tang[:, 1], -tang[:, 0]]) / lengths[:, None]
    is_b = np.zeros(len(p), dtype=bool)
    is_b[bedges.ravel()] = True
    n_holes = len(d.holes) if d is not None else int(meta.get("n_holes", 0))
    return TriMesh(p, t, bedges, normals, lengths, is_b, seg, param, d, n_holes, meta)


def triangulate(
    d: DomainSpec,
    h: float,
    size_fn: Callable[[np.ndarray], np.ndarray] | None = None,
    min_angle: float = MIN_ANGLE,
    max_passes: int = 12,
) -> TriMesh:
    """Quality triangulation of ``d`` with target edge length ``h``.

    Parameters
    ----------
    d : DomainSpec
    h : float
        Target edge length; with ``size_fn`` it is the upper bound of the
        local size.
    size_fn : callable, optional
        Maps (n, 2) points to local target edge lengths; triangles are
        refined until their area is below that of the equilateral triangle
        with the local size at their centroid.
    min_angle : float
        Angle floor in degrees handed to the Ruppert refinement.

    Notes
    -----
    Input boundary segments are split only when the area or angle bound
    demands it, so ``h_max <= 1.5 h`` needs a boundary polygon sampled at
    spacing of order ``h`` or finer.

    Warns
    -----
    QualityWarning
        If a triangle away from sharp input corners violates the angle floor.
    """
    if not isinstance(d, DomainSpec):
        raise InvalidInput("triangulate expects a DomainSpec")
    if not (h > 0 and math.isfinite(h)):
        raise InvalidParameter(f"target edge length must be positive (got {h})")
    pts = d.boundary_points
    edges = d.edges()
    nb = len(pts)
    markers = np.arange(nb, dtype=np.int32) + 2
    data = {
        "vertices": pts,
        "segments": edges,
        "segment_markers": markers,
        "vertex_markers": markers,
    }
    if d.holes:
        data["holes"] = np.array([_interior_point(hl) for hl in d.holes])
    # Triangle reads the area switch as plain digits; exponent notation would split into other switches
    max_area = np.format_float_positional(_EQUILATERAL * h * h, precision=17, unique=False, trim="-")
    flags = f"pq{min_angle:g}a{max_area}Q"
    out = tr.triangulate(data, flags)
    passes = 1
    if size_fn is not None:
        for _ in range(max_passes):
            p, t = out["vertices"], out["triangles"]
            c = p[t].mean(axis=1)
            local = np.minimum(np.asarray(size_fn(c), dtype=float), h)
            target = _EQUILATERAL * local**2
            d1 = p[t[:, 1]] - p[t[:, 0]]
            d2 = p[t[:, 2]] - p[t[:, 0]]
            areas = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
            if np.all(areas <= target * (1 + 1e-9)):
                break
            out = tr.triangulate(
                {
                    "vertices": p,
                    "vertex_markers": out["vertex_markers"],
                    "segments": out["segments"],
                    "segment_markers": out["segment_markers"],
                    "triangles": t,
                    "triangle_max_area": target,
                },
                f"rpq{min_angle:g}aQ",
            )
            passes += 1
    p = np.asarray(out["vertices"], dtype=float)
    t = np.asarray(out["triangles"], dtype=np.int64)
    vm = np.asarray(out["vertex_markers"]).ravel().astype(np.int64)
    seg = np.where(vm >= 2, vm - 2, -1)
    param = np.zeros(len(p))
    on = seg >= 0
    a = pts[edges[seg[on], 0]]
    b = pts[edges[seg[on], 1]]
    ab = b - a
    param[on] = np.clip(np.einsum("ij,ij->i", p[on] - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
    param[on & (np.arange(len(p)) < nb)] = 0.0
    meta = {"h": float(h), "graded": size_fn is not None, "passes": passes, "min_angle": float(min_angle)}
    m = _build(d, p, t, seg, param, meta)
    _quality_report(m, d, min_angle)
    return m


def _quality_report(m: TriMesh, d: DomainSpec, min_angle: float) -> None:
    angles = min_angles(m.vertices, m.triangles)
    sharp = np.flatnonzero(_loop_angles(d) < SHARP_CORNER)
    exempt = np.zeros(m.n_triangles, dtype=bool)
    if len(sharp):
        # one ring around each sharp input corner
        exempt = np.isin(m.triangles, sharp).any(axis=1)
    worst = float(angles[~exempt].min()) if np.any(~exempt) else float("nan")
    m.meta["worst_angle"] = float(angles.min())
    m.meta["worst_angle_unexempt"] = worst
    if worst < min_angle - 1e-6:
        warnings.warn(QualityWarning(f"mesh angle floor violated: worst angle {worst:.3f} deg", worst), stacklevel=3)


def refine(m: TriMesh) -> TriMesh:
    """Uniform red refinement: every triangle split into four."""
    uniq, local, inverse, _ = _unique_edges(m.triangles)
    nv = m.n_vertices
    mid = 0.5 * (m.vertices[uniq[:, 0]] + m.vertices[uniq[:, 1]])
    p = np.vstack([m.vertices, mid])
    nt = m.n_triangles
    e01 = nv + inverse[:nt]
    e12 = nv + inverse[nt : 2 * nt]
    e20 = nv + inverse[2 * nt :]
    a, b, c = m.triangles.T
    t = np.vstack(
        [
            np.column_stack([a, e01, e20]),
            np.column_stack([e01, b, e12]),
            np.column_stack([e20, e12, c]),
            np.column_stack([e01, e12, e20]),
        ]
    )
    # new boundary vertices inherit the segment of their parent edge
    seg = np.concatenate([m.vertex_segment, np.full(len(uniq), -1)])
    param = np.concatenate([m.vertex_param, np.zeros(len(uniq))])
    key = {tuple(sorted((int(x), int(y)))): i for i, (x, y) in enumerate(uniq)}
    for x, y in m.boundary_edges:
        k = key[tuple(sorted((int(x), int(y))))]
        sx, sy = m.vertex_segment[x], m.vertex_segment[y]
        px, py = m.vertex_param[x], m.vertex_param[y]
        # edges follow the loop direction; y is either on x's segment or starts the next one
        s, q = sx, (0.5 * (px + py) if sx == sy else 0.5 * (px + 1.0))
        seg[nv + k] = s
        param[nv + k] = q
    meta = {k: v for k, v in m.meta.items() if k != "_cache"}
    meta["refined"] = int(meta.get("refined", 0)) + 1
    meta["n_holes"] = m.n_holes
    return _build(m.domain, p, t.astype(np.int64), seg, param, meta)


def boundary_trace_weights(m: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Per boundary edge quadrature weight (length) and outward unit normal."""
    return m.edge_lengths.copy(), m.edge_normals.copy()


def mesh_boundary_field(m: TriMesh, values: np.ndarray) -> np.ndarray:
    """Interpolate per-domain-vertex values (scalars or rows) to the mesh boundary vertices.

    Interior rows are zero.
    """
    if m.domain is None:
        raise InvalidInput("mesh has no domain to interpolate from")
    values = np.asarray(values, dtype=float)
    edges = m.domain.edges()
    out = np.zeros((m.n_vertices,) + values.shape[1:])
    on = m.vertex_segment >= 0
    s = m.vertex_segment[on]
    q = m.vertex_param[on]
    q = q.reshape((-1,) + (1,) * (values.ndim - 1))
    out[on] = (1 - q) * values[edges[s, 0]] + q * values[edges[s, 1]]
    return out


def harmonic_extension(m: TriMesh, boundary_values: np.ndarray) -> np.ndarray:
    """Discrete harmonic extension of boundary data (columns extended independently)."""
    from .eigensolve import assemble_full

    K, _ = assemble_full(m)
    K = K.tocsr()
    free = m.interior
    fixed = np.flatnonzero(m.is_boundary_vertex)
    ub = np.asarray(boundary_values, dtype=float)
    out = ub.copy()
    if len(free) == 0:
        return out
    rhs = -(K[free][:, fixed] @ ub[fixed])
    lu = m.cached("Kii_lu", lambda: sp.linalg.splu(K[free][:, free].tocsc()))
    out[free] = lu.solve(np.asarray(rhs))
    return out


def transport(m: TriMesh, V, t: float) -> TriMesh:
    """Move ``m`` with the boundary perturbation ``t * V``, keeping its topology.

    Boundary vertices follow the (interpolated) vertex displacement of the
    domain polygon; interior vertices follow its harmonic extension.
    """
    if m.domain is None:
        raise InvalidInput("transport needs a mesh generated from a DomainSpec")
    from .geometry import apply_perturbation

    if t == 0:
        return m
    new_domain = apply_perturbation(m.domain, V, t)
    disp_b = mesh_boundary_field(m, t * boundary_displacement(m.domain, V))
    disp = harmonic_extension(m, disp_b)
    p = m.vertices + disp
    areas = _signed_areas(p, m.triangles)
    if np.any(areas <= 0):
        raise InvalidInput(f"transported mesh inverts {int(np.sum(areas <= 0))} triangles; reduce t")
    meta = {k: v for k, v in m.meta.items() if k != "_cache"}
    meta["transported_t"] = float(t)
    return TriMesh(
        p, m.triangles, m.boundary_edges, *_edge_geometry(p, m.boundary_edges), m.is_boundary_vertex,
        m.vertex_segment, m.vertex_param, new_domain, m.n_holes, meta,
    )


def _signed_areas(p, t):
    d1 = p[t[:, 1]] - p[t[:, 0]]
    d2 = p[t[:, 2]] - p[t[:, 0]]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _edge_geometry(p, bedges):
    tang = p[bedges[:, 1]] - p[bedges[:, 0]]
    lengths = np.linalg.norm(tang, axis=1)
    return np.column_stack([tang[:, 1], -tang[:, 0]]) / lengths[:, None], lengths


def euler_characteristic(m: TriMesh) -> int:
    """V - E + F with the outer face counted (equals 2 - holes for a valid mesh)."""
    return m.n_vertices - len(m.edges) + m.n_triangles + 1


# ----------------------------------------------------------------------------
# text and SVG output


def to_off(m: TriMesh) -> str:
    lines = ["OFF", f"{m.n_vertices} {m.n_triangles} {len(m.edges)}"]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in m.vertices]
    lines += [f"3 {a} {b} {c}" for a, b, c in m.triangles]
    return "\n".join(lines) + "\n"


def from_off(text: str) -> TriMesh:
    """Read a mesh written by :func:`to_off` (boundary provenance is lost)."""
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if rows[0][0] != "OFF":
        raise InvalidInput("not an OFF file")
    nv, nt = int(rows[1][0]), int(rows[1][1])
    p = np.array([[float(r[0]), float(r[1])] for r in rows[2 : 2 + nv]])
    t = np.array([[int(r[1]), int(r[2]), int(r[3])] for r in rows[2 + nv : 2 + nv + nt]], dtype=np.int64)
    m0 = _build(None, p, t, np.full(nv, -1), np.zeros(nv), {})
    holes = 2 - (nv - len(m0.edges) + nt + 1)
    return replace(m0, n_holes=holes, meta={})


def svg_frame(points: np.ndarray, width: int = 640, pad: float = 0.03):
    """Return (transform, width, height) mapping domain points to SVG pixels."""
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = hi - lo
    size = float(span.max()) * (1 + 2 * pad)
    scale = width / size
    height = int(math.ceil((span[1] + 2 * pad * size) * scale))
    off = lo - pad * size

    def f(q):
        q = np.asarray(q, dtype=float)
        x = (q[..., 0] - off[0]) * scale
        y = height - (q[..., 1] - off[1]) * scale
        return np.stack([x, y], axis=-1)

    return f, width, height


def svg_edges(m: TriMesh, f, stroke: str = "#cccccc", width: float = 0.4) -> list[str]:
    e = f(m.vertices[m.edges])
    path = " ".join(f"M{a[0]:.2f} {a[1]:.2f}L{b[0]:.2f} {b[1]:.2f}" for a, b in e)
    return [f'<path d="{path}" stroke="{stroke}" stroke-width="{width}" fill="none"/>']


def to_svg(m: TriMesh, width: int = 640) -> str:
    """Mesh edges in light gray with the boundary in black."""
    f, w, h = svg_frame(m.vertices, width)
    body = svg_edges(m, f)
    b = f(m.vertices[m.boundary_edges])
    path = " ".join(f"M{a[0]:.2f} {a[1]:.2f}L{c[0]:.2f} {c[1]:.2f}" for a, c in b)
    body.append(f'<path d="{path}" stroke="black" stroke-width="1" fill="none"/>')
    return _svg_doc(w, h, body)


def _svg_doc(w: int, h: int, body: list[str]) -> str:
    head = f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">'
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *body, "</svg>"]) + "\n"

"""Zero sets of P1 eigenfunctions and the geometry measured on them.

The nodal set of a vertex vector is the zero set of its piecewise-linear
interpolant: one segment per triangle whose vertex values change sign.
Vertex values below ``theta * max|v|`` are snapped to zero first, so zero
vertices are handled exactly. From the segments we build nodal domains,
boundary junctions with fitted ray directions, interior crossings, and the
boundary normal derivative used for the Payne classification.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .eigensolve import p1_gradients
from .errors import InvalidInput, InvalidParameter
from .geometry import segment_distance
from .mesh import TriMesh, _loop_angles, _svg_doc, _unique_edges, svg_edges, svg_frame

__all__ = [
    "NodalSet",
    "Junction",
    "Crossing",
    "NodalDomains",
    "BoundaryTrace",
    "PayneVerdict",
    "JunctionFit",
    "extract_nodal_set",
    "count_nodal_domains",
    "inradius_nodal",
    "wavelength_density_check",
    "boundary_neumann_trace",
    "classify_payne",
    "junction_angles",
    "crossing_angles",
    "angle_quantization_check",
    "angle_set",
    "nodal_hausdorff",
    "nodal_svg",
    "segments_csv",
]

SNAP_THETA = 1e-9
PAYNE_BAND = 1e-4
CORNER_TOL = 20.0


def _snap(v: np.ndarray, theta: float) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    vmax = float(np.max(np.abs(v)))
    if vmax == 0 or not np.isfinite(vmax):
        raise InvalidInput("eigenvector is identically zero (or not finite)")
    out = v.copy()
    out[np.abs(out) <= theta * vmax] = 0.0
    return out


@dataclass(frozen=True)
class Junction:
    """Point where the nodal set meets the boundary.

    ``vertices`` lists the boundary mesh vertices where nodal polylines end;
    nearby endpoints (within two mesh sizes) are merged into one junction.
    """

    point: np.ndarray
    vertices: tuple
    components: tuple


@dataclass(frozen=True)
class Crossing:
    """Interior point where several nodal branches meet."""

    point: np.ndarray
    directions: np.ndarray
    angles: np.ndarray
    fit_residual: float


@dataclass(frozen=True, eq=False)
class NodalSet:
    """Piecewise-linear nodal set.

    Attributes
    ----------
    segments : (s, 2, 2) array
        Zero-level segments, one per cut triangle.
    segment_triangles : (s,) int array
    segment_nodes : (s, 2) int array
        Endpoint ids into ``nodes``; endpoints on a shared mesh edge (or at a
        zero vertex) get the same id, so the polyline is conforming.
    nodes : (n, 2) array
    node_vertex : (n,) int array
        Mesh vertex of a node sitting at a zero vertex, else -1.
    components : (s,) int array
        Connected-component label of each segment.
    junctions : list of Junction
    interior_crossings : list of Crossing
    degenerate_triangles : int array
        Triangles whose three vertices were snapped to zero (including the
        collapsed saddle triangles, whose edges are kept as nodal segments).
    """

    segments: np.ndarray
    segment_triangles: np.ndarray
    segment_nodes: np.ndarray
    nodes: np.ndarray
    node_vertex: np.ndarray
    components: np.ndarray
    junctions: list
    interior_crossings: list
    degenerate_triangles: np.ndarray
    mesh_id: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def n_components(self) -> int:
        return int(self.components.max() + 1) if len(self.components) else 0

    @property
    def is_empty(self) -> bool:
        return len(self.segments) == 0

    def sample_points(self, spacing: float) -> np.ndarray:
        """Points along the segments at roughly the given spacing."""
        if self.is_empty:
            return np.zeros((0, 2))
        a, b = self.segments[:, 0], self.segments[:, 1]
        length = np.linalg.norm(b - a, axis=1)
        out = [a, b]
        reps = np.maximum(1, np.ceil(length / spacing).astype(int))
        for r in np.unique(reps):
            if r <= 1:
                continue
            sel = reps == r
            for j in range(1, r):
                out.append(a[sel] + (j / r) * (b[sel] - a[sel]))
        return np.vstack(out)


def _mesh_size(m: TriMesh) -> float:
    return float(m.meta.get("h", m.h_mean))


def _polyline(m: TriMesh, vs: np.ndarray, collapsed=()):
    """Segments of the zero set of the (snapped) P1 interpolant.

    Returns nodes, node_vertex, seg_nodes and seg_tris. ``collapsed``
    triangles (all-zero saddle triangles) contribute their three edges.
    """
    p = m.vertices
    t = m.triangles
    s = np.sign(vs[t]).astype(int)
    nz = np.sum(s == 0, axis=1)
    has_pos = np.any(s > 0, axis=1)
    has_neg = np.any(s < 0, axis=1)

    node_index: dict = {}
    nodes: list = []
    node_vertex: list = []

    def edge_node(a, b):
        key = ("e", min(a, b), max(a, b))
        if key not in node_index:
            wa = vs[a] / (vs[a] - vs[b])
            node_index[key] = len(nodes)
            nodes.append(p[a] + wa * (p[b] - p[a]))
            node_vertex.append(-1)
        return node_index[key]

    def vertex_node(a):
        key = ("v", a)
        if key not in node_index:
            node_index[key] = len(nodes)
            nodes.append(p[a].copy())
            node_vertex.append(a)
        return node_index[key]

    seg_nodes = []
    seg_tris = []
    zero_edges_done = set()
    cut = np.flatnonzero((has_pos & has_neg) | (nz == 2))
    edge_owner: dict = {}
    if np.any(nz == 2):
        for o, tri in enumerate(t):
            for i in range(3):
                a, b = int(tri[i]), int(tri[(i + 1) % 3])
                edge_owner.setdefault((min(a, b), max(a, b)), []).append(o)
    for ti in cut:
        tri = [int(q) for q in t[ti]]
        sg = s[ti]
        if nz[ti] == 0:
            ends = [edge_node(tri[i], tri[(i + 1) % 3]) for i in range(3) if sg[i] * sg[(i + 1) % 3] < 0]
        elif nz[ti] == 1:
            z = int(np.flatnonzero(sg == 0)[0])
            if sg[(z + 1) % 3] * sg[(z + 2) % 3] >= 0:
                continue
            ends = [vertex_node(tri[z]), edge_node(tri[(z + 1) % 3], tri[(z + 2) % 3])]
        else:
            c = int(np.flatnonzero(sg != 0)[0])
            if sg[c] < 0:
                continue
            a, b = tri[(c + 1) % 3], tri[(c + 2) % 3]
            key = (min(a, b), max(a, b))
            # a zero edge is nodal only if the triangle across it is negative
            others = [o for o in edge_owner.get(key, []) if o != ti]
            if key in zero_edges_done or not others:
                continue
            third = [x for x in t[others[0]] if x not in key]
            if vs[third[0]] >= 0:
                continue
            zero_edges_done.add(key)
            ends = [vertex_node(a), vertex_node(b)]
        if len(ends) == 2 and ends[0] != ends[1]:
            seg_nodes.append(ends)
            seg_tris.append(int(ti))
    for ti in collapsed:
        a, b, c = (int(q) for q in t[ti])
        for x, y in ((a, b), (b, c), (c, a)):
            seg_nodes.append([vertex_node(x), vertex_node(y)])
            seg_tris.append(int(ti))
    return (
        np.array(nodes).reshape(-1, 2),
        np.array(node_vertex, dtype=np.int64),
        np.array(seg_nodes, dtype=np.int64).reshape(-1, 2),
        np.array(seg_tris, dtype=np.int64),
    )


def _locate(m: TriMesh, pts: np.ndarray) -> np.ndarray:
    """Triangle containing each point (nearest-centroid candidates, barycentric test)."""
    tree = m.cached("centroid_tree", lambda: cKDTree(m.centroids))
    k = min(12, m.n_triangles)
    _, cand = tree.query(pts, k=k)
    out = np.full(len(pts), -1, dtype=np.int64)
    P = m.vertices
    for i, (q, cs) in enumerate(zip(pts, np.atleast_2d(cand))):
        for c in cs:
            a, b, d = P[m.triangles[c]]
            T = np.column_stack([b - a, d - a])
            lam = np.linalg.solve(T, q - a)
            if lam.min() >= -1e-12 and lam.sum() <= 1 + 1e-12:
                out[i] = c
                break
        if out[i] < 0:
            out[i] = cs[0]
    return out


def _saddle_triangles(m: TriMesh, vs: np.ndarray) -> list[int]:
    """Triangles holding a crossing of nodal lines.

    The P1 interpolant of a function with a nodal crossing generically shows
    an avoided crossing instead: two polyline branches pass within about
    one mesh size of each other while being far apart along the polyline.
    Such close approaches away from the boundary are clustered; each cluster
    yields the triangle at the midpoint of its closest pair.
    """
    nodes, node_vertex, seg_nodes, _ = _polyline(m, vs)
    if len(seg_nodes) == 0:
        return []
    h = _mesh_size(m)
    tree = cKDTree(nodes)
    pairs = tree.query_pairs(1.5 * h, output_type="ndarray")
    if len(pairs) == 0:
        return []
    n = len(nodes)
    adj = sp.coo_matrix((np.ones(len(seg_nodes)), (seg_nodes[:, 0], seg_nodes[:, 1])), shape=(n, n)).tocsr()
    adj = ((adj + adj.T) > 0).astype(np.int8).tocsr()
    depth = 8
    # nodes reachable within `depth` polyline steps
    reach = sp.identity(n, dtype=np.int8, format="csr")
    step = reach
    for _ in range(depth):
        step = (step @ adj > 0).astype(np.int8)
        reach = ((reach + step) > 0).astype(np.int8)
    far = np.asarray(reach[pairs[:, 0], pairs[:, 1]]).ravel() == 0
    pairs = pairs[far]
    if len(pairs) == 0:
        return []
    mid = 0.5 * (nodes[pairs[:, 0]] + nodes[pairs[:, 1]])
    be = m.boundary_edges
    dist_b = segment_distance(mid, m.vertices[be[:, 0]], m.vertices[be[:, 1]])
    keep = dist_b > 2 * h
    pairs, mid = pairs[keep], mid[keep]
    if len(pairs) == 0:
        return []
    gap = np.linalg.norm(nodes[pairs[:, 0]] - nodes[pairs[:, 1]], axis=1)
    ptree = cKDTree(mid)
    cp = ptree.query_pairs(3 * h, output_type="ndarray")
    g = sp.coo_matrix((np.ones(len(cp)), (cp[:, 0], cp[:, 1])) if len(cp) else ([], ([], [])),
                      shape=(len(mid), len(mid)))
    _, lab = connected_components(g, directed=False)
    centers = np.array([mid[lab == k][np.argmin(gap[lab == k])] for k in np.unique(lab)])
    tris = _locate(m, centers)
    return sorted({int(x) for x in tris if not np.any(m.is_boundary_vertex[m.triangles[x]])})


def _prepare(m: TriMesh, v: np.ndarray, theta: float):
    """Snap small values, then collapse each saddle triangle to zero.

    Zeroing the triangle that contains a crossing (values there are second
    order in the mesh size) restores the crossing topology that the plain
    P1 interpolant loses.
    """
    vs = _snap(v, theta)
    if vs.shape[0] != m.n_vertices:
        raise InvalidInput("vector length does not match the mesh")
    saddles = _saddle_triangles(m, vs)
    if saddles:
        vs[m.triangles[saddles].ravel()] = 0.0
    return vs, saddles


def extract_nodal_set(m: TriMesh, v: np.ndarray, theta: float = SNAP_THETA, r_fit: float | None = None) -> NodalSet:
    """Zero set of the P1 interpolant of ``v``.

    Parameters
    ----------
    m : TriMesh
    v : (nv,) array
        Vertex values, zero on the boundary.
    theta : float
        Relative snapping threshold.
    r_fit : float, optional
        Radius for the ray fits at interior crossings (default six mesh sizes).
    """
    vs, saddles = _prepare(m, v, theta)
    nodes_arr, node_vertex_arr, seg_nodes_arr, seg_tris = _polyline(m, vs, saddles)
    degenerate = np.flatnonzero(np.all(vs[m.triangles] == 0, axis=1))
    segments = nodes_arr[seg_nodes_arr] if len(seg_nodes_arr) else np.zeros((0, 2, 2))
    if len(seg_nodes_arr):
        g = sp.coo_matrix(
            (np.ones(len(seg_nodes_arr)), (seg_nodes_arr[:, 0], seg_nodes_arr[:, 1])),
            shape=(len(nodes_arr), len(nodes_arr)),
        )
        _, node_lab = connected_components(g, directed=False)
        _, comp = np.unique(node_lab[seg_nodes_arr[:, 0]], return_inverse=True)
    else:
        node_lab = np.zeros(len(nodes_arr), dtype=int)
        comp = np.zeros(0, dtype=int)

    h = _mesh_size(m)
    junctions = _find_junctions(m, nodes_arr, node_vertex_arr, seg_nodes_arr, node_lab, comp, h)
    ns = NodalSet(
        segments,
        seg_tris,
        seg_nodes_arr,
        nodes_arr,
        node_vertex_arr,
        np.asarray(comp, dtype=np.int64),
        junctions,
        [],
        degenerate,
        m.mesh_id,
        {"theta": theta, "h": h, "saddles": saddles},
    )
    crossings = _find_crossings(m, ns, saddles, r_fit if r_fit is not None else 6 * h)
    object.__setattr__(ns, "interior_crossings", crossings)
    return ns


def _find_junctions(m, nodes, node_vertex, seg_nodes, node_lab, comp, h) -> list:
    if len(seg_nodes) == 0:
        return []
    used = np.unique(seg_nodes.ravel())
    bnodes = [int(n) for n in used if node_vertex[n] >= 0 and m.is_boundary_vertex[node_vertex[n]]]
    if not bnodes:
        return []
    pts = nodes[bnodes]
    # merge endpoints closer than two mesh sizes
    tree = cKDTree(pts)
    pairs = tree.query_pairs(2.0 * h, output_type="ndarray")
    g = sp.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])) if len(pairs) else ([], ([], [])),
                      shape=(len(bnodes), len(bnodes)))
    _, lab = connected_components(g, directed=False)
    node_comp = {}
    for sidx, (a, b) in enumerate(seg_nodes):
        node_comp.setdefault(int(a), set()).add(int(comp[sidx]))
        node_comp.setdefault(int(b), set()).add(int(comp[sidx]))
    out = []
    for g_id in np.unique(lab):
        members = [bnodes[i] for i in np.flatnonzero(lab == g_id)]
        comps = sorted(set().union(*(node_comp[n] for n in members)))
        out.append(
            Junction(
                nodes[members].mean(axis=0),
                tuple(int(node_vertex[n]) for n in members),
                tuple(comps),
            )
        )
    out.sort(key=lambda j: (j.point[0], j.point[1]))
    return out


def _tls_line(pts: np.ndarray):
    c = pts.mean(axis=0)
    X = pts - c
    w, U = np.linalg.eigh(X.T @ X)
    resid = math.sqrt(max(w[0], 0.0) / max(w.sum(), 1e-300))
    return c, U[:, 1], resid


def _ray_groups(pts: np.ndarray, center: np.ndarray, gap: float = 0.4):
    d = pts - center
    th = np.mod(np.arctan2(d[:, 1], d[:, 0]), 2 * np.pi)
    order = np.argsort(th)
    ths = th[order]
    gaps = np.diff(np.concatenate([ths, [ths[0] + 2 * np.pi]]))
    cuts = np.flatnonzero(gaps > gap)
    if len(cuts) == 0:
        return [order]
    groups = []
    for a, b in zip(cuts, np.roll(cuts, -1)):
        if b > a:
            idx = order[a + 1 : b + 1]
        else:
            idx = np.concatenate([order[a + 1 :], order[: b + 1]])
        groups.append(idx)
    return groups


def crossing_angles(ns: NodalSet, center: np.ndarray, r_fit: float, refine_center: bool = True) -> Crossing:
    """Fit the nodal rays leaving a small disk around ``center``.

    Nodal points in the annulus ``r_fit/2 <= |x - center| <= r_fit`` are split
    into angular groups, one straight ray is fitted per group (total least
    squares), and the center is moved to the least-squares intersection of
    the fitted lines.
    """
    pts_all = ns.sample_points(r_fit / 12)
    c = np.asarray(center, dtype=float)
    for _ in range(3 if refine_center else 1):
        r = np.linalg.norm(pts_all - c, axis=1)
        pts = pts_all[(r >= 0.5 * r_fit) & (r <= r_fit)]
        if len(pts) < 4:
            return Crossing(c, np.zeros((0, 2)), np.zeros(0), float("nan"))
        groups = [g for g in _ray_groups(pts, c) if len(g) >= 2]
        lines = [_tls_line(pts[g]) for g in groups]
        if refine_center and len(lines) >= 2:
            A = np.zeros((2, 2))
            b = np.zeros(2)
            for q, u, _ in lines:
                P = np.eye(2) - np.outer(u, u)
                A += P
                b += P @ q
            c_new = np.linalg.solve(A, b)
            if np.linalg.norm(c_new - c) < 0.5 * r_fit:
                c = c_new
    dirs = []
    resid = 0.0
    for q, u, rr in lines:
        if np.dot(q - c, u) < 0:
            u = -u
        dirs.append(u)
        resid = max(resid, rr)
    dirs = np.array(dirs)
    th = np.mod(np.arctan2(dirs[:, 1], dirs[:, 0]), 2 * np.pi)
    order = np.argsort(th)
    dirs = dirs[order]
    th = th[order]
    spacing = np.diff(np.concatenate([th, [th[0] + 2 * np.pi]]))
    return Crossing(c, dirs, spacing, resid)


def _find_crossings(m: TriMesh, ns: NodalSet, saddles: list, r_fit: float) -> list:
    seeds = [m.centroids[i] for i in saddles]
    if not ns.is_empty:
        deg = np.bincount(ns.segment_nodes.ravel(), minlength=len(ns.nodes))
        in_saddle = set(np.unique(m.triangles[saddles].ravel()).tolist()) if saddles else set()
        for n in np.flatnonzero(deg >= 3):
            vx = int(ns.node_vertex[n])
            if vx >= 0 and (m.is_boundary_vertex[vx] or vx in in_saddle):
                continue
            seeds.append(ns.nodes[n])
    if not seeds:
        return []
    seeds = np.array(seeds)
    pairs = cKDTree(seeds).query_pairs(3 * ns.meta["h"], output_type="ndarray")
    g = sp.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])) if len(pairs) else ([], ([], [])),
                      shape=(len(seeds), len(seeds)))
    _, lab = connected_components(g, directed=False)
    out = []
    be = m.boundary_edges
    for k in np.unique(lab):
        center = seeds[lab == k][0]
        dist_b = segment_distance(center[None], m.vertices[be[:, 0]], m.vertices[be[:, 1]])
        if dist_b[0] <= r_fit:
            continue
        cr = crossing_angles(ns, center, r_fit)
        if len(cr.directions) >= 4:
            out.append(cr)
    out.sort(key=lambda c: (c.point[0], c.point[1]))
    return out


# ----------------------------------------------------------------------------
# nodal domains


@dataclass(frozen=True, eq=False)
class NodalDomains:
    """Sign components of the P1 interpolant.

    Attributes
    ----------
    count : int
    piece_labels : (nt, 2) int array
        Label of the positive (column 0) and negative (column 1) piece of
        each triangle, -1 where the piece is empty.
    triangle_labels : (nt,) int array
        Label of the larger piece of each triangle (-1 for degenerate ones).
    signs : (count,) int array
    areas : (count,) array
    """

    count: int
    piece_labels: np.ndarray
    triangle_labels: np.ndarray
    signs: np.ndarray
    areas: np.ndarray


def _positive_fraction(vals: np.ndarray) -> np.ndarray:
    """Area fraction of {f > 0} for the linear f with the given vertex values."""
    v = np.sort(vals, axis=1)
    a, b, c = v[:, 0], v[:, 1], v[:, 2]
    frac = np.zeros(len(v))
    allpos = a >= 0
    frac[allpos] = 1.0
    one = (c > 0) & (b <= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac[one] = c[one] ** 2 / ((c[one] - a[one]) * (c[one] - b[one]))
        two = (b > 0) & (a < 0)
        frac[two] = 1.0 - a[two] ** 2 / ((c[two] - a[two]) * (b[two] - a[two]))
    frac[(c <= 0)] = 0.0
    frac[allpos & (c == 0)] = 0.0
    return np.clip(frac, 0.0, 1.0)


def count_nodal_domains(m: TriMesh, v: np.ndarray, theta: float = SNAP_THETA) -> NodalDomains:
    """Connected components of {v > 0} and {v < 0} for the P1 interpolant.

    Each triangle holds at most one positive and one negative piece (the
    interpolant is linear); pieces of neighboring triangles are joined when
    the shared edge carries a vertex of that sign. Components come from a
    sparse connected-components pass over the piece graph.
    """
    vs, _ = _prepare(m, v, theta)
    t = m.triangles
    nt = len(t)
    vals = vs[t]
    has = np.column_stack([np.any(vals > 0, axis=1), np.any(vals < 0, axis=1)])
    uniq, local, inverse, counts = _unique_edges(t)
    owner = np.tile(np.arange(nt), 3)
    order = np.argsort(inverse, kind="stable")
    inv_sorted = inverse[order]
    shared = np.flatnonzero(np.diff(inv_sorted) == 0)
    t1 = owner[order[shared]]
    t2 = owner[order[shared + 1]]
    e = uniq[inv_sorted[shared]]
    rows, cols = [], []
    for col, sgn in ((0, 1.0), (1, -1.0)):
        ok = np.any(sgn * vs[e] > 0, axis=1)
        rows.append(2 * t1[ok] + col)
        cols.append(2 * t2[ok] + col)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    g = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(2 * nt, 2 * nt))
    _, lab = connected_components(g, directed=False)
    present = has.ravel()
    _, relabeled = np.unique(lab[present], return_inverse=True)
    piece = np.full(2 * nt, -1, dtype=np.int64)
    piece[present] = relabeled
    piece = piece.reshape(nt, 2)
    count = int(relabeled.max() + 1) if len(relabeled) else 0
    frac_pos = _positive_fraction(vals)
    frac_neg = _positive_fraction(-vals)
    area = m.triangle_areas
    areas = np.zeros(count)
    signs = np.zeros(count, dtype=np.int64)
    for col, frac, sgn in ((0, frac_pos, 1), (1, frac_neg, -1)):
        ok = piece[:, col] >= 0
        np.add.at(areas, piece[ok, col], frac[ok] * area[ok])
        signs[piece[ok, col]] = sgn
    tri_lab = np.where(frac_pos >= frac_neg, piece[:, 0], piece[:, 1])
    tri_lab = np.where(tri_lab < 0, np.maximum(piece[:, 0], piece[:, 1]), tri_lab)
    return NodalDomains(count, piece, tri_lab, signs, areas)


def _farthest_from_segments(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[float, int]:
    """Exact ``max_i min_j dist(pts_i, segment_j)`` and its argmax.

    Segments are sampled for a KD-tree screen; sampled distances exceed the
    exact ones by at most half the sample spacing, so only points within
    that slack of the screened maximum need the exact evaluation.
    """
    if len(pts) == 0:
        raise InvalidInput("no points")
    L = np.linalg.norm(b - a, axis=1)
    s = max(float(np.median(L)) / 4, 1e-12)
    n = np.maximum(1, np.ceil(L / s).astype(int))
    seg = np.repeat(np.arange(len(a)), n + 1)
    q = np.concatenate([np.linspace(0.0, 1.0, k + 1) for k in n])
    samples = a[seg] + q[:, None] * (b - a)[seg]
    slack = 0.5 * float(np.max(L / n))
    approx = cKDTree(samples).query(pts)[0]
    cand = np.flatnonzero(approx >= approx.max() - slack)
    exact = segment_distance(pts[cand], a, b)
    i = int(np.argmax(exact))
    return float(exact[i]), int(cand[i])


def inradius_nodal(m: TriMesh, v: np.ndarray, label: int, domains: NodalDomains | None = None,
                   ns: NodalSet | None = None) -> float:
    """Largest distance from a vertex of nodal domain ``label`` to the nodal set or boundary."""
    vs, _ = _prepare(m, v, SNAP_THETA)
    domains = domains or count_nodal_domains(m, v)
    if not (0 <= label < domains.count):
        raise InvalidInput(f"nodal domain label {label} does not exist (count {domains.count})")
    ns = ns or extract_nodal_set(m, v)
    sgn = domains.signs[label]
    col = 0 if sgn > 0 else 1
    tris = np.flatnonzero(domains.piece_labels[:, col] == label)
    cand = np.unique(m.triangles[tris].ravel())
    cand = cand[sgn * vs[cand] > 0]
    if len(cand) == 0:
        raise InvalidInput(f"nodal domain {label} has no vertex strictly inside it")
    a = np.vstack([m.vertices[m.boundary_edges[:, 0]], ns.segments[:, 0] if not ns.is_empty else np.zeros((0, 2))])
    b = np.vstack([m.vertices[m.boundary_edges[:, 1]], ns.segments[:, 1] if not ns.is_empty else np.zeros((0, 2))])
    return _farthest_from_segments(m.vertices[cand], a, b)[0]


@dataclass(frozen=True)
class WavelengthReport:
    max_empty_radius: float
    scaled: float
    C: float
    passed: bool
    center: np.ndarray
    skipped: bool = False


def wavelength_density_check(m: TriMesh, v: np.ndarray, lam: float, C: float = 2.5,
                             ns: NodalSet | None = None) -> WavelengthReport:
    """Largest disk inside the domain that avoids the nodal set.

    Distances to (nodal set together with the boundary) are sampled at the
    vertices, edge midpoints and centroids; the report gives the largest one,
    its scaled value ``r * sqrt(lam)``, and whether that stays below ``C``.
    A vector without nodal set (a first eigenfunction) is skipped.
    """
    ns = ns or extract_nodal_set(m, v)
    if ns.is_empty:
        return WavelengthReport(float("nan"), float("nan"), C, True, np.full(2, np.nan), True)
    e = m.edges
    samples = np.vstack([m.vertices, 0.5 * (m.vertices[e[:, 0]] + m.vertices[e[:, 1]]), m.centroids])
    a = np.vstack([m.vertices[m.boundary_edges[:, 0]], ns.segments[:, 0]])
    b = np.vstack([m.vertices[m.boundary_edges[:, 1]], ns.segments[:, 1]])
    r, i = _farthest_from_segments(samples, a, b)
    scaled = r * math.sqrt(lam)
    return WavelengthReport(r, scaled, C, scaled <= C, samples[i])


def nodal_hausdorff(a: NodalSet, b: NodalSet, spacing: float) -> float:
    """Symmetric Hausdorff distance between two nodal sets (sampled)."""
    pa, pb = a.sample_points(spacing), b.sample_points(spacing)
    if len(pa) == 0 or len(pb) == 0:
        return 0.0 if len(pa) == len(pb) else float("inf")
    return float(max(cKDTree(pb).query(pa)[0].max(), cKDTree(pa).query(pb)[0].max()))


# ----------------------------------------------------------------------------
# boundary trace and Payne classification


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """Outward normal derivative on each boundary edge, ordered along the loops.

    Attributes
    ----------
    values : (nb,) array
        Normal derivative per edge, in the order of ``edges``.
    edges : (nb, 2) int array
        Mesh boundary edges, each loop traversed with the domain on the left.
    loop : (nb,) int array
        Loop id (0 is the loop with the largest extent).
    arc : (nb,) array
        Arc-length position of the edge midpoint from the start of its loop.
    lengths, midpoints, normals : arrays
    loop_lengths : (nloops,) array
    edge_index : (nb,) int array
        Position of each edge in ``mesh.boundary_edges``.
    resolved : (nb,) bool array
        False for edges whose triangle has no interior vertex; the P1 trace
        there is identically zero and carries no information.
    """

    values: np.ndarray
    edges: np.ndarray
    loop: np.ndarray
    arc: np.ndarray
    lengths: np.ndarray
    midpoints: np.ndarray
    normals: np.ndarray
    loop_lengths: np.ndarray
    edge_index: np.ndarray
    resolved: np.ndarray

    def scaled(self, c: float) -> "BoundaryTrace":
        return BoundaryTrace(c * self.values, self.edges, self.loop, self.arc, self.lengths, self.midpoints,
                             self.normals, self.loop_lengths, self.edge_index, self.resolved)


def boundary_loops(m: TriMesh) -> list[np.ndarray]:
    """Boundary edge indices chained into closed loops (largest loop first)."""

    def build():
        start = {int(a): i for i, (a, _) in enumerate(m.boundary_edges)}
        seen = np.zeros(len(m.boundary_edges), dtype=bool)
        loops = []
        for i0 in range(len(m.boundary_edges)):
            if seen[i0]:
                continue
            loop = []
            i = i0
            while not seen[i]:
                seen[i] = True
                loop.append(i)
                i = start[int(m.boundary_edges[i, 1])]
            loops.append(np.array(loop))
        # start every loop at its lowest-index vertex for determinism
        out = []
        for lp in loops:
            k = int(np.argmin(m.boundary_edges[lp, 0]))
            out.append(np.roll(lp, -k))
        extent = [np.ptp(m.vertices[m.boundary_edges[lp, 0]], axis=0).max() for lp in out]
        order = np.argsort(extent, kind="stable")[::-1]
        return [out[i] for i in order]

    return m.cached("bloops", build)


def boundary_neumann_trace(m: TriMesh, v: np.ndarray) -> BoundaryTrace:
    """One-sided normal derivative of the P1 interpolant on every boundary edge."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != m.n_vertices:
        raise InvalidInput("vector length does not match the mesh")
    g, _ = p1_gradients(m)
    tri = m.edge_triangles()
    grad = np.einsum("tid,ti->td", g[tri], v[m.triangles[tri]])
    vals_all = np.einsum("td,td->t", grad, m.edge_normals)
    loops = boundary_loops(m)
    idx = np.concatenate(loops)
    loop_id = np.concatenate([np.full(len(lp), k) for k, lp in enumerate(loops)])
    lengths = m.edge_lengths[idx]
    arc = np.zeros(len(idx))
    loop_lengths = []
    pos = 0
    for lp in loops:
        L = m.edge_lengths[lp]
        c = np.cumsum(L)
        arc[pos : pos + len(lp)] = c - 0.5 * L
        loop_lengths.append(float(c[-1]))
        pos += len(lp)
    e = m.boundary_edges[idx]
    mid = 0.5 * (m.vertices[e[:, 0]] + m.vertices[e[:, 1]])
    resolved = ~np.all(m.is_boundary_vertex[m.triangles[tri]], axis=1)
    return BoundaryTrace(vals_all[idx], e, loop_id, arc, lengths, mid, m.edge_normals[idx],
                         np.array(loop_lengths), idx, resolved[idx])


@dataclass(frozen=True)
class PayneVerdict:
    """Payne classification of one eigenvector.

    Attributes
    ----------
    kind : {"SP", "NP", "INDETERMINATE"}
        Weak-Payne configurations (trace touching zero without changing sign)
        are reported as INDETERMINATE.
    sign_change_points : list of (loop, arc) tuples
    margin : float
        For NP, ``min|trace| / max|trace|``; for SP, the smaller of the
        largest positive and the largest negative value, relative to
        ``max|trace|``; for INDETERMINATE, ``min|trace| / max|trace|``.
    band : float
    """

    kind: str
    sign_change_points: list
    margin: float
    band: float
    max_trace: float = 0.0

    @property
    def n_sign_changes(self) -> int:
        return len(self.sign_change_points)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "sign_change_points": [[int(a), float(b)] for a, b in self.sign_change_points],
            "margin": float(self.margin),
            "band": float(self.band),
            "max_trace": float(self.max_trace),
        }


def classify_payne(trace: BoundaryTrace | np.ndarray, band: float = PAYNE_BAND) -> PayneVerdict:
    """SP / NP / INDETERMINATE verdict from a boundary normal derivative.

    Values within ``band * max|trace|`` of zero are treated as undecided.
    SP needs both signs outside the band; NP needs every value outside it.
    Unresolved edges (see :class:`BoundaryTrace`) are ignored.
    """
    if not isinstance(trace, BoundaryTrace):
        vals = np.asarray(trace, dtype=float)
        n = len(vals)
        trace = BoundaryTrace(vals, np.zeros((n, 2), int), np.zeros(n, int), np.arange(n) + 0.5, np.ones(n),
                              np.zeros((n, 2)), np.zeros((n, 2)), np.array([float(n)]), np.arange(n),
                              np.ones(n, dtype=bool))
    vals = trace.values
    ok = trace.resolved
    mx = float(np.max(np.abs(vals)))
    if mx == 0:
        return PayneVerdict("INDETERMINATE", [], 0.0, band, 0.0)
    thr = band * mx
    pos = (vals > thr) & ok
    neg = (vals < -thr) & ok
    if pos.any() and neg.any():
        points = []
        for lp in np.unique(trace.loop):
            sel = np.flatnonzero((trace.loop == lp) & (pos | neg))
            if len(sel) < 2:
                continue
            L = trace.loop_lengths[lp]
            for a, b in zip(sel, np.roll(sel, -1)):
                if np.sign(vals[a]) == np.sign(vals[b]):
                    continue
                sa, sb = trace.arc[a], trace.arc[b]
                if sb < sa:
                    sb += L
                if b == a + 1 or (b < a and sb - sa <= trace.lengths[a] + trace.lengths[b]):
                    w = vals[a] / (vals[a] - vals[b])
                    s = sa + w * (sb - sa)
                else:
                    s = 0.5 * (sa + sb)
                points.append((int(lp), float(s % L)))
        margin = min(float(vals.max()), float(-vals.min())) / mx
        return PayneVerdict("SP", sorted(points), margin, band, mx)
    margin = float(np.min(np.abs(vals[ok]))) / mx
    kind = "NP" if margin > band else "INDETERMINATE"
    return PayneVerdict(kind, [], margin, band, mx)


# ----------------------------------------------------------------------------
# junction angles and the admissible angle set


@dataclass(frozen=True)
class JunctionFit:
    """Fitted nodal rays at one boundary junction.

    ``angles`` are measured from the boundary tangent (domain on the left)
    to each ray, in (0, pi). ``resolved`` is False when the eigenfunction
    near the junction stays below the relative band of the Payne
    classification, where the P1 sign pattern carries no information.
    ``smooth`` is False within two mesh sizes of an input corner whose
    interior angle differs from a straight angle by more than
    ``CORNER_TOL`` degrees.
    """

    point: np.ndarray
    directions: np.ndarray
    angles: np.ndarray
    residuals: np.ndarray
    r_fit: float
    flagged: bool
    resolved: bool = True
    smooth: bool = True


def _collect_branch(ns: NodalSet, start_nodes, r_fit: float, center: np.ndarray):
    adj: dict = {}
    for a, b in ns.segment_nodes:
        adj.setdefault(int(a), []).append(int(b))
        adj.setdefault(int(b), []).append(int(a))
    branches = []
    starts = set(int(n) for n in start_nodes)
    for s in starts:
        for first in adj.get(s, []):
            if first in starts:
                continue
            seen = {s, first}
            frontier = [first]
            pts = []
            while frontier:
                n = frontier.pop()
                if np.linalg.norm(ns.nodes[n] - center) > r_fit:
                    continue
                pts.append(n)
                for q in adj.get(n, []):
                    if q not in seen and q not in starts:
                        seen.add(q)
                        frontier.append(q)
            branches.append(pts)
    return branches


def _quadratic_angle(pts: np.ndarray, p: np.ndarray, tan: np.ndarray, inward: np.ndarray):
    """Tangent angle at the boundary of a branch fitted as tau = c0 + c1 nu + c2 nu^2."""
    q = pts - p
    tau, nu = q @ tan, q @ inward
    A = np.column_stack([np.ones_like(nu), nu, nu * nu])
    coef, *_ = np.linalg.lstsq(A, tau, rcond=None)
    u = np.array([coef[1], 1.0])
    u /= np.linalg.norm(u)
    resid = float(np.sqrt(np.mean((A @ coef - tau) ** 2)))
    return math.atan2(u[1], u[0]), u[0] * tan + u[1] * inward, resid


def junction_angles(ns: NodalSet, m: TriMesh, r_fit: float | None = None, model: str = "line",
                    v: np.ndarray | None = None, band: float = PAYNE_BAND) -> list[JunctionFit]:
    """Angle between each nodal ray and the boundary tangent at every junction.

    Nodes of the nodal polyline reachable from the junction within ``r_fit``
    (default six mesh sizes) are fitted per branch. Branches with fewer than
    three nodes trigger up to two doublings of the radius, after which the
    junction is flagged.

    Parameters
    ----------
    model : {"line", "quadratic"}
        ``"line"`` fits a total-least-squares line. ``"quadratic"`` fits the
        tangential offset as a quadratic in the distance from the boundary
        and reports its slope at the boundary, which removes the bias of a
        curved branch; near-tangential branches keep the line fit.
    v : array, optional
        The eigenvector; when given, junctions where ``|v|`` within two mesh
        sizes stays below ``band * max|v|`` are marked unresolved.
    """
    if model not in ("line", "quadratic"):
        raise InvalidParameter(f"unknown junction fit model {model!r}")
    h = ns.meta.get("h", _mesh_size(m))
    r0 = 6 * h if r_fit is None else float(r_fit)
    node_of_vertex = {int(vx): i for i, vx in enumerate(ns.node_vertex) if vx >= 0}
    bstart = {int(a): i for i, (a, _) in enumerate(m.boundary_edges)}
    bend = {int(b): i for i, (_, b) in enumerate(m.boundary_edges)}
    corners = np.zeros((0, 2))
    if m.domain is not None:
        pts = np.vstack(m.domain.loops)
        corners = pts[np.abs(_loop_angles(m.domain) - 180.0) > CORNER_TOL]
    out = []
    for j in ns.junctions:
        p = j.point
        smooth = not len(corners) or bool(np.linalg.norm(corners - p, axis=1).min() > 2 * h)
        # boundary tangent from the neighbors of the junction vertices along the boundary
        vx = sorted(j.vertices, key=lambda q: np.linalg.norm(m.vertices[q] - p))[0]
        e_out = m.boundary_edges[bstart[vx]]
        e_in = m.boundary_edges[bend[vx]]
        tan = m.vertices[e_out[1]] - m.vertices[e_in[0]]
        tan /= np.linalg.norm(tan)
        r = r0
        flagged = True
        for _ in range(3):
            branches = _collect_branch(ns, [node_of_vertex[q] for q in j.vertices], r, p)
            branches = [b for b in branches if len(b) >= 3]
            if branches:
                flagged = False
                break
            r *= 2
        dirs, angs, res = [], [], []
        inward = np.array([-tan[1], tan[0]])
        for b in branches:
            c, u, rr = _tls_line(ns.nodes[b])
            if np.dot(u, inward) < 0:
                u = -u
            ang = math.acos(float(np.clip(np.dot(u, tan), -1.0, 1.0)))
            if model == "quadratic" and len(b) >= 4 and 0.35 < ang < math.pi - 0.35:
                ang, u, rr = _quadratic_angle(ns.nodes[b], p, tan, inward)
            dirs.append(u)
            angs.append(ang)
            res.append(rr)
        resolved = True
        if v is not None:
            near = np.linalg.norm(m.vertices - p, axis=1) <= 2 * h
            resolved = bool(np.abs(v[near]).max(initial=0.0) >= band * np.abs(v).max())
        out.append(JunctionFit(p, np.array(dirs).reshape(-1, 2), np.array(angs), np.array(res), r, flagged,
                               resolved, smooth))
    return out


def angle_set(n0: int) -> list[Fraction]:
    """Admissible angles p*pi/q with q <= n0, as fractions of pi in (0, 1)."""
    if n0 < 2:
        raise InvalidParameter("vanishing-order cap must be at least 2")
    return sorted({Fraction(p, q) for q in range(2, n0 + 1) for p in range(1, q)})


def angle_quantization_check(angle: float, lam: float, c: float = 1.0) -> tuple[Fraction, float]:
    """Nearest admissible angle and the distance to it.

    The cap is ``n0 = max(2, floor(c * sqrt(lam)))`` and the set is
    ``{p pi / q : 1 <= q <= n0}`` without 0 and pi.

    Returns
    -------
    frac : Fraction
        The nearest element as a multiple of pi.
    residual : float
        ``|angle - frac * pi|`` in radians.

    Examples
    --------
    >>> f, r = angle_quantization_check(1.047, 9.0)
    >>> f
    Fraction(1, 3)
    """
    n0 = max(2, int(math.floor(c * math.sqrt(lam))))
    best = min(angle_set(n0), key=lambda f: abs(angle - float(f) * math.pi))
    return best, abs(angle - float(best) * math.pi)


# ----------------------------------------------------------------------------
# output


def nodal_svg(m: TriMesh, ns: NodalSet, width: int = 640) -> str:
    """Mesh in light gray, nodal polyline in red, junctions as blue dots."""
    f, w, h = svg_frame(m.vertices, width)
    body = svg_edges(m, f)
    b = f(m.vertices[m.boundary_edges])
    body.append('<path d="' + " ".join(f"M{a[0]:.2f} {a[1]:.2f}L{c[0]:.2f} {c[1]:.2f}" for a, c in b)
                + '" stroke="black" stroke-width="1" fill="none"/>')
    if not ns.is_empty:
        s = f(ns.segments)
        body.append('<path d="' + " ".join(f"M{a[0]:.2f} {a[1]:.2f}L{c[0]:.2f} {c[1]:.2f}" for a, c in s)
                    + '" stroke="red" stroke-width="1.5" fill="none"/>')
    for j in ns.junctions:
        x, y = f(j.point)
        body.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="blue"/>')
    for c in ns.interior_crossings:
        x, y = f(c.point)
        body.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="none" stroke="blue" stroke-width="1.5"/>')
    return _svg_doc(w, h, body)


def segments_csv(ns: NodalSet, digits: int = 12) -> str:
    buf = io.StringIO()
    buf.write("segment,component,triangle,x0,y0,x1,y1\n")
    for i, ((a, b), c, t) in enumerate(zip(ns.segments, ns.components, ns.segment_triangles)):
        buf.write(f"{i},{c},{t},{a[0]:.{digits}e},{a[1]:.{digits}e},{b[0]:.{digits}e},{b[1]:.{digits}e}\n")
    return buf.getvalue()

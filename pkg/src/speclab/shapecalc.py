"""Shape calculus for Dirichlet eigenvalues.

First variations of simple eigenvalues under normal boundary speeds,
directional-derivative matrices for clusters, finite-difference validation
on transported meshes, and the sweep experiments built on top of them
(fundamental gap, genericity, dumbbells, Payne stability).

Boundary normal derivatives default to the residual-recovered flux: the
discrete residual ``K v - lam M v`` at boundary rows equals the weak
normal-derivative functional, and solving it against the boundary mass
matrix yields a continuous P1 trace that converges one order faster than
the one-sided element gradient. ``trace="gradient"`` selects the latter.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .eigensolve import SpectralResult, assemble, assemble_full, cluster_of, solve_lowest
from .errors import (
    ClusteredEigenvalue,
    CrossingError,
    InvalidConstraints,
    InvalidInput,
    InvalidParameter,
)
from .geometry import (
    DomainSpec,
    DumbbellParams,
    PerturbationField,
    diameter,
    diameter_pair,
    make_dumbbell,
    vertex_normals,
)
from .mesh import TriMesh, mesh_boundary_field, transport, triangulate
from .nodal import PAYNE_BAND, boundary_neumann_trace, classify_payne

__all__ = [
    "CLUSTER_TOL",
    "HadamardReport",
    "DirectionalMatrix",
    "boundary_flux",
    "hadamard_derivative",
    "fd_derivative",
    "fd_richardson",
    "hadamard_check",
    "bump_field",
    "fourier_field",
    "directional_matrix",
    "fd_cluster_validate",
    "gap_functional",
    "rotational_identity",
    "genericity_trial",
    "dumbbell_h_rule",
    "dumbbell_sweep",
    "payne_stability_sweep",
    "table_csv",
]

CLUSTER_TOL = 0.02
_REL_FLOOR = 1e-8
_GAUSS = (0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0))


# ----------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class HadamardReport:
    """Boundary-integral prediction of ``d lam_k / dt`` next to its central difference."""

    predicted: float
    fd: float
    rel_error: float
    t_step: float
    k: int
    info: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class DirectionalMatrix:
    """Symmetric derivative matrix of an eigenvalue cluster along a field.

    Attributes
    ----------
    entries : (m, m) array
    cluster : tuple of int
        1-based eigenvalue indices.
    signature : tuple
        ``(n_plus, n_minus, n_zero)`` with the zero threshold ``1e-6 * ||M||``.
    eigenvalues : (m,) array
        Ascending; the one-sided derivatives of the sorted cluster.
    """

    entries: np.ndarray
    cluster: tuple
    signature: tuple
    eigenvalues: np.ndarray

    def to_json(self) -> str:
        return json.dumps(
            {
                "entries": np.asarray(self.entries).tolist(),
                "cluster": list(self.cluster),
                "signature": list(self.signature),
                "eigenvalues": np.asarray(self.eigenvalues).tolist(),
            },
            sort_keys=True,
        )


# ----------------------------------------------------------------------------
# boundary quadrature


def _boundary_mass(m: TriMesh):
    """Consistent 1D P1 mass matrix on the boundary vertices (and their numbering)."""

    def build():
        b = np.flatnonzero(m.is_boundary_vertex)
        idx = -np.ones(m.n_vertices, dtype=np.int64)
        idx[b] = np.arange(len(b))
        e = idx[m.boundary_edges]
        L = m.edge_lengths
        rows = np.concatenate([e[:, 0], e[:, 1], e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 0], e[:, 1], e[:, 1], e[:, 0]])
        vals = np.concatenate([L / 3, L / 3, L / 6, L / 6])
        Mb = sp.csc_matrix((vals, (rows, cols)), shape=(len(b), len(b)))
        return b, spla.splu(Mb)

    return m.cached("bmass", build)


def boundary_flux(m: TriMesh, v: np.ndarray, lam: float) -> np.ndarray:
    """Residual-recovered outward normal derivative at the boundary vertices.

    Returns a vertex array (zero at interior vertices) whose P1 interpolant
    along the boundary represents the functional ``K v - lam M v``.
    """
    v = np.asarray(v, dtype=float)
    if v.shape[0] != m.n_vertices:
        raise InvalidInput("vector length does not match the mesh")
    K, M = assemble_full(m)
    b, lu = _boundary_mass(m)
    r = (K @ v - lam * (M @ v))[b]
    out = np.zeros(m.n_vertices)
    out[b] = lu.solve(r)
    return out


def _mesh_speed(m: TriMesh, V: PerturbationField) -> np.ndarray:
    if m.domain is None:
        raise InvalidInput("mesh has no domain; the field cannot be located")
    V.check_against(m.domain)
    return mesh_boundary_field(m, V.normal_speed)


def _edge_products(m: TriMesh, nodal: Sequence[np.ndarray]) -> np.ndarray:
    """Exact-for-cubics edge quadrature of the product of P1 boundary functions."""
    e = m.boundary_edges
    total = np.ones(len(e))
    acc = np.zeros(len(e))
    for q in _GAUSS:
        prod = total.copy()
        for f in nodal:
            prod = prod * ((1 - q) * f[e[:, 0]] + q * f[e[:, 1]])
        acc += 0.5 * prod
    return acc * m.edge_lengths


def _traces(m: TriMesh, sr: SpectralResult, idx: Sequence[int], trace: str):
    if sr.mesh_id != m.mesh_id:
        raise InvalidInput("spectral result was computed on a different mesh")
    if trace == "residual":
        return [boundary_flux(m, sr.vector(i), sr.value(i)) for i in idx]
    if trace == "gradient":
        out = []
        for i in idx:
            bt = boundary_neumann_trace(m, sr.vector(i))
            per_edge = np.zeros(len(m.boundary_edges))
            per_edge[bt.edge_index] = bt.values
            out.append(per_edge)
        return out
    raise InvalidParameter(f"unknown trace mode {trace!r}")


def _gram(m: TriMesh, traces, weight: np.ndarray, trace: str) -> np.ndarray:
    """Matrix of boundary integrals of trace_i * trace_j * weight."""
    n = len(traces)
    G = np.zeros((n, n))
    for a in range(n):
        for b in range(a, n):
            if trace == "residual":
                val = _edge_products(m, [traces[a], traces[b], weight]).sum()
            else:
                e = m.boundary_edges
                wbar = 0.5 * (weight[e[:, 0]] + weight[e[:, 1]])
                val = float(np.sum(traces[a] * traces[b] * wbar * m.edge_lengths))
            G[a, b] = G[b, a] = val
    return G


# ----------------------------------------------------------------------------
# simple eigenvalues


def hadamard_derivative(m: TriMesh, sr: SpectralResult, k: int, V: PerturbationField,
                        trace: str = "residual") -> float:
    """``-\\int (d phi_k / d eta)^2 V.eta ds`` for a simple eigenvalue.

    Raises
    ------
    ClusteredEigenvalue
        If ``lam_k`` sits in a cluster (relative tolerance 0.02); use
        :func:`directional_matrix` instead.
    """
    group = cluster_of(sr.eigenvalues, k, CLUSTER_TOL)
    if len(group) > 1:
        raise ClusteredEigenvalue(
            f"lambda_{k} belongs to the cluster {group}; use directional_matrix for repeated eigenvalues"
        )
    w = _mesh_speed(m, V)
    (g,) = _traces(m, sr, [k], trace)
    return -float(_gram(m, [g], w, trace)[0, 0])


def _track(M, ref: np.ndarray, vecs: np.ndarray) -> tuple[int, float]:
    ov = np.abs(ref @ (M @ vecs))
    j = int(np.argmax(ov))
    return j, float(ov[j])


def _solve_tracked(mt: TriMesh, ref: np.ndarray, k: int, extra: int = 2):
    sr = solve_lowest(mt, k + extra)
    _, M = assemble(mt)
    j, ov = _track(M, ref, sr.eigenvectors[mt.interior])
    return sr, j + 1, ov


def fd_derivative(d: DomainSpec, V: PerturbationField, k: int, t: float = 1e-3, h: float = 0.05,
                  mesh: TriMesh | None = None) -> float:
    """Central difference ``(lam_k(t) - lam_k(-t)) / 2t`` on one transported mesh.

    The mesh of ``d`` is moved by the boundary displacement and its discrete
    harmonic extension, so both endpoints share a topology. The branch is
    followed by maximal M-overlap with the unperturbed eigenvector.

    Raises
    ------
    CrossingError
        If the followed branch is not the k-th eigenvalue at one endpoint.
    """
    if not t > 0:
        raise InvalidParameter("finite-difference step must be positive")
    m = mesh if mesh is not None else triangulate(d, h)
    base = solve_lowest(m, k + 2)
    ref = base.vector(k)[m.interior]
    vals = []
    for s in (t, -t):
        mt = transport(m, V, s)
        sr, j, ov = _solve_tracked(mt, ref, k)
        if j != k:
            raise CrossingError(f"branch of lambda_{k} became lambda_{j} at t={s:g} (overlap {ov:.3f})")
        vals.append(sr.value(k))
    return (vals[0] - vals[1]) / (2 * t)


def fd_richardson(d: DomainSpec, V: PerturbationField, k: int, t: float = 1e-3, h: float = 0.05,
                  mesh: TriMesh | None = None) -> dict:
    """Central differences at t, t/2, t/4 and the ratio of successive changes.

    A ratio near 4 confirms the step lies in the O(t^2) regime.
    """
    m = mesh if mesh is not None else triangulate(d, h)
    vals = [fd_derivative(d, V, k, s, mesh=m) for s in (t, t / 2, t / 4)]
    d1, d2 = vals[0] - vals[1], vals[1] - vals[2]
    ratio = d1 / d2 if d2 != 0 else math.inf
    return {"t": [t, t / 2, t / 4], "fd": vals, "ratio": float(ratio)}


def hadamard_check(d: DomainSpec, V: PerturbationField, k: int, h: float = 0.05, t: float = 1e-3,
                   mesh: TriMesh | None = None, trace: str = "residual") -> HadamardReport:
    """Hadamard prediction and transported-mesh FD on the same base mesh."""
    m = mesh if mesh is not None else triangulate(d, h)
    sr = solve_lowest(m, k + 2)
    pred = hadamard_derivative(m, sr, k, V, trace)
    fd = fd_derivative(d, V, k, t, mesh=m)
    rel = abs(pred - fd) / max(abs(fd), _REL_FLOOR)
    return HadamardReport(pred, fd, rel, t, k,
                          {"h": float(m.meta.get("h", m.h_mean)), "n_vertices": m.n_vertices,
                           "lambda": sr.value(k), "trace": trace})


# ----------------------------------------------------------------------------
# perturbation fields


def _loop_arcs(d: DomainSpec):
    """Per-vertex loop id, arc position and loop length."""
    loop_id = d.loop_of_vertex()
    arc = np.zeros(d.n_boundary)
    lengths = []
    for k, lp in enumerate(d.loops):
        seg = np.linalg.norm(np.roll(lp, -1, axis=0) - lp, axis=1)
        pos = np.concatenate([[0.0], np.cumsum(seg)[:-1]])
        sel = np.flatnonzero(loop_id == k)
        arc[sel] = pos
        lengths.append(float(seg.sum()))
    return loop_id, arc, np.array(lengths)


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def _boundary_integral(d: DomainSpec, values: np.ndarray) -> float:
    p = d.boundary_points
    e = d.edges()
    L = np.linalg.norm(p[e[:, 1]] - p[e[:, 0]], axis=1)
    return float(np.sum(0.5 * (values[e[:, 0]] + values[e[:, 1]]) * L))


def bump_field(d: DomainSpec, points, signs: Sequence[int], width: float,
               constraints: Sequence[str] = ()) -> PerturbationField:
    """Plateau bumps of the given signs centred at boundary locations.

    Each bump equals its sign within arc distance ``width`` of its centre,
    falls to zero by a cubic ramp over the next ``width`` and vanishes
    beyond ``2 * width``.

    Parameters
    ----------
    d : DomainSpec
    points : (n, 2) array_like
        Locations; each snaps to the nearest boundary vertex.
    signs : sequence of +1 / -1
    width : float
        Plateau half-length (arc length).
    constraints : subset of {"area", "diameter"}
        ``"area"`` rescales the bumps so that the boundary integral of the
        field vanishes (first-order area preservation). ``"diameter"``
        requires every centre to lie more than ``10 * width`` (arc distance)
        from the two vertices realizing the diameter.

    Raises
    ------
    InvalidConstraints
        If the area constraint is requested with bumps of one sign, or a
        centre violates the diameter placement.
    InvalidParameter
        If centres are not separated by more than ``4 * width``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    signs = [int(s) for s in signs]
    if len(signs) != len(pts) or any(s not in (-1, 1) for s in signs):
        raise InvalidParameter("need one sign in {+1, -1} per point")
    if not width > 0:
        raise InvalidParameter("bump width must be positive")
    unknown = set(constraints) - {"area", "diameter"}
    if unknown:
        raise InvalidParameter(f"unknown constraints {sorted(unknown)}")
    bp = d.boundary_points
    loop_id, arc, loop_len = _loop_arcs(d)
    centres = [int(np.argmin(np.linalg.norm(bp - q, axis=1))) for q in pts]

    def arc_dist(i, j):
        if loop_id[i] != loop_id[j]:
            return math.inf
        s = abs(arc[i] - arc[j])
        return min(s, loop_len[loop_id[i]] - s)

    for a in range(len(centres)):
        for b in range(a + 1, len(centres)):
            if arc_dist(centres[a], centres[b]) <= 4 * width:
                raise InvalidParameter("bump centres must be separated by more than 4 * width")
    if "diameter" in constraints:
        for c in centres:
            for x in diameter_pair(d):
                if arc_dist(c, x) <= 10 * width:
                    raise InvalidConstraints(
                        f"bump at vertex {c} lies within 10*width of diameter vertex {x}"
                    )
    if "area" in constraints and len(set(signs)) < 2:
        raise InvalidConstraints("area preservation needs bumps of both signs")

    profiles = []
    for c in centres:
        lp = loop_id[c]
        s = np.abs(arc - arc[c])
        s = np.minimum(s, loop_len[lp] - s)
        prof = np.where(loop_id == lp, 1.0 - _smoothstep((s - width) / width), 0.0)
        profiles.append(prof)
    v = np.zeros(d.n_boundary)
    for sgn, prof in zip(signs, profiles):
        v += sgn * prof
    if "area" in constraints:
        pos = _boundary_integral(d, np.clip(v, 0, None))
        neg = -_boundary_integral(d, np.clip(v, None, 0))
        # shrink the heavier side so the maximum stays 1
        if pos > neg:
            v = np.where(v > 0, v * neg / pos, v)
        else:
            v = np.where(v < 0, v * pos / neg, v)
    return PerturbationField(v)


def fourier_field(d: DomainSpec, amplitude: float, rng: np.random.Generator, modes: int = 4) -> PerturbationField:
    """Random low-order Fourier series in arc length on every loop, sup-norm ``amplitude``."""
    loop_id, arc, loop_len = _loop_arcs(d)
    v = np.zeros(d.n_boundary)
    for lp in range(len(loop_len)):
        sel = loop_id == lp
        th = 2 * np.pi * arc[sel] / loop_len[lp]
        a = rng.standard_normal(modes)
        b = rng.standard_normal(modes)
        kk = np.arange(1, modes + 1)
        v[sel] = np.cos(np.outer(th, kk)) @ a + np.sin(np.outer(th, kk)) @ b
    peak = np.max(np.abs(v))
    if amplitude == 0 or peak == 0:
        return PerturbationField(np.zeros(d.n_boundary))
    return PerturbationField(v * (amplitude / peak))


# ----------------------------------------------------------------------------
# clusters


def _signature(vals: np.ndarray, norm: float) -> tuple:
    thr = 1e-6 * norm
    return (int(np.sum(vals > thr)), int(np.sum(vals < -thr)), int(np.sum(np.abs(vals) <= thr)))


def directional_matrix(m: TriMesh, sr: SpectralResult, cluster: Sequence[int], V: PerturbationField,
                       trace: str = "residual") -> DirectionalMatrix:
    """``-\\int (d u_i/d eta)(d u_j/d eta) V.eta ds`` over an eigenvalue cluster.

    ``cluster`` holds 1-based indices. Its eigenvectors may come in any
    orthonormal basis; the matrix transforms by congruence.
    """
    cluster = tuple(int(i) for i in cluster)
    if not cluster:
        raise InvalidParameter("empty cluster")
    w = _mesh_speed(m, V)
    traces = _traces(m, sr, cluster, trace)
    A = -_gram(m, traces, w, trace)
    A = 0.5 * (A + A.T)
    vals = np.linalg.eigvalsh(A)
    norm = float(np.max(np.abs(vals))) if len(vals) else 0.0
    return DirectionalMatrix(A, cluster, _signature(vals, norm), vals)


def fd_cluster_validate(d: DomainSpec, V: PerturbationField, cluster: Sequence[int], t: float = 1e-3,
                        h: float = 0.05, mesh: TriMesh | None = None, retries: int = 3) -> dict:
    """Compare one-sided eigenvalue shifts of a cluster with the signature of its matrix.

    The sorted cluster at ``+t`` must move with the signs of the ascending
    matrix eigenvalues and at ``-t`` with the opposite signs. On mismatch
    ``t`` is halved, at most ``retries`` times.
    """
    cluster = [int(i) for i in cluster]
    m = mesh if mesh is not None else triangulate(d, h)
    kmax = max(cluster)
    base = solve_lowest(m, kmax + 2)
    dm = directional_matrix(m, base, cluster, V)
    norm = float(np.max(np.abs(dm.eigenvalues)))
    mu_sign = np.sign(np.where(np.abs(dm.eigenvalues) > 1e-6 * norm, dm.eigenvalues, 0.0))
    lam0 = np.array([base.value(i) for i in cluster])
    attempts = []
    step = t
    ok = False
    for _ in range(retries + 1):
        shifts = {}
        for s in (step, -step):
            sr = solve_lowest(transport(m, V, s), kmax + 2)
            shifts[s] = np.array([sr.value(i) for i in cluster]) - lam0
        plus = np.sign(shifts[step])
        minus = np.sign(shifts[-step])
        # at -t the ascending shifts follow -mu in reversed order
        expect_minus = -mu_sign[::-1]
        ok = bool(np.all((plus == mu_sign)[mu_sign != 0]) and np.all((minus == expect_minus)[expect_minus != 0]))
        attempts.append({"t": step, "shift_plus": shifts[step].tolist(), "shift_minus": shifts[-step].tolist(),
                         "consistent": ok})
        if ok:
            break
        step *= 0.5
    return {
        "cluster": cluster,
        "signature": list(dm.signature),
        "matrix_eigenvalues": dm.eigenvalues.tolist(),
        "predicted_plus": (dm.eigenvalues * step).tolist(),
        "t": step,
        "consistent": ok,
        "attempts": attempts,
    }


# ----------------------------------------------------------------------------
# gap, appendix identity, genericity


def gap_functional(d: DomainSpec, h: float = 0.05, mesh: TriMesh | None = None) -> tuple[float, float]:
    """``(lam_2 - lam_1, (lam_2 - lam_1) * diam^2)``."""
    m = mesh if mesh is not None else triangulate(d, h)
    sr = solve_lowest(m, 2)
    gap = sr.value(2) - sr.value(1)
    return gap, gap * diameter(d) ** 2


def _vertex_normals(m: TriMesh) -> np.ndarray:
    """Unit boundary normals, interpolated from the domain's vertex normals along each segment."""
    if m.domain is not None:
        n = mesh_boundary_field(m, vertex_normals(m.domain))
    else:
        n = np.zeros((m.n_vertices, 2))
        w = m.edge_normals * m.edge_lengths[:, None]
        np.add.at(n, m.boundary_edges[:, 0], w)
        np.add.at(n, m.boundary_edges[:, 1], w)
    norm = np.linalg.norm(n, axis=1)
    on = norm > 0
    n[on] /= norm[on, None]
    return n


def rotational_identity(m: TriMesh, sr: SpectralResult, i: int, j: int, center=(0.0, 0.0),
                        trace: str = "residual") -> float:
    """Normalized boundary integral of <X, eta> (d phi_i/d eta)(d phi_j/d eta).

    ``X = (-(y - c2), x - c1)`` is the rotation field about ``center``.
    Returns the integral divided by the integral of the absolute integrand.

    Raises
    ------
    InvalidInput
        If ``i`` and ``j`` do not share a cluster of size at least two.
    """
    group = cluster_of(sr.eigenvalues, i, CLUSTER_TOL)
    if j not in group or len(group) < 2:
        raise InvalidInput(f"indices {i}, {j} are not in one eigenvalue cluster (cluster of {i}: {group})")
    c = np.asarray(center, dtype=float)
    x = m.vertices - c
    X = np.column_stack([-x[:, 1], x[:, 0]])
    if trace == "residual":
        xn = np.einsum("ij,ij->i", X, _vertex_normals(m))
        gi, gj = _traces(m, sr, [i, j], trace)
        num = _edge_products(m, [xn, gi, gj]).sum()
        den = _edge_products(m, [np.abs(xn), np.abs(gi), np.abs(gj)]).sum()
        scale = _edge_products(m, [np.linalg.norm(X, axis=1), np.abs(gi), np.abs(gj)]).sum()
    else:
        e = m.boundary_edges
        mid = 0.5 * (X[e[:, 0]] + X[e[:, 1]])
        xn = np.einsum("ij,ij->i", mid, m.edge_normals)
        gi, gj = _traces(m, sr, [i, j], trace)
        num = float(np.sum(xn * gi * gj * m.edge_lengths))
        den = float(np.sum(np.abs(xn * gi * gj) * m.edge_lengths))
        scale = float(np.sum(np.linalg.norm(mid, axis=1) * np.abs(gi * gj) * m.edge_lengths))
    # a purely tangential field leaves only rounding in both integrals
    if den <= 1e-12 * scale:
        return 0.0
    return float(num / den)


def genericity_trial(d: DomainSpec, amplitude: float, trials: int = 50, seed: int = 0, h: float = 0.05,
                     cluster: Sequence[int] = (2, 3), modes: int = 4, mesh: TriMesh | None = None) -> dict:
    """Fraction of random boundary perturbations that split a base cluster.

    The error budget is the relative splitting the discretization already
    shows on the unperturbed domain (floored at 1e-6); a trial splits when
    ``(lam_j - lam_i) / lam_i`` exceeds five times that budget.
    """
    i, j = int(cluster[0]), int(cluster[-1])
    m = mesh if mesh is not None else triangulate(d, h)
    base = solve_lowest(m, j + 1)
    budget = max((base.value(j) - base.value(i)) / base.value(i), 1e-6)
    rng = np.random.default_rng(seed)
    splits = []
    for _ in range(trials):
        V = fourier_field(d, amplitude, rng, modes)
        mt = transport(m, V, 1.0) if amplitude else m
        sr = solve_lowest(mt, j + 1)
        splits.append((sr.value(j) - sr.value(i)) / sr.value(i))
    splits = np.array(splits)
    frac = float(np.mean(splits > 5 * budget)) if trials else 0.0
    return {"fraction": frac, "budget": float(budget), "splits": splits.tolist(), "amplitude": float(amplitude),
            "trials": int(trials), "seed": int(seed)}


# ----------------------------------------------------------------------------
# dumbbells


def dumbbell_h_rule(p: DumbbellParams):
    """(h_max, size_fn): eps/4 in the connector, 0.04 * radius in each lobe."""
    L = p.connector_length
    h1, h2 = 0.04 * p.lobe1, 0.04 * p.lobe2
    hc = p.eps / 4

    def size_fn(c):
        x = c[:, 0]
        out = np.where(x < 0, h1, h2)
        near = np.abs(x) <= L / 2 + 2 * p.eps
        # grade out of the connector mouth over a few lobe cells
        ramp = hc + 0.5 * np.clip(np.abs(x) - L / 2, 0, None)
        out = np.minimum(out, np.where(near, hc, ramp))
        return out

    return max(h1, h2), size_fn


def _dumbbell_point(args):
    p, k = args
    t0 = time.perf_counter()
    d = make_dumbbell(p, ds=min(0.04 * min(p.lobe1, p.lobe2), p.eps))
    hmax, size_fn = dumbbell_h_rule(p)
    m = triangulate(d, hmax, size_fn=size_fn)
    sr = solve_lowest(m, k)
    v = sr.vector(2)
    _, M = assemble_full(m)
    lobe2 = (m.vertices[:, 0] >= p.connector_length / 2).astype(float)
    w = v * lobe2
    frac = float(w @ (M @ w)) / float(v @ (M @ v))
    verdict = classify_payne(boundary_neumann_trace(m, v))
    row = {"eps": p.eps}
    for i in range(1, k + 1):
        row[f"lambda_{i}"] = sr.value(i)
    row.update(
        {
            "mass_fraction_lobe2": frac,
            "payne_phi2": verdict.kind,
            "n_vertices": m.n_vertices,
            "wall_time": time.perf_counter() - t0,
        }
    )
    return row


def _pool_map(fn, items, jobs: int):
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        return list(ex.map(fn, items))


def dumbbell_sweep(p: DumbbellParams, eps_list: Sequence[float], k: int = 3, jobs: int = 1) -> list[dict]:
    """Low spectrum, lobe-2 localization of phi_2 and its Payne verdict per connector width.

    Rows come back sorted by decreasing ``eps``; the mesh follows
    :func:`dumbbell_h_rule`. ``lobe2`` is the right lobe (``x >= L/2``).
    """
    eps_sorted = sorted({float(e) for e in eps_list}, reverse=True)
    items = [(replace(p, eps=e), k) for e in eps_sorted]
    for q, _ in items:
        q.check()
    return _pool_map(_dumbbell_point, items, jobs)


# ----------------------------------------------------------------------------
# Payne stability


def payne_stability_sweep(d: DomainSpec, V: PerturbationField, t_list: Sequence[float], k: int = 2,
                          h: float = 0.05, mesh: TriMesh | None = None, band: float = PAYNE_BAND) -> dict:
    """Payne verdict of ``phi_k`` along ``d + t * diam(d) * V / max|V|``.

    ``t`` is thus the displacement relative to the domain scale. All meshes
    are transports of one base mesh.

    Raises
    ------
    InvalidInput
        If the verdict at t = 0 is not SP or NP with margin above ``2 * band``.
    """
    m = mesh if mesh is not None else triangulate(d, h)
    if V.scale == 0:
        raise InvalidParameter("perturbation field vanishes")
    unit = diameter(d) / V.scale
    rows = []
    base = None
    for t in sorted({0.0, *[float(x) for x in t_list]}):
        mt = transport(m, V, t * unit) if t else m
        sr = solve_lowest(mt, k + 1)
        verdict = classify_payne(boundary_neumann_trace(mt, sr.vector(k)), band)
        if t == 0:
            base = verdict
            if verdict.kind not in ("SP", "NP") or not verdict.margin > 2 * band:
                raise InvalidInput(f"base verdict {verdict.kind} (margin {verdict.margin:.2e}) is not robust")
        rows.append({"t": t, "displacement": t * diameter(d), "verdict": verdict.kind, "margin": verdict.margin,
                     "sign_changes": verdict.n_sign_changes, "lambda": sr.value(k)})
    stable = [r["t"] for r in rows if r["verdict"] == base.kind]
    largest = 0.0
    for r in rows:
        if r["verdict"] != base.kind:
            break
        largest = r["t"]
    return {"base": base.kind, "rows": rows, "largest_stable_t": largest,
            "flips": len(rows) - len(stable)}


def table_csv(rows: Sequence[dict], digits: int = 10) -> str:
    """Rows of dicts as CSV with fixed float formatting."""
    if not rows:
        return ""
    buf = io.StringIO()
    keys = list(rows[0].keys())
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for r in rows:
        w.writerow([f"{r[k]:.{digits}g}" if isinstance(r[k], float) else r[k] for k in keys])
    return buf.getvalue()

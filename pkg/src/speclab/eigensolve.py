"""P1 finite elements for the Dirichlet Laplacian and a shift-invert eigensolver.

The lowest generalized eigenpairs of ``K v = lam M v`` (stiffness, consistent
mass, Dirichlet vertices eliminated) come from ARPACK's Lanczos iteration on
``(K - sigma M)^{-1} M``. The inverse is applied through an LDL^T-type
factorization: the matrix is put in reverse Cuthill-McKee order and factored
by SuperLU without pivoting, so the diagonal of U is the pivot sequence and
can be checked for positivity. The Lanczos basis is finally Rayleigh-Ritz
refined against the full pencil, which makes the eigenvectors M-orthonormal
to rounding.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .errors import InvalidInput, InvalidParameter, MeshTooCoarse, NumericError
from .mesh import TriMesh

__all__ = [
    "SpectralResult",
    "assemble",
    "assemble_full",
    "solve_lowest",
    "rayleigh_quotient",
    "multiplicity_cluster",
    "cluster_of",
    "spectrum_csv",
    "eigenvectors_csv",
    "p1_gradients",
    "LDLFactor",
]


def p1_gradients(m: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the three hat functions on every triangle, and the areas.

    Returns
    -------
    grads : (nt, 3, 2) array
    areas : (nt,) array
    """

    def build():
        p = m.vertices
        t = m.triangles
        area = m.triangle_areas
        g = np.empty((len(t), 3, 2))
        for i in range(3):
            e = p[t[:, (i + 2) % 3]] - p[t[:, (i + 1) % 3]]
            g[:, i, 0] = -e[:, 1] / (2 * area)
            g[:, i, 1] = e[:, 0] / (2 * area)
        return g, area

    return m.cached("p1_grad", build)


def assemble_full(m: TriMesh) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Stiffness and consistent mass over all vertices (no boundary condition)."""

    def build():
        g, area = p1_gradients(m)
        t = m.triangles
        kloc = area[:, None, None] * np.einsum("tid,tjd->tij", g, g)
        mloc = area[:, None, None] * (np.ones((3, 3)) + np.eye(3))[None] / 12.0
        rows = np.repeat(t, 3, axis=1).ravel()
        cols = np.tile(t, (1, 3)).ravel()
        n = m.n_vertices
        K = sp.csr_matrix((kloc.ravel(), (rows, cols)), shape=(n, n))
        M = sp.csr_matrix((mloc.ravel(), (rows, cols)), shape=(n, n))
        # exact symmetry despite summation order
        return ((K + K.T) * 0.5).tocsr(), ((M + M.T) * 0.5).tocsr()

    return m.cached("KM_full", build)


def assemble(m: TriMesh) -> tuple[sp.csc_matrix, sp.csc_matrix]:
    """Dirichlet stiffness and mass matrices over the interior vertices.

    Raises
    ------
    MeshTooCoarse
        If the mesh has no interior vertex.
    """
    free = m.interior
    if len(free) == 0:
        raise MeshTooCoarse("mesh has no interior vertices")

    def build():
        K, M = assemble_full(m)
        return K[free][:, free].tocsc(), M[free][:, free].tocsc()

    return m.cached("KM", build)


class LDLFactor:
    """Symmetric factorization ``P A P^T = L D L^T`` in reverse Cuthill-McKee order.

    SuperLU is run in symmetric mode with the natural (already reduced)
    column order and a zero pivot threshold, so no row exchanges happen and
    ``diag(U)`` equals ``D``.
    """

    def __init__(self, A: sp.spmatrix, require_positive: bool = True):
        A = sp.csr_matrix(A)
        self.perm = reverse_cuthill_mckee(A, symmetric_mode=True)
        self.iperm = np.empty_like(self.perm)
        self.iperm[self.perm] = np.arange(len(self.perm))
        Ap = A[self.perm][:, self.perm].tocsc()
        try:
            self.lu = spla.splu(
                Ap,
                permc_spec="NATURAL",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        except RuntimeError as exc:
            raise NumericError(f"factorization broke down: {exc}") from exc
        if not (np.all(self.lu.perm_r == np.arange(A.shape[0]))):
            raise NumericError("factorization performed row exchanges; matrix is not numerically symmetric")
        d = self.lu.U.diagonal()
        self.pivots = d
        bad = np.flatnonzero(d <= 0) if require_positive else np.flatnonzero(d == 0)
        if len(bad):
            i = int(bad[0])
            raise NumericError(
                f"non-positive pivot {d[i]:.3e} at step {i} (vertex {int(self.perm[i])})", pivot=(i, float(d[i]))
            )

    @property
    def nnz(self) -> int:
        return int(self.lu.L.nnz + self.lu.U.nnz)

    def solve(self, b: np.ndarray) -> np.ndarray:
        x = self.lu.solve(np.asarray(b)[self.perm])
        return x[self.iperm]


@dataclass(frozen=True, eq=False)
class SpectralResult:
    """Lowest Dirichlet eigenpairs on a mesh.

    Attributes
    ----------
    eigenvalues : (k,) array, ascending
    eigenvectors : (nv, k) array
        Vertex values, zero on boundary vertices, M-orthonormal.
    residuals : (k,) array
        ``||K v - lam M v||`` in the lumped inverse-mass norm.
    mesh_id : str
    converged : bool
        False if the Lanczos iteration stopped at its cap; then only the
        converged pairs are present.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    mesh_id: str
    converged: bool = True
    sigma: float = 0.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("eigenvalues", "eigenvectors", "residuals"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    def value(self, i: int) -> float:
        """i-th eigenvalue, 1-based."""
        return float(self.eigenvalues[i - 1])

    def vector(self, i: int) -> np.ndarray:
        """i-th eigenvector (vertex values), 1-based."""
        return self.eigenvectors[:, i - 1]


def _lumped_norm(r: np.ndarray, lumped: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(r * r / lumped[:, None], axis=0))


def solve_lowest(
    m: TriMesh,
    k: int,
    tol: float = 1e-8,
    sigma: float = 0.0,
    ncv: int | None = None,
    maxiter: int | None = None,
) -> SpectralResult:
    """First ``k`` Dirichlet eigenpairs of the P1 discretization on ``m``.

    Parameters
    ----------
    m : TriMesh
    k : int
        Number of eigenpairs; must be well below the interior vertex count.
    tol : float
        Relative tolerance: the Lanczos stopping tolerance, and the residual
        bound ``residual <= tol * lam`` required for ``converged``.
    sigma : float
        Spectral shift; 0 targets the bottom of the spectrum.

    Raises
    ------
    NumericError
        If the shifted matrix cannot be factored (pivot reported).
    """
    if k < 1:
        raise InvalidParameter("k must be >= 1")
    K, M = assemble(m)
    n = K.shape[0]
    if k >= max(1, n // 4):
        raise MeshTooCoarse(f"k={k} is too large for {n} interior vertices")
    A = (K - sigma * M) if sigma != 0 else K
    fac = LDLFactor(A, require_positive=(sigma <= 0))
    op = spla.LinearOperator((n, n), matvec=fac.solve, dtype=float)
    ncv = ncv or min(n - 1, max(2 * k + 1, k + 20))
    converged = True
    try:
        vals, vecs = spla.eigsh(K, k=k, M=M, sigma=sigma, OPinv=op, which="LM", tol=tol * 1e-2, ncv=ncv,
                                maxiter=maxiter, v0=np.ones(n))
    except spla.ArpackNoConvergence as exc:
        converged = False
        vals, vecs = exc.eigenvalues, exc.eigenvectors
        if vecs is None or len(vals) == 0:
            raise NumericError("Lanczos iteration produced no converged eigenpair") from exc
    # Rayleigh-Ritz on the Lanczos basis
    Kr = vecs.T @ (K @ vecs)
    Mr = vecs.T @ (M @ vecs)
    Kr = 0.5 * (Kr + Kr.T)
    Mr = 0.5 * (Mr + Mr.T)
    lam, c = sla.eigh(Kr, Mr)
    vecs = vecs @ c
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        big = np.flatnonzero(np.abs(col) > 1e-8 * np.abs(col).max())
        if col[big[0]] < 0:
            vecs[:, j] = -col
    lumped = np.asarray(M.sum(axis=1)).ravel()
    res = _lumped_norm(K @ vecs - (M @ vecs) * lam, lumped)
    if converged and np.any(res > tol * np.abs(lam)):
        converged = False
    full = np.zeros((m.n_vertices, len(lam)))
    full[m.interior] = vecs
    if np.any(lam <= 0):
        raise NumericError("non-positive Dirichlet eigenvalue computed")
    return SpectralResult(
        lam,
        full,
        res,
        m.mesh_id,
        converged,
        float(sigma),
        {"n_free": int(n), "factor_nnz": fac.nnz, "ncv": int(ncv)},
    )


def rayleigh_quotient(m: TriMesh, v: np.ndarray) -> float:
    """``v^T K v / v^T M v`` for a vertex vector (boundary entries are ignored).

    ``v`` may hold either one value per vertex or one per interior vertex.
    """
    K, M = assemble(m)
    v = np.asarray(v, dtype=float)
    if v.shape[0] == m.n_vertices:
        v = v[m.interior]
    elif v.shape[0] != K.shape[0]:
        raise InvalidInput("vector length matches neither the vertex nor the interior count")
    den = float(v @ (M @ v))
    if not den > 0:
        raise InvalidInput("vector has zero mass norm")
    return float(v @ (K @ v)) / den


def multiplicity_cluster(ev, rel_tol: float = 0.02) -> list[list[int]]:
    """Group an ascending eigenvalue list into near-degenerate clusters.

    Consecutive values join a group when their relative gap
    ``(ev[i+1] - ev[i]) / ev[i+1]`` is at most ``rel_tol``. Indices are 1-based.

    Examples
    --------
    >>> multiplicity_cluster([2.0, 5.0, 5.0, 8.0])
    [[1], [2, 3], [4]]
    """
    ev = np.asarray(ev, dtype=float)
    if len(ev) == 0:
        return []
    if np.any(np.diff(ev) < 0):
        raise InvalidInput("eigenvalues must be ascending")
    groups = [[1]]
    for i in range(1, len(ev)):
        gap = (ev[i] - ev[i - 1]) / max(abs(ev[i]), 1e-300)
        if gap <= rel_tol:
            groups[-1].append(i + 1)
        else:
            groups.append([i + 1])
    return groups


def cluster_of(ev, i: int, rel_tol: float = 0.02) -> list[int]:
    """The cluster (1-based indices) containing index ``i``."""
    for g in multiplicity_cluster(ev, rel_tol):
        if i in g:
            return g
    raise InvalidParameter(f"index {i} outside the computed spectrum")


def spectrum_csv(sr: SpectralResult, digits: int = 12) -> str:
    buf = io.StringIO()
    buf.write("index,eigenvalue,residual\n")
    for i, (lam, r) in enumerate(zip(sr.eigenvalues, sr.residuals), start=1):
        buf.write(f"{i},{lam:.{digits}e},{r:.3e}\n")
    return buf.getvalue()


def eigenvectors_csv(sr: SpectralResult, m: TriMesh, digits: int = 12) -> str:
    """Vertex table: mesh_id header line, then x, y and one column per eigenvector."""
    if sr.mesh_id != m.mesh_id:
        raise InvalidInput("spectral result was computed on a different mesh")
    buf = io.StringIO()
    buf.write(f"# mesh_id={sr.mesh_id}\n")
    buf.write("vertex,x,y," + ",".join(f"phi{i}" for i in range(1, sr.k + 1)) + "\n")
    for j, (x, y) in enumerate(m.vertices):
        vals = ",".join(f"{v:.{digits}e}" for v in sr.eigenvectors[j])
        buf.write(f"{j},{x:.{digits}e},{y:.{digits}e},{vals}\n")
    return buf.getvalue()

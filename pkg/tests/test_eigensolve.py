import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speclab.eigensolve import (
    LDLFactor,
    assemble,
    assemble_full,
    cluster_of,
    eigenvectors_csv,
    multiplicity_cluster,
    rayleigh_quotient,
    solve_lowest,
    spectrum_csv,
)
from speclab.errors import InvalidInput, MeshTooCoarse, NumericError
from speclab.geometry import area, make_disk, make_rectangle
from speclab.mesh import from_off, refine, triangulate
from speclab.reference import disk_spectrum, rectangle_spectrum

PI = math.pi


def hexagon_patch():
    ring = [f"{math.cos(k * PI / 3):.17g} {math.sin(k * PI / 3):.17g}" for k in range(6)]
    tris = [f"3 0 {k + 1} {(k + 1) % 6 + 1}" for k in range(6)]
    return from_off("\n".join(["OFF", "7 6 0", "0 0", *ring, *tris]) + "\n")


def test_single_interior_vertex_patch():
    m = hexagon_patch()
    K, M = assemble(m)
    assert K.shape == (1, 1)
    # equilateral hat: |grad|^2 area summed = 2 sqrt(3), mass diagonal = sum(area) / 6
    assert K[0, 0] == pytest.approx(2 * math.sqrt(3), rel=1e-12)
    assert M[0, 0] == pytest.approx(math.sqrt(3) / 4, rel=1e-12)
    assert K[0, 0] / M[0, 0] == pytest.approx(8.0, rel=1e-12)


def test_full_matrices(square_mesh, square):
    K, M = assemble_full(square_mesh)
    assert M.sum() == pytest.approx(area(square), rel=1e-10)
    np.testing.assert_allclose(K @ np.ones(square_mesh.n_vertices), 0.0, atol=1e-11)
    Ki, Mi = assemble(square_mesh)
    assert Mi.sum() <= area(square)
    assert abs(Ki - Ki.T).max() == 0 and abs(Mi - Mi.T).max() == 0


def test_no_interior_vertices():
    tri = from_off("OFF\n3 1 0\n0 0\n1 0\n0 1\n3 0 1 2\n")
    with pytest.raises(MeshTooCoarse):
        assemble(tri)


def test_ldl_reports_pivot():
    import scipy.sparse as sp

    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(NumericError) as err:
        LDLFactor(A)
    assert err.value.pivot is not None


def test_disk_spectrum_within_one_percent():
    m = triangulate(make_disk(1.0, 512), 0.02)
    sr = solve_lowest(m, 6)
    ref = np.array(disk_spectrum(1.0, 6).eigenvalues)
    np.testing.assert_allclose(sr.eigenvalues, ref, rtol=0.01)
    assert np.all(sr.residuals <= 1e-8 * sr.eigenvalues)


def test_rectangle_spectrum_within_one_percent():
    m = triangulate(make_rectangle(PI, PI, spacing=0.03), 0.03)
    sr = solve_lowest(m, 4)
    np.testing.assert_allclose(sr.eigenvalues, [2, 5, 5, 8], rtol=0.01)


def test_refinement_ratio():
    m = triangulate(make_rectangle(PI, PI), 0.2)
    sr0 = solve_lowest(m, 4)
    sr1 = solve_lowest(refine(m), 4)
    ref = np.array(rectangle_spectrum(PI, PI, 4).eigenvalues)
    ratio = (sr0.eigenvalues - ref) / (sr1.eigenvalues - ref)
    assert np.all((3.5 <= ratio) & (ratio <= 4.5))


def test_disk_polygon_refinement_improves_lambda1():
    exact = disk_spectrum(1.0, 1).eigenvalues[0]
    coarse = solve_lowest(triangulate(make_disk(1.0, 256), 0.03), 1).value(1)
    fine = solve_lowest(triangulate(make_disk(1.0, 512), 0.03), 1).value(1)
    assert abs(fine - exact) < abs(coarse - exact)


def test_spectral_result_invariants(disk_mesh, disk_spec):
    ev = disk_spec.eigenvalues
    assert np.all(ev > 0) and np.all(np.diff(ev) >= 0)
    _, M = assemble_full(disk_mesh)
    G = disk_spec.eigenvectors.T @ (M @ disk_spec.eigenvectors)
    np.testing.assert_allclose(G, np.eye(disk_spec.k), atol=1e-8)
    np.testing.assert_array_equal(disk_spec.eigenvectors[disk_mesh.is_boundary_vertex], 0.0)
    for i in range(1, disk_spec.k + 1):
        assert rayleigh_quotient(disk_mesh, disk_spec.vector(i)) == pytest.approx(disk_spec.value(i), rel=1e-8)


def test_first_eigenvector_single_signed(disk_mesh, disk_spec):
    v = disk_spec.vector(1)
    inner = v[disk_mesh.interior]
    wrong = inner[inner < 0] if inner.sum() > 0 else inner[inner > 0]
    assert len(wrong) <= 0.001 * len(inner)
    assert np.all(np.abs(wrong) <= 1e-6 * np.abs(v).max())


def test_sign_normalization(disk_spec):
    for i in range(disk_spec.k):
        col = disk_spec.eigenvectors[:, i]
        first = col[np.flatnonzero(col)[0]]
        assert first > 0


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_rayleigh_quotient_bounds_lambda1(disk_mesh, disk_spec, seed):
    rng = np.random.default_rng(seed)
    v = np.zeros(disk_mesh.n_vertices)
    v[disk_mesh.interior] = rng.standard_normal(len(disk_mesh.interior))
    assert rayleigh_quotient(disk_mesh, v) >= disk_spec.value(1) * (1 - 1e-8)


def test_hat_function_rayleigh(square_mesh):
    c = np.argmin(np.linalg.norm(square_mesh.vertices - [PI / 2, PI / 2], axis=1))
    v = np.zeros(square_mesh.n_vertices)
    v[c] = 1.0
    assert rayleigh_quotient(square_mesh, v) >= 2.0


def test_rayleigh_rejects_zero(square_mesh):
    with pytest.raises(InvalidInput):
        rayleigh_quotient(square_mesh, np.zeros(square_mesh.n_vertices))


def test_domain_monotonicity_nested_rectangles():
    small = solve_lowest(triangulate(make_rectangle(2.0, 1.0), 0.08), 1).value(1)
    large = solve_lowest(triangulate(make_rectangle(2.5, 1.2), 0.08), 1).value(1)
    assert large <= small


def test_clusters():
    ev = disk_spectrum(1.0, 6).eigenvalues
    assert multiplicity_cluster(ev, 0.02) == [[1], [2, 3], [4, 5], [6]]
    assert multiplicity_cluster([2.0, 5.0, 5.0, 8.0]) == [[1], [2, 3], [4]]
    assert multiplicity_cluster([1.0, 1.0 + 1e-12, 2.0], 0.0) == [[1], [2], [3]]
    assert cluster_of(ev, 3) == [2, 3]


@given(st.lists(st.floats(0.1, 100.0), min_size=1, max_size=30), st.floats(0.0, 0.1))
@settings(max_examples=60, deadline=None)
def test_clusters_partition(vals, tol):
    ev = sorted(vals)
    groups = multiplicity_cluster(ev, tol)
    assert [i for g in groups for i in g] == list(range(1, len(ev) + 1))


def test_csv_exports(disk_mesh, disk_spec):
    text = spectrum_csv(disk_spec)
    lines = text.strip().splitlines()
    assert lines[0] == "index,eigenvalue,residual" and len(lines) == 7
    assert float(lines[1].split(",")[1]) == pytest.approx(disk_spec.value(1), rel=1e-11)
    vec = eigenvectors_csv(disk_spec, disk_mesh)
    assert vec.startswith(f"# mesh_id={disk_mesh.mesh_id}")

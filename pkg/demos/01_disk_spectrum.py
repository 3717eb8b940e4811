# %% [markdown]
# # Disk spectrum against Bessel zeros
#
# Mesh the unit disk, solve for the six lowest Dirichlet eigenvalues and
# compare with the squared zeros of J_0, J_1 and J_2. Halving the mesh size
# should cut the error by about four.

# %%
import numpy as np

from speclab.eigensolve import multiplicity_cluster, solve_lowest
from speclab.geometry import make_disk
from speclab.mesh import refine, triangulate
from speclab.reference import disk_spectrum

d = make_disk(1.0, 256)
exact = np.array(disk_spectrum(1.0, 6).eigenvalues)

# %%
m = triangulate(d, 0.08)
for level in range(3):
    sr = solve_lowest(m, 6)
    err = np.abs(sr.eigenvalues - exact) / exact
    print(f"h_max={m.h_max:.4f}  n={m.n_vertices:6d}  max rel err={err.max():.2e}")
    if level < 2:
        m = refine(m)

# %%
# degenerate pairs show up as clusters
print("clusters:", multiplicity_cluster(sr.eigenvalues))
for i, (a, b) in enumerate(zip(sr.eigenvalues, exact), start=1):
    print(f"lambda_{i}: {a:10.5f}  exact {b:10.5f}")

# %% [markdown]
# # Where does the second nodal line end?
#
# On a thin ellipse the nodal line of phi_2 cuts straight across and meets
# the boundary at right angles (SP). On a disk inside an annulus joined
# through N narrow gates, it closes up inside the inner disk (NP).

# %%
import math

import numpy as np

from speclab.eigensolve import solve_lowest
from speclab.geometry import HHNParams, make_hhn, make_narrow_convex
from speclab.mesh import triangulate
from speclab.nodal import boundary_neumann_trace, classify_payne, extract_nodal_set, junction_angles
from speclab.reference import hhn_radius_search


def verdict(m, k=2):
    v = solve_lowest(m, k).vector(k)
    pv = classify_payne(boundary_neumann_trace(m, v))
    return v, pv


# %%
ell = triangulate(make_narrow_convex(1.0, 0.2), 0.02)
v, pv = verdict(ell)
ns = extract_nodal_set(ell, v)
print("ellipse:", pv.kind, "sign changes", pv.n_sign_changes)
for f in junction_angles(ns, ell, model="quadratic", v=v):
    print("  junction", np.round(f.point, 3), "angle / pi =", np.round(f.angles / math.pi, 3))

# %%
R2 = hhn_radius_search(1.0)
for N in (8, 16):
    m = triangulate(make_hhn(HHNParams(1.0, R2, N, 0.02)), 0.03)
    v, pv = verdict(m)
    ns = extract_nodal_set(m, v)
    r = np.hypot(*ns.nodes.T).max() if not ns.is_empty else 0.0
    print(f"hhn N={N:2d}: {pv.kind:13s} margin {pv.margin:.1e}  nodal radius {r:.3f}")
# With eight gates the trace sits at the band edge near the gate walls at
# this mesh size and picks up small sign changes on finer meshes.

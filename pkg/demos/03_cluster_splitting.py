# %% [markdown]
# # Splitting a double eigenvalue
#
# lambda_2 = lambda_3 on the disk. Pushing the boundary out at one point and
# in at another splits the pair; the directional matrix predicts which way
# each branch moves, and a transported-mesh solve confirms it.

# %%
import numpy as np

from speclab.eigensolve import solve_lowest
from speclab.geometry import make_disk
from speclab.mesh import transport, triangulate
from speclab.shapecalc import bump_field, directional_matrix

d = make_disk(1.0, 256)
m = triangulate(d, 0.04)
sr = solve_lowest(m, 4)
V = bump_field(d, [(1.0, 0.0), (0.0, 1.0)], [1, -1], 0.1)

dm = directional_matrix(m, sr, [2, 3], V)
print("matrix:\n", np.round(dm.entries, 4))
print("signature (+, -, 0):", dm.signature)

# %%
lam0 = np.array([sr.value(2), sr.value(3)])
for t in (1e-3, 2e-3, 4e-3):
    moved = solve_lowest(transport(m, V, t), 4)
    shift = np.array([moved.value(2), moved.value(3)]) - lam0
    print(f"t={t:.0e}  observed {shift}  predicted {dm.eigenvalues * t}")

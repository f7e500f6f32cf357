"""
Does the likelihood swamp the prior as D_c grows?
==================================================

Replicating each feature r times multiplies the plug-in log-likelihood by r
while keeping the cluster geometry.  A fixed prior (CRP) loses influence,
while FIC, whose exponent grows with D_c = 2 D r, keeps up.
"""

# %%
import numpy as np

from fablab import PriorSpec
from fablab.lab import CANONICAL_DOMINANCE_VAR_FLOOR, canonical_dominance_dataset, dominance_curve

x = canonical_dominance_dataset()
print("data:", np.round(x.ravel(), 2))
specs = [PriorSpec.crp(), PriorSpec.fic(2), PriorSpec.gfic(1.5)]
for row in dominance_curve(x, [1, 2, 4, 8, 16, 32], specs, 8, var_floor=CANONICAL_DOMINANCE_VAR_FLOOR):
    print(f"r={row.r:<3} {row.prior_kind:<5} param={row.prior_param!s:<5} TV={row.tv_distance:.4f} MAP {row.map_partition}")

# %%
# The variance floor decides which regime we are in.  The plug-in MLE never
# loses by splitting a block, so with a tiny floor every posterior piles onto
# the all-singleton partition (which FIC does not penalize at all) and both
# TV curves collapse together.
for floor in [None, 1e-2, 1e-1, 1.0]:
    rows = dominance_curve(x, [1, 8], specs[:2], 8, var_floor=floor)
    tv = {(r.r, r.prior_kind): r.tv_distance for r in rows}
    print(f"floor={floor!s:<5} CRP {tv[1, 'CRP']:.3f} -> {tv[8, 'CRP']:.3f}   FIC {tv[1, 'FIC']:.3f} -> {tv[8, 'FIC']:.3f}")

"""
Model selection with FAB-EM and the GFIC exponent
=================================================

Fits diagonal mixtures starting from ten components and lets the shrinkage
penalty prune them.  Larger d prunes harder.
"""

# %%
from collections import Counter

import numpy as np

from fablab import FabConfig, GenConfig, fab_fit, generate_gmm_data, selection_sweep
from fablab.lab import mean_selected_k

gen = GenConfig(seed=0, k_true=3, n=300, dims=2, separation=8.0)
rows = selection_sweep(gen, [1.0, 1.5, 2.0, 3.0], range(20), FabConfig(k_init=10))
for d, m in mean_selected_k(rows).items():
    print(f"d={d:<4} mean k={m:.2f}  {dict(sorted(Counter(r.selected_k for r in rows if r.d == d).items()))}")

# %%
# How good is k=3 under the penalized bound itself?  Start one fit from the
# true labels and compare with the best of several random restarts.  Without
# a mixing-weight penalty, -d * sum log n_k charges little for small or
# split components, and the bound often prefers more than three.
for seed in range(5):
    x, truth = generate_gmm_data(GenConfig(seed=seed, k_true=3, n=300, dims=2, separation=8.0))
    q0 = 0.98 * np.eye(3)[np.array(truth.labels) - 1] + 0.02 / 3
    _, t3 = fab_fit(x, FabConfig(k_init=3, d=2.0, rel_tol=1e-10, max_iters=5000), init_resp=q0)
    best = max(
        (fab_fit(x, FabConfig(k_init=10, d=2.0, seed=100 * seed + r, rel_tol=1e-10, max_iters=3000)) for r in range(6)),
        key=lambda mt: mt[1].final_objective,
    )
    print(f"seed {seed}: k=3 from truth {t3.final_objective:.2f}   best restart k={best[0].k} {best[1].final_objective:.2f}")

"""
CRP, FIC and GFIC as priors over cluster assignments
=====================================================

Scores everything in log space and checks the relationships by brute force
at small N.  Run with ``python demos/01_priors.py``.
"""

# %%
# Three assignments of four points, scored under each prior.
import math
from collections import defaultdict

from fablab import (
    Assignment,
    PriorSpec,
    assignment_counts,
    crp_class_log_prob,
    crp_sequence_log_prob,
    enumerate_assignments,
    fic_log_score,
    log_prior,
    partition_of,
)

for labels in [(1, 1, 1, 1), (1, 1, 2, 2), (1, 2, 3, 4)]:
    z = Assignment(labels, 4)
    scores = {s.kind + (f"({s.param:g})" if s.param else ""): log_prior(s, z)
              for s in (PriorSpec.crp(), PriorSpec.fic(2), PriorSpec.fic(6), PriorSpec.gfic(1.5))}
    print(labels, {k: round(v, 3) for k, v in scores.items()})

# %%
# With D_c = 2 the FIC score and the CRP class score differ by log K! for
# every assignment, so given K they rank partitions identically.
k = 3
gaps = {round(fic_log_score(assignment_counts(z), 2) - crp_class_log_prob(partition_of(z), k), 12)
        for z in enumerate_assignments(5, k)}
print("distinct gaps:", gaps, " log 3! =", round(math.log(6), 12))

# %%
# The closed class probability 1/(K! prod n_k) is the CRP mass of the
# labelings that share one count vector.  Summed over the labelings that
# induce one partition, the mass is prod (n_k - 1)! / (N! (K - m)!) instead.
n, k = 4, 2
by_counts, by_part = defaultdict(float), defaultdict(float)
for z in enumerate_assignments(n, k):
    p = math.exp(crp_sequence_log_prob(z))
    by_counts[tuple(assignment_counts(z).tolist())] += p
    by_part[partition_of(z)] += p
for b, mass in list(by_part.items())[:4]:
    print(f"{str(b):<16} partition-class mass {mass:.4f}   closed form {math.exp(crp_class_log_prob(b, k)):.4f}")
for c, mass in sorted(by_counts.items()):
    print(f"counts {c}: count-vector-class mass {mass:.4f}")

# %%
# The fixed-K normalizer summed over ordered count tuples versus over set
# partitions.  They agree only when K = 1.
from fablab.verify import normalizer_table

for n, k, comp, part in normalizer_table(4, 3):
    print(f"n={n} k={k}  compositions {str(comp):>6}  partitions {str(part):>6}")

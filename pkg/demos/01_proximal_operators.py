"""How the four sparsity regularizers act on a factor matrix.

A single proximal step is applied to a Gaussian P (200 features, rank 30)
and we count how many pairwise interactions and how many features the
resulting W = Q Q^T still uses.
"""

import numpy as np

from sparsefm.bench import prox_selection_curve
from sparsefm.prox import prox_sq_l1_rand, prox_sq_l1_sort

d, k = 200, 30
rows = prox_selection_curve(d=d, k=k, lambdas=[2.0**e for e in range(-7, 8, 2)])

print(f"{'reg':>4} {'lambda':>9} {'interactions':>13} {'features':>9}")
for r in rows:
    print(f"{r['reg']:>4} {r['lam']:>9.4g} {r['n_interactions']:>13} {r['n_features']:>9}")

# L1 and L21 only switch between "all pairs" and "nothing": an interaction
# survives as long as any of its k products does. The squared column-wise
# l1 prox removes interactions gradually, and the squared l21 prox removes
# whole features one at a time.

# The squared l1 prox has an exact O(d log d) solution by sorting and an
# expected linear-time randomized variant. Both give the same point.
rng = np.random.default_rng(0)
p = rng.standard_normal(2**12)
a = prox_sq_l1_sort(p, 0.01)
b = prox_sq_l1_rand(p, 0.01, rng=1)
print("\nnonzeros kept:", a.theta, "| max difference sort vs rand:", np.max(np.abs(a.output - b.output)))

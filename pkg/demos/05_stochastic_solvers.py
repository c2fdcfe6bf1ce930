"""Coordinate descent against stochastic solvers on a larger sparse problem.

SGD applies the l2 shrinkage lazily, so a step only touches the nonzero
features of one sample. Proximal SGD adds the TI or CS prox after each
mini-batch.
"""

import numpy as np
import scipy.sparse as sp

from sparsefm import RegularizerSpec, SparseDesignMatrix, TrainConfig, objective_value, train

rng = np.random.default_rng(0)
N, d = 20000, 40
X = SparseDesignMatrix(sp.random(N, d, density=0.2, format="csr", random_state=rng,
                                 data_rvs=rng.standard_normal))
W = np.triu(rng.standard_normal((d, d)) * (rng.random((d, d)) < 0.1), 1)
Xd = X.csr.toarray()
y = np.einsum("ni,ij,nj->n", Xd, W, Xd) + 0.1 * rng.standard_normal(N)

spec = RegularizerSpec("L2SQ", 1e-4, 1e-4, 0.0)
for solver, extra in (("cd", {}), ("sgd", {"eta0": 0.003})):
    cfg = TrainConfig(spec=spec, k=8, max_epochs=10**6, tol=1e-12, time_budget=1.5, solver=solver,
                      record_objective=False, **extra)
    model, history = train("fm", X, y, cfg)
    print(f"{solver:>4}: epochs={history[-1][0]:<4} objective={objective_value(model, X, y, 'squared', spec):.4f}")

spec = RegularizerSpec("TI", 1e-4, 1e-4, 1e-3)
cfg = TrainConfig(spec=spec, k=8, max_epochs=20, tol=1e-12, solver="psgd", eta0=0.003, record_objective=False)
model, _ = train("fm", X, y, cfg)
print(f"psgd/TI: objective={objective_value(model, X, y, 'squared', spec):.4f} "
      f"zero factor entries={np.mean(model.P == 0):.2%}")

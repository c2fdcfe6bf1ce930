"""Model containers and evaluation: FMs, higher-order FMs and the
all-subsets model."""

from dataclasses import dataclass, field

import numpy as np

from .numcore import as_design_matrix


@dataclass
class FmModel:
    w: np.ndarray
    P: np.ndarray
    bias: float = 0.0
    use_linear: bool = True

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.P = np.asarray(self.P, dtype=np.float64)
        if self.P.ndim != 2 or self.P.shape[0] != self.w.shape[0]:
            raise ValueError(f"P shape {self.P.shape} does not match w length {self.w.shape[0]}")

    @property
    def n_features(self):
        return self.P.shape[0]

    @classmethod
    def zeros(cls, d, k, use_linear=True):
        return cls(np.zeros(d), np.zeros((d, k)), 0.0, use_linear)

    def copy(self):
        return FmModel(self.w.copy(), self.P.copy(), self.bias, self.use_linear)


@dataclass
class HofmModel:
    w: np.ndarray
    P_by_order: list = field(default_factory=list)
    bias: float = 0.0
    use_linear: bool = True

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.P_by_order = [np.asarray(P, dtype=np.float64) for P in self.P_by_order]
        if not self.P_by_order:
            raise ValueError("HOFM needs at least one factor matrix (order 2)")
        d = self.w.shape[0]
        for P in self.P_by_order:
            if P.ndim != 2 or P.shape[0] != d:
                raise ValueError(f"factor matrix shape {P.shape} does not match d={d}")

    @property
    def order(self):
        return len(self.P_by_order) + 1

    @property
    def n_features(self):
        return self.w.shape[0]

    def copy(self):
        return HofmModel(self.w.copy(), [P.copy() for P in self.P_by_order], self.bias, self.use_linear)


@dataclass
class AllSubsetsModel:
    P: np.ndarray

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=np.float64)
        if self.P.ndim != 2:
            raise ValueError(f"P must be a matrix, got shape {self.P.shape}")

    @property
    def n_features(self):
        return self.P.shape[0]

    def copy(self):
        return AllSubsetsModel(self.P.copy())


def _sparse_row(x, d):
    """Normalize a row given as (indices, values), a dense vector or a
    1 x d sparse matrix into (indices, values)."""
    if isinstance(x, tuple):
        idx, val = x
        idx = np.asarray(idx, dtype=np.int64)
        val = np.asarray(val, dtype=np.float64)
    elif hasattr(x, "tocsr"):
        r = x.tocsr()
        idx, val = r.indices.astype(np.int64), r.data
    else:
        x = np.asarray(x, dtype=np.float64).ravel()
        if x.shape[0] != d:
            raise ValueError(f"dense row has length {x.shape[0]}, model expects {d}")
        idx = np.nonzero(x)[0]
        val = x[idx]
    if idx.size and (idx.min() < 0 or idx.max() >= d):
        raise ValueError(f"feature index out of range [0, {d})")
    return idx, val


def fm_predict(model, x):
    idx, val = _sparse_row(x, model.n_features)
    Px = model.P[idx]
    a = val @ Px
    b = (val**2) @ (Px**2)
    out = model.bias + 0.5 * float(np.sum(a * a - b))
    if model.use_linear:
        out += float(val @ model.w[idx])
    return out


def fm_predict_batch(model, X):
    X = as_design_matrix(X)
    if X.n_cols != model.n_features:
        raise ValueError(f"data has {X.n_cols} features, model expects {model.n_features}")
    csr = X.csr
    A = csr @ model.P
    B = csr.multiply(csr) @ (model.P**2)
    out = model.bias + 0.5 * np.sum(A * A - B, axis=1)
    if model.use_linear:
        out += csr @ model.w
    return np.asarray(out).ravel()


def _check_order(m):
    if int(m) != m or m < 0:
        raise ValueError(f"order must be a non-negative integer, got {m}")


def anova_table(v, m):
    """Row t of the returned (m+1,) vector is K_A^t over the products v."""
    table = np.zeros(m + 1)
    table[0] = 1.0
    for vi in v:
        # descending t so each product enters a subset at most once
        for t in range(m, 0, -1):
            table[t] += vi * table[t - 1]
    return table


def anova_kernel(p, x, m):
    if m < 1:
        raise ValueError(f"ANOVA order must be >= 1, got {m}")
    _check_order(m)
    p = np.asarray(p, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if p.shape != x.shape:
        raise ValueError("p and x must have the same length")
    if m > p.shape[0]:
        return 0.0
    return float(anova_table(p * x, m)[m])


def anova_grad(p, x, m):
    """Gradient of K_A^m(p, x) with respect to p.

    Entry j equals x_j * K_A^{m-1}(x without j, p without j), obtained
    from a forward table over prefixes and a backward table over suffixes.
    """
    if m < 1:
        raise ValueError(f"ANOVA order must be >= 1, got {m}")
    p = np.asarray(p, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if p.shape != x.shape:
        raise ValueError("p and x must have the same length")
    d = p.shape[0]
    grad = np.zeros(d)
    if m > d:
        return grad
    v = p * x
    fwd = np.zeros((d + 1, m))
    fwd[0, 0] = 1.0
    for i in range(d):
        fwd[i + 1] = fwd[i]
        fwd[i + 1, 1:] += v[i] * fwd[i, :-1]
    bwd = np.zeros((d + 1, m))
    bwd[d, 0] = 1.0
    for i in range(d - 1, -1, -1):
        bwd[i] = bwd[i + 1]
        bwd[i, 1:] += v[i] * bwd[i + 1, :-1]
    for j in range(d):
        if x[j] == 0.0:
            continue
        # K^{m-1} of everything but j = sum_t prefix^t * suffix^{m-1-t}
        grad[j] = x[j] * np.dot(fwd[j], bwd[j + 1][::-1])
    return grad


def all_subsets_kernel(p, x):
    p = np.asarray(p, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if p.shape != x.shape:
        raise ValueError("p and x must have the same length")
    nz = x != 0
    return float(np.prod(1.0 + x[nz] * p[nz]))


def hofm_predict(model, x):
    idx, val = _sparse_row(x, model.n_features)
    out = model.bias
    if model.use_linear:
        out += float(val @ model.w[idx])
    for m, P in enumerate(model.P_by_order, start=2):
        for s in range(P.shape[1]):
            if m <= idx.size:
                out += anova_table(val * P[idx, s], m)[m]
    return float(out)


def hofm_predict_batch(model, X):
    X = as_design_matrix(X)
    return np.array([hofm_predict(model, X.row(n)) for n in range(X.n_rows)])


def all_subsets_predict(model, x):
    idx, val = _sparse_row(x, model.n_features)
    return float(np.sum(np.prod(1.0 + val[:, None] * model.P[idx], axis=0)))


def all_subsets_predict_batch(model, X):
    X = as_design_matrix(X)
    return np.array([all_subsets_predict(model, X.row(n)) for n in range(X.n_rows)])


def predict_batch(model, X):
    if isinstance(model, FmModel):
        return fm_predict_batch(model, X)
    if isinstance(model, HofmModel):
        return hofm_predict_batch(model, X)
    if isinstance(model, AllSubsetsModel):
        return all_subsets_predict_batch(model, X)
    raise TypeError(f"unknown model type {type(model).__name__}")

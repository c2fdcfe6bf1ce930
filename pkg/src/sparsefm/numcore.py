"""Numeric containers shared by the rest of the package.

Dense matrices are plain ``float64`` numpy arrays. The design matrix keeps
both a CSR (row access, used by SGD and prediction) and a CSC (column
access, used by coordinate descent) view, materialized once at
construction.

Random streams come from numpy's ``PCG64`` bit generator, whose algorithm
and seeding are documented and stable across platforms.
"""

import numpy as np
import scipy.sparse as sp


def make_rng(seed):
    """Return a ``numpy.random.Generator`` backed by PCG64."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def dense_new(rows, cols, fill=0.0):
    if rows < 0 or cols < 0:
        raise ValueError(f"negative shape ({rows}, {cols})")
    return np.full((rows, cols), float(fill), dtype=np.float64)


def gaussian_fill(rng, rows, cols, mean=0.0, std=1.0):
    if std < 0:
        raise ValueError(f"std must be non-negative, got {std}")
    rng = make_rng(rng)
    return mean + std * rng.standard_normal((rows, cols))


class SparseDesignMatrix:
    """Immutable N x d design matrix with row and column views.

    ``csr`` and ``csc`` are scipy matrices with sorted indices and no
    explicit zeros. The raw index arrays (``row_indptr``, ``col_indices``
    ...) are exposed for the compiled training kernels.
    """

    def __init__(self, matrix):
        csr = sp.csr_matrix(matrix, dtype=np.float64, copy=True)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        if not np.all(np.isfinite(csr.data)):
            raise ValueError("design matrix contains non-finite values")
        csc = csr.tocsc()
        csc.sort_indices()
        self.csr = csr
        self.csc = csc
        for m in (csr, csc):
            m.indptr = m.indptr.astype(np.int64)
            m.indices = m.indices.astype(np.int64)

    @classmethod
    def from_dense(cls, X):
        return cls(np.asarray(X, dtype=np.float64))

    @property
    def shape(self):
        return self.csr.shape

    @property
    def n_rows(self):
        return self.csr.shape[0]

    @property
    def n_cols(self):
        return self.csr.shape[1]

    @property
    def nnz(self):
        return self.csr.nnz

    def row(self, n):
        lo, hi = self.csr.indptr[n], self.csr.indptr[n + 1]
        return self.csr.indices[lo:hi], self.csr.data[lo:hi]

    def col(self, j):
        lo, hi = self.csc.indptr[j], self.csc.indptr[j + 1]
        return self.csc.indices[lo:hi], self.csc.data[lo:hi]

    def row_triplets(self):
        coo = self.csr.tocoo()
        return sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))

    def col_triplets(self):
        out = []
        for j in range(self.n_cols):
            idx, val = self.col(j)
            out.extend((int(n), j, float(v)) for n, v in zip(idx, val))
        return sorted(out)

    def toarray(self):
        return self.csr.toarray()

    def take_rows(self, rows):
        return SparseDesignMatrix(self.csr[np.asarray(rows)])

    def __repr__(self):
        return f"SparseDesignMatrix(shape={self.shape}, nnz={self.nnz})"


def sparse_from_triplets(n_rows, n_cols, entries):
    rows, cols, vals = [], [], []
    seen = set()
    for r, c, v in entries:
        if not (0 <= r < n_rows and 0 <= c < n_cols):
            raise ValueError(f"entry ({r}, {c}) out of range for shape ({n_rows}, {n_cols})")
        if (r, c) in seen:
            raise ValueError(f"duplicate coordinate ({r}, {c})")
        seen.add((r, c))
        if v != 0.0:
            rows.append(r)
            cols.append(c)
            vals.append(float(v))
    m = sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_cols), dtype=np.float64)
    return SparseDesignMatrix(m)


def as_design_matrix(X):
    if isinstance(X, SparseDesignMatrix):
        return X
    if sp.issparse(X):
        return SparseDesignMatrix(X)
    return SparseDesignMatrix.from_dense(X)

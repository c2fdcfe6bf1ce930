"""Synthetic support-recovery tasks with a known block interaction matrix.

True features come in ``n_blocks`` equal groups with equicorrelated
Gaussian values; each pair inside a group interacts with weight 1. Noise
features are independent standard normals and interact with nothing. The
target is the quadratic form without a linear term plus Gaussian noise.
"""

from dataclasses import dataclass

import numpy as np

from .numcore import SparseDesignMatrix, make_rng


@dataclass(frozen=True)
class SyntheticSpec:
    d_true: int = 80
    n_blocks: int = 8
    d_noise: int = 20
    n_samples: int = 200
    feature_corr: float = 0.2
    target_noise_std: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("d_true", "n_blocks", "d_noise", "n_samples"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.n_blocks < 1 or self.d_true % self.n_blocks:
            raise ValueError(f"d_true={self.d_true} is not divisible by n_blocks={self.n_blocks}")
        _check_corr(self.feature_corr, self.block_size)
        if self.target_noise_std < 0:
            raise ValueError("target_noise_std must be non-negative")

    @property
    def block_size(self):
        return self.d_true // self.n_blocks

    @property
    def d(self):
        return self.d_true + self.d_noise

    @classmethod
    def interaction_setting(cls, n_samples=200, seed=0):
        return cls(80, 8, 20, n_samples, seed=seed)

    @classmethod
    def feature_setting(cls, n_samples=200, seed=0):
        return cls(20, 1, 80, n_samples, seed=seed)


@dataclass
class SyntheticTask:
    W_true: np.ndarray
    X: SparseDesignMatrix
    y: np.ndarray
    spec: SyntheticSpec = None

    @property
    def true_features(self):
        return np.arange(self.spec.d_true)


def _check_corr(corr, size):
    # equicorrelation matrix is PD iff 1 - corr > 0 and 1 + (size - 1) corr > 0
    if not (-1.0 < corr < 1.0):
        raise ValueError(f"feature_corr must lie in (-1, 1), got {corr}")
    if size > 1 and not 1.0 + (size - 1) * corr > 0:
        raise ValueError(f"feature_corr={corr} gives a non positive definite block of size {size}")


def sample_correlated_block(rng, size, corr, n=None):
    """Draw from N(0, (1 - corr) I + corr 11^T) as
    sqrt(corr) z0 + sqrt(1 - corr) z.

    Negative ``corr`` is not representable by a shared factor, so it falls
    back to a Cholesky factor of the block. Returns shape (size,) or
    (n, size).
    """
    _check_corr(corr, size)
    rng = make_rng(rng)
    shape = (size,) if n is None else (n, size)
    if size == 1:
        return rng.standard_normal(shape)
    if corr >= 0:
        z0 = rng.standard_normal(() if n is None else (n, 1))
        z = rng.standard_normal(shape)
        return np.sqrt(corr) * z0 + np.sqrt(1.0 - corr) * z
    cov = np.full((size, size), corr) + (1.0 - corr) * np.eye(size)
    L = np.linalg.cholesky(cov)
    return rng.standard_normal(shape) @ L.T


def block_interactions(spec):
    d = spec.d
    W = np.zeros((d, d))
    b = spec.block_size
    for g in range(spec.n_blocks):
        W[g * b:(g + 1) * b, g * b:(g + 1) * b] = 1.0
    return np.triu(W, 1)


def quadratic_target(W, X):
    """sum_{i<j} W_ij x_i x_j for each row of the dense array X, summed
    pair by pair in row-major order over the nonzero strict-upper W."""
    X = np.asarray(X, dtype=np.float64)
    out = np.zeros(X.shape[0])
    rows, cols = np.nonzero(np.triu(W, 1))
    for i, j in zip(rows, cols):
        out += W[i, j] * X[:, i] * X[:, j]
    return out


def generate(spec):
    rng = make_rng(spec.seed)
    N = spec.n_samples
    parts = [sample_correlated_block(rng, spec.block_size, spec.feature_corr, n=N)
             for _ in range(spec.n_blocks)]
    parts.append(rng.standard_normal((N, spec.d_noise)))
    Xd = np.hstack(parts) if parts else np.zeros((N, 0))
    W = block_interactions(spec)
    y = quadratic_target(W, Xd) + spec.target_noise_std * rng.standard_normal(N)
    return SyntheticTask(W, SparseDesignMatrix.from_dense(Xd), y, spec)

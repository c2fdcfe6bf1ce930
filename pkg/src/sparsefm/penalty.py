"""Regularizer values, losses and regularized objectives."""

import enum
from dataclasses import dataclass

import numpy as np

from .kernels import AllSubsetsModel, FmModel, HofmModel, anova_kernel, predict_batch
from .numcore import as_design_matrix


class Kind(str, enum.Enum):
    L2SQ = "L2SQ"
    L1 = "L1"
    L21 = "L21"
    TI = "TI"
    CS = "CS"
    TI_M = "TI_M"
    CS_M = "CS_M"
    TI_ALL = "TI_ALL"
    CS_ALL = "CS_ALL"


class LossKind(str, enum.Enum):
    SQUARED = "squared"
    LOGISTIC = "logistic"


# smoothness constants of the loss derivative
LOSS_MU = {LossKind.SQUARED: 1.0, LossKind.LOGISTIC: 0.25}


def loss_value(loss, f, y):
    loss = LossKind(loss)
    f = np.asarray(f, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if loss is LossKind.SQUARED:
        return 0.5 * (f - y) ** 2
    return np.logaddexp(0.0, -y * f)


def loss_derivative(loss, f, y):
    loss = LossKind(loss)
    f = np.asarray(f, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if loss is LossKind.SQUARED:
        return f - y
    z = -y * f
    # -y * sigmoid(z), evaluated without overflow
    return -y * np.exp(-np.logaddexp(0.0, -z))


@dataclass(frozen=True)
class RegularizerSpec:
    kind: Kind = Kind.L2SQ
    lambda_w: float = 0.0
    lambda_p: float = 0.0
    lambda_tilde: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        for name in ("lambda_w", "lambda_p", "lambda_tilde"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")


def omega_star(P):
    """Sum of |<p_i, p_j>| over i < j. O(d^2 k), diagnostics only."""
    P = np.asarray(P, dtype=np.float64)
    G = P @ P.T
    return float(np.sum(np.abs(np.triu(G, 1))))


def omega_ti(P):
    P = np.asarray(P, dtype=np.float64)
    col_l1 = np.sum(np.abs(P), axis=0)
    return float(0.5 * (np.sum(col_l1**2) - np.sum(P * P)))


def omega_cs(P):
    P = np.asarray(P, dtype=np.float64)
    norms = np.linalg.norm(P, axis=1)
    return float(0.5 * (np.sum(norms) ** 2 - np.sum(norms**2)))


def _check_m(P, m):
    d = P.shape[0]
    if int(m) != m or m < 1 or m > d:
        raise ValueError(f"order m must satisfy 1 <= m <= d={d}, got {m}")


def omega_ti_m(P, m):
    P = np.asarray(P, dtype=np.float64)
    _check_m(P, m)
    ones = np.ones(P.shape[0])
    return float(sum(anova_kernel(np.abs(P[:, s]), ones, m) for s in range(P.shape[1])))


def omega_cs_m(P, m):
    P = np.asarray(P, dtype=np.float64)
    _check_m(P, m)
    return anova_kernel(np.linalg.norm(P, axis=1), np.ones(P.shape[0]), m)


def omega_all(P, kind):
    """Raw all-subsets kernel sum; includes the empty-subset term."""
    P = np.asarray(P, dtype=np.float64)
    kind = Kind(kind)
    if kind is Kind.TI_ALL:
        return float(np.sum(np.prod(1.0 + np.abs(P), axis=0)))
    if kind is Kind.CS_ALL:
        return float(np.prod(1.0 + np.linalg.norm(P, axis=1)))
    raise ValueError(f"omega_all expects TI_ALL or CS_ALL, got {kind.value}")


def _factor_penalty(P, kind, m):
    if kind is Kind.L2SQ:
        return 0.0
    if kind is Kind.L1:
        return float(np.sum(np.abs(P)))
    if kind is Kind.L21:
        return float(np.sum(np.linalg.norm(P, axis=1)))
    if kind is Kind.TI:
        return omega_ti(P)
    if kind is Kind.CS:
        return omega_cs(P)
    if kind is Kind.TI_M:
        return omega_ti_m(P, m) if m <= P.shape[0] else 0.0
    if kind is Kind.CS_M:
        return omega_cs_m(P, m) if m <= P.shape[0] else 0.0
    return omega_all(P, kind)


def penalty_value(model, spec):
    """lambda_w ||w||^2 + sum over factor matrices of
    lambda_p ||P||^2 + lambda_tilde * Omega_kind(P)."""
    spec = spec if isinstance(spec, RegularizerSpec) else RegularizerSpec(**spec)
    total = 0.0
    if isinstance(model, AllSubsetsModel):
        blocks = [(model.P, None)]
    else:
        if model.use_linear:
            total += spec.lambda_w * float(model.w @ model.w)
        if isinstance(model, HofmModel):
            blocks = [(P, m) for m, P in enumerate(model.P_by_order, start=2)]
        else:
            blocks = [(model.P, 2)]
    for P, m in blocks:
        total += spec.lambda_p * float(np.sum(P * P))
        if spec.lambda_tilde:
            total += spec.lambda_tilde * _factor_penalty(P, spec.kind, m)
    return total


def objective_value(model, data, labels, loss, spec):
    X = as_design_matrix(data)
    y = np.asarray(labels, dtype=np.float64)
    if X.n_rows != y.shape[0]:
        raise ValueError(f"{X.n_rows} rows but {y.shape[0]} labels")
    f = predict_batch(model, X)
    data_term = float(np.mean(loss_value(loss, f, y))) if y.size else 0.0
    return data_term + penalty_value(model, spec)


def l1_interaction_objective(model, data, labels, loss, lam_w, lam_tilde):
    """Loss + lam_w ||w||^2 + lam_tilde * ||W||_1 with W = P P^T
    (diagonal included), i.e. lam_tilde * (2 Omega_* + ||P||^2)."""
    X = as_design_matrix(data)
    y = np.asarray(labels, dtype=np.float64)
    if X.n_rows != y.shape[0]:
        raise ValueError(f"{X.n_rows} rows but {y.shape[0]} labels")
    f = predict_batch(model, X)
    data_term = float(np.mean(loss_value(loss, f, y))) if y.size else 0.0
    lin = lam_w * float(model.w @ model.w) if model.use_linear else 0.0
    P = model.P
    return data_term + lin + lam_tilde * (2.0 * omega_star(P) + float(np.sum(P * P)))


def _exact_root_pair(v):
    """a ~ b ~ sqrt(v) with fl(a * b) == v.

    sqrt(v)**2 misses v by an ulp for most v, and so does every pair a few
    ulps from the root, because the residual of a * b barely moves there.
    Relative steps of 2**-27 in a decorrelate it while keeping
    a**2 + b**2 within about 1e-15 of 2 v.
    """
    root = float(np.sqrt(v))
    if root == 0.0:
        return 0.0, 0.0
    for step in range(64):
        a = root * (1.0 + step * 2.0**-27)
        b = v / a
        for cand in (b, np.nextafter(b, np.inf), np.nextafter(b, 0.0)):
            if a * cand == v:
                return a, float(cand)
    return root, v / root


def exact_ti_factorization(W):
    """Factor P with strict-upper(P P^T) = strict-upper(W) and
    Omega_TI(P) = ||W||_1 (strict upper part).

    Builds the d x d^2 matrix whose block ``i`` holds row i of W on row i
    and sqrt|w_ij| on row j > i, then drops its d(d+1)/2 structurally zero
    columns, leaving d(d-1)/2 columns.
    """
    W = np.triu(np.asarray(W, dtype=np.float64), 1)
    d = W.shape[0]
    cols = []
    for i in range(d):
        for l in range(i + 1, d):
            a, b = _exact_root_pair(abs(W[i, l]))
            col = np.zeros(d)
            col[i] = np.sign(W[i, l]) * a
            col[l] = b
            cols.append(col)
    if not cols:
        return np.zeros((d, 0))
    return np.column_stack(cols)

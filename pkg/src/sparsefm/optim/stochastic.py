"""Stochastic solvers for plain FMs: SGD with lazy l2 shrinkage and
mini-batch proximal SGD."""

import math

import numpy as np

from ..kernels import FmModel, fm_predict_batch
from ..numcore import as_design_matrix, make_rng
from ..penalty import Kind, loss_derivative
from ..prox import prox_l1, prox_l21_rows, prox_sq_l1_columns, prox_sq_l21
from . import _kernels as K
from .core import DivergenceError, check_finite


def step_size(eta0, lam, t):
    """Diminishing schedule eta_t = eta0 / (1 + eta0 * lam * t)."""
    return eta0 / (1.0 + eta0 * lam * t)


def _setup(state, data, y):
    X = as_design_matrix(data)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.shape != (X.n_rows,):
        raise ValueError(f"{X.n_rows} rows but labels of shape {y.shape}")
    if not isinstance(state.model, FmModel):
        raise TypeError("stochastic solvers need an FmModel")
    if state.rng is None:
        state.rng = make_rng(0)
    return X, y


def sgd_epoch_fm(state, data, y, cfg):
    """One pass over a random permutation of the rows.

    The l2 shrinkage of untouched features is deferred through the running
    products alpha_w, alpha_p and applied when a feature next appears; a
    final pass applies the outstanding factors to every row.
    """
    if cfg.spec.kind is not Kind.L2SQ:
        raise ValueError(f"sgd_epoch_fm expects L2SQ, got {cfg.spec.kind.value}")
    X, y = _setup(state, data, y)
    model = state.model
    d, k = model.P.shape
    state.epoch += 1
    w_old = model.w.copy()
    P_old = model.P.copy()
    alpha = np.ones(2)
    alpha_wj = np.ones(d)
    alpha_pj = np.ones(d)
    max_row = int(np.max(np.diff(X.csr.indptr))) if X.n_rows else 0
    grad_p = np.zeros((max(max_row, 1), k))
    a = np.zeros(k)
    bias = np.array([model.bias])
    order = state.rng.permutation(X.n_rows).astype(np.int64)
    fit_linear = cfg.fit_linear and model.use_linear
    sp = cfg.spec
    t = K.fm_sgd_epoch_lazy(X.csr.indptr, X.csr.indices, X.csr.data, y, order, model.w, model.P,
                            bias, sp.lambda_w, sp.lambda_p, cfg.eta0, state.step, cfg.loss_code,
                            fit_linear, cfg.fit_bias, alpha, alpha_wj, alpha_pj, grad_p, a)
    if t < 0:
        raise DivergenceError(state.epoch, "step size (shrinkage factor <= 0)")
    K.lazy_finalize(model.w, model.P, alpha, alpha_wj, alpha_pj, fit_linear)
    model.bias = float(bias[0])
    state.step = t
    state.f_cache = fm_predict_batch(model, X)
    state.last_change = float(max(np.max(np.abs(model.w - w_old), initial=0.0),
                                  np.max(np.abs(model.P - P_old), initial=0.0)))
    check_finite(state)
    return state


def default_batch_size(X):
    """ceil(N d / nnz(X)): a mini-batch with about d nonzeros."""
    if X.nnz == 0:
        return max(X.n_rows, 1)
    return max(1, math.ceil(X.n_rows * X.n_cols / X.nnz))


def fm_gradients(model, Xb, yb, loss):
    """Mean loss gradients (bias, w, P) over the rows of the CSR block Xb."""
    A = Xb @ model.P
    sq = Xb.multiply(Xb).tocsr()
    f = model.bias + 0.5 * np.sum(A * A - sq @ (model.P**2), axis=1)
    if model.use_linear:
        f = f + Xb @ model.w
    dl = loss_derivative(loss, np.asarray(f).ravel(), yb)
    B = Xb.shape[0]
    g_b = float(np.mean(dl))
    g_w = np.asarray(Xb.T @ dl).ravel() / B
    g_P = (np.asarray(Xb.T @ (dl[:, None] * A)) - np.asarray(sq.T @ dl).ravel()[:, None] * model.P) / B
    return g_b, g_w, g_P


def factor_prox(P, t, kind, lam_tilde, algo="sort", rng=None):
    """Prox step on P for step size t. TI and CS use the squared-norm forms
    with strength t * lam_tilde / 2; the -lam_tilde/2 ||P||^2 remainder of
    Omega is kept in the smooth part by the caller."""
    if kind is Kind.L1:
        return prox_l1(P, t * lam_tilde)
    if kind is Kind.L21:
        return prox_l21_rows(P, t * lam_tilde)
    if kind is Kind.TI:
        return prox_sq_l1_columns(P, 0.5 * t * lam_tilde, algo=algo, rng=rng)
    if kind is Kind.CS:
        return prox_sq_l21(P, 0.5 * t * lam_tilde, algo=algo, rng=rng)
    raise ValueError(f"no PSGD prox for kind {kind.value}")


def psgd_epoch(state, data, y, cfg):
    """Mini-batch proximal SGD: gradient step on w, P and the bias, then the
    full proximal map on P, once per mini-batch."""
    kind = cfg.spec.kind
    if kind not in (Kind.TI, Kind.CS, Kind.L1, Kind.L21):
        raise ValueError(f"psgd_epoch expects TI, CS, L1 or L21, got {kind.value}")
    X, y = _setup(state, data, y)
    model = state.model
    sp = cfg.spec
    state.epoch += 1
    w_old = model.w.copy()
    P_old = model.P.copy()
    B = cfg.batch_size or default_batch_size(X)
    # Omega_TI = (||P^T||_{1,2}^2 - ||P||^2) / 2, same for CS with ||P||_{2,1}
    lam_smooth = sp.lambda_p - (0.5 * sp.lambda_tilde if kind in (Kind.TI, Kind.CS) else 0.0)
    fit_linear = cfg.fit_linear and model.use_linear
    order = state.rng.permutation(X.n_rows)
    csr = X.csr
    for start in range(0, X.n_rows, B):
        rows = order[start:start + B]
        state.step += 1
        eta = step_size(cfg.eta0, sp.lambda_p, state.step)
        g_b, g_w, g_P = fm_gradients(model, csr[rows], y[rows], cfg.loss)
        if cfg.fit_bias:
            model.bias -= eta * g_b
        if fit_linear:
            model.w -= eta * (g_w + 2.0 * sp.lambda_w * model.w)
        P = model.P - eta * (g_P + 2.0 * lam_smooth * model.P)
        model.P = factor_prox(P, eta, kind, sp.lambda_tilde, cfg.prox_algo, state.rng)
    state.f_cache = fm_predict_batch(model, X)
    state.last_change = float(max(np.max(np.abs(model.w - w_old), initial=0.0),
                                  np.max(np.abs(model.P - P_old), initial=0.0)))
    check_finite(state)
    return state

"""Epoch functions for the coordinate methods.

Each function performs one full sweep in the fixed order bias, w
(ascending j), then the factor parameters, mutating ``state`` in place and
returning it. ``state.last_change`` receives the largest absolute
parameter change of the sweep.
"""

import numpy as np

from ..kernels import AllSubsetsModel, FmModel, HofmModel, predict_batch
from ..numcore import as_design_matrix
from ..penalty import Kind
from . import _kernels as K
from .core import TrainState, check_finite


def _labels(y, X):
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.shape != (X.n_rows,):
        raise ValueError(f"{X.n_rows} rows but labels of shape {y.shape}")
    return y


def init_state(model, data, y, rng=None):
    """Fresh state with predictions computed from scratch."""
    X = as_design_matrix(data)
    _labels(y, X)
    f = np.ascontiguousarray(predict_batch(model, X), dtype=np.float64)
    return TrainState(model=model, f_cache=f, rng=rng)


def _require(cfg, kinds, name):
    if cfg.spec.kind not in kinds:
        allowed = ", ".join(k.value for k in kinds)
        raise ValueError(f"{name} expects regularizer kind in {{{allowed}}}, got {cfg.spec.kind.value}")


def _csc(X):
    c = X.csc
    return c.indptr, c.indices, c.data


def _linear(state, X, y, cfg):
    model = state.model
    ip, ix, dv = _csc(X)
    bias = np.array([model.bias])
    fit_linear = cfg.fit_linear and model.use_linear
    change = K.linear_epoch(ip, ix, dv, y, state.f_cache, model.w, bias, cfg.spec.lambda_w,
                            cfg.loss_code, cfg.mu, fit_linear, cfg.fit_bias)
    model.bias = float(bias[0])
    return change


def _epoch_fm_coordinate(state, data, y, cfg):
    X = as_design_matrix(data)
    y = _labels(y, X)
    model = state.model
    if not isinstance(model, FmModel):
        raise TypeError("coordinate FM epochs need an FmModel")
    state.epoch += 1
    change = _linear(state, X, y, cfg)
    d, k = model.P.shape
    if state.a_cache is None or state.a_cache.shape != (X.n_rows,):
        state.a_cache = np.zeros(X.n_rows)
    if state.c_cache is None or state.c_cache.shape != (k,):
        state.c_cache = np.zeros(k)
    ip, ix, dv = _csc(X)
    sp = cfg.spec
    change = max(change, K.fm_pcd_epoch(ip, ix, dv, y, state.f_cache, model.P, sp.lambda_p,
                                        sp.lambda_tilde, cfg.reg_code, cfg.loss_code, cfg.mu,
                                        state.a_cache, state.c_cache))
    state.last_change = change
    check_finite(state)
    return state


def _epoch_fm_block(state, data, y, cfg):
    X = as_design_matrix(data)
    y = _labels(y, X)
    model = state.model
    if not isinstance(model, FmModel):
        raise TypeError("block FM epochs need an FmModel")
    state.epoch += 1
    change = _linear(state, X, y, cfg)
    d, k = model.P.shape
    if state.a_cache is None or state.a_cache.shape != (X.n_rows, k):
        state.a_cache = np.zeros((X.n_rows, k))
    if state.c_cache is None or state.c_cache.shape != (1,):
        state.c_cache = np.zeros(1)
    ip, ix, dv = _csc(X)
    sp = cfg.spec
    change = max(change, K.fm_pbcd_epoch(ip, ix, dv, y, state.f_cache, model.P, sp.lambda_p,
                                         sp.lambda_tilde, cfg.reg_code, cfg.loss_code, cfg.mu,
                                         state.a_cache, state.c_cache))
    state.last_change = change
    check_finite(state)
    return state


def cd_epoch_fm(state, data, y, cfg):
    """Plain coordinate descent for an l2-regularized FM."""
    _require(cfg, (Kind.L2SQ,), "cd_epoch_fm")
    return _epoch_fm_coordinate(state, data, y, cfg)


def pcd_epoch_ti(state, data, y, cfg):
    """Proximal CD where the soft threshold of p_{j,s} is scaled by
    sum_{i != j} |p_{i,s}|."""
    _require(cfg, (Kind.TI,), "pcd_epoch_ti")
    return _epoch_fm_coordinate(state, data, y, cfg)


def pcd_epoch_l1(state, data, y, cfg):
    _require(cfg, (Kind.L1,), "pcd_epoch_l1")
    return _epoch_fm_coordinate(state, data, y, cfg)


def pbcd_epoch_cs(state, data, y, cfg):
    """Proximal block CD over rows of P; the group threshold of row j is
    scaled by sum_{i != j} ||p_i||."""
    _require(cfg, (Kind.CS,), "pbcd_epoch_cs")
    return _epoch_fm_block(state, data, y, cfg)


def pbcd_epoch_l21(state, data, y, cfg):
    _require(cfg, (Kind.L21,), "pbcd_epoch_l21")
    return _epoch_fm_block(state, data, y, cfg)


def bcd_epoch_fm(state, data, y, cfg):
    """Row-block CD for an l2-regularized FM (the block solver at zero
    sparsity strength)."""
    _require(cfg, (Kind.L2SQ,), "bcd_epoch_fm")
    return _epoch_fm_block(state, data, y, cfg)


def _hofm_epoch(state, data, y, cfg, block):
    X = as_design_matrix(data)
    y = _labels(y, X)
    model = state.model
    if not isinstance(model, HofmModel):
        raise TypeError("HOFM epochs need a HofmModel")
    M = model.order
    if not 2 <= M <= X.n_cols:
        raise ValueError(f"HOFM order must satisfy 2 <= M <= d={X.n_cols}, got {M}")
    state.epoch += 1
    change = _linear(state, X, y, cfg)
    ip, ix, dv = _csc(X)
    sp = cfg.spec
    max_col = int(np.max(np.diff(ip))) if X.n_cols else 0
    c_caches = []
    for m, P in enumerate(model.P_by_order, start=2):
        k = P.shape[1]
        if block:
            A = np.zeros((X.n_rows, k, m + 1))
            kbuf = np.zeros((max(max_col, 1), k, m))
            c = np.zeros(1)
            ch = K.hofm_pbcd_order(ip, ix, dv, y, state.f_cache, P, m, sp.lambda_p, sp.lambda_tilde,
                                   cfg.reg_code, cfg.loss_code, cfg.mu, A, kbuf, c)
        else:
            A = np.zeros((X.n_rows, m + 1))
            kbuf = np.zeros((max(max_col, 1), m))
            c = np.zeros(k)
            ch = K.hofm_pcd_order(ip, ix, dv, y, state.f_cache, P, m, sp.lambda_p, sp.lambda_tilde,
                                  cfg.reg_code, cfg.loss_code, cfg.mu, A, kbuf, c)
        change = max(change, ch)
        c_caches.append(c)
    state.c_cache = c_caches
    state.last_change = change
    check_finite(state)
    return state


def pcd_epoch_hofm_ti(state, data, y, cfg):
    """Coordinate sweep over every order's factor matrix. With TI_M the
    threshold of p^(m)_{j,s} is dOmega^m_TI / d|p^(m)_{j,s}|, from an
    ANOVA table over |p^(m)_{:,s}| with j removed."""
    _require(cfg, (Kind.TI_M, Kind.L2SQ), "pcd_epoch_hofm_ti")
    return _hofm_epoch(state, data, y, cfg, block=False)


def pbcd_epoch_hofm_cs(state, data, y, cfg):
    _require(cfg, (Kind.CS_M,), "pbcd_epoch_hofm_cs")
    return _hofm_epoch(state, data, y, cfg, block=True)


def pcd_epoch_allsubsets(state, data, y, cfg, kind=None):
    """Coordinate (TI_ALL, L2SQ) or row-block (CS_ALL) sweep for the
    all-subsets model."""
    kind = Kind(kind) if kind is not None else cfg.spec.kind
    if kind is not cfg.spec.kind:
        raise ValueError(f"kind {kind.value} does not match config kind {cfg.spec.kind.value}")
    _require(cfg, (Kind.TI_ALL, Kind.CS_ALL, Kind.L2SQ), "pcd_epoch_allsubsets")
    X = as_design_matrix(data)
    y = _labels(y, X)
    model = state.model
    if not isinstance(model, AllSubsetsModel):
        raise TypeError("all-subsets epochs need an AllSubsetsModel")
    state.epoch += 1
    P = model.P
    d, k = P.shape
    ip, ix, dv = _csc(X)
    r = X.csr
    sp = cfg.spec
    max_col = int(np.max(np.diff(ip))) if X.n_cols else 0
    if kind is Kind.CS_ALL:
        Kc = np.zeros((X.n_rows, k))
        kbuf = np.zeros((max(max_col, 1), k))
        c = np.zeros(1)
        change = K.allsubsets_pbcd_epoch(ip, ix, dv, r.indptr, r.indices, r.data, y, state.f_cache,
                                         P, sp.lambda_p, sp.lambda_tilde, cfg.reg_code,
                                         cfg.loss_code, cfg.mu, Kc, kbuf, c)
    else:
        Kc = np.zeros(X.n_rows)
        kbuf = np.zeros(max(max_col, 1))
        c = np.zeros(k)
        change = K.allsubsets_pcd_epoch(ip, ix, dv, r.indptr, r.indices, r.data, y, state.f_cache,
                                        P, sp.lambda_p, sp.lambda_tilde, cfg.reg_code,
                                        cfg.loss_code, cfg.mu, Kc, kbuf, c)
    state.a_cache = Kc
    state.c_cache = c
    state.last_change = change
    check_finite(state)
    return state

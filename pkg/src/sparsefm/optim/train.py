"""Epoch driver."""

import dataclasses
import time

import numpy as np

from ..numcore import as_design_matrix, make_rng
from ..penalty import Kind, loss_value, penalty_value
from . import epochs, stochastic
from .core import MODEL_KINDS, init_model

# kinds that the hofm / allsubsets models accept under the generic names
_KIND_ALIASES = {
    "hofm": {Kind.TI: Kind.TI_M, Kind.CS: Kind.CS_M},
    "allsubsets": {Kind.TI: Kind.TI_ALL, Kind.CS: Kind.CS_ALL},
}

_COORDINATE = {
    ("fm", Kind.L2SQ): epochs.cd_epoch_fm,
    ("fm", Kind.L1): epochs.pcd_epoch_l1,
    ("fm", Kind.TI): epochs.pcd_epoch_ti,
    ("fm", Kind.L21): epochs.pbcd_epoch_l21,
    ("fm", Kind.CS): epochs.pbcd_epoch_cs,
    ("hofm", Kind.L2SQ): epochs.pcd_epoch_hofm_ti,
    ("hofm", Kind.TI_M): epochs.pcd_epoch_hofm_ti,
    ("hofm", Kind.CS_M): epochs.pbcd_epoch_hofm_cs,
    ("allsubsets", Kind.L2SQ): epochs.pcd_epoch_allsubsets,
    ("allsubsets", Kind.TI_ALL): epochs.pcd_epoch_allsubsets,
    ("allsubsets", Kind.CS_ALL): epochs.pcd_epoch_allsubsets,
}


def resolve_config(model_kind, cfg):
    """Map generic TI/CS names onto the model's own penalty kinds."""
    if model_kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {model_kind!r}; expected one of {MODEL_KINDS}")
    kind = _KIND_ALIASES.get(model_kind, {}).get(cfg.spec.kind, cfg.spec.kind)
    if kind is not cfg.spec.kind:
        cfg = dataclasses.replace(cfg, spec=dataclasses.replace(cfg.spec, kind=kind))
    return cfg


def select_epoch(model_kind, cfg):
    kind = cfg.spec.kind
    if cfg.solver == "sgd":
        if model_kind != "fm" or kind is not Kind.L2SQ:
            raise ValueError("solver 'sgd' supports only fm with L2SQ")
        return stochastic.sgd_epoch_fm
    if cfg.solver == "psgd":
        if model_kind != "fm" or kind not in (Kind.TI, Kind.CS, Kind.L1, Kind.L21):
            raise ValueError("solver 'psgd' supports only fm with TI, CS, L1 or L21")
        return stochastic.psgd_epoch
    try:
        return _COORDINATE[(model_kind, kind)]
    except KeyError:
        raise ValueError(f"regularizer {kind.value} is not available for model kind {model_kind!r}") from None


def cached_objective(state, y, cfg):
    """Objective from the prediction cache; O(N + size of parameters)."""
    data_term = float(np.mean(loss_value(cfg.loss, state.f_cache, y))) if y.size else 0.0
    return data_term + penalty_value(state.model, cfg.spec)


def train(model_kind, data, y, cfg, model=None, callback=None):
    """Train ``model_kind`` ("fm", "hofm" or "allsubsets") on (data, y).

    Stops when the largest absolute parameter change of an epoch drops
    below ``cfg.tol``, after ``cfg.max_epochs`` epochs, or once the summed
    epoch time exceeds ``cfg.time_budget``. Returns the model and a history
    of ``(epoch, objective, seconds)`` tuples, starting with epoch 0.
    ``callback(state)`` is called after every epoch.
    """
    X = as_design_matrix(data)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.shape != (X.n_rows,):
        raise ValueError(f"{X.n_rows} rows but labels of shape {y.shape}")
    cfg = resolve_config(model_kind, cfg)
    epoch_fn = select_epoch(model_kind, cfg)
    if model is None:
        model = init_model(model_kind, X.n_cols, cfg)
    else:
        model = model.copy()
    rng = make_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
    state = epochs.init_state(model, X, y, rng)
    nan = float("nan")
    history = [(0, cached_objective(state, y, cfg) if cfg.record_objective else nan, 0.0)]
    elapsed = 0.0
    for _ in range(cfg.max_epochs):
        t0 = time.perf_counter()
        epoch_fn(state, X, y, cfg)
        elapsed += time.perf_counter() - t0
        obj = cached_objective(state, y, cfg) if cfg.record_objective else nan
        history.append((state.epoch, obj, elapsed))
        if callback is not None:
            callback(state)
        if state.last_change < cfg.tol:
            break
        if cfg.time_budget is not None and elapsed >= cfg.time_budget:
            break
    state.history = history
    return state.model, history


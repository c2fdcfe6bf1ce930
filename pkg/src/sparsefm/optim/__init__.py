"""Training loops for FMs, higher-order FMs and the all-subsets model."""

from .core import DivergenceError, TrainConfig, TrainState, init_model
from .epochs import (
    bcd_epoch_fm,
    cd_epoch_fm,
    init_state,
    pbcd_epoch_cs,
    pbcd_epoch_hofm_cs,
    pbcd_epoch_l21,
    pcd_epoch_allsubsets,
    pcd_epoch_hofm_ti,
    pcd_epoch_l1,
    pcd_epoch_ti,
)
from .stochastic import default_batch_size, factor_prox, fm_gradients, psgd_epoch, sgd_epoch_fm, step_size
from .train import cached_objective, resolve_config, select_epoch, train

__all__ = [
    "DivergenceError", "TrainConfig", "TrainState", "init_model", "init_state",
    "cd_epoch_fm", "bcd_epoch_fm", "pcd_epoch_ti", "pcd_epoch_l1", "pbcd_epoch_cs",
    "pbcd_epoch_l21", "pcd_epoch_hofm_ti", "pbcd_epoch_hofm_cs", "pcd_epoch_allsubsets",
    "sgd_epoch_fm", "psgd_epoch", "default_batch_size", "step_size", "fm_gradients", "factor_prox",
    "train", "resolve_config", "select_epoch", "cached_objective",
]

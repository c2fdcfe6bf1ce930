"""Training configuration and mutable training state."""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..kernels import AllSubsetsModel, FmModel, HofmModel
from ..numcore import gaussian_fill, make_rng
from ..penalty import LOSS_MU, Kind, LossKind, RegularizerSpec
from . import _kernels as K

MODEL_KINDS = ("fm", "hofm", "allsubsets")

_REG_CODE = {
    Kind.L2SQ: K.REG_NONE,
    Kind.L1: K.REG_L1,
    Kind.TI: K.REG_TI,
    Kind.TI_M: K.REG_TI,
    Kind.TI_ALL: K.REG_TI,
    Kind.L21: K.REG_L21,
    Kind.CS: K.REG_CS,
    Kind.CS_M: K.REG_CS,
    Kind.CS_ALL: K.REG_CS,
}

_LOSS_CODE = {LossKind.SQUARED: K.LOSS_SQUARED, LossKind.LOGISTIC: K.LOSS_LOGISTIC}


class DivergenceError(FloatingPointError):
    """Raised when an epoch produces non-finite parameters or predictions."""

    def __init__(self, epoch, what="parameters"):
        super().__init__(f"non-finite {what} after epoch {epoch}")
        self.epoch = epoch


@dataclass
class TrainConfig:
    """Hyperparameters and stopping rule of one training run.

    ``solver`` is ``"cd"`` (coordinate methods, the default) or, for plain
    FMs, ``"sgd"`` / ``"psgd"``. ``order`` is the HOFM order M.
    """

    loss: LossKind = LossKind.SQUARED
    spec: RegularizerSpec = field(default_factory=RegularizerSpec)
    k: int = 8
    max_epochs: int = 100
    tol: float = 1e-3
    seed: int = 0
    fit_linear: bool = True
    fit_bias: bool = True
    time_budget: Optional[float] = None
    order: int = 3
    init_std: float = 0.01
    solver: str = "cd"
    eta0: float = 0.01
    batch_size: Optional[int] = None
    prox_algo: str = "sort"
    record_objective: bool = True

    def __post_init__(self):
        self.loss = LossKind(self.loss)
        if not isinstance(self.spec, RegularizerSpec):
            self.spec = RegularizerSpec(**self.spec)
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_epochs < 0:
            raise ValueError(f"max_epochs must be non-negative, got {self.max_epochs}")
        if self.k < 0:
            raise ValueError(f"k must be non-negative, got {self.k}")
        if self.solver not in ("cd", "sgd", "psgd"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.time_budget is not None and not self.time_budget > 0:
            raise ValueError(f"time_budget must be positive, got {self.time_budget}")
        if not self.eta0 > 0:
            raise ValueError(f"eta0 must be positive, got {self.eta0}")

    @property
    def mu(self):
        return LOSS_MU[self.loss]

    @property
    def loss_code(self):
        return _LOSS_CODE[self.loss]

    @property
    def reg_code(self):
        return _REG_CODE[self.spec.kind]


@dataclass
class TrainState:
    """Model plus the caches kept in sync by the epoch functions.

    ``f_cache`` holds the current predictions. ``a_cache`` holds
    <x_n, p_{:,s}> for the last swept column (N,) or all columns (N, k)
    for row-block methods. ``c_cache`` holds the penalty cache as left at
    the end of the last sweep: per-column l1 sums for TI, the row-norm sum
    for CS, per-column kernel values for the all-subsets model.
    """

    model: object
    f_cache: np.ndarray
    a_cache: np.ndarray = None
    c_cache: np.ndarray = None
    epoch: int = 0
    history: list = field(default_factory=list)
    last_change: float = math.inf
    rng: object = None
    step: int = 0
    work: dict = field(default_factory=dict)


def init_model(model_kind, d, cfg):
    """Default initialization: P ~ N(0, init_std^2), w = 0, bias = 0."""
    rng = make_rng(cfg.seed)
    if model_kind == "fm":
        P = gaussian_fill(rng, d, cfg.k, 0.0, cfg.init_std)
        return FmModel(np.zeros(d), P, 0.0, cfg.fit_linear)
    if model_kind == "hofm":
        if cfg.order < 2:
            raise ValueError(f"HOFM order must be >= 2, got {cfg.order}")
        Ps = [gaussian_fill(rng, d, cfg.k, 0.0, cfg.init_std) for _ in range(2, cfg.order + 1)]
        return HofmModel(np.zeros(d), Ps, 0.0, cfg.fit_linear)
    if model_kind == "allsubsets":
        return AllSubsetsModel(gaussian_fill(rng, d, cfg.k, 0.0, cfg.init_std))
    raise ValueError(f"unknown model kind {model_kind!r}; expected one of {MODEL_KINDS}")


def check_finite(state):
    model = state.model
    blocks = [state.f_cache]
    if isinstance(model, AllSubsetsModel):
        blocks.append(model.P)
    else:
        blocks.append(model.w)
        blocks.append(np.array([model.bias]))
        blocks.extend(model.P_by_order if isinstance(model, HofmModel) else [model.P])
    for b in blocks:
        if not np.all(np.isfinite(b)):
            raise DivergenceError(state.epoch)

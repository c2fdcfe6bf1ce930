"""Sparse factorization machines with interaction- and feature-selecting
regularizers."""

__version__ = "0.1.0"

from .kernels import AllSubsetsModel, FmModel, HofmModel, predict_batch
from .numcore import SparseDesignMatrix, as_design_matrix, make_rng
from .optim import TrainConfig, train
from .penalty import Kind, LossKind, RegularizerSpec, objective_value

__all__ = [
    "AllSubsetsModel", "FmModel", "HofmModel", "predict_batch",
    "SparseDesignMatrix", "as_design_matrix", "make_rng",
    "TrainConfig", "train", "Kind", "LossKind", "RegularizerSpec", "objective_value",
]

"""Support-recovery and predictive metrics.

An interaction (i, j), i < j, counts as used iff <p_i, p_j> is exactly
nonzero. The solvers produce exact zeros through their thresholds, so no
tolerance is applied here.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass
class SupportReport:
    estimation_error: float
    f1: float
    exact_recovery: bool
    n_pred_interactions: int
    n_pred_features: int


def _upper(M):
    M = np.asarray(M, dtype=np.float64)
    return M[np.triu_indices(M.shape[0], 1)]


def estimation_error(W_true, P_hat):
    """||W - P P^T||_F / ||W||_F over the strictly upper entries."""
    w = _upper(W_true)
    denom = np.linalg.norm(w)
    if denom == 0:
        raise ValueError("W_true has no nonzero strictly upper entries")
    P_hat = np.asarray(P_hat, dtype=np.float64)
    return float(np.linalg.norm(w - _upper(P_hat @ P_hat.T)) / denom)


def _supports(W_true, P_hat):
    P_hat = np.asarray(P_hat, dtype=np.float64)
    true = _upper(W_true) != 0
    pred = _upper(P_hat @ P_hat.T) != 0
    if true.shape != pred.shape:
        raise ValueError(f"W_true is {np.shape(W_true)} but P_hat has {P_hat.shape[0]} rows")
    return true, pred


def support_f1(W_true, P_hat):
    true, pred = _supports(W_true, P_hat)
    tp = int(np.sum(true & pred))
    if tp == 0:
        return 0.0
    precision = tp / int(np.sum(pred))
    recall = tp / int(np.sum(true))
    return 2 * precision * recall / (precision + recall)


def exact_support_recovery(W_true, P_hat):
    true, pred = _supports(W_true, P_hat)
    return bool(np.array_equal(true, pred))


def count_used(P_hat):
    """(number of used interactions, number of used features)."""
    P_hat = np.asarray(P_hat, dtype=np.float64)
    n_int = int(np.count_nonzero(_upper(P_hat @ P_hat.T))) if P_hat.shape[0] > 1 else 0
    n_feat = int(np.count_nonzero(np.any(P_hat != 0, axis=1)))
    return n_int, n_feat


def support_report(W_true, P_hat):
    n_int, n_feat = count_used(P_hat)
    return SupportReport(
        estimation_error=estimation_error(W_true, P_hat),
        f1=support_f1(W_true, P_hat),
        exact_recovery=exact_support_recovery(W_true, P_hat),
        n_pred_interactions=n_int,
        n_pred_features=n_feat,
    )


def rmse(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"shape mismatch {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("rmse of an empty set")
    return float(np.sqrt(np.mean((y_true - y_pred) ** 2)))


def roc_auc(y_true, scores):
    """Mann-Whitney estimate with midranks for ties. Labels > 0 are
    positive, all others negative."""
    y_true = np.asarray(y_true, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    if y_true.shape != scores.shape:
        raise ValueError(f"shape mismatch {y_true.shape} vs {scores.shape}")
    pos = y_true > 0
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both positive and negative labels")
    ranks = rankdata(scores, method="average")
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))

import time

import numpy as np
import pytest

from oracles import naive_sgd_epoch, prox_oracle
from sparsefm.kernels import FmModel, fm_predict_batch
from sparsefm.numcore import SparseDesignMatrix, make_rng
from sparsefm.optim import (DivergenceError, TrainConfig, default_batch_size, factor_prox, fm_gradients,
                            init_state, psgd_epoch, sgd_epoch_fm, step_size, train)
from sparsefm.penalty import Kind, RegularizerSpec, objective_value


def task(N, d, density, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((N, d)) * (rng.random((N, d)) < density)
    W = np.triu(rng.standard_normal((d, d)), 1)
    y = np.einsum("ni,ij,nj->n", X, W, X) + X @ rng.standard_normal(d)
    return X, y


def start(d, k, seed=0):
    rng = np.random.default_rng(seed)
    return FmModel(rng.standard_normal(d) * 0.1, rng.standard_normal((d, k)) * 0.3, 0.2)


def _run_both(X, y, lw, lp, epochs=3, eta0=0.02, loss="squared"):
    N, d = X.shape
    model = start(d, 2)
    state = init_state(model.copy(), X, y, rng=make_rng(5))
    cfg = TrainConfig(loss=loss, spec=RegularizerSpec(Kind.L2SQ, lw, lp), eta0=eta0, solver="sgd")
    order_rng = make_rng(5)
    w, P, b, t = model.w.copy(), model.P.copy(), model.bias, 0
    for _ in range(epochs):
        sgd_epoch_fm(state, SparseDesignMatrix.from_dense(X), y, cfg)
        w, P, b, t = naive_sgd_epoch(X, y, w, P, b, lw, lp, eta0, t, order_rng.permutation(N), loss)
    assert state.step == t
    return state.model, w, P, b


@pytest.mark.parametrize("loss", ["squared", "logistic"])
def test_lazy_equals_naive_on_dense_bitwise(loss):
    X, y = task(30, 3, 1.0)
    if loss == "logistic":
        y = np.sign(y)
    m, w, P, b = _run_both(X, y, 0.05, 0.1, loss=loss)
    assert np.array_equal(m.w, w) and np.array_equal(m.P, P) and m.bias == b


def test_lazy_matches_naive_on_sparse():
    X, y = task(60, 10, 0.25)
    m, w, P, b = _run_both(X, y, 0.05, 0.1)
    assert np.max(np.abs(m.P - P)) <= 1e-12 and np.max(np.abs(m.w - w)) <= 1e-12
    assert abs(m.bias - b) <= 1e-12


def test_no_regularization_is_plain_sgd_bitwise():
    X, y = task(60, 10, 0.25)
    m, w, P, b = _run_both(X, y, 0.0, 0.0)
    assert np.array_equal(m.P, P) and np.array_equal(m.w, w)


def test_lazy_rescale_path():
    # strong shrinkage drives the running product below the rescale point
    X, y = task(400, 6, 0.3)
    m, w, P, b = _run_both(X, y, 2.0, 2.0, epochs=2, eta0=0.2)
    assert np.max(np.abs(m.P - P)) <= 1e-12 and np.max(np.abs(m.w - w)) <= 1e-12


def test_step_size_schedule():
    assert step_size(0.1, 0.0, 100) == 0.1
    assert np.isclose(step_size(0.1, 1.0, 10), 0.05)


def test_sgd_divergence_reported():
    X, y = task(20, 4, 0.5)
    cfg = TrainConfig(spec=RegularizerSpec(Kind.L2SQ, 1.0, 1.0), eta0=10.0, solver="sgd")
    state = init_state(start(4, 2), X, y, rng=make_rng(0))
    with pytest.raises(DivergenceError):
        sgd_epoch_fm(state, X, y, cfg)


def test_sgd_cache_and_kind():
    X, y = task(50, 8, 0.4)
    state = init_state(start(8, 2), X, y, rng=make_rng(0))
    sgd_epoch_fm(state, X, y, TrainConfig(spec=RegularizerSpec(Kind.L2SQ, 0.01, 0.01), solver="sgd"))
    assert np.allclose(state.f_cache, fm_predict_batch(state.model, X))
    with pytest.raises(ValueError):
        sgd_epoch_fm(state, X, y, TrainConfig(spec=RegularizerSpec(Kind.TI)))


def test_sgd_close_to_cd_at_equal_time():
    rng = np.random.default_rng(1)
    N, d = 20000, 40
    X = rng.standard_normal((N, d)) * (rng.random((N, d)) < 0.2)
    w_true = rng.standard_normal(d)
    P_true = rng.standard_normal((d, 2)) * 0.5
    y = fm_predict_batch(FmModel(w_true, P_true), X) + 0.1 * rng.standard_normal(N)
    spec = RegularizerSpec(Kind.L2SQ, 1e-4, 1e-4)
    budget = 1.5
    common = dict(spec=spec, k=4, max_epochs=10**6, tol=1e-300, time_budget=budget, init_std=0.1)
    cd, _ = train("fm", X, y, TrainConfig(**common))
    sgd, _ = train("fm", X, y, TrainConfig(solver="sgd", eta0=0.003, **common))
    loss_cd = objective_value(cd, X, y, "squared", spec)
    loss_sgd = objective_value(sgd, X, y, "squared", spec)
    assert loss_sgd <= 1.05 * loss_cd, (loss_sgd, loss_cd)


# --------------------------------------------------------------------------
# proximal SGD
# --------------------------------------------------------------------------


def _dense_grads(m, X, y):
    A = X @ m.P
    f = m.bias + X @ m.w + 0.5 * np.sum(A * A - (X * X) @ (m.P * m.P), axis=1)
    r = f - y
    N = len(y)
    gP = (X.T @ (r[:, None] * A) - ((X * X).T @ r)[:, None] * m.P) / N
    return r.mean(), X.T @ r / N, gP


def test_fm_gradients_dense_oracle():
    X, y = task(15, 5, 0.6)
    m = start(5, 3)
    g = fm_gradients(m, SparseDesignMatrix.from_dense(X).csr, y, "squared")
    ref = _dense_grads(m, X, y)
    assert np.isclose(g[0], ref[0]) and np.allclose(g[1], ref[1]) and np.allclose(g[2], ref[2])


@pytest.mark.parametrize("kind", [Kind.TI, Kind.CS, Kind.L1, Kind.L21])
def test_one_full_batch_step(kind):
    X, y = task(12, 5, 0.7)
    m = start(5, 3)
    lw, lp, lt, eta0 = 0.1, 0.2, 0.3, 0.05
    cfg = TrainConfig(spec=RegularizerSpec(kind, lw, lp, lt), solver="psgd", eta0=eta0, batch_size=12)
    state = init_state(m.copy(), X, y, rng=make_rng(0))
    psgd_epoch(state, X, y, cfg)
    eta = eta0 / (1 + eta0 * lp)
    gb, gw, gP = _dense_grads(m, X, y)
    smooth = lp - (lt / 2 if kind in (Kind.TI, Kind.CS) else 0.0)
    V = m.P - eta * (gP + 2 * smooth * m.P)
    if kind is Kind.TI:
        Q = np.column_stack([prox_oracle(V[:, s], eta * lt / 2) for s in range(3)])
    elif kind is Kind.CS:
        n = np.linalg.norm(V, axis=1)
        Q = V * (prox_oracle(n, eta * lt / 2) / n)[:, None]
    elif kind is Kind.L1:
        Q = np.sign(V) * np.maximum(np.abs(V) - eta * lt, 0)
    else:
        n = np.linalg.norm(V, axis=1)
        Q = V * np.maximum(1 - eta * lt / n, 0)[:, None]
    assert np.allclose(state.model.P, Q, atol=1e-7)
    assert np.allclose(state.model.w, m.w - eta * (gw + 2 * lw * m.w))
    assert np.isclose(state.model.bias, m.bias - eta * gb)
    # the two-stage step is the prox-gradient step of the TI/CS objective
    # written with squared norms, so it agrees with lam_tilde * Omega


def test_zero_strength_is_gradient_step():
    X, y = task(12, 5, 0.7)
    m = start(5, 3)
    cfg = TrainConfig(spec=RegularizerSpec(Kind.L1, 0.0, 0.1, 0.0), solver="psgd", eta0=0.05, batch_size=12)
    state = init_state(m.copy(), X, y, rng=make_rng(0))
    psgd_epoch(state, X, y, cfg)
    eta = 0.05 / (1 + 0.05 * 0.1)
    _, _, gP = _dense_grads(m, X, y)
    assert np.allclose(state.model.P, m.P - eta * (gP + 0.2 * m.P), atol=1e-14)


def test_pure_shrinkage_never_grows_support():
    # X = 0 makes the loss gradient vanish; lam_p = lam_tilde / 2 cancels the smooth part
    X = np.zeros((10, 6))
    y = np.zeros(10)
    lt = 2.0
    cfg = TrainConfig(spec=RegularizerSpec(Kind.TI, 0.0, lt / 2, lt), solver="psgd", eta0=0.1, batch_size=2,
                      fit_bias=False)
    m = start(6, 3)
    state = init_state(m, X, y, rng=make_rng(0))
    prev = np.count_nonzero(state.model.P)
    for _ in range(5):
        psgd_epoch(state, X, y, cfg)
        cur = np.count_nonzero(state.model.P)
        assert cur <= prev
        prev = cur
    assert prev < 18


@pytest.mark.parametrize("kind", [Kind.TI, Kind.CS])
def test_psgd_trains(kind):
    X, y = task(300, 10, 0.4)
    cfg = TrainConfig(spec=RegularizerSpec(kind, 0.001, 0.001, 0.001), solver="psgd", eta0=0.01, k=4,
                      max_epochs=30, tol=1e-300)
    model, hist = train("fm", X, y, cfg)
    assert hist[-1][1] < 0.5 * hist[0][1]
    for algo in ("sort", "rand"):
        P = np.random.default_rng(0).standard_normal((8, 3))
        a = factor_prox(P, 0.1, kind, 0.5, "sort")
        b = factor_prox(P, 0.1, kind, 0.5, algo, make_rng(1))
        assert np.max(np.abs(a - b)) <= 1e-12


def test_psgd_rejects_l2():
    X, y = task(10, 3, 1.0)
    state = init_state(start(3, 2), X, y, rng=make_rng(0))
    with pytest.raises(ValueError):
        psgd_epoch(state, X, y, TrainConfig(spec=RegularizerSpec(Kind.L2SQ)))
    with pytest.raises(ValueError):
        factor_prox(np.ones((2, 2)), 0.1, Kind.L2SQ, 1.0)


def test_default_batch_size():
    X = SparseDesignMatrix.from_dense(np.eye(4))
    assert default_batch_size(X) == 4
    X = SparseDesignMatrix.from_dense(np.ones((6, 3)))
    assert default_batch_size(X) == 1
    assert default_batch_size(SparseDesignMatrix.from_dense(np.zeros((5, 2)))) == 5

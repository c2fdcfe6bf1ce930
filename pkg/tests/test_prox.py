import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import group_prox_oracle, kkt_residual, prox_objective, prox_oracle
from sparsefm.prox import (prox_group_l2, prox_l1, prox_l21_rows, prox_pow_l1, prox_pow_l21,
                           prox_sq_l1, prox_sq_l1_columns, prox_sq_l1_rand, prox_sq_l1_sort, prox_sq_l21)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
vectors = arrays(np.float64, st.integers(0, 40), elements=finite)
lams = st.floats(0, 20, allow_nan=False)


def test_prox_l1_examples():
    assert np.allclose(prox_l1(np.array([2.0, -1.0, 0.5]), 1.0), [1.0, 0.0, 0.0])
    p = np.array([0.3, -2.0])
    assert np.array_equal(prox_l1(p, 0.0), p)
    assert np.allclose(prox_l1(np.array([-3.0]), 0.5), [-2.5])
    with pytest.raises(ValueError):
        prox_l1(p, -1.0)


def test_prox_group_l2_examples():
    assert np.allclose(prox_group_l2(np.array([3.0, 4.0]), 2.5), [1.5, 2.0])
    assert np.array_equal(prox_group_l2(np.array([3.0, 4.0]), 6.0), [0.0, 0.0])
    p = np.array([1.0, -2.0])
    assert np.array_equal(prox_group_l2(p, 0.0), p)
    assert np.array_equal(prox_group_l2(np.zeros(3), 1.0), np.zeros(3))
    with pytest.raises(ValueError):
        prox_group_l2(p, -0.1)


def test_sq_l1_examples():
    r = prox_sq_l1_sort(np.array([1.0, 0.0]), 0.25)
    assert np.allclose(r.output, [2 / 3, 0.0]) and r.theta == 1 and np.isclose(r.s_theta, 2 / 3)
    r = prox_sq_l1_sort(np.array([3.0, 1.0]), 0.5)
    assert np.allclose(r.output, [1.5, 0.0]) and r.theta == 1
    p = np.array([0.5, -1.0, 0.0, 2.0])
    r = prox_sq_l1_sort(p, 0.0)
    assert np.array_equal(r.output, p) and r.theta == 3
    # both examples agree with the generic solver
    for p, lam in (([1.0, 0.0], 0.25), ([3.0, 1.0], 0.5)):
        assert np.allclose(prox_oracle(np.array(p), lam), prox_sq_l1_sort(np.array(p), lam).output, atol=1e-7)


def test_rand_ties_and_zero():
    p = np.array([1.0, 1.0, 1.0])
    a = prox_sq_l1_sort(p, 0.1)
    b = prox_sq_l1_rand(p, 0.1, rng=5)
    assert np.allclose(a.output, b.output, atol=1e-12)
    assert np.allclose(a.output, prox_oracle(p, 0.1), atol=1e-7)
    z = prox_sq_l1_rand(np.zeros(4), 0.3, rng=0)
    assert np.array_equal(z.output, np.zeros(4)) and z.theta == 0


def test_negative_lambda_rejected():
    for fn in (prox_sq_l1_sort, prox_sq_l1_rand):
        with pytest.raises(ValueError):
            fn(np.ones(2), -1.0)
    with pytest.raises(ValueError):
        prox_sq_l21(np.ones((2, 2)), -1.0)
    with pytest.raises(ValueError):
        prox_pow_l1(np.ones(2), 0.1, 1)
    with pytest.raises(ValueError):
        prox_sq_l1(np.ones(2), 0.1, algo="heap")


@settings(max_examples=200, deadline=None)
@given(vectors, lams, st.integers(0, 2**32 - 1))
def test_sort_rand_agree(p, lam, seed):
    a = prox_sq_l1_sort(p, lam).output
    b = prox_sq_l1_rand(p, lam, rng=seed).output
    assert np.max(np.abs(a - b), initial=0.0) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(vectors, lams, st.sampled_from([2, 3, 4]))
def test_kkt_and_shape_properties(p, lam, m):
    q = prox_pow_l1(p, lam, m).output
    assert q.shape == p.shape
    assert kkt_residual(q, p, lam, m) <= 1e-8 * max(1.0, np.max(np.abs(p), initial=0.0))
    assert np.all(np.sign(q) * np.sign(p) >= 0)
    assert np.all(q[p == 0] == 0)
    order = np.argsort(-np.abs(p), kind="stable")
    assert np.all(np.diff(np.abs(q[order])) <= 1e-12)


@settings(max_examples=100, deadline=None)
@given(vectors, lams, lams)
def test_monotone_shrinkage(p, l1, l2):
    lo, hi = sorted((l1, l2))
    assert np.sum(np.abs(prox_sq_l1_sort(p, lo).output)) >= np.sum(np.abs(prox_sq_l1_sort(p, hi).output)) - 1e-12


def test_objective_beats_perturbations():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = rng.standard_normal(15) * 3
        lam = float(2.0 ** rng.uniform(-5, 3))
        for m in (2, 3):
            q = prox_pow_l1(p, lam, m).output
            f = prox_objective(q, p, lam, m)
            assert f <= prox_objective(p, p, lam, m) + 1e-12
            for _ in range(100):
                pert = q + 1e-3 * rng.standard_normal(q.shape)
                assert f <= prox_objective(pert, p, lam, m) + 1e-12


def test_pow_m2_matches_sort():
    rng = np.random.default_rng(1)
    for _ in range(100):
        p = rng.standard_normal(rng.integers(1, 30))
        lam = float(rng.uniform(0, 3))
        a = prox_pow_l1(p, lam, 2).output
        b = prox_sq_l1_sort(p, lam).output
        assert np.array_equal(a, b)


def test_pow_m3_example():
    r = prox_pow_l1(np.array([2.0, 0.0, 0.0]), 0.5, 3)
    S = (-1 + np.sqrt(13)) / 3
    assert np.isclose(r.s_theta, S, rtol=1e-12)
    assert np.isclose(r.output[0], 2 - 1.5 * S**2, rtol=1e-12)
    ref = prox_oracle(np.array([2.0, 0.0, 0.0]), 0.5, 3)
    assert np.allclose(r.output, ref, atol=1e-6)
    p = np.array([1.0, -2.0])
    assert np.array_equal(prox_pow_l1(p, 0.0, 3).output, p)


def test_closed_and_newton_agree():
    rng = np.random.default_rng(2)
    for _ in range(100):
        p = rng.standard_normal(20) * 2
        lam = float(2.0 ** rng.uniform(-6, 4))
        a = prox_pow_l1(p, lam, 3, method="closed").output
        b = prox_pow_l1(p, lam, 3, method="newton").output
        assert np.max(np.abs(a - b)) <= 1e-10
    with pytest.raises(ValueError):
        prox_pow_l1(np.ones(3), 0.1, 4, method="closed")


def test_sq_l21_structure_and_oracle():
    rng = np.random.default_rng(3)
    P = rng.standard_normal((5, 3))
    assert np.array_equal(prox_sq_l21(P, 0.0), P)
    Q = prox_sq_l21(P, 0.2)
    assert np.allclose(Q, group_prox_oracle(P, 0.2), atol=1e-6)
    # rows are nonnegative multiples of the input rows
    for q, p in zip(Q, P):
        c = np.dot(q, p) / np.dot(p, p)
        assert c >= 0 and np.allclose(q, c * p, atol=1e-14)
    one = np.zeros((4, 2))
    one[2] = [3.0, 4.0]
    scaled = prox_sq_l21(one, 0.3)
    r = prox_sq_l1_sort(np.array([5.0]), 0.3).output[0]
    assert np.allclose(scaled[2], one[2] * r / 5.0) and not scaled[[0, 1, 3]].any()


def test_pow_l21():
    rng = np.random.default_rng(4)
    P = rng.standard_normal((6, 3))
    assert np.array_equal(prox_pow_l21(P, 0.4, 2), prox_sq_l21(P, 0.4))
    P = rng.standard_normal((4, 2))
    assert np.allclose(prox_pow_l21(P, 0.1, 3), group_prox_oracle(P, 0.1, 3), atol=1e-6)
    row = np.array([[0.6, -0.8]])
    c = prox_pow_l1(np.array([1.0]), 0.2, 3).output[0]
    assert np.allclose(prox_pow_l21(row, 0.2, 3), row * c)


def test_l21_rows_and_columns():
    P = np.array([[3.0, 4.0], [0.3, 0.4], [0.0, 0.0]])
    Q = prox_l21_rows(P, 1.0)
    assert np.allclose(Q, [[2.4, 3.2], [0, 0], [0, 0]])
    rng = np.random.default_rng(5)
    P = rng.standard_normal((7, 3))
    C = prox_sq_l1_columns(P, 0.3)
    for s in range(3):
        assert np.array_equal(C[:, s], prox_sq_l1_sort(P[:, s], 0.3).output)
    R = prox_sq_l1_columns(P, 0.3, algo="rand", rng=1)
    assert np.max(np.abs(R - C)) <= 1e-12


def test_snap_to_zero():
    q = prox_l1(np.array([1.0 + 1e-16, 2.0]), 1.0)
    assert q[0] == 0.0

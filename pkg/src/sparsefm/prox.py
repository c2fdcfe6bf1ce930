"""Proximal operators for the sparse FM regularizers.

All operators solve ``argmin_q 0.5 * ||q - p||^2 + lam * R(q)`` for a
penalty ``R``. Outputs whose magnitude falls below ``ZERO_SNAP`` are set to
exact zero so that support comparisons downstream are well defined.
"""

from dataclasses import dataclass

import numba
import numpy as np

from .numcore import make_rng

ZERO_SNAP = 1e-15

_NEWTON_TOL = 1e-12
_NEWTON_MAXITER = 100


@dataclass
class ProxResult:
    output: np.ndarray
    theta: int
    s_theta: float


def _check_lam(lam, name="lam"):
    if not lam >= 0:
        raise ValueError(f"{name} must be non-negative, got {lam}")


def _as_vector(p):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError(f"expected a vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("input contains non-finite values")
    return p


def _snap(q):
    q[np.abs(q) < ZERO_SNAP] = 0.0
    return q


def soft_threshold(p, t):
    return np.sign(p) * np.maximum(np.abs(p) - t, 0.0)


def prox_l1(p, t):
    """Elementwise soft thresholding; works on arrays of any shape."""
    _check_lam(t, "t")
    p = np.asarray(p, dtype=np.float64)
    return _snap(soft_threshold(p, t))


def prox_group_l2(p, t):
    """Block soft thresholding ``max(1 - t / ||p||, 0) * p``."""
    _check_lam(t, "t")
    p = np.asarray(p, dtype=np.float64)
    norm = np.sqrt(np.dot(p.ravel(), p.ravel()))
    if norm == 0.0 or norm <= t:
        return np.zeros_like(p)
    return _snap((1.0 - t / norm) * p)


def prox_l21_rows(P, t):
    """Row-wise group soft thresholding of a matrix."""
    _check_lam(t, "t")
    P = np.asarray(P, dtype=np.float64)
    norms = np.linalg.norm(P, axis=1)
    scale = np.zeros_like(norms)
    nz = norms > t
    scale[nz] = 1.0 - t / norms[nz]
    return _snap(P * scale[:, None])


# --------------------------------------------------------------------------
# squared l1 norm
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _sq_l1_threshold_sort(p, lam):
    a = np.abs(p)
    order = np.argsort(-a)
    s = 0.0
    theta = 0
    s_theta = 0.0
    for j in range(a.shape[0]):
        v = a[order[j]]
        if v == 0.0:
            break
        s += v
        sj = s / (1.0 + 2.0 * lam * (j + 1))
        if v - 2.0 * lam * sj >= 0.0:
            theta = j + 1
            s_theta = sj
    return theta, s_theta


@numba.njit(cache=True)
def _splitmix64(state):
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return state, z


@numba.njit(cache=True)
def _sq_l1_threshold_rand(p, lam, seed):
    d = p.shape[0]
    a = np.abs(p)
    buf = np.empty(d, dtype=np.int64)
    hi = 0
    for j in range(d):
        if a[j] > 0.0:
            buf[hi] = j
            hi += 1
    lo = 0
    state = np.uint64(seed)
    s = 0.0
    theta = 0
    while hi > lo:
        state, z = _splitmix64(state)
        size = hi - lo
        pick = lo + np.int64((z >> np.uint64(11)) % np.uint64(size))
        pivot = a[buf[pick]]
        # three-way partition of buf[lo:hi] into [< pivot][== pivot][> pivot]
        lt = lo
        i = lo
        gt = hi
        sum_g = 0.0
        while i < gt:
            v = a[buf[i]]
            if v < pivot:
                tmp = buf[lt]
                buf[lt] = buf[i]
                buf[i] = tmp
                lt += 1
                i += 1
            elif v > pivot:
                gt -= 1
                tmp = buf[gt]
                buf[gt] = buf[i]
                buf[i] = tmp
                sum_g += v
            else:
                sum_g += v
                i += 1
        n_g = hi - lt
        s_g = (s + sum_g) / (1.0 + 2.0 * lam * (theta + n_g))
        if pivot - 2.0 * lam * s_g >= 0.0:
            # pivot is inside the support: keep searching the smaller ones
            s += sum_g
            theta += n_g
            hi = lt
        else:
            # drop the smaller ones and every tie with the pivot
            lo = gt
    s_theta = s / (1.0 + 2.0 * lam * theta) if theta > 0 else 0.0
    return theta, s_theta


def _apply_threshold(p, tau):
    return _snap(soft_threshold(p, tau))


def prox_sq_l1_sort(p, lam):
    """Prox of ``lam * ||q||_1^2`` by sorting the magnitudes, O(d log d)."""
    _check_lam(lam)
    p = _as_vector(p)
    theta, s_theta = _sq_l1_threshold_sort(p, float(lam))
    return ProxResult(_apply_threshold(p, 2.0 * lam * s_theta), int(theta), float(s_theta))


def prox_sq_l1_rand(p, lam, rng=None):
    """Prox of ``lam * ||q||_1^2`` by randomized pivoting, expected O(d).

    ``rng`` supplies the 64-bit seed for the pivot stream.
    """
    _check_lam(lam)
    p = _as_vector(p)
    seed = make_rng(rng).integers(0, 2**63, dtype=np.uint64)
    theta, s_theta = _sq_l1_threshold_rand(p, float(lam), seed)
    return ProxResult(_apply_threshold(p, 2.0 * lam * s_theta), int(theta), float(s_theta))


def prox_sq_l1(p, lam, algo="sort", rng=None):
    if algo == "sort":
        return prox_sq_l1_sort(p, lam)
    if algo == "rand":
        return prox_sq_l1_rand(p, lam, rng)
    raise ValueError(f"unknown algo {algo!r}")


# --------------------------------------------------------------------------
# m-th power of the l1 norm
# --------------------------------------------------------------------------


def _solve_partial_sums(cum, lam, m, method):
    """Root S_j of ``lam*m*j*S**(m-1) + S - cum_j = 0`` on [0, cum_j], all j."""
    j = np.arange(1, cum.shape[0] + 1, dtype=np.float64)
    c = lam * m * j
    if method == "closed" and m == 2:
        return cum / (1.0 + c)
    if method == "closed" and m == 3:
        return 2.0 * cum / (1.0 + np.sqrt(1.0 + 4.0 * c * cum))
    s = cum / (1.0 + c)
    lo = np.zeros_like(cum)
    hi = cum.copy()
    tol = _NEWTON_TOL * np.maximum(1.0, cum)
    for _ in range(_NEWTON_MAXITER):
        g = c * s ** (m - 1) + s - cum
        done = np.abs(g) <= tol
        if done.all():
            break
        lo = np.where(g < 0, s, lo)
        hi = np.where(g > 0, s, hi)
        dg = c * (m - 1) * s ** (m - 2) + 1.0
        step = s - g / dg
        outside = (step <= lo) | (step >= hi) | ~np.isfinite(step)
        step = np.where(outside, 0.5 * (lo + hi), step)
        s = np.where(done, s, step)
    return s


def prox_pow_l1(p, lam, m, method="auto"):
    """Prox of ``lam * ||q||_1^m`` for integer ``m >= 2``.

    ``method`` is ``"closed"`` (m = 2, 3), ``"newton"`` or ``"auto"``; the
    Newton solver is safeguarded by bisection on ``[0, sum |p_i|]``.
    """
    if int(m) != m or m < 2:
        raise ValueError(f"m must be an integer >= 2, got {m}")
    m = int(m)
    _check_lam(lam)
    if method == "auto":
        if m == 2:
            return prox_sq_l1_sort(p, lam)
        method = "closed" if m == 3 else "newton"
    if method not in ("closed", "newton"):
        raise ValueError(f"unknown method {method!r}")
    if method == "closed" and m > 3:
        raise ValueError("closed form is only available for m <= 3")
    p = _as_vector(p)
    a = np.abs(p)
    order = np.argsort(-a, kind="stable")
    sorted_a = a[order]
    sorted_a = sorted_a[sorted_a > 0]
    if sorted_a.size == 0 or lam == 0:
        return ProxResult(_snap(p.copy()), int(sorted_a.size), float(sorted_a.sum()))
    S = _solve_partial_sums(np.cumsum(sorted_a), float(lam), m, method)
    ok = np.nonzero(sorted_a - lam * m * S ** (m - 1) >= 0)[0]
    theta = int(ok[-1]) + 1
    s_theta = float(S[theta - 1])
    return ProxResult(_apply_threshold(p, lam * m * s_theta ** (m - 1)), theta, s_theta)


# --------------------------------------------------------------------------
# powers of the l2,1 norm
# --------------------------------------------------------------------------


def _row_scaled(P, norms, c):
    scale = np.zeros_like(norms)
    nz = norms > 0
    scale[nz] = c[nz] / norms[nz]
    return _snap(P * scale[:, None])


def prox_sq_l21(P, lam, algo="sort", rng=None):
    """Prox of ``lam * ||Q||_{2,1}^2``: squared-l1 prox on the row norms."""
    _check_lam(lam)
    P = np.asarray(P, dtype=np.float64)
    norms = np.linalg.norm(P, axis=1)
    c = prox_sq_l1(norms, lam, algo=algo, rng=rng).output
    return _row_scaled(P, norms, c)


def prox_pow_l21(P, lam, m, method="auto"):
    _check_lam(lam)
    P = np.asarray(P, dtype=np.float64)
    norms = np.linalg.norm(P, axis=1)
    c = prox_pow_l1(norms, lam, m, method=method).output
    return _row_scaled(P, norms, c)


def prox_sq_l1_columns(P, lam, algo="sort", rng=None):
    """Column-wise prox of ``lam * sum_s ||p_{:,s}||_1^2``."""
    _check_lam(lam)
    P = np.asarray(P, dtype=np.float64)
    rng = make_rng(rng) if algo == "rand" else None
    out = np.empty_like(P)
    for s in range(P.shape[1]):
        out[:, s] = prox_sq_l1(P[:, s], lam, algo=algo, rng=rng).output
    return out


def prox_pow_l1_columns(P, lam, m, method="auto"):
    P = np.asarray(P, dtype=np.float64)
    out = np.empty_like(P)
    for s in range(P.shape[1]):
        out[:, s] = prox_pow_l1(P[:, s], lam, m, method=method).output
    return out

"""Compiled epoch kernels.

Every kernel updates parameters and the prediction cache ``f`` in place
and returns the largest absolute parameter change it made. Column access
uses CSC arrays ``(indptr, indices, data)``; the all-subsets guard path
also needs the CSR arrays.
"""

import numba
import numpy as np

LOSS_SQUARED = 0
LOSS_LOGISTIC = 1

REG_NONE = 0
REG_L1 = 1
REG_TI = 2
REG_L21 = 3
REG_CS = 4

SNAP = 1e-15
GUARD = 1e-12


@numba.njit(cache=True)
def dloss(f, y, loss):
    if loss == LOSS_SQUARED:
        return f - y
    z = -y * f
    if z > 0:
        return -y / (1.0 + np.exp(-z))
    ez = np.exp(z)
    return -y * ez / (1.0 + ez)


@numba.njit(cache=True)
def soft(v, t):
    a = abs(v) - t
    if a <= SNAP:
        return 0.0
    return a if v > 0 else -a


@numba.njit(cache=True)
def linear_epoch(indptr, indices, data, y, f, w, bias, lam_w, loss, mu, fit_linear, fit_bias):
    n_samples = y.shape[0]
    max_change = 0.0
    if n_samples == 0:
        return max_change
    if fit_bias:
        g = 0.0
        for n in range(n_samples):
            g += dloss(f[n], y[n], loss)
        step = (g / n_samples) / mu
        bias[0] -= step
        for n in range(n_samples):
            f[n] -= step
        max_change = max(max_change, abs(step))
    if fit_linear:
        for j in range(w.shape[0]):
            lo = indptr[j]
            hi = indptr[j + 1]
            g = 0.0
            sq = 0.0
            for ii in range(lo, hi):
                n = indices[ii]
                x = data[ii]
                g += dloss(f[n], y[n], loss) * x
                sq += x * x
            inv = mu * sq / n_samples + 2.0 * lam_w
            if inv <= 0.0:
                continue
            step = (g / n_samples + 2.0 * lam_w * w[j]) / inv
            w[j] -= step
            for ii in range(lo, hi):
                f[indices[ii]] -= data[ii] * step
            max_change = max(max_change, abs(step))
    return max_change


@numba.njit(cache=True)
def fm_pcd_epoch(indptr, indices, data, y, f, P, lam_p, lam_t, reg, loss, mu, a, c_out):
    """Coordinate sweep over P (columns s, then rows j).

    reg: REG_NONE (plain CD), REG_L1 (fixed threshold) or REG_TI
    (threshold scaled by the l1 mass of the column without row j).
    """
    n_samples = y.shape[0]
    d, k = P.shape
    max_change = 0.0
    for s in range(k):
        for n in range(n_samples):
            a[n] = 0.0
        c = 0.0
        for j in range(d):
            pj = P[j, s]
            c += abs(pj)
            if pj != 0.0:
                for ii in range(indptr[j], indptr[j + 1]):
                    a[indices[ii]] += data[ii] * pj
        for j in range(d):
            lo = indptr[j]
            hi = indptr[j + 1]
            p_old = P[j, s]
            # c_rest excludes row j; c is only touched when p_{j,s} moves
            c_rest = c - abs(p_old)
            g = 0.0
            sq = 0.0
            for ii in range(lo, hi):
                n = indices[ii]
                x = data[ii]
                fp = x * (a[n] - x * p_old)
                g += dloss(f[n], y[n], loss) * fp
                sq += fp * fp
            inv = mu * sq / n_samples + 2.0 * lam_p
            if inv <= 0.0:
                continue
            p_new = p_old - (g / n_samples + 2.0 * lam_p * p_old) / inv
            if reg == REG_L1:
                thr = lam_t / inv
            elif reg == REG_TI:
                thr = lam_t * c_rest / inv
            else:
                thr = 0.0
            p_new = soft(p_new, thr)
            delta = p_old - p_new
            if delta != 0.0:
                for ii in range(lo, hi):
                    n = indices[ii]
                    x = data[ii]
                    fp = x * (a[n] - x * p_old)
                    f[n] -= fp * delta
                    a[n] -= x * delta
                P[j, s] = p_new
                max_change = max(max_change, abs(delta))
                c = c_rest + abs(p_new)
        c_out[s] = c
    return max_change


@numba.njit(cache=True)
def fm_pbcd_epoch(indptr, indices, data, y, f, P, lam_p, lam_t, reg, loss, mu, A, c_out):
    """Row-block sweep over P.

    reg: REG_NONE, REG_L21 (fixed group threshold) or REG_CS (threshold
    scaled by the summed row norms of the other rows).
    """
    n_samples = y.shape[0]
    d, k = P.shape
    max_change = 0.0
    grad = np.zeros(k)
    q = np.zeros(k)
    delta = np.zeros(k)
    for n in range(n_samples):
        for s in range(k):
            A[n, s] = 0.0
    c = 0.0
    for j in range(d):
        nrm = 0.0
        for s in range(k):
            nrm += P[j, s] * P[j, s]
        c += np.sqrt(nrm)
        for ii in range(indptr[j], indptr[j + 1]):
            n = indices[ii]
            x = data[ii]
            for s in range(k):
                A[n, s] += x * P[j, s]
    for j in range(d):
        lo = indptr[j]
        hi = indptr[j + 1]
        nrm = 0.0
        for s in range(k):
            nrm += P[j, s] * P[j, s]
        norm_old = np.sqrt(nrm)
        c_rest = c - norm_old
        for s in range(k):
            grad[s] = 0.0
        sq = 0.0
        for ii in range(lo, hi):
            n = indices[ii]
            x = data[ii]
            dl = dloss(f[n], y[n], loss)
            for s in range(k):
                fp = x * (A[n, s] - x * P[j, s])
                grad[s] += dl * fp
                sq += fp * fp
        inv = mu * sq / n_samples + 2.0 * lam_p
        if inv <= 0.0:
            continue
        nq = 0.0
        for s in range(k):
            q[s] = P[j, s] - (grad[s] / n_samples + 2.0 * lam_p * P[j, s]) / inv
            nq += q[s] * q[s]
        nq = np.sqrt(nq)
        if reg == REG_L21:
            thr = lam_t / inv
        elif reg == REG_CS:
            thr = lam_t * max(c_rest, 0.0) / inv
        else:
            thr = 0.0
        scale = 0.0
        if nq > thr and nq > 0.0:
            scale = 1.0 - thr / nq
        norm_new = 0.0
        changed = False
        for s in range(k):
            qs = q[s] * scale
            if abs(qs) < SNAP:
                qs = 0.0
            q[s] = qs
            norm_new += qs * qs
            delta[s] = P[j, s] - qs
            if delta[s] != 0.0:
                changed = True
            max_change = max(max_change, abs(delta[s]))
        norm_new = np.sqrt(norm_new)
        if changed:
            for ii in range(lo, hi):
                n = indices[ii]
                x = data[ii]
                fd = 0.0
                for s in range(k):
                    fd += x * (A[n, s] - x * P[j, s]) * delta[s]
                f[n] -= fd
                for s in range(k):
                    A[n, s] -= x * delta[s]
            for s in range(k):
                P[j, s] = q[s]
        c = c_rest + norm_new
    c_out[0] = c
    return max_change


@numba.njit(cache=True)
def hofm_pcd_order(indptr, indices, data, y, f, P, m, lam_p, lam_t, reg, loss, mu, A, kbuf, c_out):
    """Coordinate sweep over the order-m factor matrix of an HOFM.

    A[n, t] holds K_A^t(x_n, p_{:,s}); kbuf stores, per nonzero of the
    current column, K_A^t with feature j removed. With reg == REG_TI the
    threshold is dK_A^m(|p_{:,s}|, 1) / d|p_{j,s}|.
    """
    n_samples = y.shape[0]
    d, k = P.shape
    max_change = 0.0
    B = np.zeros(m + 1)
    Bneg = np.zeros(m + 1)
    for s in range(k):
        for n in range(n_samples):
            A[n, 0] = 1.0
            for t in range(1, m + 1):
                A[n, t] = 0.0
        B[0] = 1.0
        for t in range(1, m + 1):
            B[t] = 0.0
        for j in range(d):
            pj = P[j, s]
            v = abs(pj)
            for t in range(m, 0, -1):
                B[t] += v * B[t - 1]
            if pj != 0.0:
                for ii in range(indptr[j], indptr[j + 1]):
                    n = indices[ii]
                    v = data[ii] * pj
                    for t in range(m, 0, -1):
                        A[n, t] += v * A[n, t - 1]
        for j in range(d):
            lo = indptr[j]
            hi = indptr[j + 1]
            p_old = P[j, s]
            a_old = abs(p_old)
            Bneg[0] = 1.0
            for t in range(1, m + 1):
                Bneg[t] = B[t] - a_old * Bneg[t - 1]
            c = Bneg[m - 1]
            g = 0.0
            sq = 0.0
            for ii in range(lo, hi):
                n = indices[ii]
                x = data[ii]
                r = ii - lo
                kbuf[r, 0] = 1.0
                for t in range(1, m):
                    kbuf[r, t] = A[n, t] - x * p_old * kbuf[r, t - 1]
                gp = x * kbuf[r, m - 1]
                g += dloss(f[n], y[n], loss) * gp
                sq += gp * gp
            inv = mu * sq / n_samples + 2.0 * lam_p
            if inv <= 0.0:
                continue
            p_new = p_old - (g / n_samples + 2.0 * lam_p * p_old) / inv
            if reg == REG_L1:
                thr = lam_t / inv
            elif reg == REG_TI:
                thr = lam_t * c / inv
            else:
                thr = 0.0
            p_new = soft(p_new, thr)
            delta = p_old - p_new
            if delta != 0.0:
                for ii in range(lo, hi):
                    n = indices[ii]
                    x = data[ii]
                    r = ii - lo
                    f[n] -= x * kbuf[r, m - 1] * delta
                    for t in range(1, m + 1):
                        A[n, t] -= delta * x * kbuf[r, t - 1]
                P[j, s] = p_new
                max_change = max(max_change, abs(delta))
                a_new = abs(p_new)
                for t in range(1, m + 1):
                    B[t] = Bneg[t] + a_new * Bneg[t - 1]
        c_out[s] = B[1]
    return max_change


@numba.njit(cache=True)
def hofm_pbcd_order(indptr, indices, data, y, f, P, m, lam_p, lam_t, reg, loss, mu, A, kbuf, c_out):
    """Row-block sweep over the order-m factor matrix of an HOFM.

    A[n, s, t] holds K_A^t(x_n, p_{:,s}); with reg == REG_CS the group
    threshold is dK_A^m(row norms, 1) / d||p_j||.
    """
    n_samples = y.shape[0]
    d, k = P.shape
    max_change = 0.0
    R = np.zeros(m + 1)
    Rneg = np.zeros(m + 1)
    grad = np.zeros(k)
    q = np.zeros(k)
    delta = np.zeros(k)
    for n in range(n_samples):
        for s in range(k):
            A[n, s, 0] = 1.0
            for t in range(1, m + 1):
                A[n, s, t] = 0.0
    R[0] = 1.0
    for t in range(1, m + 1):
        R[t] = 0.0
    for j in range(d):
        nrm = 0.0
        for s in range(k):
            nrm += P[j, s] * P[j, s]
        v = np.sqrt(nrm)
        for t in range(m, 0, -1):
            R[t] += v * R[t - 1]
        for ii in range(indptr[j], indptr[j + 1]):
            n = indices[ii]
            x = data[ii]
            for s in range(k):
                v = x * P[j, s]
                if v != 0.0:
                    for t in range(m, 0, -1):
                        A[n, s, t] += v * A[n, s, t - 1]
    for j in range(d):
        lo = indptr[j]
        hi = indptr[j + 1]
        nrm = 0.0
        for s in range(k):
            nrm += P[j, s] * P[j, s]
        norm_old = np.sqrt(nrm)
        Rneg[0] = 1.0
        for t in range(1, m + 1):
            Rneg[t] = R[t] - norm_old * Rneg[t - 1]
        c = max(Rneg[m - 1], 0.0)
        for s in range(k):
            grad[s] = 0.0
        sq = 0.0
        for ii in range(lo, hi):
            n = indices[ii]
            x = data[ii]
            r = ii - lo
            dl = dloss(f[n], y[n], loss)
            for s in range(k):
                kbuf[r, s, 0] = 1.0
                for t in range(1, m):
                    kbuf[r, s, t] = A[n, s, t] - x * P[j, s] * kbuf[r, s, t - 1]
                gp = x * kbuf[r, s, m - 1]
                grad[s] += dl * gp
                sq += gp * gp
        inv = mu * sq / n_samples + 2.0 * lam_p
        if inv <= 0.0:
            continue
        nq = 0.0
        for s in range(k):
            q[s] = P[j, s] - (grad[s] / n_samples + 2.0 * lam_p * P[j, s]) / inv
            nq += q[s] * q[s]
        nq = np.sqrt(nq)
        if reg == REG_L21:
            thr = lam_t / inv
        elif reg == REG_CS:
            thr = lam_t * c / inv
        else:
            thr = 0.0
        scale = 0.0
        if nq > thr and nq > 0.0:
            scale = 1.0 - thr / nq
        norm_new = 0.0
        changed = False
        for s in range(k):
            qs = q[s] * scale
            if abs(qs) < SNAP:
                qs = 0.0
            q[s] = qs
            norm_new += qs * qs
            delta[s] = P[j, s] - qs
            if delta[s] != 0.0:
                changed = True
            max_change = max(max_change, abs(delta[s]))
        norm_new = np.sqrt(norm_new)
        if changed:
            for ii in range(lo, hi):
                n = indices[ii]
                x = data[ii]
                r = ii - lo
                fd = 0.0
                for s in range(k):
                    fd += x * kbuf[r, s, m - 1] * delta[s]
                    for t in range(1, m + 1):
                        A[n, s, t] -= delta[s] * x * kbuf[r, s, t - 1]
                f[n] -= fd
            for s in range(k):
                P[j, s] = q[s]
            for t in range(1, m + 1):
                R[t] = Rneg[t] + norm_new * Rneg[t - 1]
    c_out[0] = R[1]
    return max_change


@numba.njit(cache=True)
def _product_without(r_indptr, r_indices, r_data, P, n, j, s):
    out = 1.0
    for ii in range(r_indptr[n], r_indptr[n + 1]):
        jj = r_indices[ii]
        if jj != j:
            out *= 1.0 + r_data[ii] * P[jj, s]
    return out


@numba.njit(cache=True)
def allsubsets_pcd_epoch(indptr, indices, data, r_indptr, r_indices, r_data, y, f, P,
                         lam_p, lam_t, reg, loss, mu, K, kneg, c_out):
    """Coordinate sweep for the all-subsets model.

    K[n] caches prod_j (1 + x_nj p_js) for the active column and is updated
    multiplicatively; when 1 + x_nj p_js is too close to zero the product
    without j is rebuilt from the row.
    """
    n_samples = y.shape[0]
    d, k = P.shape
    max_change = 0.0
    for s in range(k):
        for n in range(n_samples):
            K[n] = 1.0
        B = 1.0
        for j in range(d):
            pj = P[j, s]
            B *= 1.0 + abs(pj)
            if pj != 0.0:
                for ii in range(indptr[j], indptr[j + 1]):
                    K[indices[ii]] *= 1.0 + data[ii] * pj
        for j in range(d):
            lo = indptr[j]
            hi = indptr[j + 1]
            p_old = P[j, s]
            c = B / (1.0 + abs(p_old))
            g = 0.0
            sq = 0.0
            for ii in range(lo, hi):
                n = indices[ii]
                x = data[ii]
                base = 1.0 + x * p_old
                if abs(base) < GUARD:
                    kn = _product_without(r_indptr, r_indices, r_data, P, n, j, s)
                else:
                    kn = K[n] / base
                kneg[ii - lo] = kn
                gp = x * kn
                g += dloss(f[n], y[n], loss) * gp
                sq += gp * gp
            inv = mu * sq / n_samples + 2.0 * lam_p
            if inv <= 0.0:
                continue
            p_new = p_old - (g / n_samples + 2.0 * lam_p * p_old) / inv
            if reg == REG_TI:
                thr = lam_t * c / inv
            elif reg == REG_L1:
                thr = lam_t / inv
            else:
                thr = 0.0
            p_new = soft(p_new, thr)
            delta = p_old - p_new
            if delta != 0.0:
                for ii in range(lo, hi):
                    n = indices[ii]
                    x = data[ii]
                    kn = kneg[ii - lo]
                    f[n] -= x * kn * delta
                    K[n] = kn * (1.0 + x * p_new)
                P[j, s] = p_new
                max_change = max(max_change, abs(delta))
                B = c * (1.0 + abs(p_new))
        c_out[s] = B
    return max_change


@numba.njit(cache=True)
def allsubsets_pbcd_epoch(indptr, indices, data, r_indptr, r_indices, r_data, y, f, P,
                          lam_p, lam_t, reg, loss, mu, K, kbuf, c_out):
    """Row-block sweep for the all-subsets model; K[n, s] is the kernel
    cache and the CS threshold uses prod_j (1 + ||p_j||)."""
    n_samples = y.shape[0]
    d, k = P.shape
    max_change = 0.0
    grad = np.zeros(k)
    q = np.zeros(k)
    delta = np.zeros(k)
    for n in range(n_samples):
        for s in range(k):
            K[n, s] = 1.0
    B = 1.0
    for j in range(d):
        nrm = 0.0
        for s in range(k):
            nrm += P[j, s] * P[j, s]
        B *= 1.0 + np.sqrt(nrm)
        for ii in range(indptr[j], indptr[j + 1]):
            n = indices[ii]
            x = data[ii]
            for s in range(k):
                K[n, s] *= 1.0 + x * P[j, s]
    for j in range(d):
        lo = indptr[j]
        hi = indptr[j + 1]
        nrm = 0.0
        for s in range(k):
            nrm += P[j, s] * P[j, s]
        c = B / (1.0 + np.sqrt(nrm))
        for s in range(k):
            grad[s] = 0.0
        sq = 0.0
        for ii in range(lo, hi):
            n = indices[ii]
            x = data[ii]
            r = ii - lo
            dl = dloss(f[n], y[n], loss)
            for s in range(k):
                base = 1.0 + x * P[j, s]
                if abs(base) < GUARD:
                    kn = _product_without(r_indptr, r_indices, r_data, P, n, j, s)
                else:
                    kn = K[n, s] / base
                kbuf[r, s] = kn
                gp = x * kn
                grad[s] += dl * gp
                sq += gp * gp
        inv = mu * sq / n_samples + 2.0 * lam_p
        if inv <= 0.0:
            continue
        nq = 0.0
        for s in range(k):
            q[s] = P[j, s] - (grad[s] / n_samples + 2.0 * lam_p * P[j, s]) / inv
            nq += q[s] * q[s]
        nq = np.sqrt(nq)
        if reg == REG_CS:
            thr = lam_t * c / inv
        elif reg == REG_L21:
            thr = lam_t / inv
        else:
            thr = 0.0
        scale = 0.0
        if nq > thr and nq > 0.0:
            scale = 1.0 - thr / nq
        norm_new = 0.0
        changed = False
        for s in range(k):
            qs = q[s] * scale
            if abs(qs) < SNAP:
                qs = 0.0
            q[s] = qs
            norm_new += qs * qs
            delta[s] = P[j, s] - qs
            if delta[s] != 0.0:
                changed = True
            max_change = max(max_change, abs(delta[s]))
        if changed:
            for ii in range(lo, hi):
                n = indices[ii]
                x = data[ii]
                r = ii - lo
                fd = 0.0
                for s in range(k):
                    fd += x * kbuf[r, s] * delta[s]
                    K[n, s] = kbuf[r, s] * (1.0 + x * q[s])
                f[n] -= fd
            for s in range(k):
                P[j, s] = q[s]
            B = c * (1.0 + np.sqrt(norm_new))
    c_out[0] = B
    return max_change


@numba.njit(cache=True)
def fm_sgd_epoch_lazy(indptr, indices, data, y, order, w, P, bias, lam_w, lam_p, eta0, t0,
                      loss, fit_linear, fit_bias, alpha, alpha_wj, alpha_pj, grad_p, a):
    """One pass of SGD over ``order`` with lazily applied l2 shrinkage.

    alpha = [alpha_w, alpha_p] are the running products of the shrinkage
    factors; alpha_wj / alpha_pj record their value when feature j was
    last touched. Returns the iteration counter, or -1 if a shrinkage
    factor became non-positive.
    """
    d, k = P.shape
    t = t0
    for idx in range(order.shape[0]):
        n = order[idx]
        lo = indptr[n]
        hi = indptr[n + 1]
        t += 1
        eta = eta0 / (1.0 + eta0 * lam_p * t)
        for ii in range(lo, hi):
            j = indices[ii]
            if fit_linear:
                w[j] *= alpha[0] / alpha_wj[j]
            sc = alpha[1] / alpha_pj[j]
            for s in range(k):
                P[j, s] *= sc
        fx = bias[0]
        for s in range(k):
            acc = 0.0
            acc2 = 0.0
            for ii in range(lo, hi):
                v = data[ii] * P[indices[ii], s]
                acc += v
                acc2 += v * v
            a[s] = acc
            fx += 0.5 * (acc * acc - acc2)
        if fit_linear:
            for ii in range(lo, hi):
                fx += data[ii] * w[indices[ii]]
        dl = dloss(fx, y[n], loss)
        for ii in range(lo, hi):
            j = indices[ii]
            x = data[ii]
            for s in range(k):
                grad_p[ii - lo, s] = dl * x * (a[s] - x * P[j, s]) + 2.0 * lam_p * P[j, s]
        if fit_linear:
            for ii in range(lo, hi):
                j = indices[ii]
                w[j] -= eta * (dl * data[ii] + 2.0 * lam_w * w[j])
        for ii in range(lo, hi):
            j = indices[ii]
            for s in range(k):
                P[j, s] -= eta * grad_p[ii - lo, s]
        if fit_bias:
            bias[0] -= eta * dl
        fw = 1.0 - 2.0 * eta * lam_w
        fp = 1.0 - 2.0 * eta * lam_p
        if fw <= 0.0 or fp <= 0.0:
            return -1
        alpha[0] *= fw
        alpha[1] *= fp
        for ii in range(lo, hi):
            j = indices[ii]
            alpha_wj[j] = alpha[0]
            alpha_pj[j] = alpha[1]
        if alpha[0] < 1e-9 or alpha[1] < 1e-9:
            lazy_finalize(w, P, alpha, alpha_wj, alpha_pj, fit_linear)
    return t


@numba.njit(cache=True)
def lazy_finalize(w, P, alpha, alpha_wj, alpha_pj, fit_linear):
    d, k = P.shape
    for j in range(d):
        if fit_linear:
            w[j] *= alpha[0] / alpha_wj[j]
        sc = alpha[1] / alpha_pj[j]
        for s in range(k):
            P[j, s] *= sc
        alpha_wj[j] = 1.0
        alpha_pj[j] = 1.0
    alpha[0] = 1.0
    alpha[1] = 1.0

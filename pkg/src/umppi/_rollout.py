"""Compiled batch rollouts for the differential-drive model (n_x=3, n_u=2).

One ``prange`` iteration per batch (per trajectory for MPPI). Every
iteration reads only shared immutable inputs and writes its own output row,
so results do not depend on thread scheduling. The reference
implementation lives in :func:`umppi.controller.rollout_batch`; the two are
checked against each other in the test-suite.
"""

import math

import numpy as np
from numba import config as _nb_config
from numba import njit, prange

# the system TBB is often too old for numba; never probe it first
_nb_config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

MODE_MPPI, MODE_SM0, MODE_SM1 = 0, 1, 2

PSD_TOL = 1e-9
GAMMA_ZERO = 1e-8
EIG_FLOOR = 1e-6


@njit(cache=True)
def _psd_chol3(a, L):
    """PSD Cholesky in place; returns False on a negative pivot."""
    for i in range(3):
        for j in range(3):
            L[i, j] = 0.0
    for j in range(3):
        d = a[j, j]
        for p in range(j):
            d -= L[j, p] * L[j, p]
        if d > PSD_TOL:
            L[j, j] = math.sqrt(d)
            for i in range(j + 1, 3):
                r = a[i, j]
                for p in range(j):
                    r -= L[i, p] * L[j, p]
                L[i, j] = r / L[j, j]
        elif d < -PSD_TOL:
            return False
        else:
            for i in range(j + 1, 3):
                r = a[i, j]
                for p in range(j):
                    r -= L[i, p] * L[j, p]
                if abs(r) > math.sqrt(PSD_TOL):
                    return False
    return True


@njit(cache=True)
def _sqrt_with_jitter(a, L, tmp):
    if _psd_chol3(a, L):
        return True
    jitter = 1e-12
    while jitter <= 1e-6 * (1 + 1e-9):
        for i in range(3):
            for j in range(3):
                tmp[i, j] = a[i, j]
            tmp[i, i] += jitter
        if _psd_chol3(tmp, L):
            return True
        jitter *= 10.0
    return False


@njit(cache=True)
def _risk_terms(cov, q, gamma, Qrs, M):
    """Fill ``Qrs``; return (logdet_term, clamped)."""
    for i in range(3):
        for j in range(3):
            Qrs[i, j] = 0.0
    if abs(gamma) < GAMMA_ZERO:
        tr = 0.0
        for i in range(3):
            Qrs[i, i] = q[i]
            tr += q[i] * cov[i, i]
        return tr, False
    zero = True
    for i in range(3):
        for j in range(3):
            if cov[i, j] != 0.0:
                zero = False
    if zero:
        for i in range(3):
            Qrs[i, i] = q[i]
        return 0.0, False
    logdet_q = 0.0
    for i in range(3):
        logdet_q += math.log(q[i])
        for j in range(3):
            M[i, j] = 0.5 * gamma * (cov[i, j] + cov[j, i])
        M[i, i] += 1.0 / q[i]
    # strict Cholesky of M
    L = np.zeros((3, 3))
    ok = True
    for j in range(3):
        d = M[j, j]
        for p in range(j):
            d -= L[j, p] * L[j, p]
        if not d > 0.0:
            ok = False
            break
        L[j, j] = math.sqrt(d)
        for i in range(j + 1, 3):
            r = M[i, j]
            for p in range(j):
                r -= L[i, p] * L[j, p]
            L[i, j] = r / L[j, j]
    if ok:
        logdet = logdet_q
        for i in range(3):
            logdet += 2.0 * math.log(L[i, i])
        # inverse of lower-triangular L
        Li = np.zeros((3, 3))
        for i in range(3):
            Li[i, i] = 1.0 / L[i, i]
            for j in range(i):
                s = 0.0
                for p in range(j, i):
                    s -= L[i, p] * Li[p, j]
                Li[i, j] = s / L[i, i]
        for i in range(3):
            for j in range(3):
                s = 0.0
                for p in range(3):
                    s += Li[p, i] * Li[p, j]
                Qrs[i, j] = s
        return logdet / gamma, False
    evals, evecs = np.linalg.eigh(M)
    logdet = logdet_q
    for p in range(3):
        if evals[p] < EIG_FLOOR:
            evals[p] = EIG_FLOOR
        logdet += math.log(evals[p])
    for i in range(3):
        for j in range(3):
            s = 0.0
            for p in range(3):
                s += evecs[i, p] * evecs[j, p] / evals[p]
            Qrs[i, j] = s
    for i in range(3):
        for j in range(i):
            avg = 0.5 * (Qrs[i, j] + Qrs[j, i])
            Qrs[i, j] = avg
            Qrs[j, i] = avg
    return logdet / gamma, True


@njit(cache=True)
def _err(px, py, pt, goal, wrap, e):
    e[0] = px - goal[0]
    e[1] = py - goal[1]
    d = pt - goal[2]
    if wrap:
        d = math.atan2(math.sin(d), math.cos(d))
    e[2] = d


@njit(cache=True)
def _quad(e, W):
    s = 0.0
    for i in range(3):
        for j in range(3):
            s += e[i] * W[i, j] * e[j]
    return s


@njit(cache=True)
def _lethal(cells, ox, oy, res, x, y):
    ny, nx = cells.shape
    if ny == 0:
        return False
    c = math.floor((x - ox) / res)
    r = math.floor((y - oy) / res)
    if r < 0 or r >= ny or c < 0 or c >= nx:
        return False
    return cells[int(r), int(c)] != 0


@njit(cache=True)
def _ctrl_cost(u0, u1, d0, d1, R, gamma_u):
    rd0 = R[0, 0] * d0 + R[0, 1] * d1
    rd1 = R[1, 0] * d0 + R[1, 1] * d1
    ru0 = R[0, 0] * u0 + R[0, 1] * u1
    ru1 = R[1, 0] * u0 + R[1, 1] * u1
    return gamma_u * (d0 * rd0 + d1 * rd1) + (u0 * rd0 + u1 * rd1) + 0.5 * (u0 * ru0 + u1 * ru1)


@njit(cache=True, parallel=True)
def rollout_kernel(
    x0, cov0, U, noise, mode, dt, lo, hi,
    q, goal, wrap, gamma, w_crash, R, gamma_u,
    ut_scale, w_mean, w_cov,
    cells, origin, res,
):
    """Return per-sample costs-to-go and the count of floored risk matrices.

    ``noise`` is laid out ``(M_sigma, N, 2)``. Costs have shape
    ``(M_sigma, 7)`` in SM1 and ``(M_sigma, 1)`` otherwise.
    """
    n_batches = noise.shape[0]
    N = U.shape[0]
    n_eval = 7 if mode == MODE_SM1 else 1
    costs = np.zeros((n_batches, n_eval))
    clamp_counts = np.zeros(n_batches, dtype=np.int64)
    Qd = np.zeros((3, 3))
    for i in range(3):
        Qd[i, i] = q[i]
    ox, oy = origin[0], origin[1]

    for m in prange(n_batches):
        e = np.zeros(3)
        if mode == MODE_MPPI:
            sx, sy, st = x0[0], x0[1], x0[2]
            c = 0.0
            for k in range(N):
                u0, u1 = U[k, 0], U[k, 1]
                d0, d1 = noise[m, k, 0], noise[m, k, 1]
                w0 = min(max(u0 + d0, lo[0]), hi[0])
                w1 = min(max(u1 + d1, lo[1]), hi[1])
                _err(sx, sy, st, goal, wrap, e)
                c += _quad(e, Qd)
                if _lethal(cells, ox, oy, res, sx, sy):
                    c += w_crash
                c += _ctrl_cost(u0, u1, d0, d1, R, gamma_u)
                nx_ = sx + w0 * math.cos(st) * dt
                ny_ = sy + w0 * math.sin(st) * dt
                st = st + w1 * dt
                sx, sy = nx_, ny_
            _err(sx, sy, st, goal, wrap, e)
            c += _quad(e, Qd)
            if _lethal(cells, ox, oy, res, sx, sy):
                c += w_crash
            costs[m, 0] = c if math.isfinite(c) else np.inf
            continue

        mean = x0.copy()
        cov = cov0.copy()
        scaled = np.zeros((3, 3))
        L = np.zeros((3, 3))
        tmp = np.zeros((3, 3))
        Qrs = np.zeros((3, 3))
        Mw = np.zeros((3, 3))
        pts = np.zeros((7, 3))
        nxt = np.zeros((7, 3))
        acc = np.zeros(7)
        failed = False
        for k in range(N):
            for i in range(3):
                for j in range(3):
                    scaled[i, j] = ut_scale * cov[i, j]
            if not _sqrt_with_jitter(scaled, L, tmp):
                failed = True
                break
            for i in range(3):
                pts[0, i] = mean[i]
            for p in range(3):
                for i in range(3):
                    pts[1 + p, i] = mean[i] + L[i, p]
                    pts[4 + p, i] = mean[i] - L[i, p]
            logdet_term, clamped = _risk_terms(cov, q, gamma, Qrs, Mw)
            if clamped:
                clamp_counts[m] += 1
            u0, u1 = U[k, 0], U[k, 1]
            d0, d1 = noise[m, k, 0], noise[m, k, 1]
            cc = _ctrl_cost(u0, u1, d0, d1, R, gamma_u)
            for i in range(n_eval):
                _err(pts[i, 0], pts[i, 1], pts[i, 2], goal, wrap, e)
                acc[i] += logdet_term + _quad(e, Qrs) + cc
                if _lethal(cells, ox, oy, res, pts[i, 0], pts[i, 1]):
                    acc[i] += w_crash
            w0 = min(max(u0 + d0, lo[0]), hi[0])
            w1 = min(max(u1 + d1, lo[1]), hi[1])
            for i in range(7):
                th = pts[i, 2]
                nxt[i, 0] = pts[i, 0] + w0 * math.cos(th) * dt
                nxt[i, 1] = pts[i, 1] + w0 * math.sin(th) * dt
                nxt[i, 2] = th + w1 * dt
            # moments, anchored at point 0
            for j in range(3):
                s = 0.0
                for i in range(1, 7):
                    s += w_mean[i] * (nxt[i, j] - nxt[0, j])
                mean[j] = nxt[0, j] + s
            for a in range(3):
                for b in range(a, 3):
                    s = 0.0
                    for i in range(7):
                        s += w_cov[i] * (nxt[i, a] - mean[a]) * (nxt[i, b] - mean[b])
                    cov[a, b] = s
                    cov[b, a] = s
        if failed:
            for i in range(n_eval):
                costs[m, i] = np.inf
            continue
        logdet_term, clamped = _risk_terms(cov, q, gamma, Qrs, Mw)
        if clamped:
            clamp_counts[m] += 1
        for i in range(n_eval):
            if N > 0:
                px, py, pt = nxt[i, 0], nxt[i, 1], nxt[i, 2]
            else:
                px, py, pt = x0[0], x0[1], x0[2]
            _err(px, py, pt, goal, wrap, e)
            v = acc[i] + logdet_term + _quad(e, Qrs)
            if _lethal(cells, ox, oy, res, px, py):
                v += w_crash
            costs[m, i] = v if math.isfinite(v) else np.inf
    return costs, clamp_counts.sum()

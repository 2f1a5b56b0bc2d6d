"""Fused iteration loops for diagonal linear operators on a Euclidean ball.

When the operator is ``x -> scale * x`` and the feasible set is a ball, one
whole run of the mirror-prox loop (or of the adaptive no-restart loop) can be
compiled into a single numba function; the Python loop in :mod:`solvers`
spends most of its time in interpreter overhead for these problems.  The
kernels reproduce the generic path step for step: same trial sequence, same
closed-form prox steps, same acceptance tests.  Only the order of floating
point summation inside dot products differs.

Status codes: 0 stopped by rule, 1 hit the iteration cap, 2 line search failed.
"""

import numpy as np

from ._accel import njit

L_FLOOR = 1e-300

OUT_LAST_Z = 0
OUT_LAST_W = 1
OUT_WAVG = 2

EXTRA_DELTA = 0
EXTRA_NONE = 1
EXTRA_SCALED = 2


@njit(cache=True)
def _project_ball(p, c, r, out):
    n = p.shape[0]
    s = 0.0
    for i in range(n):
        d = p[i] - c[i]
        s += d * d
    nrm = np.sqrt(s)
    if nrm <= r:
        for i in range(n):
            out[i] = p[i]
    else:
        f = r / nrm
        for i in range(n):
            out[i] = c[i] + (p[i] - c[i]) * f


@njit(cache=True)
def _half_sq(a, b):
    s = 0.0
    for i in range(a.shape[0]):
        d = a[i] - b[i]
        s += d * d
    return 0.5 * s


@njit(cache=True)
def _norm_diff(a, b):
    return np.sqrt(2.0 * _half_sq(a, b))


@njit(cache=True)
def _grow1(a, size):
    out = np.empty(size, dtype=a.dtype)
    out[: a.shape[0]] = a
    return out


@njit(cache=True)
def _grow2(a, size):
    out = np.zeros((size, a.shape[1]), dtype=a.dtype)
    out[: a.shape[0]] = a
    return out


@njit(cache=True)
def ump_diag_ball(scale, c, r, z0, xs, has_xs, L_prev, delta, S_target, n_max, cap, mode, keep):
    n = z0.shape[0]
    cap_rows = min(n_max, 1024)
    trials = np.zeros(cap_rows, dtype=np.int64)
    Ls = np.zeros(cap_rows)
    Ss = np.zeros(cap_rows)
    Verr = np.full(cap_rows, np.nan)
    nerr = np.full(cap_rows, np.nan)
    zs = np.zeros((cap_rows if keep else 0, n))
    ws = np.zeros((cap_rows if keep else 0, n))

    z = z0.copy()
    gz = np.empty(n)
    w = np.empty(n)
    gw = np.empty(n)
    zn = np.empty(n)
    tmp = np.empty(n)
    wsum = np.zeros(n)
    avg = np.empty(n)
    S = 0.0
    status = 1
    count = 0
    for k in range(n_max):
        for i in range(n):
            gz[i] = scale[i] * z[i]
        accepted = False
        L = L_prev
        it = 0
        for it in range(cap):
            L = L_prev * 2.0 ** (it - 1)
            if L < L_FLOOR:
                L = L_FLOOR
            for i in range(n):
                tmp[i] = z[i] - gz[i] / L
            _project_ball(tmp, c, r, w)
            for i in range(n):
                gw[i] = scale[i] * w[i]
            for i in range(n):
                tmp[i] = z[i] - gw[i] / L
            _project_ball(tmp, c, r, zn)
            lhs = 0.0
            a1 = 0.0
            a2 = 0.0
            for i in range(n):
                lhs += gz[i] * (zn[i] - z[i])
                a1 += gw[i] * (zn[i] - w[i])
                a2 += gz[i] * (w[i] - z[i])
            rhs = a1 + a2 + L * (_half_sq(w, z) + _half_sq(zn, w)) + delta
            if lhs <= rhs:
                accepted = True
                break
        if not accepted:
            status = 2
            break
        S += 1.0 / L
        for i in range(n):
            wsum[i] += w[i] / L
            z[i] = zn[i]
        if k == cap_rows:
            cap_rows = min(n_max, 2 * cap_rows)
            trials = _grow1(trials, cap_rows)
            Ls = _grow1(Ls, cap_rows)
            Ss = _grow1(Ss, cap_rows)
            Verr = _grow1(Verr, cap_rows)
            nerr = _grow1(nerr, cap_rows)
            if keep:
                zs = _grow2(zs, cap_rows)
                ws = _grow2(ws, cap_rows)
        trials[k] = it
        Ls[k] = L
        Ss[k] = S
        if keep:
            for i in range(n):
                zs[k, i] = z[i]
                ws[k, i] = w[i]
        if has_xs:
            Verr[k] = _half_sq(xs, z)
            if mode == OUT_LAST_Z:
                nerr[k] = _norm_diff(z, xs)
            elif mode == OUT_LAST_W:
                nerr[k] = _norm_diff(w, xs)
            else:
                for i in range(n):
                    avg[i] = wsum[i] / S
                nerr[k] = _norm_diff(avg, xs)
        else:
            Verr[k] = np.nan
            nerr[k] = np.nan
        L_prev = L
        count = k + 1
        if S >= S_target:
            status = 0
            break
    return trials[:count], Ls[:count], Ss[:count], Verr[:count], nerr[:count], zs[:count], ws[:count], z, w, wsum, S, status


@njit(cache=True)
def adaptive_diag_ball(scale, c, r, z0, xs, has_xs, L_prev, mu, delta, extra, n_max, stop_eps, V0bar, cap, keep):
    n = z0.shape[0]
    cap_rows = min(n_max, 1024)
    trials = np.zeros(cap_rows, dtype=np.int64)
    Ls = np.zeros(cap_rows)
    Ss = np.zeros(cap_rows)
    Verr = np.full(cap_rows, np.nan)
    zs = np.zeros((cap_rows if keep else 0, n))
    ws = np.zeros((cap_rows if keep else 0, n))

    z = z0.copy()
    gz = np.empty(n)
    w = np.empty(n)
    gw = np.empty(n)
    zn = np.empty(n)
    tmp = np.empty(n)
    S = 0.0
    P = 1.0
    status = 1
    count = 0
    for k in range(n_max):
        for i in range(n):
            gz[i] = scale[i] * z[i]
        accepted = False
        L = L_prev
        it = 0
        for it in range(cap):
            L = L_prev * 2.0 ** (it - 1)
            if L < L_FLOOR:
                L = L_FLOOR
            for i in range(n):
                tmp[i] = z[i] - gz[i] / L
            _project_ball(tmp, c, r, w)
            for i in range(n):
                gw[i] = scale[i] * w[i]
            for i in range(n):
                tmp[i] = (L * z[i] + mu * w[i] - gw[i]) / (L + mu)
            _project_ball(tmp, c, r, zn)
            lhs = 0.0
            for i in range(n):
                lhs += (gz[i] - gw[i]) * (zn[i] - w[i])
            rhs = L * (_half_sq(w, z) + _half_sq(zn, w))
            if extra == EXTRA_DELTA:
                rhs += delta
            elif extra == EXTRA_SCALED:
                rhs += L * delta
            if lhs <= rhs:
                accepted = True
                break
        if not accepted:
            status = 2
            break
        S += 1.0 / L
        P *= L / (L + mu)
        for i in range(n):
            z[i] = zn[i]
        if k == cap_rows:
            cap_rows = min(n_max, 2 * cap_rows)
            trials = _grow1(trials, cap_rows)
            Ls = _grow1(Ls, cap_rows)
            Ss = _grow1(Ss, cap_rows)
            Verr = _grow1(Verr, cap_rows)
            if keep:
                zs = _grow2(zs, cap_rows)
                ws = _grow2(ws, cap_rows)
        trials[k] = it
        Ls[k] = L
        Ss[k] = S
        if keep:
            for i in range(n):
                zs[k, i] = z[i]
                ws[k, i] = w[i]
        Verr[k] = _half_sq(xs, z) if has_xs else np.nan
        L_prev = L
        count = k + 1
        if stop_eps > 0.0 and P * V0bar <= stop_eps:
            status = 0
            break
    return trials[:count], Ls[:count], Ss[:count], Verr[:count], zs[:count], ws[:count], z, w, S, status

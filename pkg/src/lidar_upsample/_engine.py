"""Compiled sliding-window engine.

One numba kernel walks the mask over every below-horizon pixel with a
two-pointer band gather (rows ascending, columns ascending, insertion
order within a cell), then evaluates the selected estimator inline. The
per-window arithmetic replicates :mod:`lidar_upsample.interpolators` and
:mod:`lidar_upsample.bfstar` operation-for-operation (same accumulation
order, no fastmath), so the engine output is bit-identical to applying
those functions per pixel.

Method ids and the packed parameter vector are fixed here; the public
handles in :mod:`lidar_upsample.methods` wrap them.
"""

from __future__ import annotations

import math

import numpy as np
import numba
from numba import njit, prange

# workqueue is always available and thread-safe for our one-kernel-at-a-time
# use; picking it explicitly also silences probing of incompatible TBB builds
if numba.config.THREADING_LAYER == "default":  # respect user overrides
    numba.config.THREADING_LAYER = "workqueue"

METHOD_AVERAGE = 0
METHOD_MIN = 1
METHOD_MAX = 2
METHOD_MEDIAN = 3
METHOD_NEAREST = 4
METHOD_IDW = 5
METHOD_KRIGING = 6
METHOD_BILATERAL = 7
METHOD_BFSTAR = 8

N_PARAMS = 6

_PIVOT_RTOL = 1e-10
_SILL_FLOOR = 1e-6


@njit(cache=True)
def _e_average(r, m):
    s = 0.0
    for i in range(m):
        s += r[i]
    return s / m


@njit(cache=True)
def _e_min(r, m):
    v = r[0]
    for i in range(1, m):
        if r[i] < v:
            v = r[i]
    return v


@njit(cache=True)
def _e_max(r, m):
    v = r[0]
    for i in range(1, m):
        if r[i] > v:
            v = r[i]
    return v


@njit(cache=True)
def _e_median(r, m):
    rs = np.sort(r[:m])
    mid = m // 2
    if m % 2 == 1:
        return rs[mid]
    return 0.5 * (rs[mid - 1] + rs[mid])


@njit(cache=True)
def _e_nearest(du, dv, r, m):
    best_d2 = du[0] * du[0] + dv[0] * dv[0]
    best_r = r[0]
    for i in range(1, m):
        d2 = du[i] * du[i] + dv[i] * dv[i]
        if d2 < best_d2 or (d2 == best_d2 and r[i] < best_r):
            best_d2 = d2
            best_r = r[i]
    return best_r


@njit(cache=True)
def _e_idw(du, dv, r, m, p):
    nz = 0
    sz = 0.0
    for i in range(m):
        if du[i] == 0 and dv[i] == 0:
            nz += 1
            sz += r[i]
    if nz > 0:
        return sz / nz
    num = 0.0
    den = 0.0
    for i in range(m):
        d = math.sqrt(float(du[i] * du[i] + dv[i] * dv[i]))
        wgt = d ** (-p)
        num += wgt * r[i]
        den += wgt
    return num / den


@njit(cache=True)
def _gamma(h, nugget, sill, range_len):
    if h == 0.0:
        return 0.0
    if h >= range_len:
        return sill
    x = h / range_len
    return nugget + (sill - nugget) * (1.5 * x - 0.5 * x * x * x)


@njit(cache=True)
def _solve_gauss(a, x, n, tol):
    # partial pivoting; returns False when a pivot falls below tol
    for col in range(n):
        piv = col
        pmax = abs(a[col, col])
        for row in range(col + 1, n):
            v = abs(a[row, col])
            if v > pmax:
                pmax = v
                piv = row
        if not pmax > tol:
            return False
        if piv != col:
            for cc in range(n):
                t = a[col, cc]
                a[col, cc] = a[piv, cc]
                a[piv, cc] = t
            t = x[col]
            x[col] = x[piv]
            x[piv] = t
        pivval = a[col, col]
        for row in range(col + 1, n):
            f = a[row, col] / pivval
            for cc in range(col + 1, n):
                t = f * a[col, cc]
                a[row, cc] = a[row, cc] - t
            x[row] = x[row] - f * x[col]
            a[row, col] = 0.0
    # back substitution in place: x becomes the solution
    for i in range(n - 1, -1, -1):
        s = x[i]
        for j in range(i + 1, n):
            s -= a[i, j] * x[j]
        x[i] = s / a[i, i]
    return True


@njit(cache=True)
def _e_kriging(du, dv, r, m, nugget, sill_in, range_in, mr):
    if m == 1:
        return r[0]
    if math.isnan(sill_in):
        mean = 0.0
        for i in range(m):
            mean += r[i]
        mean /= m
        ssd = 0.0
        for i in range(m):
            d = r[i] - mean
            ssd += d * d
        var = ssd / (m - 1)
        sill = var if var > _SILL_FLOOR else _SILL_FLOOR
        if sill < nugget:
            sill = nugget
    else:
        sill = sill_in
    range_len = range_in if not math.isnan(range_in) else mr / 2.0

    n1 = m + 1
    a = np.zeros((n1, n1), dtype=np.float64)
    b = np.zeros(n1, dtype=np.float64)
    for i in range(m):
        for j in range(m):
            if i != j:
                ddu = du[i] - du[j]
                ddv = dv[i] - dv[j]
                a[i, j] = _gamma(math.sqrt(float(ddu * ddu + ddv * ddv)),
                                 nugget, sill, range_len)
        a[i, m] = 1.0
        a[m, i] = 1.0
        b[i] = _gamma(math.sqrt(float(du[i] * du[i] + dv[i] * dv[i])),
                      nugget, sill, range_len)
    b[m] = 1.0

    scale = 1.0
    for i in range(n1):
        for j in range(n1):
            v = abs(a[i, j])
            if v > scale:
                scale = v
    if not _solve_gauss(a, b, n1, _PIVOT_RTOL * scale):
        return _e_idw(du, dv, r, m, 2.0)
    est = 0.0
    for i in range(m):
        est += b[i] * r[i]
    return est


@njit(cache=True)
def _e_bilateral_subset(du, dv, r, members, k, r0):
    num = 0.0
    den = 0.0
    for t in range(k):
        i = members[t]
        d = math.sqrt(float(du[i] * du[i] + dv[i] * dv[i]))
        gs = 1.0 / (1.0 + d)
        gr = 1.0 / (1.0 + abs(r0 - r[i]))
        wgt = gs * gr
        num += wgt * r[i]
        den += wgt
    return num / den


@njit(cache=True)
def _e_bilateral_all(du, dv, r, m):
    r0 = r[0]
    for i in range(1, m):
        if r[i] < r0:
            r0 = r[i]
    num = 0.0
    den = 0.0
    for i in range(m):
        d = math.sqrt(float(du[i] * du[i] + dv[i] * dv[i]))
        gs = 1.0 / (1.0 + d)
        gr = 1.0 / (1.0 + abs(r0 - r[i]))
        wgt = gs * gr
        num += wgt * r[i]
        den += wgt
    return num / den


@njit(cache=True)
def _e_bfstar(du, dv, r, m, eps, min_pts, thr):
    order = np.argsort(r[:m], kind="mergesort")
    rs = r[:m][order]
    # runs of sorted ranges separated where the DF gap exceeds eps
    acc_start = np.empty(m, dtype=np.int64)
    acc_len = np.empty(m, dtype=np.int64)
    nc = 0
    start = 0
    for k in range(1, m + 1):
        if k < m and abs((rs[k - 1] - rs[k]) / (rs[k - 1] + rs[k])) <= eps:
            continue
        if k - start >= min_pts:
            acc_start[nc] = start
            acc_len[nc] = k - start
            nc += 1
        start = k
    if nc <= 1:
        return _e_bilateral_all(du, dv, r, m)
    s2 = 1
    best = acc_len[1]
    for t in range(2, nc):
        if acc_len[t] > best:
            best = acc_len[t]
            s2 = t
    lam = acc_len[0] / acc_len[s2]
    sel = 0 if lam >= thr else s2
    k0 = acc_start[sel]
    kn = acc_len[sel]
    members = np.sort(order[k0:k0 + kn])
    r0 = rs[k0]
    return _e_bilateral_subset(du, dv, r, members, kn, r0)


@njit(cache=True)
def _estimate(method, du, dv, r, m, params, mr):
    if method == METHOD_AVERAGE:
        return _e_average(r, m)
    if method == METHOD_MIN:
        return _e_min(r, m)
    if method == METHOD_MAX:
        return _e_max(r, m)
    if method == METHOD_MEDIAN:
        return _e_median(r, m)
    if method == METHOD_NEAREST:
        return _e_nearest(du, dv, r, m)
    if method == METHOD_IDW:
        return _e_idw(du, dv, r, m, params[0])
    if method == METHOD_KRIGING:
        return _e_kriging(du, dv, r, m, params[0], params[1], params[2], mr)
    if method == METHOD_BILATERAL:
        return _e_bilateral_all(du, dv, r, m)
    if method == METHOD_BFSTAR:
        return _e_bfstar(du, dv, r, m, params[0], int(params[1]), params[2])
    return np.nan


@njit(cache=True, parallel=True)
def _upsample_kernel(mu, mv, horizon, row_start, su, sr, mr, method, params,
                     keep_case1, out):
    h = (mr - 1) // 2
    for v0 in prange(horizon, mv):
        band_lo = v0 - h
        if band_lo < 0:
            band_lo = 0
        band_hi = v0 + h
        if band_hi > mv - 1:
            band_hi = mv - 1
        nrows = band_hi - band_lo + 1
        total = row_start[band_hi + 1] - row_start[band_lo]
        lo = np.empty(nrows, dtype=np.int64)
        hi = np.empty(nrows, dtype=np.int64)
        for k in range(nrows):
            lo[k] = row_start[band_lo + k]
            hi[k] = row_start[band_lo + k]
        wdu = np.empty(total, dtype=np.int64)
        wdv = np.empty(total, dtype=np.int64)
        wr = np.empty(total, dtype=np.float64)
        for u0 in range(mu):
            umin = u0 - h
            umax = u0 + h
            m = 0
            c_center = 0
            r_center = 0.0
            for k in range(nrows):
                row_end = row_start[band_lo + k + 1]
                l = lo[k]
                while l < row_end and su[l] < umin:
                    l += 1
                lo[k] = l
                e = hi[k]
                if e < l:
                    e = l
                while e < row_end and su[e] <= umax:
                    e += 1
                hi[k] = e
                dv_k = band_lo + k - v0
                for idx in range(l, e):
                    wdu[m] = su[idx] - u0
                    wdv[m] = dv_k
                    wr[m] = sr[idx]
                    if dv_k == 0 and su[idx] == u0:
                        c_center += 1
                        r_center = sr[idx]
                    m += 1
            if m == 0:
                out[v0, u0] = 0.0
                continue
            if keep_case1 and c_center == 1:
                out[v0, u0] = r_center
                continue
            val = _estimate(method, wdu, wdv, wr, m, params, mr)
            if math.isfinite(val) and val > 0.0:
                out[v0, u0] = val
            else:
                out[v0, u0] = 0.0


def upsample_grid(mu, mv, horizon, row_start, cell_u, r, mr, method_id,
                  params, keep_case1):
    """Run one estimator over every below-horizon pixel; 0.0 = no estimate."""
    out = np.zeros((mv, mu), dtype=np.float64)
    par = np.zeros(N_PARAMS, dtype=np.float64)
    par[:len(params)] = params
    _upsample_kernel(mu, mv, horizon,
                     np.ascontiguousarray(row_start, dtype=np.int64),
                     np.ascontiguousarray(cell_u, dtype=np.int64),
                     np.ascontiguousarray(r, dtype=np.float64),
                     mr, method_id, par, keep_case1, out)
    return out

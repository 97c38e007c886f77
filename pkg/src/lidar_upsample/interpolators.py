"""Window-local depth estimators.

Every function here is a pure map from one window's samples to a scalar
depth. The implementations deliberately use explicit sequential loops in
canonical window order: the compiled sliding-window engine replicates the
same operation order, so both paths produce bit-identical results.

Empty windows return ``None`` (no estimate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .depthmap import WindowSample

BASIC_KINDS = ("average", "min", "max", "median", "nearest")

#: pivot tolerance (relative to the largest matrix entry) below which the
#: kriging system counts as singular and the estimator falls back to IDW
KRIGING_PIVOT_RTOL = 1e-10

#: lower bound for the per-window sill when derived from sample variance
SILL_FLOOR = 1e-6


@dataclass(frozen=True)
class IdwParams:
    """Inverse-distance weighting power."""

    p: float = 2.0

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError(f"power p must be > 0, got {self.p}")


@dataclass(frozen=True)
class VariogramParams:
    """Spherical semivariogram parameters.

    ``sill=None`` uses the window's sample variance (floored at
    ``SILL_FLOOR`` and never below the nugget); ``range_len=None`` uses
    half the mask size. Both defaults keep the estimator scale-adaptive.
    """

    nugget: float = 0.0
    sill: float | None = None
    range_len: float | None = None
    model: str = "spherical"

    def __post_init__(self):
        if self.nugget < 0:
            raise ValueError("nugget must be >= 0")
        if self.sill is not None and self.sill < self.nugget:
            raise ValueError("sill must be >= nugget")
        if self.range_len is not None and not self.range_len > 0:
            raise ValueError("range_len must be > 0")
        if self.model != "spherical":
            raise ValueError(f"unsupported variogram model {self.model!r}")


def op_basic(kind, w: WindowSample):
    """Order statistic / mean over the window ranges.

    ``nearest`` returns the range of the point with the smallest Euclidean
    offset norm; ties go to the smaller range (deterministic, and biased
    toward the foreground like the rest of the pipeline).
    """
    if kind not in BASIC_KINDS:
        raise ValueError(f"unknown basic operator {kind!r}")
    if w.empty:
        return None
    r = w.r
    n = r.size
    if kind == "average":
        s = 0.0
        for i in range(n):
            s += r[i]
        return s / n
    if kind == "min":
        m = r[0]
        for i in range(1, n):
            if r[i] < m:
                m = r[i]
        return m
    if kind == "max":
        m = r[0]
        for i in range(1, n):
            if r[i] > m:
                m = r[i]
        return m
    if kind == "median":
        rs = np.sort(r)
        mid = n // 2
        if n % 2 == 1:
            return rs[mid]
        return 0.5 * (rs[mid - 1] + rs[mid])
    # nearest
    du, dv = w.du, w.dv
    best_d2 = du[0] * du[0] + dv[0] * dv[0]
    best_r = r[0]
    for i in range(1, n):
        d2 = du[i] * du[i] + dv[i] * dv[i]
        if d2 < best_d2 or (d2 == best_d2 and r[i] < best_r):
            best_d2 = d2
            best_r = r[i]
    return best_r


def idw(w: WindowSample, params: IdwParams = IdwParams()):
    """Shepard inverse-distance weighting: r* = sum(d^-p * r) / sum(d^-p).

    Points at zero offset short-circuit to their own range (the limit of
    the formula); several zero-offset points average.
    """
    if w.empty:
        return None
    du, dv, r = w.du, w.dv, w.r
    n = r.size
    nz = 0
    sz = 0.0
    for i in range(n):
        if du[i] == 0 and dv[i] == 0:
            nz += 1
            sz += r[i]
    if nz > 0:
        return sz / nz
    p = params.p
    num = 0.0
    den = 0.0
    for i in range(n):
        d = math.sqrt(float(du[i] * du[i] + dv[i] * dv[i]))
        wgt = d ** (-p)
        num += wgt * r[i]
        den += wgt
    return num / den


def _gamma(h, nugget, sill, range_len):
    """Scalar spherical semivariogram (h in pixels, gamma in m^2)."""
    if h == 0.0:
        return 0.0
    if h >= range_len:
        return sill
    x = h / range_len
    return nugget + (sill - nugget) * (1.5 * x - 0.5 * x * x * x)


def semivariogram(h, params: VariogramParams):
    """Spherical semivariogram gamma(h); requires explicit sill and range.

    Accepts scalars or arrays. gamma(0) = 0, plateaus at the sill for
    h >= range_len.
    """
    if params.sill is None or params.range_len is None:
        raise ValueError("semivariogram needs explicit sill and range_len")
    h = np.asarray(h, dtype=np.float64)
    if np.any(h < 0):
        raise ValueError("lag distance must be >= 0")
    x = np.minimum(h / params.range_len, 1.0)
    out = np.where(
        h == 0.0, 0.0,
        np.where(h >= params.range_len, params.sill,
                 params.nugget
                 + (params.sill - params.nugget) * (1.5 * x - 0.5 * x * x * x)))
    return float(out) if out.ndim == 0 else out


def solve_linear_system(a, b, rtol=KRIGING_PIVOT_RTOL):
    """Gaussian elimination with partial pivoting; None when near-singular.

    The elimination sequence (pivot choice, row operations, back
    substitution) is fixed so the compiled engine can reproduce it
    bit-exactly.
    """
    a = np.array(a, dtype=np.float64)
    x = np.array(b, dtype=np.float64)
    n = x.size
    scale = max(1.0, float(np.max(np.abs(a)))) if n else 1.0
    tol = rtol * scale
    for col in range(n):
        piv = col
        pmax = abs(a[col, col])
        for row in range(col + 1, n):
            v = abs(a[row, col])
            if v > pmax:
                pmax = v
                piv = row
        if not pmax > tol:
            return None
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            x[col], x[piv] = x[piv], x[col]
        pivval = a[col, col]
        for row in range(col + 1, n):
            f = a[row, col] / pivval
            a[row, col + 1:] -= f * a[col, col + 1:]
            x[row] = x[row] - f * x[col]
            a[row, col] = 0.0
    sol = np.empty(n, dtype=np.float64)
    for i in range(n - 1, -1, -1):
        s = x[i]
        for j in range(i + 1, n):
            s -= a[i, j] * sol[j]
        sol[i] = s / a[i, i]
    return sol


def _kriging_system(w: WindowSample, params: VariogramParams):
    """Assemble the ordinary-kriging system (pairwise gamma, unbiasedness row)."""
    du, dv, r = w.du, w.dv, w.r
    n = r.size
    if params.sill is None:
        mean = 0.0
        for i in range(n):
            mean += r[i]
        mean /= n
        ssd = 0.0
        for i in range(n):
            d = r[i] - mean
            ssd += d * d
        var = ssd / (n - 1)
        sill = var if var > SILL_FLOOR else SILL_FLOOR
        if sill < params.nugget:
            sill = params.nugget
    else:
        sill = params.sill
    range_len = params.range_len if params.range_len is not None else w.mr / 2.0

    a = np.zeros((n + 1, n + 1), dtype=np.float64)
    b = np.zeros(n + 1, dtype=np.float64)
    for i in range(n):
        for j in range(n):
            if i != j:
                ddu = du[i] - du[j]
                ddv = dv[i] - dv[j]
                a[i, j] = _gamma(math.sqrt(float(ddu * ddu + ddv * ddv)),
                                 params.nugget, sill, range_len)
        a[i, n] = 1.0
        a[n, i] = 1.0
        b[i] = _gamma(math.sqrt(float(du[i] * du[i] + dv[i] * dv[i])),
                      params.nugget, sill, range_len)
    b[n] = 1.0
    return a, b


def kriging_weights(w: WindowSample, params: VariogramParams = VariogramParams()):
    """Ordinary-kriging weights and Lagrange multiplier, or None if singular.

    The weights sum to one by the unbiasedness constraint; individual
    weights may be negative.
    """
    if w.empty:
        return None
    if w.n == 1:
        return np.array([1.0]), 0.0
    a, b = _kriging_system(w, params)
    sol = solve_linear_system(a, b)
    if sol is None:
        return None
    return sol[:-1], float(sol[-1])


def kriging(w: WindowSample, params: VariogramParams = VariogramParams()):
    """Ordinary kriging estimate; singular systems fall back to IDW (p=2).

    Windows holding duplicate cell positions (several samples in one cell)
    make the system singular, so they land on the fallback as well.
    """
    if w.empty:
        return None
    if w.n == 1:
        return w.r[0]
    wl = kriging_weights(w, params)
    if wl is None:
        return idw(w, IdwParams(p=2.0))
    lam, _ = wl
    est = 0.0
    for i in range(w.n):
        est += lam[i] * w.r[i]
    return est


def bilateral(w: WindowSample, members=None, r0=None):
    """Bilateral depth estimate with rational proximity/similarity kernels.

    The anchor r0 defaults to the window minimum (nearest return). Spatial
    weight 1/(1+d) and range weight 1/(1+|r0-ri|) multiply; the weighted
    mean normalizes them to one. ``members`` restricts the filter to a
    subset of window points (ascending indices), with r0 then taken as the
    subset minimum.
    """
    if w.empty:
        return None
    du, dv, r = w.du, w.dv, w.r
    if members is None:
        members = range(r.size)
    elif len(members) == 0:
        return None
    if r0 is None:
        r0 = math.inf
        for i in members:
            if r[i] < r0:
                r0 = r[i]
    num = 0.0
    den = 0.0
    for i in members:
        d = math.sqrt(float(du[i] * du[i] + dv[i] * dv[i]))
        gs = 1.0 / (1.0 + d)
        gr = 1.0 / (1.0 + abs(r0 - r[i]))
        wgt = gs * gr
        num += wgt * r[i]
        den += wgt
    return num / den

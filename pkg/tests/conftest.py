"""Shared test helpers.

``naive_upsample`` is the independent reference for the sliding-window
engine: per pixel it brute-force-filters every sample by Chebyshev
distance and applies the per-window estimator. It shares no gathering or
dispatch machinery with the compiled engine.
"""

import numpy as np
import pytest

from lidar_upsample.depthmap import DenseDepthMap, SparseDepthMap, WindowSample


def naive_upsample(smap, interp, mr, keep_case1=False):
    h = (mr - 1) // 2
    out = np.zeros((smap.mv, smap.mu), dtype=np.float64)
    cu, cv, r = smap.cell_u, smap.cell_v, smap.r
    for v0 in range(smap.horizon_row, smap.mv):
        for u0 in range(smap.mu):
            sel = (np.abs(cu - u0) <= h) & (np.abs(cv - v0) <= h)
            du = cu[sel] - u0
            dv = cv[sel] - v0
            rr = r[sel]
            if rr.size == 0:
                continue
            if keep_case1:
                at_center = (du == 0) & (dv == 0)
                if at_center.sum() == 1:
                    out[v0, u0] = rr[at_center][0]
                    continue
            val = interp.apply(WindowSample((u0, v0), mr, du, dv, rr))
            if val is not None and np.isfinite(val) and val > 0:
                out[v0, u0] = val
    return DenseDepthMap(depth=out, horizon_row=smap.horizon_row)


def random_sparse_map(rng, mu=48, mv=48, density=0.08, horizon=0,
                      r_lo=2.0, r_hi=80.0, duplicates=0):
    """Random sparse map; ``duplicates`` adds extra samples on used cells
    (multi-return cells, the case the gather must keep intact)."""
    n = max(1, int(density * mu * mv))
    u = rng.integers(0, mu, size=n)
    v = rng.integers(0, mv, size=n)
    r = rng.uniform(r_lo, r_hi, size=n)
    if duplicates:
        k = rng.integers(0, n, size=duplicates)
        u = np.concatenate([u, u[k]])
        v = np.concatenate([v, v[k]])
        r = np.concatenate([r, rng.uniform(r_lo, r_hi, size=duplicates)])
    return SparseDepthMap.from_samples(mu, mv, u, v, r, horizon_row=horizon)


def random_window(rng, n=None, mr=9, r_lo=2.0, r_hi=80.0):
    h = (mr - 1) // 2
    if n is None:
        n = int(rng.integers(1, mr * mr // 2))
    du = rng.integers(-h, h + 1, size=n)
    dv = rng.integers(-h, h + 1, size=n)
    r = rng.uniform(r_lo, r_hi, size=n)
    return WindowSample((0, 0), mr, du, dv, r)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)

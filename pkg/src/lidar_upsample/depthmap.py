"""Image-plane depth grids and the sliding-window machinery.

The sparse map holds every projected range sample at its integer pixel
cell (a cell may hold zero, one, or several samples). Estimation walks a
square mr x mr window over every pixel at or below the horizon row and
hands the window contents to an interpolator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _engine


def round_half_away_from_zero(x):
    """Round to nearest integer, halves away from zero.

    Used for every real-to-pixel conversion so that binning is consistent
    across modules (``np.round`` would round halves to even).
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.sign(x) * np.floor(np.abs(x) + 0.5)
    if out.ndim == 0:
        return int(out)
    return out.astype(np.int64)


@dataclass
class SparseDepthMap:
    """Sparse range samples binned on a mu x mv pixel grid.

    Samples are kept in canonical order (row, then column, then insertion
    order); all window gathering preserves that order, which keeps every
    estimator deterministic. ``uv`` carries the pre-rounding real-valued
    image coordinates of each sample (equal to the cell coordinates for
    maps that were never projected, e.g. synthetic ones).
    """

    mu: int
    mv: int
    cell_u: np.ndarray
    cell_v: np.ndarray
    r: np.ndarray
    uv: np.ndarray
    horizon_row: int | None = None
    _row_start: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_samples(cls, mu, mv, u, v, r, uv=None, horizon_row=None):
        u = np.asarray(u, dtype=np.int64).ravel()
        v = np.asarray(v, dtype=np.int64).ravel()
        r = np.asarray(r, dtype=np.float64).ravel()
        if not (u.size == v.size == r.size):
            raise ValueError("u, v, r must have equal length")
        if u.size:
            if not np.all(np.isfinite(r)) or np.any(r <= 0):
                raise ValueError("range samples must be finite and > 0")
            if np.any((u < 0) | (u >= mu) | (v < 0) | (v >= mv)):
                raise ValueError("sample cells must lie inside the grid")
        if uv is None:
            uv = np.column_stack([u, v]).astype(np.float64)
        else:
            uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
            if uv.shape[0] != u.size:
                raise ValueError("uv must have one row per sample")
        order = np.lexsort((np.arange(u.size), u, v))
        return cls(mu=int(mu), mv=int(mv),
                   cell_u=u[order], cell_v=v[order], r=r[order],
                   uv=uv[order], horizon_row=horizon_row)

    @property
    def n_samples(self):
        return int(self.r.size)

    @property
    def row_start(self):
        """CSR-style offsets: samples of row v live in [row_start[v], row_start[v+1])."""
        if self._row_start is None:
            self._row_start = np.searchsorted(
                self.cell_v, np.arange(self.mv + 1)).astype(np.int64)
        return self._row_start

    def counts_grid(self):
        """Per-cell sample counts as an (mv, mu) int array."""
        counts = np.zeros((self.mv, self.mu), dtype=np.int64)
        np.add.at(counts, (self.cell_v, self.cell_u), 1)
        return counts

    def samples_at(self, u, v):
        """Range samples stored at cell (u, v), in insertion order."""
        s, e = self.row_start[v], self.row_start[v + 1]
        sel = self.cell_u[s:e] == u
        return self.r[s:e][sel]


@dataclass
class WindowSample:
    """Contents of one mr x mr mask: sample offsets relative to the center."""

    center: tuple[int, int]
    mr: int
    du: np.ndarray
    dv: np.ndarray
    r: np.ndarray

    @property
    def n(self):
        return int(self.r.size)

    @property
    def empty(self):
        return self.r.size == 0


@dataclass
class DenseDepthMap:
    """Per-pixel depth estimates in meters; 0.0 marks pixels with no estimate."""

    depth: np.ndarray
    horizon_row: int | None = None

    @property
    def mv(self):
        return self.depth.shape[0]

    @property
    def mu(self):
        return self.depth.shape[1]

    @property
    def valid_mask(self):
        return self.depth > 0


@dataclass
class DensityStats:
    """Window occupancy statistics for one mask size over one map."""

    mr: int
    n_max: int
    n_ave: float
    d_ens: float


def _check_mr(mr):
    if mr < 1 or mr % 2 == 0:
        raise ValueError(f"mask size must be an odd positive integer, got {mr}")


def _check_horizon(smap):
    if smap.horizon_row is None:
        raise ValueError("horizon_row is not set; run compute_horizon_line first")


def gather_window(smap: SparseDepthMap, center, mr) -> WindowSample:
    """Collect every sample within the mr x mr square centered at ``center``.

    Windows are clipped at the image border; the center cell's own samples
    are included. Points come back in canonical map order with offsets
    relative to the center.
    """
    _check_mr(mr)
    u0, v0 = int(center[0]), int(center[1])
    if not (0 <= u0 < smap.mu and 0 <= v0 < smap.mv):
        raise ValueError(f"center {center} outside {smap.mu}x{smap.mv} image")
    h = (mr - 1) // 2
    vlo, vhi = max(0, v0 - h), min(smap.mv - 1, v0 + h)
    s, e = smap.row_start[vlo], smap.row_start[vhi + 1]
    cu = smap.cell_u[s:e]
    sel = np.abs(cu - u0) <= h
    du = (cu[sel] - u0).astype(np.int64)
    dv = (smap.cell_v[s:e][sel] - v0).astype(np.int64)
    return WindowSample(center=(u0, v0), mr=mr, du=du, dv=dv,
                        r=smap.r[s:e][sel].copy())


def upsample(smap: SparseDepthMap, interp, mr, *, keep_case1=False) -> DenseDepthMap:
    """Estimate depth at every pixel at or below the horizon row.

    ``interp`` is an interpolator handle from :mod:`lidar_upsample.methods`.
    Each pixel's window is gathered (step 1, clipped at borders) and passed
    to the estimator; empty windows and non-positive or non-finite
    estimates yield no value. With ``keep_case1`` pixels whose own cell
    holds exactly one sample pass that sample through unchanged.

    Estimation is row-parallel; interpolators are pure so the output never
    depends on evaluation order.
    """
    _check_mr(mr)
    _check_horizon(smap)
    depth = _engine.upsample_grid(
        smap.mu, smap.mv, int(smap.horizon_row), smap.row_start,
        smap.cell_u, smap.r, int(mr),
        interp.method_id, interp.engine_params(), bool(keep_case1))
    return DenseDepthMap(depth=depth, horizon_row=smap.horizon_row)


def density_stats(smap: SparseDepthMap, mr) -> DensityStats:
    """Occupancy statistics over every below-horizon window placement (step 1).

    Counts use a summed-area table over the per-cell occupancy grid, so
    border windows see exactly their clipped in-bounds content.
    """
    _check_mr(mr)
    _check_horizon(smap)
    h = (mr - 1) // 2
    counts = smap.counts_grid()
    sat = np.zeros((smap.mv + 1, smap.mu + 1), dtype=np.int64)
    np.cumsum(np.cumsum(counts, axis=0), axis=1, out=sat[1:, 1:])

    v0 = np.arange(smap.horizon_row, smap.mv)
    u0 = np.arange(smap.mu)
    vlo = np.clip(v0 - h, 0, None)[:, None]
    vhi = np.minimum(v0 + h, smap.mv - 1)[:, None] + 1
    ulo = np.clip(u0 - h, 0, None)[None, :]
    uhi = np.minimum(u0 + h, smap.mu - 1)[None, :] + 1
    win = (sat[vhi, uhi] - sat[vlo, uhi] - sat[vhi, ulo] + sat[vlo, ulo])
    return DensityStats(
        mr=int(mr),
        n_max=int(win.max()) if win.size else 0,
        n_ave=float(win.mean()) if win.size else 0.0,
        d_ens=float(100.0 * np.count_nonzero(win) / win.size) if win.size else 0.0,
    )

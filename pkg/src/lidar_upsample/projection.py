"""Point-cloud projection into the image plane.

Points go sensor frame -> camera frame -> rectified frame -> image, keep
their camera depth as the range value, and are binned at integer pixels.
The horizon row (top of the sensor's vertical field of view) is estimated
from the column-wise minima of the projected points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .depthmap import SparseDepthMap, round_half_away_from_zero
from .kitti_io import Calibration, PointCloud

RANGE_MODES = ("camera", "euclidean")


@dataclass
class CaseStats:
    """Cell occupancy percentages over the pixels at or below the horizon:
    exactly one sample, more than one, none."""

    pct_case1: float
    pct_case2: float
    pct_case3: float


def project(pc: PointCloud, calib: Calibration, mu, mv, *,
            range_mode="camera") -> SparseDepthMap:
    """Project a point cloud onto a mu x mv pixel grid.

    Points behind the camera or whose rounded pixel falls outside the
    grid are discarded; everything else is binned at the rounded pixel
    with all samples per cell retained. The stored range is the rectified
    camera depth by default; ``range_mode="euclidean"`` stores the sensor
    Euclidean distance instead (the evaluation compares against
    disparity-derived depth, which is camera depth, hence the default).
    """
    if range_mode not in RANGE_MODES:
        raise ValueError(f"range_mode must be one of {RANGE_MODES}")
    xyz = pc.xyz()
    cam = xyz @ calib.T_velo_cam[:3, :3].T + calib.T_velo_cam[:3, 3]
    rect = cam @ calib.R_rect.T
    hom = rect @ calib.P[:, :3].T + calib.P[:, 3]
    z = hom[:, 2]
    if range_mode == "camera":
        r_all = z
    else:
        r_all = np.sqrt((xyz ** 2).sum(axis=1))

    keep = z > 0
    u = hom[keep, 0] / z[keep]
    v = hom[keep, 1] / z[keep]
    r = r_all[keep]
    ui = round_half_away_from_zero(u)
    vi = round_half_away_from_zero(v)
    inside = (ui >= 0) & (ui < mu) & (vi >= 0) & (vi < mv) & (r > 0)
    return SparseDepthMap.from_samples(
        mu, mv, ui[inside], vi[inside], r[inside],
        uv=np.column_stack([u[inside], v[inside]]))


def compute_horizon_line(smap: SparseDepthMap) -> int:
    """Row index of the sensor's upper field-of-view boundary.

    For every column holding samples, take the topmost (smallest) sample
    row; the horizon is the rounded mean of those minima.
    """
    if smap.n_samples == 0:
        raise ValueError("cannot compute a horizon line on an empty map")
    col_min = np.full(smap.mu, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(col_min, smap.cell_u, smap.cell_v)
    tops = col_min[col_min != np.iinfo(np.int64).max]
    return int(round_half_away_from_zero(float(tops.mean())))


def occupancy_stats(smap: SparseDepthMap) -> CaseStats:
    """Fractions of below-horizon cells holding one, several, or no samples."""
    if smap.horizon_row is None:
        raise ValueError("horizon_row is not set")
    counts = smap.counts_grid()[smap.horizon_row:]
    n_px = counts.size
    c1 = int(np.count_nonzero(counts == 1))
    c2 = int(np.count_nonzero(counts > 1))
    return CaseStats(pct_case1=100.0 * c1 / n_px,
                     pct_case2=100.0 * c2 / n_px,
                     pct_case3=100.0 * (n_px - c1 - c2) / n_px)

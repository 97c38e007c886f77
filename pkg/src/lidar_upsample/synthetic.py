"""Synthetic scenes with exact ground truth.

Scenes are composed from three primitives: a flat background wall, a
ground plane receding under pinhole geometry, and axis-aligned foreground
boxes at fixed depths. Sampling the dense depth field uniformly at random
(seeded) produces a sparse map whose statistics mimic a projected sensor
scan, while the dense field itself serves as ground truth for the
evaluation metrics. Everything is deterministic in the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .depthmap import SparseDepthMap
from .kitti_io import DisparityMap


@dataclass(frozen=True)
class Box:
    """Axis-aligned foreground rectangle at a fixed depth (meters).

    Bounds are half-open pixel ranges: columns [u0, u1), rows [v0, v1).
    """

    depth: float
    u0: int
    u1: int
    v0: int
    v1: int


@dataclass
class SyntheticScene:
    """Dense ground-truth depth field plus sampling recipe.

    ``depth`` is 0 above the horizon (outside the emulated sensor FOV)
    and positive elsewhere; ``fg_mask`` marks foreground-box pixels.
    """

    depth: np.ndarray
    fg_mask: np.ndarray
    horizon_row: int
    rate: float
    seed: int
    baseline: float
    focal: float

    @property
    def mv(self):
        return self.depth.shape[0]

    @property
    def mu(self):
        return self.depth.shape[1]


DEFAULT_BOXES = (
    Box(depth=8.0, u0=150, u1=238, v0=120, v1=225),
    Box(depth=14.0, u0=40, u1=100, v0=90, v1=180),
)


def build_scene(width=384, height=256, *, rate=0.07, seed=1234,
                horizon_row=64, bg_depth=40.0, boxes=DEFAULT_BOXES,
                focal=700.0, baseline=0.54, cam_height=1.65,
                principal_row=None) -> SyntheticScene:
    """Compose wall + ground + foreground boxes into a scene.

    The ground plane follows depth = focal * cam_height / (v - principal
    row); rows where that exceeds the wall depth show the wall. Boxes
    override whatever is behind them (nearest surface wins).
    """
    if not 0 < rate <= 1:
        raise ValueError(f"sampling rate must be in (0, 1], got {rate}")
    if not 0 <= horizon_row < height:
        raise ValueError("horizon_row must lie inside the image")
    cy = principal_row if principal_row is not None else height / 2.0

    depth = np.zeros((height, width), dtype=np.float64)
    rows = np.arange(height, dtype=np.float64)
    ground = np.full(height, np.inf)
    below = rows > cy
    ground[below] = focal * cam_height / (rows[below] - cy)
    per_row = np.minimum(ground, bg_depth)
    depth[horizon_row:, :] = per_row[horizon_row:, None]

    fg = np.zeros((height, width), dtype=bool)
    for box in sorted(boxes, key=lambda b: -b.depth):
        if not box.depth > 0:
            raise ValueError("box depth must be > 0")
        sl = (slice(max(box.v0, horizon_row), box.v1), slice(box.u0, box.u1))
        nearer = depth[sl] > box.depth
        depth[sl] = np.where(nearer, box.depth, depth[sl])
        fg[sl] |= nearer
    return SyntheticScene(depth=depth, fg_mask=fg, horizon_row=horizon_row,
                          rate=rate, seed=seed, baseline=baseline, focal=focal)


def gen_synthetic(scene: SyntheticScene):
    """Sample the scene into (sparse map, ground-truth disparity, fg mask).

    Exactly floor(rate * number of valid-depth pixels) samples are drawn
    without replacement with the scene's seed; sampled pixels carry the
    exact ground-truth depth.
    """
    if not 0 < scene.rate <= 1:
        raise ValueError(f"sampling rate must be in (0, 1], got {scene.rate}")
    vv, uu = np.nonzero(scene.depth > 0)
    n_valid = vv.size
    n_draw = int(np.floor(scene.rate * n_valid))
    rng = np.random.default_rng(scene.seed)
    pick = rng.choice(n_valid, size=n_draw, replace=False)
    su, sv = uu[pick], vv[pick]
    smap = SparseDepthMap.from_samples(
        scene.mu, scene.mv, su, sv, scene.depth[sv, su],
        horizon_row=scene.horizon_row)

    disp = np.zeros_like(scene.depth)
    valid = scene.depth > 0
    disp[valid] = scene.baseline * scene.focal / scene.depth[valid]
    return smap, DisparityMap(values=disp), scene.fg_mask.copy()

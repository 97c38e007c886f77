"""Quantitative evaluation against disparity ground truth.

Depth estimates are converted to disparity (d = baseline * focal / depth)
and compared pixel-wise against the ground truth. A ground-truth pixel is
an outlier when the disparity error exceeds 3 px AND 5 % of the true
disparity (the KITTI stereo 2015 convention, adopted here as an external
standard and configurable for sensitivity checks). Ground-truth pixels
with no estimate count as outliers for the error rates and as misses for
density.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .depthmap import DenseDepthMap
from .kitti_io import DisparityMap

OUTLIER_ABS_PX = 3.0
OUTLIER_REL = 0.05

#: log-scale disparity-error color ramp: (upper bound on normalized error,
#: rgb). Normalized error 1.0 is exactly the outlier threshold, so blues
#: are inliers and warm colors outliers.
ERROR_RAMP = (
    (1.0 / 16, (49, 54, 149)),
    (1.0 / 8, (69, 117, 180)),
    (1.0 / 4, (116, 173, 209)),
    (1.0 / 2, (171, 217, 233)),
    (1.0, (224, 243, 248)),
    (2.0, (254, 224, 144)),
    (4.0, (253, 174, 97)),
    (8.0, (244, 109, 67)),
    (16.0, (215, 48, 39)),
    (np.inf, (165, 0, 38)),
)

#: ground-truth pixels with no estimate
MISSING_COLOR = (255, 0, 255)


@dataclass
class EvalReport:
    """Outlier and coverage counts for one frame or an aggregate.

    The percentage properties derive from raw pixel counts so that
    aggregation over frames is an exact pixel-weighted mean, independent
    of frame order. Foreground/background figures are only available when
    a mask was supplied (``n_gt_fg + n_gt_bg == n_gt`` then).
    """

    frame_count: int = 0
    n_gt: int = 0
    n_outlier: int = 0
    n_est: int = 0
    has_fg: bool = False
    n_gt_fg: int = 0
    n_outlier_fg: int = 0
    n_gt_bg: int = 0
    n_outlier_bg: int = 0

    @staticmethod
    def _pct(num, den):
        return 100.0 * num / den if den else 0.0

    @property
    def d1_all(self):
        return self._pct(self.n_outlier, self.n_gt)

    @property
    def d1_fg(self):
        return self._pct(self.n_outlier_fg, self.n_gt_fg) if self.has_fg else None

    @property
    def d1_bg(self):
        return self._pct(self.n_outlier_bg, self.n_gt_bg) if self.has_fg else None

    @property
    def density(self):
        return self._pct(self.n_est, self.n_gt)

    @classmethod
    def aggregate(cls, reports):
        """Pixel-weighted merge of per-frame reports (order-insensitive)."""
        out = cls(has_fg=all(r.has_fg for r in reports) and bool(reports))
        for r in reports:
            out.frame_count += r.frame_count
            out.n_gt += r.n_gt
            out.n_outlier += r.n_outlier
            out.n_est += r.n_est
            if out.has_fg:
                out.n_gt_fg += r.n_gt_fg
                out.n_outlier_fg += r.n_outlier_fg
                out.n_gt_bg += r.n_gt_bg
                out.n_outlier_bg += r.n_outlier_bg
        return out


def disparity_to_depth(disp: DisparityMap, baseline, focal) -> DenseDepthMap:
    """depth = baseline * focal / disparity at valid pixels."""
    _check_bf(baseline, focal)
    depth = np.zeros_like(disp.values, dtype=np.float64)
    valid = disp.valid_mask
    depth[valid] = baseline * focal / disp.values[valid]
    return DenseDepthMap(depth=depth)


def depth_to_disparity(dmap: DenseDepthMap, baseline, focal) -> DisparityMap:
    """disparity = baseline * focal / depth at valid pixels."""
    _check_bf(baseline, focal)
    disp = np.zeros_like(dmap.depth, dtype=np.float64)
    valid = dmap.valid_mask
    disp[valid] = baseline * focal / dmap.depth[valid]
    return DisparityMap(values=disp)


def _check_bf(baseline, focal):
    if not baseline > 0 or not focal > 0:
        raise ValueError("baseline and focal must be > 0")


def _outlier_masks(est: DenseDepthMap, gt: DisparityMap, baseline, focal,
                   abs_px, rel):
    if est.depth.shape != gt.values.shape:
        raise ValueError(
            f"estimate {est.depth.shape} vs ground truth {gt.values.shape}")
    gt_valid = gt.valid_mask
    est_disp = depth_to_disparity(est, baseline, focal).values
    have_est = est.valid_mask
    err = np.abs(est_disp - gt.values)
    bad = (err > abs_px) & (err > rel * gt.values)
    # missing estimates at ground-truth pixels are outliers by convention
    outlier = gt_valid & (~have_est | bad)
    return gt_valid, have_est, outlier, err


def d1_metrics(est: DenseDepthMap, gt: DisparityMap, fg_mask=None, *,
               baseline, focal, abs_px=OUTLIER_ABS_PX, rel=OUTLIER_REL) -> EvalReport:
    """Outlier rates (overall and fg/bg when a mask is given) plus density."""
    gt_valid, have_est, outlier, _ = _outlier_masks(
        est, gt, baseline, focal, abs_px, rel)
    rep = EvalReport(
        frame_count=1,
        n_gt=int(gt_valid.sum()),
        n_outlier=int(outlier.sum()),
        n_est=int((gt_valid & have_est).sum()),
    )
    if fg_mask is not None:
        fg_mask = np.asarray(fg_mask, dtype=bool)
        if fg_mask.shape != gt.values.shape:
            raise ValueError(
                f"fg mask {fg_mask.shape} vs ground truth {gt.values.shape}")
        rep.has_fg = True
        rep.n_gt_fg = int((gt_valid & fg_mask).sum())
        rep.n_outlier_fg = int((outlier & fg_mask).sum())
        rep.n_gt_bg = int((gt_valid & ~fg_mask).sum())
        rep.n_outlier_bg = int((outlier & ~fg_mask).sum())
    return rep


def render_error_map(est: DenseDepthMap, gt: DisparityMap, *, baseline, focal,
                     path, abs_px=OUTLIER_ABS_PX, rel=OUTLIER_REL):
    """Write a color PNG of per-pixel disparity error.

    Errors are normalized so 1.0 sits at the outlier threshold and binned
    on a doubling (log) ramp; pixels without ground truth stay black and
    ground-truth pixels lacking an estimate use a sentinel color.
    """
    gt_valid, have_est, _, err = _outlier_masks(
        est, gt, baseline, focal, abs_px, rel)
    with np.errstate(divide="ignore", invalid="ignore"):
        norm = np.minimum(err / abs_px, (err / gt.values) / rel)
    img = np.zeros(gt.values.shape + (3,), dtype=np.uint8)
    shown = gt_valid & have_est
    binned = np.full(gt.values.shape, len(ERROR_RAMP) - 1, dtype=np.int64)
    acc = np.zeros(gt.values.shape, dtype=bool)
    for i, (upper, _) in enumerate(ERROR_RAMP):
        sel = shown & ~acc & (norm <= upper)
        binned[sel] = i
        acc |= sel
    for i, (_, rgb) in enumerate(ERROR_RAMP):
        img[shown & (binned == i)] = rgb
    img[gt_valid & ~have_est] = MISSING_COLOR
    Image.fromarray(img).save(path, format="PNG")
    return img

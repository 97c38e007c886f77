"""Disparity conversion, outlier metrics, error rendering."""

import numpy as np
import pytest
from PIL import Image

from lidar_upsample.depthmap import DenseDepthMap
from lidar_upsample.evaluation import (ERROR_RAMP, MISSING_COLOR, EvalReport,
                                       d1_metrics, depth_to_disparity,
                                       disparity_to_depth, render_error_map)
from lidar_upsample.kitti_io import DisparityMap


def disp_map(values):
    return DisparityMap(values=np.asarray(values, dtype=np.float64))


def depth_map(values):
    return DenseDepthMap(depth=np.asarray(values, dtype=np.float64))


class TestConversions:
    def test_direct_substitution(self):
        d = disparity_to_depth(disp_map([[35.0]]), baseline=0.5, focal=700.0)
        assert d.depth[0, 0] == pytest.approx(10.0, rel=1e-12)

    def test_invalid_stays_invalid(self):
        d = disparity_to_depth(disp_map([[0.0]]), baseline=0.5, focal=700.0)
        assert d.depth[0, 0] == 0.0
        back = depth_to_disparity(depth_map([[0.0]]), baseline=0.5, focal=700.0)
        assert back.values[0, 0] == 0.0

    def test_inverse_direction(self):
        d = depth_to_disparity(depth_map([[10.0]]), baseline=0.5, focal=700.0)
        assert d.values[0, 0] == pytest.approx(35.0, rel=1e-12)

    def test_round_trip_identity(self, rng):
        vals = rng.uniform(0.5, 200.0, size=(50, 50))
        disp = disp_map(vals)
        back = depth_to_disparity(
            disparity_to_depth(disp, baseline=0.54, focal=721.0),
            baseline=0.54, focal=721.0)
        np.testing.assert_allclose(back.values, vals, rtol=1e-9)

    def test_rejects_bad_geometry(self):
        with pytest.raises(ValueError):
            disparity_to_depth(disp_map([[1.0]]), baseline=0.0, focal=700.0)


class TestD1Metrics:
    B, F = 0.5, 700.0

    def _est_from_disp(self, disp_values):
        return disparity_to_depth(disp_map(disp_values), self.B, self.F)

    def test_perfect_estimate(self):
        gt = disp_map([[10.0, 20.0], [30.0, 0.0]])
        est = self._est_from_disp([[10.0, 20.0], [30.0, 0.0]])
        rep = d1_metrics(est, gt, baseline=self.B, focal=self.F)
        assert rep.d1_all == 0.0
        assert rep.density == 100.0
        assert rep.n_gt == 3

    def test_two_px_error_not_outlier(self):
        gt = disp_map([[50.0]])
        est = self._est_from_disp([[52.0]])
        rep = d1_metrics(est, gt, baseline=self.B, focal=self.F)
        assert rep.d1_all == 0.0  # 2 px < 3 px

    def test_abs_only_not_outlier(self):
        # 4 px over a 100 px disparity: above 3 px but only 4 % relative
        gt = disp_map([[100.0]])
        est = self._est_from_disp([[104.0]])
        rep = d1_metrics(est, gt, baseline=self.B, focal=self.F)
        assert rep.d1_all == 0.0

    def test_rel_only_not_outlier(self):
        # 2.5 px over 10 px: 25 % relative but under the 3 px floor
        gt = disp_map([[10.0]])
        est = self._est_from_disp([[12.5]])
        rep = d1_metrics(est, gt, baseline=self.B, focal=self.F)
        assert rep.d1_all == 0.0

    def test_both_conditions_outlier(self):
        gt = disp_map([[10.0]])
        est = self._est_from_disp([[14.0]])
        rep = d1_metrics(est, gt, baseline=self.B, focal=self.F)
        assert rep.d1_all == 100.0

    def test_missing_estimate_is_outlier_and_density_miss(self):
        gt = disp_map([[10.0, 10.0]])
        est = self._est_from_disp([[10.0, 0.0]])
        rep = d1_metrics(est, gt, baseline=self.B, focal=self.F)
        assert rep.d1_all == 50.0
        assert rep.density == 50.0

    def test_estimates_off_groundtruth_ignored(self):
        gt = disp_map([[10.0, 0.0]])
        est = self._est_from_disp([[10.0, 33.0]])
        rep = d1_metrics(est, gt, baseline=self.B, focal=self.F)
        assert rep.n_gt == 1 and rep.d1_all == 0.0 and rep.density == 100.0

    def test_fg_bg_split_consistent(self, rng):
        gt_vals = rng.uniform(5, 80, size=(20, 30))
        est_vals = gt_vals + rng.normal(0, 3, size=gt_vals.shape)
        est_vals = np.clip(est_vals, 0.1, None)
        gt = disp_map(gt_vals)
        est = self._est_from_disp(est_vals)
        fg = np.zeros_like(gt_vals, dtype=bool)
        fg[5:12, 8:20] = True
        with_mask = d1_metrics(est, gt, fg, baseline=self.B, focal=self.F)
        without = d1_metrics(est, gt, baseline=self.B, focal=self.F)
        assert with_mask.d1_all == without.d1_all
        assert with_mask.n_gt_fg + with_mask.n_gt_bg == with_mask.n_gt
        assert without.d1_fg is None and without.d1_bg is None
        # recombining fg/bg outliers reproduces the overall rate
        total = with_mask.n_outlier_fg + with_mask.n_outlier_bg
        assert total == with_mask.n_outlier

    def test_aggregation_order_invariant(self, rng):
        reports = []
        for _ in range(5):
            gt_vals = rng.uniform(5, 80, size=(10, 10))
            est_vals = np.clip(gt_vals + rng.normal(0, 2, size=(10, 10)), 0.1, None)
            reports.append(d1_metrics(self._est_from_disp(est_vals),
                                      disp_map(gt_vals),
                                      baseline=self.B, focal=self.F))
        a = EvalReport.aggregate(reports)
        b = EvalReport.aggregate(list(reversed(reports)))
        assert (a.d1_all, a.density, a.n_gt) == (b.d1_all, b.density, b.n_gt)
        assert a.frame_count == 5

    def test_density_monotone_in_estimates(self, rng):
        gt_vals = rng.uniform(5, 80, size=(10, 10))
        gt = disp_map(gt_vals)
        est_vals = gt_vals.copy()
        est_vals[::2] = 0.0
        sparse_rep = d1_metrics(self._est_from_disp(est_vals), gt,
                                baseline=self.B, focal=self.F)
        full_rep = d1_metrics(self._est_from_disp(gt_vals), gt,
                              baseline=self.B, focal=self.F)
        assert full_rep.density >= sparse_rep.density

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="vs ground truth"):
            d1_metrics(depth_map([[1.0]]), disp_map([[1.0, 2.0]]),
                       baseline=self.B, focal=self.F)
        with pytest.raises(ValueError, match="fg mask"):
            d1_metrics(depth_map([[1.0]]), disp_map([[1.0]]),
                       np.zeros((2, 2), dtype=bool),
                       baseline=self.B, focal=self.F)


class TestErrorMap:
    B, F = 0.5, 700.0

    def test_zero_error_uniform_lowest_color(self, tmp_path, rng):
        gt_vals = rng.uniform(10, 60, size=(8, 8))
        gt = disp_map(gt_vals)
        est = disparity_to_depth(gt, self.B, self.F)
        path = tmp_path / "err.png"
        img = render_error_map(est, gt, baseline=self.B, focal=self.F,
                               path=path)
        assert np.all(img == np.array(ERROR_RAMP[0][1], dtype=np.uint8))
        assert path.exists()

    def test_dimensions_match(self, tmp_path, rng):
        gt = disp_map(rng.uniform(10, 60, size=(12, 17)))
        est = disparity_to_depth(gt, self.B, self.F)
        img = render_error_map(est, gt, baseline=self.B, focal=self.F,
                               path=tmp_path / "err.png")
        assert img.shape == (12, 17, 3)
        loaded = np.array(Image.open(tmp_path / "err.png"))
        assert loaded.shape == (12, 17, 3)

    def test_missing_estimate_sentinel(self, tmp_path):
        gt = disp_map([[20.0, 20.0]])
        est = depth_map([[self.B * self.F / 20.0, 0.0]])
        img = render_error_map(est, gt, baseline=self.B, focal=self.F,
                               path=tmp_path / "err.png")
        assert tuple(img[0, 1]) == MISSING_COLOR

    def test_no_groundtruth_black(self, tmp_path):
        gt = disp_map([[0.0]])
        est = depth_map([[5.0]])
        img = render_error_map(est, gt, baseline=self.B, focal=self.F,
                               path=tmp_path / "err.png")
        assert tuple(img[0, 0]) == (0, 0, 0)

    def test_large_error_warm_color(self, tmp_path):
        gt = disp_map([[20.0]])
        est = depth_map([[self.B * self.F / 80.0]])  # 60 px disparity error
        img = render_error_map(est, gt, baseline=self.B, focal=self.F,
                               path=tmp_path / "err.png")
        warm = [rgb for _, rgb in ERROR_RAMP[5:]]
        assert tuple(img[0, 0]) in warm

"""Synthetic scene generation contracts."""

import numpy as np
import pytest

from lidar_upsample.synthetic import Box, build_scene, gen_synthetic


class TestBuildScene:
    def test_geometry_layers(self):
        scene = build_scene(100, 120, horizon_row=20, bg_depth=40.0,
                            boxes=(Box(depth=8.0, u0=30, u1=50, v0=40, v1=80),),
                            focal=200.0, cam_height=1.65)
        assert np.all(scene.depth[:20] == 0.0)          # above horizon
        assert scene.depth[21, 5] == 40.0               # wall
        assert scene.depth[50, 40] == 8.0               # box interior
        assert scene.fg_mask[50, 40]
        assert not scene.fg_mask[50, 5]
        # ground recedes: deeper higher up
        v_low, v_high = 110, 100
        assert scene.depth[v_high, 5] > scene.depth[v_low, 5] > 0

    def test_box_behind_wall_hidden(self):
        scene = build_scene(60, 60, horizon_row=10, bg_depth=20.0,
                            boxes=(Box(depth=35.0, u0=10, u1=20, v0=15, v1=25),))
        assert np.all(scene.depth[15:25, 10:20] == 20.0)
        assert not scene.fg_mask.any()

    def test_invalid_rate(self):
        with pytest.raises(ValueError, match="rate"):
            build_scene(40, 40, rate=0.0, horizon_row=8)
        with pytest.raises(ValueError, match="rate"):
            build_scene(40, 40, rate=1.5, horizon_row=8)

    def test_invalid_box_depth(self):
        with pytest.raises(ValueError, match="depth"):
            build_scene(40, 40, horizon_row=8,
                        boxes=(Box(depth=0.0, u0=0, u1=5, v0=0, v1=5),))


class TestGenSynthetic:
    def test_sample_count_is_floor_rate(self):
        scene = build_scene(80, 80, rate=0.07, seed=5, horizon_row=16)
        smap, _, _ = gen_synthetic(scene)
        n_valid = int((scene.depth > 0).sum())
        assert smap.n_samples == int(np.floor(0.07 * n_valid))

    def test_samples_match_ground_truth(self):
        scene = build_scene(60, 60, rate=0.2, seed=9, horizon_row=12)
        smap, gt, _ = gen_synthetic(scene)
        depth_at = scene.depth[smap.cell_v, smap.cell_u]
        np.testing.assert_array_equal(smap.r, depth_at)
        # disparity ground truth is the exact conversion of the depth field
        valid = scene.depth > 0
        np.testing.assert_allclose(
            gt.values[valid], scene.baseline * scene.focal / scene.depth[valid],
            rtol=1e-12)
        assert np.all(gt.values[~valid] == 0.0)

    def test_rate_one_fully_dense(self):
        scene = build_scene(40, 40, rate=1.0, seed=3, horizon_row=8)
        smap, _, _ = gen_synthetic(scene)
        counts = smap.counts_grid()
        assert np.all(counts[8:] == 1)
        assert np.all(counts[:8] == 0)

    def test_deterministic_in_seed(self):
        a, _, _ = gen_synthetic(build_scene(50, 50, rate=0.1, seed=42, horizon_row=10))
        b, _, _ = gen_synthetic(build_scene(50, 50, rate=0.1, seed=42, horizon_row=10))
        np.testing.assert_array_equal(a.cell_u, b.cell_u)
        np.testing.assert_array_equal(a.cell_v, b.cell_v)
        np.testing.assert_array_equal(a.r, b.r)
        c, _, _ = gen_synthetic(build_scene(50, 50, rate=0.1, seed=43, horizon_row=10))
        assert not (a.cell_u.tolist() == c.cell_u.tolist()
                    and a.cell_v.tolist() == c.cell_v.tolist())

    def test_horizon_propagates(self):
        smap, _, _ = gen_synthetic(build_scene(40, 40, horizon_row=7))
        assert smap.horizon_row == 7

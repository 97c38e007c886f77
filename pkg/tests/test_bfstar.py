"""Range clustering and the cluster-gated bilateral filter."""

import numpy as np
import pytest

from lidar_upsample.bfstar import (BfStarParams, bf_star, cluster_ranges,
                                   df_distance, select_cluster_pair)
from lidar_upsample.bfstar import Cluster, RangeClusterSet
from lidar_upsample.depthmap import WindowSample
from lidar_upsample.interpolators import bilateral

from conftest import random_window


def win(ranges, offsets=None):
    ranges = np.asarray(ranges, dtype=np.float64)
    n = ranges.size
    if offsets is None:
        du = np.arange(n, dtype=np.int64) % 5 - 2
        dv = np.arange(n, dtype=np.int64) // 5 - 2
    else:
        du, dv = (np.array(o, dtype=np.int64) for o in zip(*offsets))
    return WindowSample((0, 0), 11, du, dv, ranges)


def literal_dbscan(ranges, eps, min_pts):
    """Textbook DBSCAN over the DF metric (neighborhoods include the point
    itself; clusters grow from core points; border points join the cluster
    that reached them). Independent of the sorted-gap realization."""
    n = len(ranges)
    dist = np.abs((ranges[:, None] - ranges[None, :])
                  / (ranges[:, None] + ranges[None, :]))
    neighbors = [np.flatnonzero(dist[i] <= eps) for i in range(n)]
    core = [len(neighbors[i]) >= min_pts for i in range(n)]
    labels = [None] * n
    cid = 0
    for i in range(n):
        if labels[i] is not None or not core[i]:
            continue
        labels[i] = cid
        frontier = list(neighbors[i])
        while frontier:
            j = frontier.pop()
            if labels[j] is None:
                labels[j] = cid
                if core[j]:
                    frontier.extend(neighbors[j])
        cid += 1
    clusters = [sorted(k for k in range(n) if labels[k] == c)
                for c in range(cid)]
    noise = sorted(k for k in range(n) if labels[k] is None)
    return clusters, noise


class TestDfDistance:
    def test_identity(self):
        assert df_distance(10.0, 10.0) == 0.0

    def test_half(self):
        assert df_distance(10.0, 30.0) == 0.5

    def test_small_gap(self):
        assert df_distance(10.0, 10.5) == pytest.approx(0.5 / 20.5, rel=1e-12)

    def test_symmetric(self):
        assert df_distance(3.0, 17.0) == df_distance(17.0, 3.0)

    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            df_distance(0.0, 1.0)
        with pytest.raises(ValueError):
            df_distance(1.0, -2.0)

    def test_range(self, rng):
        a = rng.uniform(0.1, 500, size=200)
        b = rng.uniform(0.1, 500, size=200)
        d = np.abs((a - b) / (a + b))
        assert np.all((d >= 0) & (d < 1))


class TestClusterRanges:
    def test_constant_ranges_single_cluster(self):
        cs = cluster_ranges(win([10.0, 10.0, 10.0]))
        assert cs.nc == 1
        assert cs.noise.size == 0
        np.testing.assert_array_equal(cs.clusters[0].members, [0, 1, 2])

    def test_two_clusters(self):
        # DF(10.4, 29) ~ 0.472 splits; within-run gaps ~0.019 and ~0.017 hold
        cs = cluster_ranges(win([10.0, 10.4, 29.0, 30.0]))
        assert cs.nc == 2
        np.testing.assert_array_equal(cs.clusters[0].members, [0, 1])
        np.testing.assert_array_equal(cs.clusters[1].members, [2, 3])
        assert cs.clusters[0].mean_range == pytest.approx(10.2)
        assert cs.clusters[1].mean_range == pytest.approx(29.5)

    def test_singleton_run_becomes_noise(self):
        cs = cluster_ranges(win([10.0, 10.5, 30.0]))
        assert cs.nc == 1
        np.testing.assert_array_equal(cs.clusters[0].members, [0, 1])
        np.testing.assert_array_equal(cs.noise, [2])

    def test_unsorted_input_same_membership(self):
        cs = cluster_ranges(win([30.0, 10.0, 29.0, 10.4]))
        assert cs.nc == 2
        np.testing.assert_array_equal(cs.clusters[0].members, [1, 3])
        np.testing.assert_array_equal(cs.clusters[1].members, [0, 2])

    def test_min_pts_acceptance(self):
        cs = cluster_ranges(win([10.0, 10.1, 10.2, 30.0, 30.1]),
                            BfStarParams(min_pts=3))
        assert cs.nc == 1
        np.testing.assert_array_equal(cs.noise, [3, 4])

    def test_matches_literal_dbscan(self, rng):
        params = BfStarParams(epsilon=0.08, min_pts=2)
        for _ in range(400):
            n = int(rng.integers(1, 20))
            # mix of tight groups and spread to hit both regimes
            base = rng.uniform(2.0, 80.0, size=max(1, n // 3))
            r = rng.choice(base, size=n) * rng.uniform(0.97, 1.03, size=n)
            cs = cluster_ranges(win(r), params)
            ref_clusters, ref_noise = literal_dbscan(r, 0.08, 2)
            got = sorted([c.members.tolist() for c in cs.clusters])
            assert got == sorted(ref_clusters)
            assert cs.noise.tolist() == ref_noise

    def test_scale_invariance(self, rng):
        params = BfStarParams()
        for _ in range(200):
            w = random_window(rng, n=int(rng.integers(1, 16)))
            base = cluster_ranges(w, params)
            # skip windows whose gaps sit on the threshold (float rescaling
            # can legitimately flip those)
            rs = np.sort(w.r)
            gaps = np.abs((rs[:-1] - rs[1:]) / (rs[:-1] + rs[1:]))
            if gaps.size and np.any(np.abs(gaps - params.epsilon) < 1e-9):
                continue
            for c in (0.033, 7.0, 1500.0):
                scaled = cluster_ranges(
                    WindowSample(w.center, w.mr, w.du, w.dv, w.r * c), params)
                assert [cl.members.tolist() for cl in scaled.clusters] == \
                    [cl.members.tolist() for cl in base.clusters]
                assert scaled.noise.tolist() == base.noise.tolist()

    def test_boundary_gap_properties(self, rng):
        params = BfStarParams()
        for _ in range(200):
            w = random_window(rng, n=int(rng.integers(2, 18)))
            cs = cluster_ranges(w, params)
            for cl in cs.clusters:
                assert cl.n_points >= params.min_pts
                vals = np.sort(w.r[cl.members])
                gaps = np.abs((vals[:-1] - vals[1:]) / (vals[:-1] + vals[1:]))
                assert np.all(gaps <= params.epsilon)
            # across different clusters every pair exceeds epsilon
            for i in range(cs.nc):
                for j in range(i + 1, cs.nc):
                    a = w.r[cs.clusters[i].members]
                    b = w.r[cs.clusters[j].members]
                    cross = np.abs((a[:, None] - b[None]) / (a[:, None] + b[None]))
                    assert np.all(cross > params.epsilon)


class TestSelectClusterPair:
    def _cluster(self, mean, n):
        return Cluster(members=np.arange(n), mean_range=mean)

    def test_two_clusters(self):
        a, b = self._cluster(8.0, 3), self._cluster(40.0, 5)
        s1, s2 = select_cluster_pair(RangeClusterSet([a, b], np.empty(0)))
        assert s1 is a and s2 is b

    def test_population_tie_prefers_nearer(self):
        a = self._cluster(8.0, 2)
        b = self._cluster(40.0, 4)
        c = self._cluster(60.0, 4)
        s1, s2 = select_cluster_pair(RangeClusterSet([a, b, c], np.empty(0)))
        assert s1 is a and s2 is b

    def test_strict_population_max(self):
        a = self._cluster(8.0, 2)
        b = self._cluster(40.0, 3)
        c = self._cluster(60.0, 5)
        s1, s2 = select_cluster_pair(RangeClusterSet([a, b, c], np.empty(0)))
        assert s1 is a and s2 is c

    def test_requires_two_clusters(self):
        with pytest.raises(ValueError, match="two clusters"):
            select_cluster_pair(RangeClusterSet([self._cluster(8.0, 2)],
                                                np.empty(0)))


class TestBfStar:
    def test_single_cluster_equals_bilateral(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 12))
            base = rng.uniform(5, 60)
            r = base * rng.uniform(1.0, 1.04, size=n)  # all within one gap
            w = win(r)
            assert bf_star(w) == bilateral(w)

    def test_ratio_keeps_near_cluster(self):
        w = win([10.0, 10.2, 10.4, 30.0, 30.5])
        est = bf_star(w, BfStarParams(thr=1.0))  # lambda = 3/2 >= 1
        assert 10.0 <= est <= 10.4

    def test_ratio_discards_near_cluster(self):
        w = win([10.0, 10.2, 30.0, 30.2, 30.5])
        est = bf_star(w, BfStarParams(thr=1.0))  # lambda = 2/3 < 1
        assert 30.0 <= est <= 30.5

    def test_thr_flips_selection(self):
        w = win([10.0, 10.2, 30.0, 30.2, 30.5])
        low = bf_star(w, BfStarParams(thr=0.5))   # 2/3 >= 0.5 -> near
        high = bf_star(w, BfStarParams(thr=2.0))  # 2/3 < 2 -> far
        assert 10.0 <= low <= 10.2
        assert 30.0 <= high <= 30.5

    def test_noise_excluded_from_restricted_filter(self):
        # stray far point is noise; the near cluster wins and ignores it
        w = win([10.0, 10.2, 10.4, 29.0, 29.3, 55.0])
        est = bf_star(w, BfStarParams(thr=1.0))
        assert 10.0 <= est <= 10.4

    def test_all_noise_falls_back_to_bilateral(self):
        w = win([5.0, 10.0, 20.0, 40.0])  # every run is a singleton
        assert cluster_ranges(w).nc == 0
        assert bf_star(w) == bilateral(w)

    def test_empty_window(self):
        w = WindowSample((0, 0), 3, np.empty(0, np.int64),
                         np.empty(0, np.int64), np.empty(0))
        assert bf_star(w) is None

    def test_output_within_filtered_subset(self, rng):
        params = BfStarParams()
        for _ in range(300):
            w = random_window(rng, n=int(rng.integers(1, 20)))
            est = bf_star(w, params)
            cs = cluster_ranges(w, params)
            if cs.nc <= 1:
                lo, hi = w.r.min(), w.r.max()
            else:
                s1, s2 = select_cluster_pair(cs)
                chosen = s1 if s1.n_points / s2.n_points >= params.thr else s2
                vals = w.r[chosen.members]
                lo, hi = vals.min(), vals.max()
            assert lo - 1e-12 <= est <= hi + 1e-12

    def test_multi_cluster_discontinuity_exists(self, rng):
        params = BfStarParams()
        for _ in range(200):
            w = random_window(rng, n=int(rng.integers(2, 16)))
            cs = cluster_ranges(w, params)
            if cs.nc >= 2:
                r = w.r
                cross = np.abs((r[:, None] - r[None]) / (r[:, None] + r[None]))
                assert cross.max() > params.epsilon

    def test_param_validation(self):
        with pytest.raises(ValueError):
            BfStarParams(epsilon=0.0)
        with pytest.raises(ValueError):
            BfStarParams(epsilon=1.0)
        with pytest.raises(ValueError):
            BfStarParams(min_pts=1)
        with pytest.raises(ValueError):
            BfStarParams(thr=0.0)

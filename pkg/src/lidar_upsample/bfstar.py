"""Edge-aware bilateral filtering via range clustering.

A depth discontinuity inside a window shows up as a gap in the sorted
range values. Ranges are clustered with a DBSCAN whose distance is the
normalized gap DF = |(ra - rb) / (ra + rb)|; because DF grows
monotonically with the value gap, the clustering reduces to cutting the
sorted sequence wherever consecutive values are more than epsilon apart
(for min_pts=2 this is exactly DBSCAN core-point semantics). When at
least two clusters survive, the population ratio of the nearest cluster
versus its strongest competitor decides which side of the edge the
bilateral filter runs on; the other side is discarded outright.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .depthmap import WindowSample
from .interpolators import bilateral


@dataclass(frozen=True)
class BfStarParams:
    epsilon: float = 0.08
    min_pts: int = 2
    thr: float = 1.0

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must be in (0, 1)")
        if self.min_pts < 2:
            raise ValueError("min_pts must be >= 2")
        if not self.thr > 0:
            raise ValueError("thr must be > 0")


@dataclass
class Cluster:
    """One accepted range cluster: member indices into the window."""

    members: np.ndarray
    mean_range: float

    @property
    def n_points(self):
        return int(self.members.size)


@dataclass
class RangeClusterSet:
    clusters: list[Cluster]
    noise: np.ndarray

    @property
    def nc(self):
        return len(self.clusters)


def df_distance(r_a, r_b):
    """Normalized range gap |(ra - rb) / (ra + rb)|; symmetric, in [0, 1)."""
    if r_a <= 0 or r_b <= 0:
        raise ValueError("ranges must be > 0")
    return abs((r_a - r_b) / (r_a + r_b))


def cluster_ranges(w: WindowSample, params: BfStarParams = BfStarParams()) -> RangeClusterSet:
    """Cluster the window's range values by the DF gap metric.

    Sorted ranges are cut where consecutive values have DF > epsilon; runs
    of at least min_pts points become clusters (reported in ascending
    range order), shorter runs become noise.
    """
    r = w.r
    n = r.size
    if n == 0:
        return RangeClusterSet(clusters=[], noise=np.empty(0, dtype=np.int64))
    order = np.argsort(r, kind="mergesort")
    rs = r[order]
    clusters = []
    noise = []
    start = 0
    for k in range(1, n + 1):
        if k < n and abs((rs[k - 1] - rs[k]) / (rs[k - 1] + rs[k])) <= params.epsilon:
            continue
        members = np.sort(order[start:k])
        if members.size >= params.min_pts:
            total = 0.0
            for idx in range(start, k):
                total += rs[idx]
            clusters.append(Cluster(members=members,
                                    mean_range=total / members.size))
        else:
            noise.extend(members.tolist())
        start = k
    return RangeClusterSet(clusters=clusters,
                           noise=np.array(sorted(noise), dtype=np.int64))


def select_cluster_pair(cs: RangeClusterSet):
    """Pick the competing pair: nearest-mean cluster s1, then the most
    populous remaining cluster s2 (population ties go to the nearer one)."""
    if cs.nc < 2:
        raise ValueError(f"need at least two clusters, got {cs.nc}")
    s1 = min(cs.clusters, key=lambda c: c.mean_range)
    rest = [c for c in cs.clusters if c is not s1]
    s2 = rest[0]
    for c in rest[1:]:
        if c.n_points > s2.n_points or (
                c.n_points == s2.n_points and c.mean_range < s2.mean_range):
            s2 = c
    return s1, s2


def bf_star(w: WindowSample, params: BfStarParams = BfStarParams()):
    """Cluster-gated bilateral estimate.

    With zero or one accepted cluster the plain bilateral filter runs over
    every point in the window. Otherwise the ratio lambda = np1/np2 of the
    selected pair picks one cluster (s1 when lambda >= thr, else s2) and
    the bilateral filter runs on that cluster's members alone, anchored at
    the cluster's own minimum range. Noise points never enter the
    restricted filter.
    """
    if w.empty:
        return None
    cs = cluster_ranges(w, params)
    if cs.nc <= 1:
        return bilateral(w)
    s1, s2 = select_cluster_pair(cs)
    lam = s1.n_points / s2.n_points
    chosen = s1 if lam >= params.thr else s2
    return bilateral(w, members=chosen.members)

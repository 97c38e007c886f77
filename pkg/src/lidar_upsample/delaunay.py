"""Triangulation-based global interpolation.

Unlike the windowed estimators, these cover every below-horizon pixel
inside the convex hull of the samples regardless of local density.
Modes: barycentric linear, nearest data point, and Sibson natural
neighbor (computed by virtually inserting the query into the
triangulation and measuring the Voronoi area it steals from each
neighbor). No extrapolation happens outside the hull.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay as _SciDelaunay
from scipy.spatial import QhullError, cKDTree

from .depthmap import DenseDepthMap

DELAUNAY_MODES = ("linear", "nearest", "natural")

#: queries this close to a data point (in pixels) snap to its value
_VERTEX_SNAP = 1e-9


class DegenerateInputError(ValueError):
    """Fewer than three distinct non-collinear input points."""


@dataclass
class Triangulation:
    """Delaunay triangulation of sample locations with their range values.

    Triangles are counterclockwise; ``neighbors[t, k]`` is the triangle
    across the edge opposite vertex k of triangle t (-1 on the hull).
    """

    points: np.ndarray
    values: np.ndarray
    triangles: np.ndarray
    neighbors: np.ndarray
    _qhull: _SciDelaunay

    @property
    def n_points(self):
        return int(self.points.shape[0])

    @property
    def n_triangles(self):
        return int(self.triangles.shape[0])

    def find_triangle(self, uv):
        """Triangle index containing each query point (-1 outside the hull)."""
        return self._qhull.find_simplex(np.asarray(uv, dtype=np.float64))


def _dedupe_min_range(uv, r):
    # duplicate locations keep the smallest range (foreground wins)
    order = np.lexsort((r, uv[:, 1], uv[:, 0]))
    uv, r = uv[order], r[order]
    keys = uv.view([("u", np.float64), ("v", np.float64)]).ravel()
    _, first = np.unique(keys, return_index=True)
    return uv[first], r[first]


def triangulate(uv, r) -> Triangulation:
    """Delaunay-triangulate sample locations.

    ``uv`` is (n, 2) real image coordinates, ``r`` the matching ranges.
    Duplicate locations are merged (keeping the minimum range) before
    triangulating.
    """
    uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
    r = np.asarray(r, dtype=np.float64).ravel()
    if uv.shape[0] != r.size:
        raise ValueError("uv and r must have matching lengths")
    uv, r = _dedupe_min_range(uv, r)
    if uv.shape[0] < 3:
        raise DegenerateInputError(
            f"need at least 3 distinct points, got {uv.shape[0]}")
    try:
        qhull = _SciDelaunay(uv)
    except QhullError as exc:
        raise DegenerateInputError(f"degenerate point set: {exc}") from None
    if qhull.simplices.shape[0] == 0:
        raise DegenerateInputError("all points are collinear")

    tris = qhull.simplices.astype(np.int64).copy()
    neigh = qhull.neighbors.astype(np.int64).copy()
    a, b, c = (uv[tris[:, k]] for k in range(3))
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) \
        - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    flip = cross < 0
    tris[flip, 1], tris[flip, 2] = tris[flip, 2], tris[flip, 1].copy()
    neigh[flip, 1], neigh[flip, 2] = neigh[flip, 2], neigh[flip, 1].copy()
    return Triangulation(points=uv, values=r, triangles=tris,
                         neighbors=neigh, _qhull=qhull)


def interpolate_delaunay(tri: Triangulation, mode, mu, mv, horizon_row) -> DenseDepthMap:
    """Interpolate every below-horizon pixel inside the convex hull."""
    if mode not in DELAUNAY_MODES:
        raise ValueError(f"mode must be one of {DELAUNAY_MODES}")
    rows = np.arange(horizon_row, mv)
    uu, vv = np.meshgrid(np.arange(mu, dtype=np.float64),
                         rows.astype(np.float64))
    queries = np.column_stack([uu.ravel(), vv.ravel()])
    simplex = tri.find_triangle(queries)
    inside = simplex >= 0

    est = np.zeros(queries.shape[0], dtype=np.float64)
    if mode == "linear":
        est[inside] = _linear_values(tri, queries[inside], simplex[inside])
    elif mode == "nearest":
        kdt = cKDTree(tri.points)
        _, idx = kdt.query(queries[inside])
        est[inside] = tri.values[idx]
    else:
        est[inside] = _natural_values(tri, queries[inside], simplex[inside])

    depth = np.zeros((mv, mu), dtype=np.float64)
    grid = est.reshape(rows.size, mu)
    grid[~inside.reshape(rows.size, mu)] = 0.0
    depth[horizon_row:] = grid
    return DenseDepthMap(depth=depth, horizon_row=horizon_row)


def _barycentric(tri, queries, simplex):
    t = tri._qhull.transform[simplex]
    d = queries - t[:, 2]
    bc2 = np.einsum("ijk,ik->ij", t[:, :2], d)
    return np.column_stack([bc2, 1.0 - bc2.sum(axis=1)])


def _linear_values(tri, queries, simplex):
    w = _barycentric(tri, queries, simplex)
    verts = tri._qhull.simplices[simplex]
    return (tri.values[verts] * w).sum(axis=1)


def circumcenter(a, b, c):
    """Circumcenter of a triangle, or None when (near-)collinear."""
    d = 2.0 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    scale = max(abs(b[0] - a[0]), abs(b[1] - a[1]),
                abs(c[0] - a[0]), abs(c[1] - a[1]), 1e-30)
    if abs(d) < 1e-12 * scale * scale:
        return None
    b2 = (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2
    c2 = (c[0] - a[0]) ** 2 + (c[1] - a[1]) ** 2
    ux = (c[1] - a[1]) * b2 - (b[1] - a[1]) * c2
    uy = (b[0] - a[0]) * c2 - (c[0] - a[0]) * b2
    return np.array([a[0] + ux / d, a[1] + uy / d])


def in_circumcircle(pa, pb, pc, q, rtol=1e-9):
    """True when q lies strictly inside the circumcircle of CCW (pa,pb,pc)."""
    m = np.array([
        [pa[0] - q[0], pa[1] - q[1],
         (pa[0] - q[0]) ** 2 + (pa[1] - q[1]) ** 2],
        [pb[0] - q[0], pb[1] - q[1],
         (pb[0] - q[0]) ** 2 + (pb[1] - q[1]) ** 2],
        [pc[0] - q[0], pc[1] - q[1],
         (pc[0] - q[0]) ** 2 + (pc[1] - q[1]) ** 2],
    ])
    det = np.linalg.det(m)
    # det scales like the product of the row magnitudes
    row_mag = np.abs(m).max(axis=1)
    scale = max(1.0, float(row_mag[0] * row_mag[1] * row_mag[2]))
    return det > rtol * scale


def _cavity(tri, q, t0):
    """Triangles whose circumcircle contains q (flood fill from t0)."""
    pts = tri.points
    seen = {int(t0)}
    stack = [int(t0)]
    cavity = []
    while stack:
        t = stack.pop()
        verts = tri.triangles[t]
        if t == t0 or in_circumcircle(pts[verts[0]], pts[verts[1]],
                                      pts[verts[2]], q):
            cavity.append(t)
            for nb in tri.neighbors[t]:
                if nb >= 0 and int(nb) not in seen:
                    seen.add(int(nb))
                    stack.append(int(nb))
    return cavity


def _boundary_loop(tri, cavity):
    """Ordered vertex loop around the cavity (directed CCW edges)."""
    in_cavity = set(cavity)
    succ = {}
    for t in cavity:
        verts = tri.triangles[t]
        for k in range(3):
            if int(tri.neighbors[t][k]) not in in_cavity:
                # edge opposite vertex k runs (k+1) -> (k+2) in CCW order
                succ[int(verts[(k + 1) % 3])] = int(verts[(k + 2) % 3])
    if not succ:
        return None
    start = next(iter(succ))
    loop = [start]
    cur = succ[start]
    while cur != start:
        loop.append(cur)
        if cur not in succ or len(loop) > len(succ):
            return None  # open or tangled boundary; caller falls back
        cur = succ[cur]
    return loop


def _polygon_area(points):
    pts = np.array(points)
    centroid = pts.mean(axis=0)
    ang = np.arctan2(pts[:, 1] - centroid[1], pts[:, 0] - centroid[0])
    pts = pts[np.argsort(ang)]
    x, y = pts[:, 0], pts[:, 1]
    area = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    return area


def sibson_weights(tri: Triangulation, q, t0=None):
    """Natural-neighbor indices and normalized weights for query q.

    Returns None when q leaves the hull or the local geometry is too
    degenerate for the virtual insertion (the caller should fall back to
    barycentric interpolation in that case).
    """
    q = np.asarray(q, dtype=np.float64)
    if t0 is None:
        t0 = int(tri.find_triangle(q[None, :])[0])
    if t0 < 0:
        return None
    cavity = _cavity(tri, q, t0)
    loop = _boundary_loop(tri, cavity)
    if loop is None or len(loop) < 3:
        return None
    cc_tri = {t: circumcenter(*tri.points[tri.triangles[t]]) for t in cavity}
    if any(c is None for c in cc_tri.values()):
        return None
    nverts = len(loop)
    idx = np.array(loop, dtype=np.int64)
    weights = np.empty(nverts, dtype=np.float64)
    # circumcenters of the new triangles (q, loop[i], loop[i+1])
    cc_new = []
    for i in range(nverts):
        cc = circumcenter(q, tri.points[loop[i]], tri.points[loop[(i + 1) % nverts]])
        if cc is None:
            return None
        cc_new.append(cc)
    for i, vid in enumerate(loop):
        # stolen region of this neighbor: bounded by the two new Voronoi
        # vertices sharing it and its old cell vertices inside the cavity
        corners = [cc_new[i - 1], cc_new[i]]
        for t in cavity:
            if vid in tri.triangles[t]:
                corners.append(cc_tri[t])
        weights[i] = _polygon_area(corners)
    total = weights.sum()
    if not np.isfinite(total) or total <= 0:
        return None
    return idx, weights / total


def _natural_values(tri, queries, simplex):
    kdt = cKDTree(tri.points)
    snap_d, snap_i = kdt.query(queries)
    out = np.empty(queries.shape[0], dtype=np.float64)
    linear_fallback = []
    for k in range(queries.shape[0]):
        if snap_d[k] < _VERTEX_SNAP:
            out[k] = tri.values[snap_i[k]]
            continue
        sw = sibson_weights(tri, queries[k], int(simplex[k]))
        if sw is None:
            linear_fallback.append(k)
            continue
        idx, w = sw
        out[k] = float(np.dot(w, tri.values[idx]))
    if linear_fallback:
        sel = np.array(linear_fallback, dtype=np.int64)
        out[sel] = _linear_values(tri, queries[sel], simplex[sel])
    return out

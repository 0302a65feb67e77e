"""Bounding volume hierarchy for nearest-point queries on triangle meshes.

The tree is a binary hierarchy of axis-aligned boxes built by median
splits along the longest centroid axis, with at most ``LEAF_SIZE``
triangles per leaf.  Queries traverse best-first (a min-heap keyed on
squared point-to-box distance) and stop as soon as the nearest remaining
box is farther than the best triangle found, so the result equals a
linear scan over every triangle.

Ties between equidistant triangles resolve to the lowest triangle index,
in both the tree query and the linear scan.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import DomainError
from .core import TriangleMesh

LEAF_SIZE = 4

# closest-feature codes returned alongside each closest point
FACE = 0
VERTEX_A, VERTEX_B, VERTEX_C = 1, 2, 3
EDGE_AB, EDGE_BC, EDGE_CA = 4, 5, 6


@njit(cache=True, inline="always")
def _closest_on_triangle(px, py, pz, t):
    # t holds a, b, c flattened (9 floats).  Region tests follow Ericson,
    # Real-Time Collision Detection, 5.1.5.
    ax, ay, az = t[0], t[1], t[2]
    abx, aby, abz = t[3] - ax, t[4] - ay, t[5] - az
    acx, acy, acz = t[6] - ax, t[7] - ay, t[8] - az
    apx, apy, apz = px - ax, py - ay, pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return ax, ay, az, VERTEX_A
    bpx, bpy, bpz = px - t[3], py - t[4], pz - t[5]
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return t[3], t[4], t[5], VERTEX_B
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return ax + v * abx, ay + v * aby, az + v * abz, EDGE_AB
    cpx, cpy, cpz = px - t[6], py - t[7], pz - t[8]
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return t[6], t[7], t[8], VERTEX_C
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return ax + w * acx, ay + w * acy, az + w * acz, EDGE_CA
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return (t[3] + w * (t[6] - t[3]), t[4] + w * (t[7] - t[4]), t[5] + w * (t[8] - t[5]), EDGE_BC)
    denom = va + vb + vc
    if denom == 0.0:
        # sliver that survived cleaning; fall back to vertex a
        return ax, ay, az, VERTEX_A
    v = vb / denom
    w = vc / denom
    return (ax + abx * v + acx * w, ay + aby * v + acy * w, az + abz * v + acz * w, FACE)


@njit(cache=True)
def _closest_point_single(p, tri):
    cx, cy, cz, region = _closest_on_triangle(p[0], p[1], p[2], tri)
    return np.array([cx, cy, cz]), region


def closest_point_triangle(p, a, b, c):
    """Closest point on the closed triangle ``abc`` to ``p``.

    Returns
    -------
    point : (3,) ndarray
    distance : float
    """
    p = np.asarray(p, dtype=np.float64)
    tri = np.concatenate([np.asarray(a, float), np.asarray(b, float), np.asarray(c, float)])
    q, _ = _closest_point_single(p, tri)
    return q, float(np.sqrt(((p - q) ** 2).sum()))


@njit(cache=True)
def _linear_scan(points, tris):
    n = points.shape[0]
    out_pt = np.empty((n, 3))
    out_d2 = np.empty(n)
    out_tri = np.empty(n, np.int64)
    out_reg = np.empty(n, np.int64)
    for i in range(n):
        px, py, pz = points[i, 0], points[i, 1], points[i, 2]
        best = np.inf
        bi = -1
        br = 0
        bx = by = bz = 0.0
        for j in range(tris.shape[0]):
            cx, cy, cz, r = _closest_on_triangle(px, py, pz, tris[j])
            dx, dy, dz = px - cx, py - cy, pz - cz
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < best:
                best, bi, br, bx, by, bz = d2, j, r, cx, cy, cz
        out_pt[i, 0], out_pt[i, 1], out_pt[i, 2] = bx, by, bz
        out_d2[i] = best
        out_tri[i] = bi
        out_reg[i] = br
    return out_pt, out_d2, out_tri, out_reg


def closest_points_linear(mesh: TriangleMesh, points):
    """Brute-force nearest point over every triangle (reference for the BVH)."""
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    tris = np.ascontiguousarray(mesh.corners.reshape(-1, 9))
    return _linear_scan(pts, tris)


@njit(cache=True)
def _build(tri_lo, tri_hi, centroids, leaf_size):
    nt = tri_lo.shape[0]
    cap = max(1, 2 * ((nt + leaf_size - 1) // leaf_size) + 1) * 2
    lo = np.empty((cap, 3))
    hi = np.empty((cap, 3))
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    start = np.zeros(cap, np.int64)
    count = np.zeros(cap, np.int64)
    order = np.arange(nt)
    stack = np.empty((cap, 2), np.int64)  # (node, unused)
    n_nodes = 1
    start[0] = 0
    count[0] = nt
    sp = 0
    stack[sp, 0] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        node = stack[sp, 0]
        s = start[node]
        c = count[node]
        clo = np.full(3, np.inf)
        chi = np.full(3, -np.inf)
        for k in range(3):
            lo[node, k] = np.inf
            hi[node, k] = -np.inf
        for i in range(s, s + c):
            t = order[i]
            for k in range(3):
                lo[node, k] = min(lo[node, k], tri_lo[t, k])
                hi[node, k] = max(hi[node, k], tri_hi[t, k])
                clo[k] = min(clo[k], centroids[t, k])
                chi[k] = max(chi[k], centroids[t, k])
        if c <= leaf_size:
            continue
        axis = 0
        ext = chi[0] - clo[0]
        for k in range(1, 3):
            if chi[k] - clo[k] > ext:
                ext = chi[k] - clo[k]
                axis = k
        sub = order[s:s + c].copy()
        keys = centroids[sub, axis]
        srt = np.argsort(keys, kind="mergesort")
        for i in range(c):
            order[s + i] = sub[srt[i]]
        half = c // 2
        l_node = n_nodes
        r_node = n_nodes + 1
        n_nodes += 2
        left[node] = l_node
        right[node] = r_node
        start[l_node] = s
        count[l_node] = half
        start[r_node] = s + half
        count[r_node] = c - half
        stack[sp, 0] = r_node
        sp += 1
        stack[sp, 0] = l_node
        sp += 1
    return lo[:n_nodes].copy(), hi[:n_nodes].copy(), left[:n_nodes].copy(), right[:n_nodes].copy(), \
        start[:n_nodes].copy(), count[:n_nodes].copy(), order


@njit(cache=True, inline="always")
def _box_d2(px, py, pz, lo, hi, node):
    d = 0.0
    v = lo[node, 0] - px
    if v > 0.0:
        d += v * v
    else:
        v = px - hi[node, 0]
        if v > 0.0:
            d += v * v
    v = lo[node, 1] - py
    if v > 0.0:
        d += v * v
    else:
        v = py - hi[node, 1]
        if v > 0.0:
            d += v * v
    v = lo[node, 2] - pz
    if v > 0.0:
        d += v * v
    else:
        v = pz - hi[node, 2]
        if v > 0.0:
            d += v * v
    return d


@njit(cache=True)
def _query(points, lo, hi, left, right, start, count, tris_sorted, order):
    n = points.shape[0]
    n_nodes = lo.shape[0]
    out_pt = np.empty((n, 3))
    out_d2 = np.empty(n)
    out_tri = np.empty(n, np.int64)
    out_reg = np.empty(n, np.int64)
    heap_key = np.empty(n_nodes + 1)
    heap_node = np.empty(n_nodes + 1, np.int64)
    for i in range(n):
        px, py, pz = points[i, 0], points[i, 1], points[i, 2]
        best = np.inf
        bi = -1
        br = 0
        bx = by = bz = 0.0
        size = 1
        heap_key[0] = _box_d2(px, py, pz, lo, hi, 0)
        heap_node[0] = 0
        while size > 0:
            key = heap_key[0]
            node = heap_node[0]
            if key > best:
                break
            # pop root
            size -= 1
            lk = heap_key[size]
            ln = heap_node[size]
            j = 0
            while True:
                c = 2 * j + 1
                if c >= size:
                    break
                if c + 1 < size and heap_key[c + 1] < heap_key[c]:
                    c += 1
                if heap_key[c] < lk:
                    heap_key[j] = heap_key[c]
                    heap_node[j] = heap_node[c]
                    j = c
                else:
                    break
            heap_key[j] = lk
            heap_node[j] = ln
            if left[node] < 0:
                s = start[node]
                for k in range(s, s + count[node]):
                    cx, cy, cz, r = _closest_on_triangle(px, py, pz, tris_sorted[k])
                    dx, dy, dz = px - cx, py - cy, pz - cz
                    d2 = dx * dx + dy * dy + dz * dz
                    tid = order[k]
                    if d2 < best or (d2 == best and tid < bi):
                        best, bi, br, bx, by, bz = d2, tid, r, cx, cy, cz
                continue
            for child in (left[node], right[node]):
                ck = _box_d2(px, py, pz, lo, hi, child)
                if ck > best:
                    continue
                j = size
                size += 1
                while j > 0:
                    par = (j - 1) // 2
                    if heap_key[par] <= ck:
                        break
                    heap_key[j] = heap_key[par]
                    heap_node[j] = heap_node[par]
                    j = par
                heap_key[j] = ck
                heap_node[j] = child
        out_pt[i, 0], out_pt[i, 1], out_pt[i, 2] = bx, by, bz
        out_d2[i] = best
        out_tri[i] = bi
        out_reg[i] = br
    return out_pt, out_d2, out_tri, out_reg


@dataclass(frozen=True, eq=False)
class BvhAccel:
    """Immutable BVH over a mesh; safe to share between threads."""

    mesh: TriangleMesh
    lo: np.ndarray
    hi: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    order: np.ndarray
    tris_sorted: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.lo)

    def is_leaf(self, node: int) -> bool:
        return self.left[node] < 0

    def leaf_triangles(self, node: int) -> np.ndarray:
        s = self.start[node]
        return self.order[s:s + self.count[node]]

    def query(self, points):
        """Nearest surface point for each query point.

        Returns
        -------
        closest : (N, 3) ndarray
        dist2 : (N,) ndarray of squared distances
        triangle : (N,) int ndarray
        feature : (N,) int ndarray of closest-feature codes
        """
        pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise DomainError("query points must be finite")
        return _query(pts, self.lo, self.hi, self.left, self.right, self.start, self.count,
                      self.tris_sorted, self.order)

    def distances(self, points) -> np.ndarray:
        return np.sqrt(self.query(points)[1])


def build_bvh(mesh: TriangleMesh, leaf_size: int = LEAF_SIZE) -> BvhAccel:
    if len(mesh.triangles) == 0:
        raise DomainError("cannot build a BVH over an empty mesh")
    c = mesh.corners
    lo, hi, left, right, start, count, order = _build(
        np.ascontiguousarray(c.min(axis=1)), np.ascontiguousarray(c.max(axis=1)),
        np.ascontiguousarray(c.mean(axis=1)), leaf_size)
    tris_sorted = np.ascontiguousarray(c.reshape(-1, 9)[order])
    return BvhAccel(mesh, lo, hi, left, right, start, count, order, tris_sorted)


def tree_depth(accel: BvhAccel) -> int:
    depth = 0
    stack = [(0, 1)]
    while stack:
        node, d = stack.pop()
        depth = max(depth, d)
        if not accel.is_leaf(node):
            stack += [(accel.left[node], d + 1), (accel.right[node], d + 1)]
    return depth

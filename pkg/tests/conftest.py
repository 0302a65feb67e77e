"""Shared fixtures and independent oracles for the test-suite.

The oracles deliberately avoid the package's own geometry kernels:

* ``oracle_closest`` projects onto the triangle plane and falls back to
  the three edge segments, instead of the Voronoi-region walk used by the
  BVH.
* ``parity_inside`` classifies points by counting ray crossings
  (Moller-Trumbore), instead of pseudonormals.
"""

from __future__ import annotations

import numpy as np
import pytest
from numba import njit, prange

from rsorecon.mesh import TriangleMesh, box, torus, uv_sphere


@njit(inline="always")
def _seg_closest(px, py, pz, ax, ay, az, bx, by, bz):
    ex, ey, ez = bx - ax, by - ay, bz - az
    ee = ex * ex + ey * ey + ez * ez
    s = 0.0
    if ee > 0.0:
        s = ((px - ax) * ex + (py - ay) * ey + (pz - az) * ez) / ee
        s = min(1.0, max(0.0, s))
    qx, qy, qz = ax + s * ex, ay + s * ey, az + s * ez
    dx, dy, dz = px - qx, py - qy, pz - qz
    return dx * dx + dy * dy + dz * dz, qx, qy, qz


@njit(parallel=True)
def _oracle_closest(points, tris):
    n = points.shape[0]
    out_d = np.empty(n)
    out_q = np.empty((n, 3))
    for i in prange(n):
        px, py, pz = points[i, 0], points[i, 1], points[i, 2]
        best = np.inf
        bq0 = bq1 = bq2 = 0.0
        for j in range(tris.shape[0]):
            t = tris[j]
            ax, ay, az = t[0], t[1], t[2]
            ux, uy, uz = t[3] - ax, t[4] - ay, t[5] - az
            vx, vy, vz = t[6] - ax, t[7] - ay, t[8] - az
            # plane projection with barycentric inside test
            uu = ux * ux + uy * uy + uz * uz
            uv = ux * vx + uy * vy + uz * vz
            vv = vx * vx + vy * vy + vz * vz
            wx, wy, wz = px - ax, py - ay, pz - az
            wu = wx * ux + wy * uy + wz * uz
            wv = wx * vx + wy * vy + wz * vz
            det = uu * vv - uv * uv
            d2 = np.inf
            if det > 0.0:
                s = (vv * wu - uv * wv) / det
                r = (uu * wv - uv * wu) / det
                if s >= 0.0 and r >= 0.0 and s + r <= 1.0:
                    qx, qy, qz = ax + s * ux + r * vx, ay + s * uy + r * vy, az + s * uz + r * vz
                    dx, dy, dz = px - qx, py - qy, pz - qz
                    d2 = dx * dx + dy * dy + dz * dz
            if d2 == np.inf:
                d2, qx, qy, qz = _seg_closest(px, py, pz, ax, ay, az, t[3], t[4], t[5])
                e2, ex, ey, ez = _seg_closest(px, py, pz, t[3], t[4], t[5], t[6], t[7], t[8])
                if e2 < d2:
                    d2, qx, qy, qz = e2, ex, ey, ez
                e2, ex, ey, ez = _seg_closest(px, py, pz, t[6], t[7], t[8], ax, ay, az)
                if e2 < d2:
                    d2, qx, qy, qz = e2, ex, ey, ez
            if d2 < best:
                best = d2
                bq0, bq1, bq2 = qx, qy, qz
        out_d[i] = np.sqrt(best)
        out_q[i, 0], out_q[i, 1], out_q[i, 2] = bq0, bq1, bq2
    return out_d, out_q


def oracle_closest(mesh: TriangleMesh, points):
    """Brute-force unsigned distance and closest point, independent kernel."""
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    return _oracle_closest(pts, np.ascontiguousarray(mesh.corners.reshape(-1, 9)))


@njit
def _ray_crossings(ox, oy, oz, dx, dy, dz, tris, eps):
    """Number of crossings, or -1 if the ray passes too close to an edge."""
    hits = 0
    for j in range(tris.shape[0]):
        t = tris[j]
        e1x, e1y, e1z = t[3] - t[0], t[4] - t[1], t[5] - t[2]
        e2x, e2y, e2z = t[6] - t[0], t[7] - t[1], t[8] - t[2]
        hx = dy * e2z - dz * e2y
        hy = dz * e2x - dx * e2z
        hz = dx * e2y - dy * e2x
        a = e1x * hx + e1y * hy + e1z * hz
        if abs(a) < 1e-300:
            continue
        f = 1.0 / a
        sx, sy, sz = ox - t[0], oy - t[1], oz - t[2]
        u = f * (sx * hx + sy * hy + sz * hz)
        if u < -eps or u > 1.0 + eps:
            continue
        qx = sy * e1z - sz * e1y
        qy = sz * e1x - sx * e1z
        qz = sx * e1y - sy * e1x
        v = f * (dx * qx + dy * qy + dz * qz)
        if v < -eps or u + v > 1.0 + eps:
            continue
        tt = f * (e2x * qx + e2y * qy + e2z * qz)
        if tt <= 0.0:
            continue
        if u < eps or v < eps or u + v > 1.0 - eps:
            return -1
        hits += 1
    return hits


@njit(parallel=True)
def _parity(points, tris, dirs):
    n = points.shape[0]
    out = np.empty(n, np.int8)
    for i in prange(n):
        res = -1
        for k in range(dirs.shape[0]):
            c = _ray_crossings(points[i, 0], points[i, 1], points[i, 2],
                               dirs[k, 0], dirs[k, 1], dirs[k, 2], tris, 1e-9)
            if c >= 0:
                res = c & 1
                break
        out[i] = res
    return out


def parity_inside(mesh: TriangleMesh, points, seed: int = 12345):
    """1 inside, 0 outside, -1 undecided (every ray grazed an edge)."""
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(16, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    return _parity(pts, np.ascontiguousarray(mesh.corners.reshape(-1, 9)), dirs)


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def random_closed_mesh(rng, max_triangles: int = 10_000) -> TriangleMesh:
    """Closed, outward-oriented mesh: bumpy sphere, torus or subdivided box,
    then a random rotation, anisotropic scale and translation."""
    kind = rng.integers(3)
    if kind == 0:
        stacks = int(rng.integers(8, 50))
        slices = int(rng.integers(8, min(100, max_triangles // (2 * stacks))))
        m = uv_sphere(1.0, stacks, slices)
        # radial bumps keep the surface star-shaped, hence closed and embedded
        bump = 1.0 + 0.15 * rng.random(len(m.vertices))
        m = TriangleMesh(m.vertices * bump[:, None], m.triangles)
    elif kind == 1:
        rings = int(rng.integers(8, 60))
        sides = int(rng.integers(6, min(60, max_triangles // (2 * rings))))
        m = torus(1.0, float(rng.uniform(0.15, 0.45)), rings, sides)
    else:
        m = box((1.0, 1.0, 1.0), divisions=int(rng.integers(1, 25)))
    R = random_rotation(rng)
    S = np.diag(rng.uniform(0.5, 2.0, 3))
    t = rng.uniform(-5, 5, 3)
    M = R @ S
    return m.transformed(lambda v: v @ M.T + t)


def query_points(mesh: TriangleMesh, n: int, rng) -> np.ndarray:
    """Half near-surface points, half uniform in the padded bounding box."""
    from rsorecon.mesh import sample_surface

    k = n // 2
    cloud = sample_surface(mesh, k, rng)
    fn = mesh.face_normals()[cloud.source_triangle]
    near = cloud.points + fn * rng.normal(scale=0.02 * mesh.diagonal, size=(k, 1))
    lo, hi = mesh.bounds
    pad = 0.2 * (hi - lo)
    far = rng.uniform(lo - pad, hi + pad, size=(n - k, 3))
    return np.vstack([near, far])


@pytest.fixture
def unit_cube():
    return box((1.0, 1.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def signed_volume(mesh: TriangleMesh) -> float:
    c = mesh.corners
    return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)


__all__ = ["oracle_closest", "parity_inside", "random_closed_mesh", "query_points", "random_rotation",
           "signed_volume"]

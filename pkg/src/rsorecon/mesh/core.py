"""Triangle mesh container and small geometric helpers."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..errors import DomainError

log = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-12


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Indexed triangle mesh.

    Attributes
    ----------
    vertices : (V, 3) float64 array
    triangles : (T, 3) int64 array of vertex indices
    normals : (V, 3) float64 array or None
    """

    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise DomainError("triangle index out of range")

    @property
    def corners(self) -> np.ndarray:
        """(T, 3, 3) array of triangle corner coordinates."""
        return self.vertices[self.triangles]

    def face_normals(self, unit: bool = True) -> np.ndarray:
        c = self.corners
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        if unit:
            norm = np.linalg.norm(n, axis=1, keepdims=True)
            n = np.divide(n, norm, out=np.zeros_like(n), where=norm > 0)
        return n

    def triangle_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_normals(unit=False), axis=1)

    @property
    def area(self) -> float:
        return float(self.triangle_areas().sum())

    @property
    def bounds(self) -> np.ndarray:
        return np.stack([self.vertices.min(axis=0), self.vertices.max(axis=0)])

    @property
    def diagonal(self) -> float:
        lo, hi = self.bounds
        return float(np.linalg.norm(hi - lo))

    def transformed(self, fn) -> "TriangleMesh":
        """Copy with ``fn`` applied to the (V, 3) vertex array."""
        return TriangleMesh(fn(self.vertices), self.triangles.copy())

    def submesh(self, keep) -> "TriangleMesh":
        """Mesh of the selected triangles, with unused vertices dropped."""
        tris = self.triangles[keep]
        used, inverse = np.unique(tris, return_inverse=True)
        return TriangleMesh(self.vertices[used], inverse.reshape(-1, 3))


def clean(mesh: TriangleMesh, tol: float = DEGENERATE_AREA) -> tuple[TriangleMesh, int]:
    """Drop triangles with area <= ``tol``; return the mesh and the drop count."""
    keep = mesh.triangle_areas() > tol
    dropped = int((~keep).sum())
    if dropped:
        log.warning("dropped %d degenerate triangle(s)", dropped)
        mesh = TriangleMesh(mesh.vertices, mesh.triangles[keep], mesh.normals)
    return mesh, dropped


def concatenate(*meshes: TriangleMesh) -> TriangleMesh:
    verts, tris, offset = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        offset += len(m.vertices)
    return TriangleMesh(np.concatenate(verts), np.concatenate(tris))


def component_labels(mesh: TriangleMesh) -> np.ndarray:
    """Connected-component label per triangle (triangles sharing a vertex are connected)."""
    nt = len(mesh.triangles)
    nv = len(mesh.vertices)
    rows = np.repeat(np.arange(nt), 3)
    cols = mesh.triangles.ravel()
    # bipartite triangle/vertex graph
    g = coo_matrix((np.ones(len(rows)), (rows, nt + cols)), shape=(nt + nv, nt + nv))
    _, labels = connected_components(g, directed=False)
    tri_labels = labels[:nt]
    _, compact = np.unique(tri_labels, return_inverse=True)
    return compact


# -- procedural shapes used by tests, benchmarks and demos -------------------

def uv_sphere(radius: float = 1.0, stacks: int = 16, slices: int = 32, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Closed latitude/longitude sphere with triangle fans at the poles."""
    phi = np.linspace(0.0, np.pi, stacks + 1)[1:-1]
    theta = np.linspace(0.0, 2 * np.pi, slices, endpoint=False)
    P, T = np.meshgrid(phi, theta, indexing="ij")
    ring = np.stack([np.sin(P) * np.cos(T), np.sin(P) * np.sin(T), np.cos(P)], axis=-1).reshape(-1, 3)
    verts = np.vstack([[0.0, 0.0, 1.0], ring, [0.0, 0.0, -1.0]]) * radius + np.asarray(center)
    south = len(verts) - 1

    def idx(i, j):
        return 1 + i * slices + (j % slices)

    tris = []
    for j in range(slices):
        tris.append((0, idx(0, j), idx(0, j + 1)))
    for i in range(stacks - 2):
        for j in range(slices):
            a, b = idx(i, j), idx(i, j + 1)
            c, d = idx(i + 1, j), idx(i + 1, j + 1)
            tris.append((a, c, d))
            tris.append((a, d, b))
    for j in range(slices):
        tris.append((south, idx(stacks - 2, j + 1), idx(stacks - 2, j)))
    return TriangleMesh(verts, np.array(tris))


def box(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0), divisions: int = 1) -> TriangleMesh:
    """Closed axis-aligned box, each face split into ``divisions**2`` quads."""
    size = np.asarray(size, dtype=float)
    center = np.asarray(center, dtype=float)
    k = divisions
    g = np.linspace(-0.5, 0.5, k + 1)
    verts, tris = [], []
    for axis in range(3):
        for sign in (-1.0, 1.0):
            u_ax, v_ax = [a for a in range(3) if a != axis]
            base = len(verts)
            for a in g:
                for b in g:
                    p = np.zeros(3)
                    p[axis] = 0.5 * sign
                    p[u_ax] = a
                    p[v_ax] = b
                    verts.append(p)
            for i in range(k):
                for j in range(k):
                    p00 = base + i * (k + 1) + j
                    p01, p10, p11 = p00 + 1, p00 + k + 1, p00 + k + 2
                    # orient outward: (u x v) points along +axis for the cyclic order
                    cyc = (axis + 1) % 3 == u_ax
                    if (sign > 0) == cyc:
                        tris += [(p00, p10, p11), (p00, p11, p01)]
                    else:
                        tris += [(p00, p11, p10), (p00, p01, p11)]
    verts = np.array(verts) * size + center
    mesh = TriangleMesh(verts, np.array(tris))
    return weld(mesh)


def torus(major: float = 1.0, minor: float = 0.3, rings: int = 24, sides: int = 12) -> TriangleMesh:
    u = np.linspace(0, 2 * np.pi, rings, endpoint=False)
    v = np.linspace(0, 2 * np.pi, sides, endpoint=False)
    U, V = np.meshgrid(u, v, indexing="ij")
    verts = np.stack([
        (major + minor * np.cos(V)) * np.cos(U),
        (major + minor * np.cos(V)) * np.sin(U),
        minor * np.sin(V),
    ], axis=-1).reshape(-1, 3)
    tris = []
    for i in range(rings):
        for j in range(sides):
            a = i * sides + j
            b = ((i + 1) % rings) * sides + j
            c = ((i + 1) % rings) * sides + (j + 1) % sides
            d = i * sides + (j + 1) % sides
            tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(verts, np.array(tris))


def weld(mesh: TriangleMesh, decimals: int = 12) -> TriangleMesh:
    """Merge vertices that coincide after rounding to ``decimals``."""
    key = np.round(mesh.vertices, decimals)
    uniq, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    return TriangleMesh(mesh.vertices[first], inverse.reshape(-1)[mesh.triangles])

"""Area-uniform point sampling on triangle meshes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from .core import TriangleMesh


@dataclass(frozen=True, eq=False)
class SampledCloud:
    points: np.ndarray
    source_triangle: np.ndarray
    seed: int | None

    def __len__(self):
        return len(self.points)


def sample_surface(mesh: TriangleMesh, n: int, seed=0) -> SampledCloud:
    """Draw ``n`` points uniformly by area.

    A triangle is picked with probability proportional to its area and a
    point inside it with the square-root barycentric map, which is uniform
    over the triangle.
    """
    if n < 1:
        raise DomainError(f"sample count must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    areas = mesh.triangle_areas()
    cum = np.cumsum(areas)
    if not cum[-1] > 0:
        raise DomainError("cannot sample a mesh with zero area")
    tri = np.searchsorted(cum, rng.random(n) * cum[-1], side="right")
    tri = np.minimum(tri, len(areas) - 1)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    c = mesh.corners[tri]
    a = (1.0 - r1)[:, None]
    b = (r1 * (1.0 - r2))[:, None]
    w = (r1 * r2)[:, None]
    pts = a * c[:, 0] + b * c[:, 1] + w * c[:, 2]
    return SampledCloud(pts, tri, seed)

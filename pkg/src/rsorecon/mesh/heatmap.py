"""Signed-distance heatmaps as coloured PLY point clouds."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import DomainError
from .io import read_ply


def diverging_colors(d, limit: float | None = None) -> np.ndarray:
    """Blue-white-red colours for signed values, white at zero.

    ``limit`` defaults to the 99th percentile of ``|d|``; values beyond it
    saturate.
    """
    d = np.asarray(d, dtype=float)
    if limit is None:
        limit = float(np.percentile(np.abs(d), 99)) if d.size else 0.0
    if limit <= 0:
        return np.full((d.size, 3), 255, dtype=np.uint8)
    t = np.clip(d / limit, -1.0, 1.0)
    rgb = np.empty((d.size, 3))
    neg = t < 0
    fade = 255.0 * (1.0 - np.abs(t))
    rgb[:, 0] = np.where(neg, fade, 255.0)
    rgb[:, 1] = fade
    rgb[:, 2] = np.where(neg, 255.0, fade)
    return np.rint(rgb).astype(np.uint8)


def export_heatmap(points, d, path, limit: float | None = None) -> Path:
    """Write an ascii PLY with ``red, green, blue`` and the raw distance as ``quality``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    d = np.asarray(d, dtype=float).ravel()
    if len(pts) != len(d):
        raise DomainError(f"{len(pts)} points but {len(d)} distances")
    rgb = diverging_colors(d, limit)
    path = Path(path)
    header = (
        "ply\nformat ascii 1.0\n"
        f"element vertex {len(pts)}\n"
        "property double x\nproperty double y\nproperty double z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        "property double quality\n"
        "end_header\n"
    )
    rows = (
        f"{p[0]!r} {p[1]!r} {p[2]!r} {c[0]} {c[1]} {c[2]} {q!r}\n"
        for p, c, q in zip(pts.tolist(), rgb.tolist(), d.tolist())
    )
    with path.open("w") as fh:
        fh.write(header)
        fh.writelines(rows)
    return path


def read_heatmap(path):
    """Return ``(points, colors, quality)`` from a heatmap PLY."""
    v = read_ply(path)["vertex"]
    pts = np.column_stack([v["x"], v["y"], v["z"]])
    rgb = np.column_stack([v["red"], v["green"], v["blue"]]).astype(np.uint8)
    return pts, rgb, np.asarray(v["quality"], dtype=float)

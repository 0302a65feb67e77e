"""Similarity alignment of point sets and meshes (Umeyama, trimmed ICP)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, RankError
from .bvh import BvhAccel, build_bvh
from .core import TriangleMesh

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SimilarityTransform:
    """``x -> scale * rotation @ x + translation``."""

    scale: float = 1.0
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not self.scale > 0:
            raise DomainError(f"scale must be positive, got {self.scale}")
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return self.scale * p @ self.rotation.T + self.translation

    def apply_mesh(self, mesh: TriangleMesh) -> TriangleMesh:
        return mesh.transformed(self.apply)

    @property
    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.scale * self.rotation
        M[:3, 3] = self.translation
        return M

    def to_dict(self) -> dict:
        return {"scale": self.scale, "rotation": self.rotation.tolist(), "translation": self.translation.tolist()}


def umeyama_align(src, dst, with_scale: bool = True) -> SimilarityTransform:
    """Least-squares similarity (or rigid) transform taking ``src`` onto ``dst``.

    Minimises ``sum ||dst_i - (s R src_i + t)||^2`` over rotations ``R``,
    translations ``t`` and, when ``with_scale``, scales ``s > 0``.

    Raises
    ------
    RankError
        Fewer than 3 points, or the source points are collinear.
    """
    src = np.asarray(src, dtype=float).reshape(-1, 3)
    dst = np.asarray(dst, dtype=float).reshape(-1, 3)
    if len(src) != len(dst):
        raise DomainError(f"correspondence count mismatch: {len(src)} vs {len(dst)}")
    if len(src) < 3:
        raise RankError(f"need >= 3 correspondences, got {len(src)}")
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    xs = src - mu_s
    xd = dst - mu_d
    sv_src = np.linalg.svd(xs, compute_uv=False)
    if sv_src[1] <= 1e-12 * max(sv_src[0], 1e-300):
        raise RankError("source correspondences are collinear or coincident")
    cov = xd.T @ xs / len(src)
    U, D, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    if with_scale:
        var_s = (xs * xs).sum() / len(src)
        scale = float((D * np.diag(S)).sum() / var_s)
    else:
        scale = 1.0
    t = mu_d - scale * R @ mu_s
    return SimilarityTransform(scale, R, t)


@dataclass(frozen=True, eq=False)
class IcpResult:
    transform: SimilarityTransform
    rms_history: list
    iterations: int
    converged: bool


def _trimmed(moved, accel, keep):
    closest, d2, _, _ = accel.query(moved)
    if keep < len(d2):
        idx = np.argsort(d2, kind="stable")[:keep]
    else:
        idx = np.arange(len(d2))
    return idx, closest[idx], float(np.sqrt(d2[idx].mean()))


def icp_refine(src_cloud, ref: TriangleMesh, accel: BvhAccel | None = None,
               init: SimilarityTransform | None = None, max_iters: int = 50,
               trim_fraction: float = 0.0, with_scale: bool = False, tol: float = 1e-9) -> IcpResult:
    """Trimmed point-to-surface ICP.

    Each iteration matches the transformed source points to their nearest
    reference surface points, keeps the best ``1 - trim_fraction`` share,
    and re-solves the transform from the original source points with
    :func:`umeyama_align`.  The trimmed RMS never increases; iteration
    stops after ``max_iters`` or once the RMS changes by less than ``tol``.
    """
    if not 0.0 <= trim_fraction < 0.5:
        raise DomainError(f"trim_fraction must lie in [0, 0.5), got {trim_fraction}")
    src = np.asarray(getattr(src_cloud, "points", src_cloud), dtype=float).reshape(-1, 3)
    accel = accel or build_bvh(ref)
    current = init or SimilarityTransform()
    keep = max(3, int(round(len(src) * (1.0 - trim_fraction))))
    idx, target, rms = _trimmed(current.apply(src), accel, keep)
    history = [rms]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        cand = umeyama_align(src[idx], target, with_scale=with_scale)
        cidx, ctarget, crms = _trimmed(cand.apply(src), accel, keep)
        if crms > rms:
            # rounding noise at the optimum; keep the better transform
            converged = True
            break
        current, idx, target = cand, cidx, ctarget
        history.append(crms)
        if rms - crms < tol:
            converged = True
            rms = crms
            break
        rms = crms
    log.debug("icp: %d iterations, rms %.3g -> %.3g", it, history[0], history[-1])
    return IcpResult(current, history, it, converged)

"""Summary statistics, histograms and distribution fits for distance samples."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError

log = logging.getLogger(__name__)

PERCENTILES = (1, 5, 50, 95, 99)


@dataclass(frozen=True)
class GaussianFit:
    mu: float
    sigma: float


@dataclass(frozen=True)
class WeibullFit:
    shape: float
    scale: float
    n_clamped: int = 0
    iterations: int = 0


def summary_stats(d) -> dict:
    d = np.asarray(d, dtype=float)
    if d.size == 0:
        raise DomainError("no samples")
    out = {
        "count": int(d.size),
        "mean": float(np.mean(d)),
        "std": float(np.std(d)),
        "rms": float(np.sqrt(np.mean(d * d))),
        "min": float(np.min(d)),
        "max": float(np.max(d)),
    }
    for p, v in zip(PERCENTILES, np.percentile(d, PERCENTILES)):
        out[f"p{p}"] = float(v)
    return out


def histogram(d, bins: int = 64):
    """Uniform-width histogram over ``[min(d), max(d)]``; the last bin is closed.

    Returns
    -------
    edges : (bins + 1,) ndarray
    counts : (bins,) int ndarray
    """
    d = np.asarray(d, dtype=float).ravel()
    if d.size == 0:
        raise DomainError("histogram of an empty sample")
    if bins < 1:
        raise DomainError(f"bins must be >= 1, got {bins}")
    counts, edges = np.histogram(d, bins=bins)
    return edges, counts


def fit_gaussian(d) -> GaussianFit:
    """Maximum-likelihood normal fit: sample mean and population standard deviation."""
    d = np.asarray(d, dtype=float).ravel()
    if d.size < 2:
        raise DomainError(f"gaussian fit needs >= 2 samples, got {d.size}")
    return GaussianFit(float(np.mean(d)), float(np.std(d)))


def weibull_loglik(x, shape: float, scale: float) -> float:
    x = np.asarray(x, dtype=float)
    z = x / scale
    return float(np.sum(np.log(shape / scale) + (shape - 1.0) * np.log(z) - z**shape))


def _shape_equation(k, logy, mean_logy):
    # g(k) = sum(y^k log y) / sum(y^k) - 1/k - mean(log y), with y <= 1
    w = np.exp(k * logy)
    s0 = w.sum()
    s1 = (w * logy).sum()
    s2 = (w * logy * logy).sum()
    m1 = s1 / s0
    g = m1 - 1.0 / k - mean_logy
    dg = s2 / s0 - m1 * m1 + 1.0 / (k * k)
    return g, dg


def fit_weibull(x, tol: float = 1e-10, max_iter: int = 200) -> WeibullFit:
    """Two-parameter Weibull maximum-likelihood fit.

    The shape ``k`` solves the profile-likelihood equation by safeguarded
    Newton iteration inside a bisection bracket; the scale then follows in
    closed form, ``scale = mean(x**k) ** (1/k)``.  Zeros are clamped to
    ``eps * max(x)`` and counted in ``n_clamped``.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 2:
        raise DomainError(f"weibull fit needs >= 2 samples, got {x.size}")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise DomainError("weibull fit needs finite non-negative samples")
    top = float(x.max())
    if top == 0:
        raise DomainError("weibull fit of all-zero samples is degenerate")
    floor = np.finfo(float).eps * top
    n_clamped = int(np.count_nonzero(x < floor))
    if n_clamped:
        log.warning("weibull fit: clamped %d sample(s) below %g", n_clamped, floor)
        x = np.maximum(x, floor)
    if np.all(x == x[0]):
        raise DomainError("weibull fit of identical samples is degenerate (shape -> inf)")

    logy = np.log(x / top)
    mean_logy = float(logy.mean())

    lo, hi = 0.0, math.inf
    k = 1.0
    g, dg = _shape_equation(k, logy, mean_logy)
    # grow a bracket [lo, hi] with g(lo) < 0 < g(hi)
    while g < 0:
        lo = k
        k *= 2.0
        if k > 1e8:
            raise DomainError("weibull shape diverged while bracketing")
        g, dg = _shape_equation(k, logy, mean_logy)
    hi = k
    if lo == 0.0:
        while g > 0:
            hi = k
            k *= 0.5
            if k < 1e-8:
                raise DomainError("weibull shape collapsed while bracketing")
            g, dg = _shape_equation(k, logy, mean_logy)
        lo = k
        k = 0.5 * (lo + hi)
        g, dg = _shape_equation(k, logy, mean_logy)

    it = 0
    for it in range(1, max_iter + 1):
        if g > 0:
            hi = k
        elif g < 0:
            lo = k
        else:
            break
        step = g / dg if dg > 0 else math.inf
        cand = k - step
        if not lo < cand < hi:
            cand = 0.5 * (lo + hi)
        done = abs(cand - k) < tol or hi - lo < tol
        k = cand
        g, dg = _shape_equation(k, logy, mean_logy)
        if done:
            break
    scale = top * float(np.mean(np.exp(k * logy))) ** (1.0 / k)
    return WeibullFit(float(k), float(scale), n_clamped, it)

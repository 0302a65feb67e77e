"""Full-reference image quality: PSNR and single-scale SSIM on 8-bit images."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d

from .errors import DomainError

log = logging.getLogger(__name__)

PEAK = 255.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
LUMA_WEIGHTS = (0.299, 0.587, 0.114)
METRICS_HEADER = ("filename", "psnr_db", "ssim", "lpips")
MEAN_ROW = "MEAN"


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """8-bit image stored as an (height, width, channels) array."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3 or a.shape[2] not in (1, 3):
            raise DomainError(f"expected 1 or 3 channels, got shape {a.shape}")
        if a.dtype != np.uint8:
            if np.any((a < 0) | (a > 255)) or np.any(a != np.round(a)):
                raise DomainError("image samples must be integers in [0, 255]")
            a = a.astype(np.uint8)
        object.__setattr__(self, "data", a)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @classmethod
    def load(cls, path) -> "ImageBuffer":
        from PIL import Image

        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB" if im.mode in ("RGBA", "P", "CMYK") else "L")
            return cls(np.asarray(im))

    def save(self, path) -> Path:
        from PIL import Image

        arr = self.data[:, :, 0] if self.channels == 1 else self.data
        Image.fromarray(arr).save(path)
        return Path(path)

    def luminance(self) -> np.ndarray:
        x = self.data.astype(np.float64)
        if self.channels == 1:
            return x[:, :, 0]
        r, g, b = LUMA_WEIGHTS
        return r * x[:, :, 0] + g * x[:, :, 1] + b * x[:, :, 2]


def _check_pair(a: ImageBuffer, b: ImageBuffer):
    if a.data.shape != b.data.shape:
        raise DomainError(f"image shapes differ: {a.data.shape} vs {b.data.shape}")


def mse(a: ImageBuffer, b: ImageBuffer) -> float:
    _check_pair(a, b)
    diff = a.data.astype(np.float64) - b.data.astype(np.float64)
    return float(np.mean(diff * diff))


def psnr(a: ImageBuffer, b: ImageBuffer) -> float:
    """Peak signal-to-noise ratio in dB; ``math.inf`` for identical images."""
    err = mse(a, b)
    if err == 0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / err)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    g /= g.sum()
    return np.outer(g, g)


def ssim(a: ImageBuffer, b: ImageBuffer) -> float:
    """Mean SSIM over all fully-contained 11x11 Gaussian windows (sigma 1.5).

    Colour images are compared on BT.601 luminance.
    """
    _check_pair(a, b)
    if min(a.width, a.height) < SSIM_WINDOW:
        raise DomainError(f"images must be at least {SSIM_WINDOW} pixels on each side")
    x = a.luminance()
    y = b.luminance()
    w = gaussian_window()

    def filt(img):
        return convolve2d(img, w, mode="valid")

    mx, my = filt(x), filt(y)
    sxx = filt(x * x) - mx * mx
    syy = filt(y * y) - my * my
    sxy = filt(x * y) - mx * my
    c1 = (SSIM_K1 * PEAK) ** 2
    c2 = (SSIM_K2 * PEAK) ** 2
    num = (2.0 * mx * my + c1) * (2.0 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


@dataclass
class BatchResult:
    rows: list                                   # (filename, psnr, ssim) sorted by filename
    unmatched: list = field(default_factory=list)
    failures: list = field(default_factory=list)  # (filename, message)

    @property
    def mean_psnr(self) -> float:
        finite = [r[1] for r in self.rows if math.isfinite(r[1])]
        if finite:
            return float(np.mean(finite))
        return math.inf if self.rows else math.nan

    @property
    def n_infinite_psnr(self) -> int:
        return sum(1 for r in self.rows if not math.isfinite(r[1]))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([r[2] for r in self.rows])) if self.rows else math.nan

    def summary(self) -> dict:
        return {
            "pairs": len(self.rows),
            "unmatched": self.unmatched,
            "failures": [{"filename": f, "error": m} for f, m in self.failures],
            "mean_psnr_db": _fmt(self.mean_psnr),
            "mean_ssim": self.mean_ssim,
            "psnr_mean_excludes_infinite": self.n_infinite_psnr,
        }

    def write_csv(self, path, lpips: dict | None = None) -> Path:
        """Metrics CSV ``filename,psnr_db,ssim,lpips`` plus a final ``MEAN`` row.

        ``lpips`` optionally maps filenames to externally computed values.
        The ``MEAN`` PSNR excludes identical-image (infinite) rows.
        """
        lpips = lpips or {}
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(METRICS_HEADER)
            for name, p, s in self.rows:
                lp = lpips.get(name)
                w.writerow([name, _fmt(p), repr(s), "" if lp is None else repr(float(lp))])
            vals = [lpips[r[0]] for r in self.rows if r[0] in lpips]
            w.writerow([MEAN_ROW, _fmt(self.mean_psnr), repr(self.mean_ssim),
                        repr(float(np.mean(vals))) if vals else ""])
        return path


def _fmt(v: float) -> str:
    return "inf" if v == math.inf else repr(float(v))


def _eval_pair(args):
    name, ra, gb = args
    try:
        a = ImageBuffer.load(ra)
        b = ImageBuffer.load(gb)
        return name, psnr(a, b), ssim(a, b), None
    except (DomainError, OSError) as exc:
        return name, None, None, str(exc)


def batch_eval(rendered_dir, gt_dir, workers: int = 1) -> BatchResult:
    """Evaluate same-named PNG pairs; output order is lexicographic by filename."""
    rendered = {p.name: p for p in Path(rendered_dir).glob("*.png")}
    gt = {p.name: p for p in Path(gt_dir).glob("*.png")}
    names = sorted(set(rendered) & set(gt))
    unmatched = sorted(set(rendered) ^ set(gt))
    for u in unmatched:
        log.warning("no counterpart for %s; skipped", u)
    if not names:
        raise DomainError(f"no matching PNG pairs between {rendered_dir} and {gt_dir}")
    jobs = [(n, rendered[n], gt[n]) for n in names]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(_eval_pair, jobs))
    else:
        results = [_eval_pair(j) for j in jobs]
    out = BatchResult([], unmatched)
    for name, p, s, err in results:
        if err is not None:
            log.error("%s: %s", name, err)
            out.failures.append((name, err))
        else:
            out.rows.append((name, p, s))
    return out

"""Image-quality metrics: PSNR, SSIM and a seeded random-feature perceptual distance.

The perceptual distance plays the role of LPIPS but is *not* LPIPS: its
features come from a fixed-seed random convolutional stack, not a pretrained
network, so its values are only comparable with each other.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import _kernels

PSNR_IDENTICAL = 99.0


def psnr(a: np.ndarray, b: np.ndarray, max_val: float = 255.0) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"psnr: shapes {a.shape} and {b.shape} differ")
    if max_val <= 0:
        raise ValueError("max_val must be positive")
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return PSNR_IDENTICAL
    return float(10.0 * math.log10(max_val**2 / mse))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = len(g)
    rows = sliding_window_view(img, k, axis=-2) @ g
    return sliding_window_view(rows, k, axis=-1) @ g


def ssim(a, b, window: int = 11, sigma: float = 1.5, data_range: float = 255.0, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean SSIM with a Gaussian window over fully-covered positions."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"ssim: shapes {a.shape} and {b.shape} differ")
    if min(a.shape[-2:]) < window:
        raise ValueError(f"ssim: image {a.shape} smaller than window {window}")
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    g = _gaussian_window(window, sigma)
    mu_a, mu_b = _filter_valid(a, g), _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a**2
    var_b = _filter_valid(b * b, g) - mu_b**2
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


class PerceptualNet:
    """Three stride-2 3x3 conv + ReLU stages with seeded He-normal weights."""

    def __init__(self, channels=(16, 32, 64), seed: int = 20240611):
        rng = np.random.default_rng(seed)
        self.weights = []
        prev = 1
        for c in channels:
            self.weights.append(rng.standard_normal((c, prev, 3, 3)) * np.sqrt(2.0 / (prev * 9)))
            prev = c

    def features(self, img: np.ndarray) -> list:
        """``img`` in [0, 255], shape (H, W) or (N, H, W)."""
        x = np.asarray(img, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        x = (x / 127.5 - 1.0)[:, None]
        feats = []
        for w in self.weights:
            x = _conv_s2(x, w)
            x = np.maximum(x, 0.0)
            feats.append(x)
        return feats


def _conv_s2(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    n, c, h, wd = x.shape
    co = w.shape[0]
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ho, wo = (h - 1) // 2 + 1, (wd - 1) // 2 + 1
    cols = _kernels.im2col(np.ascontiguousarray(xp), 3, 2, ho, wo).reshape(c * 9, n * ho * wo)
    return (w.reshape(co, -1) @ cols).reshape(co, n, ho, wo).transpose(1, 0, 2, 3)


_DEFAULT_NET = None


def _default_net() -> PerceptualNet:
    global _DEFAULT_NET
    if _DEFAULT_NET is None:
        _DEFAULT_NET = PerceptualNet()
    return _DEFAULT_NET


def perceptual_distance(a, b, net: PerceptualNet | None = None) -> np.ndarray | float:
    """Sum over stages of the spatial mean of squared channel-normalised feature differences."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"perceptual_distance: shapes {a.shape} and {b.shape} differ")
    net = net or _default_net()
    total = 0.0
    for fa, fb in zip(net.features(a), net.features(b)):
        fa = fa / (np.sqrt((fa * fa).sum(axis=1, keepdims=True)) + 1e-10)
        fb = fb / (np.sqrt((fb * fb).sum(axis=1, keepdims=True)) + 1e-10)
        total = total + ((fa - fb) ** 2).sum(axis=1).mean(axis=(1, 2))
    return float(total[0]) if a.ndim == 2 else total


def l1_fraction(a, b, data_range: float = 255.0) -> float:
    """Mean absolute difference as a fraction of the dynamic range."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.mean(np.abs(a - b)) / data_range)


# ---------------------------------------------------------------------------
# reports


@dataclass
class BScanMetrics:
    scheme: str
    fold: int
    patient_id: str
    time_index: int
    slice: int
    psnr: float
    ssim: float
    one_minus_lpips: float
    l1: float


FIELDS = ("psnr", "ssim", "one_minus_lpips", "l1")


def score_bscans(pred: np.ndarray, truth: np.ndarray, *, scheme="", fold=0, patient_id="", time_index=0) -> list:
    """Per-slice metrics for two stacks of B-scans ``(S, H, W)`` on the 0-255 scale."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    d = perceptual_distance(pred, truth)
    rows = []
    for s in range(pred.shape[0]):
        rows.append(
            BScanMetrics(
                scheme, int(fold), str(patient_id), int(time_index), s,
                psnr(pred[s], truth[s]), ssim(pred[s], truth[s]), float(1.0 - d[s]), l1_fraction(pred[s], truth[s]),
            )
        )
    return rows


@dataclass
class MetricsReport:
    per_bscan: list = field(default_factory=list)

    def extend(self, rows) -> None:
        self.per_bscan.extend(rows)

    def _group(self, key):
        groups = {}
        for r in self.per_bscan:
            groups.setdefault(key(r), []).append(r)
        return groups

    @staticmethod
    def _stats(rows) -> dict:
        out = {"n": len(rows)}
        for f in FIELDS:
            v = np.array([getattr(r, f) for r in rows], dtype=np.float64)
            out[f] = float(v.mean())
            out[f + "_std"] = float(v.std())
        return out

    def per_cube(self) -> dict:
        return {k: self._stats(v) for k, v in self._group(lambda r: (r.scheme, r.fold, r.patient_id, r.time_index)).items()}

    def per_fold(self) -> dict:
        return {k: self._stats(v) for k, v in self._group(lambda r: (r.scheme, r.fold)).items()}

    def per_split(self) -> dict:
        return {k: self._stats(v) for k, v in self._group(lambda r: r.scheme).items()}

    def mean(self, metric: str) -> float:
        return float(np.mean([getattr(r, metric) for r in self.per_bscan]))

    def write_csv(self, path) -> Path:
        """One row per B-scan, then ``AGG`` rows per cube, per fold and per scheme."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = ["kind", "scheme", "fold", "patient_id", "time_index", "slice", *FIELDS]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in self.per_bscan:
                d = asdict(r)
                w.writerow(["BSCAN", r.scheme, r.fold, r.patient_id, r.time_index, r.slice] + [f"{d[f]:.10g}" for f in FIELDS])
            for (scheme, fold, pid, t), st in sorted(self.per_cube().items()):
                w.writerow(["AGG", scheme, fold, pid, t, "cube"] + [f"{st[f]:.10g}" for f in FIELDS])
            for (scheme, fold), st in sorted(self.per_fold().items()):
                w.writerow(["AGG", scheme, fold, "", "", "fold"] + [f"{st[f]:.10g}" for f in FIELDS])
            for scheme, st in sorted(self.per_split().items()):
                w.writerow(["AGG", scheme, "", "", "", "all"] + [f"{st[f]:.10g}" for f in FIELDS])
        return path

    @classmethod
    def read_csv(cls, path) -> "MetricsReport":
        rep = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                if row["kind"] != "BSCAN":
                    continue
                rep.per_bscan.append(
                    BScanMetrics(
                        row["scheme"], int(row["fold"]), row["patient_id"], int(row["time_index"]), int(row["slice"]),
                        *(float(row[f]) for f in FIELDS),
                    )
                )
        return rep

"""Reconstruction quality: PSNR, SSIM and spectral correlation."""
from __future__ import annotations

import csv
import math
from typing import List, Sequence, Tuple

import numpy as np
from scipy.signal import correlate2d

__all__ = ["psnr", "ssim", "spectral_correlation", "gaussian_window", "write_metrics_csv"]


def _pair(a, b):
    va = np.asarray(getattr(a, "values", a), dtype=np.float64)
    vb = np.asarray(getattr(b, "values", b), dtype=np.float64)
    if va.shape != vb.shape:
        raise ValueError(f"shape mismatch: {va.shape} vs {vb.shape}")
    if va.ndim == 2:
        va, vb = va[None], vb[None]
    return va, vb


def _peak(a, peak):
    if peak is not None:
        return float(peak)
    return float(getattr(a, "peak", 255.0))


def psnr(a, b, peak: float = None) -> Tuple[List[float], float]:
    """Per-frame PSNR in dB and their mean; identical frames give ``inf``."""
    va, vb = _pair(a, b)
    pk = _peak(a, peak)
    mse = np.mean((va - vb) ** 2, axis=(1, 2))
    per = [math.inf if m == 0 else 10.0 * math.log10(pk * pk / m) for m in mse]
    return per, float(np.mean(per))


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def _ssim_frame(x, y, win, c1, c2):
    def filt(img):
        return correlate2d(img, win, mode="valid")

    mu_x, mu_y = filt(x), filt(y)
    sxx = filt(x * x) - mu_x ** 2
    syy = filt(y * y) - mu_y ** 2
    sxy = filt(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def ssim(a, b, peak: float = None, window: int = 11, sigma: float = 1.5,
         k1: float = 0.01, k2: float = 0.03) -> Tuple[List[float], float]:
    """Mean structural similarity per frame (Gaussian window, valid region)."""
    va, vb = _pair(a, b)
    if min(va.shape[1:]) < window:
        raise ValueError(f"frames {va.shape[1:]} smaller than the {window}x{window} window")
    pk = _peak(a, peak)
    win = gaussian_window(window, sigma)
    c1, c2 = (k1 * pk) ** 2, (k2 * pk) ** 2
    per = []
    for x, y in zip(va, vb):
        per.append(1.0 if np.array_equal(x, y) else _ssim_frame(x, y, win, c1, c2))
    return per, float(np.mean(per))


def spectral_correlation(recon, truth, region: Sequence[int]) -> float:
    """Pearson correlation of the mean spectra over ``region = (r0, r1, c0, c1)``."""
    vr, vt = _pair(recon, truth)
    r0, r1, c0, c1 = region
    if not (0 <= r0 < r1 <= vr.shape[1] and 0 <= c0 < c1 <= vr.shape[2]):
        raise ValueError(f"region {tuple(region)} outside frame {vr.shape[1:]}")
    sr = vr[:, r0:r1, c0:c1].mean(axis=(1, 2))
    st = vt[:, r0:r1, c0:c1].mean(axis=(1, 2))
    if np.ptp(sr) == 0 or np.ptp(st) == 0:
        raise ValueError("zero-variance spectrum")
    return float(np.corrcoef(sr, st)[0, 1])


def write_metrics_csv(path, psnr_frames, ssim_frames) -> None:
    """One row per frame followed by a ``mean`` summary row."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "psnr", "ssim"])
        for k, (p, s) in enumerate(zip(psnr_frames, ssim_frames)):
            w.writerow([k, repr(float(p)), repr(float(s))])
        w.writerow(["mean", repr(float(np.mean(psnr_frames))), repr(float(np.mean(ssim_frames)))])

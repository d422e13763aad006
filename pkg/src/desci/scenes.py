"""Synthetic test scenes on the 0-255 intensity scale."""
from __future__ import annotations

import numpy as np

from .data import FrameCube

__all__ = ["moving_square", "spectral_blobs", "SPECTRAL_REGIONS"]


def moving_square(nx: int = 32, ny: int = 32, B: int = 8, side: int = 10,
                  velocity=(1, 1), start=(4, 4)) -> FrameCube:
    """Bright square drifting over a static shaded background with a disk."""
    i, j = np.mgrid[0:nx, 0:ny].astype(np.float64)
    background = 50.0 + 60.0 * (i / max(nx - 1, 1)) + 30.0 * np.cos(2 * np.pi * j / ny)
    cx, cy, rad = 0.7 * nx, 0.3 * ny, 0.15 * min(nx, ny)
    background[(i - cx) ** 2 + (j - cy) ** 2 <= rad ** 2] = 170.0
    frames = []
    for k in range(B):
        f = background.copy()
        r0, c0 = start[0] + k * velocity[0], start[1] + k * velocity[1]
        f[max(r0, 0):max(r0 + side, 0), max(c0, 0):max(c0 + side, 0)] = 220.0
        frames.append(f)
    return FrameCube(np.stack(frames), peak=255.0)


# (r0, r1, c0, c1) of the uniform-material patches in spectral_blobs
SPECTRAL_REGIONS = ((8, 24, 8, 24), (8, 24, 40, 56), (40, 56, 8, 24), (40, 56, 40, 56))


def spectral_blobs(nx: int = 64, ny: int = 64, B: int = 16) -> FrameCube:
    """Four square materials with distinct smooth spectra on a grey background."""
    bands = np.arange(B, dtype=np.float64)
    centres = (0.2, 0.45, 0.7, 0.9)
    widths = (0.15, 0.2, 0.12, 0.25)
    cube = np.full((B, nx, ny), 40.0)
    cube += 10.0 * (bands / max(B - 1, 1))[:, None, None]
    for (r0, r1, c0, c1), mu, sd in zip(SPECTRAL_REGIONS, centres, widths):
        spec = 40.0 + 170.0 * np.exp(-0.5 * ((bands / max(B - 1, 1) - mu) / sd) ** 2)
        cube[:, r0:r1, c0:c1] = spec[:, None, None]
    return FrameCube(cube, peak=255.0)

"""Nonlocal patch grouping: reference grid, block matching, aggregation.

Coordinates are ``(frame, row, col)`` of a patch's top-left pixel.  A patch
is vectorised row-major, so a group matrix has shape ``(d, M)`` with
``d = patch_side**2``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "PatchConfig",
    "PatchGroup",
    "reference_grid",
    "all_patches",
    "block_match",
    "block_match_all",
    "extract_groups",
    "aggregate",
    "aggregate_batch",
    "coverage",
    "pixel_index",
]


@dataclass(frozen=True)
class PatchConfig:
    patch_side: int = 6
    stride: Optional[int] = None
    search_L: int = 30
    search_H: int = 8
    group_M: int = 70
    rematch_every: int = 20

    def __post_init__(self):
        if self.patch_side < 1 or self.group_M < 1 or self.search_L < 0 \
                or self.search_H < 1 or self.rematch_every < 1:
            raise ValueError(f"invalid patch configuration {self}")
        if self.stride is not None and not 1 <= self.stride <= self.patch_side:
            # a stride beyond the patch side leaves uncovered pixels
            raise ValueError("stride must lie in [1, patch_side]")

    @property
    def d(self) -> int:
        return self.patch_side ** 2

    @property
    def step(self) -> int:
        return self.stride if self.stride is not None else max(self.patch_side - 1, 1)


@dataclass(frozen=True)
class PatchGroup:
    matrix: np.ndarray
    coords: np.ndarray
    ref_index: int = 0
    distances: Optional[np.ndarray] = None


def _offsets(size: int, p: int, step: int) -> np.ndarray:
    last = size - p
    offs = list(range(0, last + 1, step))
    if offs[-1] != last:
        offs.append(last)
    return np.array(offs, dtype=np.intp)


def reference_grid(nx: int, ny: int, B: int, cfg: PatchConfig) -> np.ndarray:
    """Strided reference positions ``(N, 3)``, last row/column snapped to the edge."""
    p = cfg.patch_side
    if p > nx or p > ny:
        raise ValueError(f"patch side {p} exceeds frame {nx}x{ny}")
    rows, cols = _offsets(nx, p, cfg.step), _offsets(ny, p, cfg.step)
    k, r, c = np.meshgrid(np.arange(B), rows, cols, indexing="ij")
    return np.stack([k.ravel(), r.ravel(), c.ravel()], axis=1)


def all_patches(cube: np.ndarray, p: int) -> np.ndarray:
    """Every p-by-p patch as a vector: shape ``(B, nx-p+1, ny-p+1, p*p)``."""
    win = sliding_window_view(cube, (p, p), axis=(1, 2))
    return win.reshape(win.shape[:3] + (p * p,))


def _window(k, r, c, shape, cfg):
    B, X, Y = shape
    H = min(cfg.search_H, B)
    f0 = min(max(k - H // 2, 0), B - H)
    h = cfg.search_L // 2
    return (f0, f0 + H), (max(r - h, 0), min(r + h, X - 1) + 1), (max(c - h, 0), min(c + h, Y - 1) + 1)


def _match_one(patches, ref, cfg):
    k, r, c = (int(v) for v in ref)
    (f0, f1), (r0, r1), (c0, c1) = _window(k, r, c, patches.shape[:3], cfg)
    cand = patches[f0:f1, r0:r1, c0:c1]
    nf, nr, nc = cand.shape[:3]
    if nf * nr * nc < cfg.group_M:
        raise ValueError(
            f"search window at {tuple(ref)} holds {nf * nr * nc} patches, fewer than M={cfg.group_M}")
    diff = cand - patches[k, r, c]
    dist = np.einsum("fijd,fijd->fij", diff, diff).ravel()
    self_pos = ((k - f0) * nr + (r - r0)) * nc + (c - c0)
    dist[self_pos] = -1.0
    # stable sort: equal distances keep (frame, row, col) order
    order = np.argsort(dist, kind="stable")[: cfg.group_M]
    dist[self_pos] = 0.0
    fi, ri, ci = np.unravel_index(order, (nf, nr, nc))
    coords = np.stack([fi + f0, ri + r0, ci + c0], axis=1)
    return coords, dist[order]


def block_match(cube, ref_coord: Sequence[int], cfg: PatchConfig) -> PatchGroup:
    """The M nearest patches (squared Euclidean) to the reference in its window.

    Column 0 is always the reference itself; the rest are sorted by distance,
    ties broken lexicographically by ``(frame, row, col)``.
    """
    arr = np.asarray(getattr(cube, "values", cube), dtype=np.float64)
    patches = all_patches(arr, cfg.patch_side)
    coords, dist = _match_one(patches, ref_coord, cfg)
    mat = patches[coords[:, 0], coords[:, 1], coords[:, 2]].T.copy()
    return PatchGroup(matrix=mat, coords=coords, distances=dist)


def block_match_all(cube: np.ndarray, refs: np.ndarray, cfg: PatchConfig,
                    workers: int = 1) -> np.ndarray:
    """Group coordinates for every reference: shape ``(N, M, 3)``."""
    patches = np.ascontiguousarray(all_patches(np.asarray(cube, dtype=np.float64), cfg.patch_side))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda ref: _match_one(patches, ref, cfg)[0], refs))
    else:
        results = [_match_one(patches, ref, cfg)[0] for ref in refs]
    return np.stack(results)


def extract_groups(cube: np.ndarray, coords: np.ndarray, p: int) -> np.ndarray:
    """Stack group matrices ``(N, d, M)`` for the given coordinates."""
    patches = all_patches(cube, p)
    return np.swapaxes(patches[coords[..., 0], coords[..., 1], coords[..., 2]], -1, -2)


def pixel_index(coords: np.ndarray, p: int, shape: Tuple[int, int, int]) -> np.ndarray:
    """Flat cube indices ``(..., d)`` touched by each patch."""
    _, X, Y = shape
    dr, dc = np.divmod(np.arange(p * p), p)
    k, r, c = coords[..., 0:1], coords[..., 1:2], coords[..., 2:3]
    return (k * X + r + dr) * Y + c + dc


def aggregate_batch(coords: np.ndarray, estimates: np.ndarray, shape, p: int,
                    counts: Optional[np.ndarray] = None,
                    index: Optional[np.ndarray] = None) -> np.ndarray:
    """Average overlapping patch estimates back into a ``(B, nx, ny)`` array.

    ``coords`` is ``(N, M, 3)`` and ``estimates`` ``(N, d, M)``.  ``counts``
    (per-pixel coverage) and ``index`` (from :func:`pixel_index`) may be
    passed in when the coordinates are reused.
    """
    shape = tuple(shape)
    size = int(np.prod(shape))
    idx = pixel_index(coords, p, shape) if index is None else index
    sums = np.bincount(idx.ravel(), weights=np.swapaxes(estimates, -1, -2).ravel(), minlength=size)
    if counts is None:
        counts = coverage(coords, shape, p)
    if np.any(counts == 0):
        raise ValueError("some pixels are not covered by any patch")
    return (sums / counts.ravel()).reshape(shape)


def coverage(coords: np.ndarray, shape, p: int) -> np.ndarray:
    shape = tuple(shape)
    idx = pixel_index(coords, p, shape)
    return np.bincount(idx.ravel(), minlength=int(np.prod(shape))).reshape(shape)


def aggregate(groups: Iterable[PatchGroup], shape) -> np.ndarray:
    """Unweighted mean of every patch value written onto each pixel."""
    groups = list(groups)
    d = groups[0].matrix.shape[0]
    p = int(round(np.sqrt(d)))
    if p * p != d:
        raise ValueError(f"patch length {d} is not a square")
    coords = np.concatenate([g.coords for g in groups])[None]
    est = np.concatenate([g.matrix for g in groups], axis=1)[None]
    return aggregate_batch(coords, est, shape, p)

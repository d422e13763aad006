"""DeSCI reconstruction: projection steps interleaved with WNNM group denoising.

One loop serves every mode.  ADMM alternates

    theta <- closed-form data step from (x + b)
    x     <- denoise(theta - b)
    b     <- b - (theta - x)

while GAP / GAP-acc project the current estimate onto the measurement
manifold and denoise the projection.  With ``gamma = 0`` the ADMM data step
is the GAP projection and the dual is kept at zero, so the two coincide.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .data import FrameCube
from .metrics import psnr as _psnr, ssim as _ssim
from .patching import (PatchConfig, aggregate_batch, block_match_all, coverage,
                       extract_groups, pixel_index, reference_grid)
from .projection import SplitState, admm_theta_update, gap_accelerated_step, gap_project
from .sensing import SensingOperator
from .wnnm import EPS, WnnmParams, denoise_group

log = logging.getLogger(__name__)

__all__ = [
    "MODES",
    "SolverConfig",
    "IterReport",
    "DivergenceError",
    "WnnmDenoiser",
    "sigma_schedule_default",
    "params_for_sigma",
    "gamma_for_snr",
    "config_for_snr",
    "run_projection_loop",
    "desci_run",
    "write_telemetry_csv",
]

MODES = ("admm", "gap", "gap-acc")

_SNR_BUCKETS = (40.0, 30.0, 20.0, 10.0, 0.0)
_GAMMAS = (0.24, 1.2, 6.0, 30.0, 150.0)

Denoiser = Callable[[np.ndarray, float, int], np.ndarray]


class DivergenceError(FloatingPointError):
    """An iterate became non-finite."""


def sigma_schedule_default(initial: float = 100.0, halvings: int = 3,
                           stage_len: int = 60) -> List[float]:
    """Noise levels per stage, halving each stage: [100, 50, 25, 12.5] by default.

    ``stage_len`` is the number of iterations spent at each level; it is
    carried by :class:`SolverConfig` as ``max_iter``.
    """
    if initial <= 0:
        raise ValueError("initial sigma must be positive")
    return [initial / 2 ** k for k in range(halvings + 1)]


def params_for_sigma(sigma_n: float) -> Tuple[int, int]:
    """(patch side, patches per group) for a noise level on the 0-255 scale."""
    if sigma_n <= 20:
        return 6, 70
    if sigma_n <= 40:
        return 7, 90
    if sigma_n <= 60:
        return 8, 120
    return 9, 140


def gamma_for_snr(snr_db: Optional[float]) -> float:
    """ADMM coupling weight for a measurement SNR; ``None`` (noiseless) gives 0."""
    if snr_db is None or math.isinf(snr_db):
        return 0.0
    i = int(np.argmin([abs(snr_db - s) for s in _SNR_BUCKETS]))
    return _GAMMAS[i]


@dataclass
class SolverConfig:
    mode: str = "gap-acc"
    gamma: float = 0.0
    c: float = 2.8
    max_iter: int = 60
    sigma_schedule: Sequence[float] = field(default_factory=sigma_schedule_default)
    tol: float = 1e-4
    rematch_every: int = 20
    search_L: int = 30
    search_H: int = 8
    stride: Optional[int] = None
    # fixed (patch side, M) for every stage; None follows params_for_sigma
    patch_params: Optional[Tuple[int, int]] = None
    eps: float = EPS
    # subtract each group's mean patch before shrinkage, add it back after
    center_groups: bool = True
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.mode != "admm" and self.gamma != 0:
            raise ValueError(f"gamma must be 0 in {self.mode} mode")
        sched = list(self.sigma_schedule)
        if not sched or any(s < 0 for s in sched):
            raise ValueError("sigma schedule must be a non-empty list of non-negative values")
        if any(b >= a for a, b in zip(sched, sched[1:])):
            raise ValueError("sigma schedule must be strictly descending")
        if self.max_iter < 1 or self.c < 0 or self.tol < 0:
            raise ValueError("max_iter must be >= 1, c and tol non-negative")


def config_for_snr(snr_db: Optional[float], **overrides) -> SolverConfig:
    """Default config for a declared measurement SNR.

    Above 30 dB (and for noiseless data) accelerated GAP is used; otherwise
    ADMM with the tabulated gamma.
    """
    if snr_db is None or snr_db > 30:
        base = dict(mode="gap-acc", gamma=0.0)
    else:
        base = dict(mode="admm", gamma=gamma_for_snr(snr_db))
    base.update(overrides)
    return SolverConfig(**base)


@dataclass(frozen=True)
class IterReport:
    iteration: int
    sigma_n: float
    residual: float
    rel_change: float
    psnr: Optional[float] = None
    ssim: Optional[float] = None
    proj_residual: float = math.nan
    stage: int = 0


class WnnmDenoiser:
    """Group-wise WNNM with block matching refreshed every ``rematch_every`` calls.

    ``match_log`` records the iterations at which groups were rebuilt.
    """

    def __init__(self, cfg: SolverConfig):
        self.cfg = cfg
        self.coords = None
        self.match_log: List[int] = []
        self._key = None
        self._counts = None
        self._index = None

    def patch_config(self, sigma_n: float, B: int) -> PatchConfig:
        side, M = self.cfg.patch_params or params_for_sigma(sigma_n)
        return PatchConfig(patch_side=side, stride=self.cfg.stride, search_L=self.cfg.search_L,
                           search_H=min(self.cfg.search_H, B), group_M=M,
                           rematch_every=self.cfg.rematch_every)

    def __call__(self, image: np.ndarray, sigma_n: float, iteration: int) -> np.ndarray:
        if sigma_n == 0 or self.cfg.c == 0:
            # every threshold is exactly zero: shrinkage is the identity
            return image.copy()
        pc = self.patch_config(sigma_n, image.shape[0])
        key = (pc.patch_side, pc.group_M)
        if self.coords is None or key != self._key \
                or iteration - self.match_log[-1] >= pc.rematch_every:
            refs = reference_grid(*image.shape[1:], image.shape[0], pc)
            self.coords = block_match_all(image, refs, pc, workers=self.cfg.workers)
            self._counts = coverage(self.coords, image.shape, pc.patch_side)
            self._index = pixel_index(self.coords, pc.patch_side, image.shape)
            self._key = key
            self.match_log.append(iteration)
        groups = extract_groups(image, self.coords, pc.patch_side)
        params = WnnmParams(sigma_n=sigma_n, c=self.cfg.c, eps=self.cfg.eps)
        if self.cfg.center_groups:
            mean = groups.mean(axis=-1, keepdims=True)
            est = denoise_group(groups - mean, params) + mean
        else:
            est = denoise_group(groups, params)
        return aggregate_batch(self.coords, est, image.shape, pc.patch_side,
                               self._counts, self._index)


def _norm(v) -> float:
    return float(np.linalg.norm(v.ravel()))


def run_projection_loop(op: SensingOperator, y, denoiser: Denoiser, *, mode: str,
                        gamma: float, sigma_schedule: Sequence[float], max_iter: int,
                        tol: float, truth: Optional[FrameCube] = None, peak: float = 255.0,
                        callback: Optional[Callable[[IterReport, np.ndarray], None]] = None,
                        ) -> Tuple[np.ndarray, List[IterReport]]:
    """Plug-and-play projection loop shared by DeSCI and GAP-TV.

    Each entry of ``sigma_schedule`` is one stage of at most ``max_iter``
    iterations; a stage ends early once the relative change of the estimate
    falls below ``tol``.  Iteration 0 of the report list is the ``Phi^T y``
    initialisation.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    yv = np.asarray(getattr(y, "values", y), dtype=np.float64)
    x = op.At(yv)
    b = np.zeros_like(x)
    y_run = yv.copy()
    truth_v = None if truth is None else np.asarray(truth.values, dtype=np.float64)
    if truth is not None:
        peak = truth.peak

    def report(t, sigma, est, rel, proj_res, stage):
        q_psnr = q_ssim = None
        if truth_v is not None:
            q_psnr = _psnr(truth_v, est, peak)[1]
            q_ssim = _ssim(truth_v, est, peak)[1] if min(est.shape[1:]) >= 11 else None
        rep = IterReport(t, sigma, _norm(yv - op.A(est)), rel, q_psnr, q_ssim, proj_res, stage)
        if callback is not None:
            callback(rep, est)
        return rep

    reports = [report(0, float(sigma_schedule[0]), x, math.nan, math.nan, 0)]
    t = 0
    for stage, sigma in enumerate(sigma_schedule):
        sigma = float(sigma)
        for _ in range(max_iter):
            t += 1
            if mode == "admm":
                theta = admm_theta_update(SplitState(x=x, theta=x, b=b, gamma=gamma), op, yv)
                proj = theta
                x_new = denoiser(theta - b, sigma, t)
                if gamma > 0:
                    b = b - (theta - x_new)
            elif mode == "gap":
                proj = gap_project(x, op, yv)
                x_new = denoiser(proj, sigma, t)
            elif t == 1:
                # the raw Phi^T y start is far off the manifold; feeding its
                # residual back would corrupt the running measurement
                proj = gap_project(x, op, yv)
                x_new = denoiser(proj, sigma, t)
            else:
                proj, y_run = gap_accelerated_step(x, op, yv, y_run)
                x_new = denoiser(proj, sigma, t)
            if not np.all(np.isfinite(x_new)):
                raise DivergenceError(f"non-finite iterate at iteration {t}")
            denom = _norm(x)
            rel = _norm(x_new - x) / denom if denom > 0 else math.inf
            x = x_new
            reports.append(report(t, sigma, x, rel, _norm(yv - op.A(proj)), stage))
            log.debug("iter %d sigma %g rel %.3e psnr %s", t, sigma, rel, reports[-1].psnr)
            if rel < tol:
                break
    return x, reports


def desci_run(op: SensingOperator, y, cfg: SolverConfig, truth: Optional[FrameCube] = None,
              callback=None, denoiser: Optional[Denoiser] = None):
    """Reconstruct a frame cube from one snapshot with DeSCI.

    Returns the reconstruction and the per-iteration reports.  ``denoiser``
    replaces the WNNM group denoiser (used to test the shared projection path).
    """
    cfg.validate()
    den = WnnmDenoiser(cfg) if denoiser is None else denoiser
    x, reports = run_projection_loop(
        op, y, den, mode=cfg.mode, gamma=cfg.gamma, sigma_schedule=cfg.sigma_schedule,
        max_iter=cfg.max_iter, tol=cfg.tol, truth=truth, callback=callback)
    peak = truth.peak if truth is not None else 255.0
    return FrameCube(x, peak=peak), reports


def write_telemetry_csv(path, reports: Sequence[IterReport]) -> None:
    """Rows of (iteration, sigma, residual, rel_change[, psnr, ssim])."""
    with_quality = any(r.psnr is not None for r in reports)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        head = ["iteration", "sigma", "residual", "rel_change"]
        if with_quality:
            head += ["psnr", "ssim"]
        w.writerow(head)
        for r in reports:
            row = [r.iteration, repr(r.sigma_n), repr(r.residual), repr(r.rel_change)]
            if with_quality:
                row += [repr(r.psnr), "" if r.ssim is None else repr(r.ssim)]
            w.writerow(row)

"""Weighted nuclear norm shrinkage of patch-group matrices.

Every function accepts a single ``(d, M)`` matrix or a stack ``(..., d, M)``
so that the solver can push all groups of one iteration through a single
batched SVD.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "WnnmParams",
    "estimate_sigmas",
    "compute_weights",
    "wnnm_shrink",
    "denoise_group",
    "weighted_nuclear_objective",
]

EPS = 1e-16


@dataclass(frozen=True)
class WnnmParams:
    sigma_n: float
    c: float = 2.8
    eps: float = EPS

    def __post_init__(self):
        if self.c < 0 or self.eps <= 0 or self.sigma_n < 0:
            raise ValueError(f"invalid WNNM parameters {self}")

    @property
    def lambda_over_gamma(self) -> float:
        return self.sigma_n ** 2


def estimate_sigmas(R: np.ndarray, M: int, sigma_n: float, s: np.ndarray = None) -> np.ndarray:
    """Noise-corrected singular values sqrt(max(s_j(R)^2 - M sigma_n^2, 0)).

    Pass ``s`` when the singular values of ``R`` are already known.
    """
    if s is None:
        s = np.linalg.svd(R, compute_uv=False)
    return np.sqrt(np.maximum(s ** 2 - M * sigma_n ** 2, 0.0))


def compute_weights(sigma_hat: np.ndarray, M: int, c: float, eps: float = EPS) -> np.ndarray:
    return c * np.sqrt(M) / (sigma_hat + eps)


def _shrink_svd(U, s, Vt, w):
    return (U * np.maximum(s - w, 0.0)[..., None, :]) @ Vt


def wnnm_shrink(R: np.ndarray, w: np.ndarray) -> np.ndarray:
    """U max(S - w, 0) V^T; ``w`` must be non-negative and non-descending."""
    if not np.all(np.isfinite(R)):
        raise np.linalg.LinAlgError("SVD of a non-finite matrix")
    U, s, Vt = np.linalg.svd(R, full_matrices=False)
    return _shrink_svd(U, s, Vt, w)


def denoise_group(R: np.ndarray, params: WnnmParams) -> np.ndarray:
    """Solve ``min_Z 0.5|R - Z|_F^2 + sigma_n^2 |Z|_{w,*}`` in closed form.

    The effective threshold on singular value j is
    ``sigma_n^2 * c sqrt(M) / (sigma_hat_j + eps)``.
    """
    R = np.asarray(R, dtype=np.float64)
    if not np.all(np.isfinite(R)):
        raise np.linalg.LinAlgError("SVD of a non-finite matrix")
    M = R.shape[-1]
    U, s, Vt = np.linalg.svd(R, full_matrices=False)
    sigma_hat = estimate_sigmas(R, M, params.sigma_n, s=s)
    w = params.lambda_over_gamma * compute_weights(sigma_hat, M, params.c, params.eps)
    return _shrink_svd(U, s, Vt, w)


def weighted_nuclear_objective(R: np.ndarray, Z: np.ndarray, w: np.ndarray) -> float:
    """0.5 |R - Z|_F^2 + sum_j w_j s_j(Z), singular values in descending order."""
    s = np.linalg.svd(Z, compute_uv=False)
    return 0.5 * float(np.sum((R - Z) ** 2)) + float(np.sum(w[: s.size] * s))

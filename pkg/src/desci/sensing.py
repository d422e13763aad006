"""Snapshot sensing operator and mask generators.

The operator never builds the ``n x nB`` matrix: forward is a masked sum over
frames and the adjoint replicates the snapshot through each mask.  Because
each mask block is diagonal, the Gram matrix of the rows is diagonal too and
is stored as ``psi``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .data import FrameCube, MaskCube, Measurement

__all__ = [
    "SensingOperator",
    "forward",
    "adjoint",
    "psi_diag",
    "noise_sigma_for_snr",
    "measurement_snr",
    "gen_shifting_binary_mask",
    "gen_spectral_shift_masks",
]


def psi_diag(masks) -> np.ndarray:
    """Diagonal of Phi Phi^T as an ``(nx, ny)`` array: sum_k c_k**2 per pixel.

    Identical to the plain per-pixel sum for binary codes.
    """
    c = masks.values if isinstance(masks, MaskCube) else np.asarray(masks, dtype=float)
    psi = np.sum(np.square(c, dtype=np.float64), axis=0)
    if np.any(psi <= 0):
        raise ValueError("psi has zero entries: some pixel is never modulated")
    return psi


@dataclass(frozen=True)
class SensingOperator:
    masks: MaskCube
    noise_sigma: Optional[float] = None

    def __post_init__(self):
        psi = psi_diag(self.masks)
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)
        # float64 working copy; MaskCube may carry float32 from disk
        phi = self.masks.values.astype(np.float64)
        phi.setflags(write=False)
        object.__setattr__(self, "_phi", phi)

    @property
    def shape(self) -> tuple:
        return self.masks.shape

    def A(self, x: np.ndarray) -> np.ndarray:
        """Forward on a raw ``(B, nx, ny)`` array."""
        if x.shape != self._phi.shape:
            raise ValueError(f"cube shape {x.shape} does not match masks {self._phi.shape}")
        return np.einsum("kij,kij->ij", x, self._phi)

    def At(self, y: np.ndarray) -> np.ndarray:
        """Adjoint on a raw ``(nx, ny)`` array."""
        if y.shape != self._phi.shape[1:]:
            raise ValueError(f"snapshot shape {y.shape} does not match masks {self._phi.shape[1:]}")
        return self._phi * y[None]


def forward(op: SensingOperator, cube: FrameCube,
            rng: Optional[np.random.Generator] = None) -> Measurement:
    """Coded snapshot of ``cube``; adds N(0, op.noise_sigma^2) when a sigma is set."""
    y = op.A(np.asarray(cube.values, dtype=np.float64))
    if op.noise_sigma:
        rng = np.random.default_rng() if rng is None else rng
        y = y + rng.normal(0.0, op.noise_sigma, size=y.shape)
    return Measurement(y, noise_sigma_hint=op.noise_sigma)


def adjoint(op: SensingOperator, meas: Measurement) -> FrameCube:
    return FrameCube(op.At(np.asarray(meas.values, dtype=np.float64)))


def noise_sigma_for_snr(clean: np.ndarray, snr_db: float) -> float:
    """Gaussian std giving ``10 log10(|Phi x|^2 / |g|^2) = snr_db`` in expectation."""
    power = float(np.mean(np.square(clean)))
    return float(np.sqrt(power / 10.0 ** (snr_db / 10.0)))


def measurement_snr(clean: np.ndarray, noise: np.ndarray) -> float:
    return float(10.0 * np.log10(np.sum(np.square(clean)) / np.sum(np.square(noise))))


def _shifted_stack(base, B, step):
    di, dj = step
    return np.stack([np.roll(base, (k * di, k * dj), axis=(0, 1)) for k in range(B)])


def _covered_shift_stack(nx, ny, B, density, seed, step):
    """Shifted Bernoulli stack in which every pixel is open in some frame.

    A pixel left dark in all B frames is repaired by opening the base-pattern
    element that lands on it in a randomly chosen frame; the shift structure
    is preserved exactly.
    """
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    base = (rng.random((nx, ny)) < density).astype(np.float64)
    stack = _shifted_stack(base, B, step)
    dark = np.argwhere(stack.sum(axis=0) == 0)
    if len(dark):
        k = rng.integers(0, B, size=len(dark))
        base[(dark[:, 0] - k * step[0]) % nx, (dark[:, 1] - k * step[1]) % ny] = 1.0
        stack = _shifted_stack(base, B, step)
    return MaskCube(stack)


def gen_shifting_binary_mask(nx: int, ny: int, B: int, density: float = 0.5,
                             seed: int = 0, shift: Tuple[int, int] = (1, 0)) -> MaskCube:
    """Bernoulli(density) pattern cyclically shifted by ``k * shift`` in frame k."""
    return _covered_shift_stack(nx, ny, B, density, seed, tuple(shift))


def gen_spectral_shift_masks(nx: int, ny: int, B: int, density: float = 0.5,
                             seed: int = 0,
                             dispersion_step: Tuple[int, int] = (0, 1)) -> MaskCube:
    """One coded aperture seen through a disperser: band b is shifted b steps."""
    return _covered_shift_stack(nx, ny, B, density, seed, tuple(dispersion_step))

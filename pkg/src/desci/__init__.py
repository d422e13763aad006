"""Snapshot compressive imaging simulation and DeSCI reconstruction."""
from .data import FrameCube, MaskCube, Measurement, devectorize, load_cube, save_cube, vectorize
from .metrics import psnr, spectral_correlation, ssim
from .sensing import (SensingOperator, adjoint, forward, gen_shifting_binary_mask,
                      gen_spectral_shift_masks, psi_diag)
from .solver import SolverConfig, config_for_snr, desci_run, gamma_for_snr, params_for_sigma
from .tv import TvConfig, gaptv_run, tv_denoise

__version__ = "0.1.0"

"""
The snapshot forward model
==========================

Eight frames are each multiplied by a binary code and summed into a single
2-D snapshot.  Because every frame is coded pixel by pixel, the sensing
matrix is a row of diagonal blocks and ``Phi Phi^T`` is diagonal.  The
reconstruction routines rely on that structure.
"""
import numpy as np

from desci import SensingOperator, adjoint, forward, gen_shifting_binary_mask, psi_diag
from desci.scenes import moving_square

# %%
# A small scene: a bright square drifting diagonally over a shaded background.
truth = moving_square(32, 32, 8)
print("scene", truth.shape, "range", truth.values.min(), truth.values.max())

# %%
# One random binary pattern, shifted down by a row per frame.
masks = gen_shifting_binary_mask(32, 32, 8, density=0.5, seed=0, shift=(1, 0))
print("mask density per frame", masks.values.mean(axis=(1, 2)).round(3))

# %%
# The snapshot.  Each pixel sums the coded intensities of the eight frames.
op = SensingOperator(masks)
y = forward(op, truth)
print("snapshot", y.values.shape, "mean", y.values.mean().round(2))

# %%
# The diagonal of Phi Phi^T is just the per-pixel count of open codes.
psi = psi_diag(masks)
print("open codes per pixel: min", psi.min(), "max", psi.max())

# Build the dense matrix once to see that the off-diagonal part is zero.
phi = np.hstack([np.diag(m.ravel()) for m in masks.values])
gram = phi @ phi.T
print("largest off-diagonal entry:", np.abs(gram - np.diag(np.diag(gram))).max())
print("diagonal matches psi:", np.array_equal(np.diag(gram), psi.ravel()))

# %%
# The adjoint spreads the snapshot back over the frames, masked.  It is the
# starting point of every reconstruction.
x0 = adjoint(op, y)
print("Phi^T y shape", x0.shape)

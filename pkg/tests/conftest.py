import numpy as np
import pytest

from desci.sensing import SensingOperator


def dense_phi(masks: np.ndarray) -> np.ndarray:
    """Explicit n x nB sensing matrix [D_1, ..., D_B] with D_k = diag(vec(C_k))."""
    return np.hstack([np.diag(m.ravel()) for m in np.asarray(masks, dtype=float)])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_operator(rng, nx, ny, B, binary=True):
    if binary:
        masks = (rng.random((B, nx, ny)) < 0.5).astype(float)
        masks[0][masks.sum(axis=0) == 0] = 1.0
    else:
        masks = rng.random((B, nx, ny)) + 0.05
    from desci.data import MaskCube
    return SensingOperator(MaskCube(masks))

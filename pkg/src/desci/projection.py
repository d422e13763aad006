"""Data-fidelity half steps for ADMM and GAP.

All updates are elementwise thanks to the diagonal ``psi``; arrays keep the
cube layout ``(B, nx, ny)`` and snapshots ``(nx, ny)``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .sensing import SensingOperator

__all__ = [
    "SplitState",
    "admm_theta_update",
    "admm_dual_update",
    "gap_project",
    "gap_accelerated_step",
]


@dataclass(frozen=True)
class SplitState:
    x: np.ndarray
    theta: np.ndarray
    b: np.ndarray
    y_running: Optional[np.ndarray] = None
    gamma: float = 0.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if not (self.x.shape == self.theta.shape == self.b.shape):
            raise ValueError("x, theta and b must share one shape")

    def q(self) -> np.ndarray:
        return self.theta - self.b

    def evolve(self, **changes) -> "SplitState":
        return replace(self, **changes)


def _as_array(y) -> np.ndarray:
    return np.asarray(getattr(y, "values", y), dtype=np.float64)


def admm_theta_update(state: SplitState, op: SensingOperator, y) -> np.ndarray:
    """Closed-form minimizer of ``0.5|y - Phi t|^2 + gamma/2 |t - x - b|^2``.

    theta = (x + b) + Phi^T [(y - Phi(x + b)) / (gamma + psi)]

    ``gamma = 0`` is accepted and gives the Euclidean projection of ``x + b``
    onto ``{t : Phi t = y}``.
    """
    if state.gamma < 0:
        raise ValueError("gamma must be non-negative")
    v = state.x + state.b
    residual = _as_array(y) - op.A(v)
    return v + op.At(residual / (state.gamma + op.psi))


def admm_dual_update(state: SplitState) -> np.ndarray:
    return state.b - (state.theta - state.x)


def gap_project(theta_prev: np.ndarray, op: SensingOperator, y) -> np.ndarray:
    """Nearest point to ``theta_prev`` on the manifold ``Phi x = y``."""
    return theta_prev + op.At((_as_array(y) - op.A(theta_prev)) / op.psi)


def gap_accelerated_step(theta_prev: np.ndarray, op: SensingOperator, y,
                         y_running: np.ndarray):
    """Project onto the running manifold, then feed back the measurement error.

    Returns ``(x, y_running')`` with ``x`` on ``Phi x = y_running`` and
    ``y_running' = y_running + (y - Phi theta_prev)``.
    """
    fit = op.A(theta_prev)
    x = theta_prev + op.At((y_running - fit) / op.psi)
    return x, y_running + (_as_array(y) - fit)

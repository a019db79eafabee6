"""Shared interface for the benchmark systems.

Each model exposes prior sampling, a noiseless forward map, observation
sampling, vectorized log-likelihoods, and (for scalar-time designs) the
derivative of the conditional log-likelihood in the design. The design
machinery only touches this surface, so models stay independently testable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np


@dataclass(frozen=True)
class InputScaler:
    """Fixed affine standardization ``(x - shift) / scale`` applied elementwise."""

    shift: np.ndarray
    scale: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.shift) / self.scale


class Model(Protocol):
    name: str
    theta_dim: int
    y_dim: int
    xi_dim: int
    family: str  # "lognormal" | "normal"
    design_grid: list
    design_T: float
    xi_bounds: tuple

    def sample_prior(self, gen: np.random.Generator, n: int) -> np.ndarray: ...

    def mean_response(self, xi, thetas: np.ndarray) -> np.ndarray: ...

    def sample_obs(self, gen: np.random.Generator, xi, theta: np.ndarray) -> np.ndarray: ...

    def loglik(self, y: np.ndarray, thetas: np.ndarray, xi) -> np.ndarray: ...

    def loglik_grad_theta(self, y: np.ndarray, thetas: np.ndarray, xi) -> np.ndarray: ...

    def score_dxi(self, y: np.ndarray, theta: np.ndarray, xi: float) -> float: ...

    def xi_scaler(self) -> InputScaler: ...

    def y_scaler(self) -> InputScaler: ...

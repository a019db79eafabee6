"""Linear-Gaussian toy systems with closed-form evidence and posterior.

These are oracle models: the expected information gain, marginal likelihood,
and exact posterior are analytic, so Monte Carlo estimators and the amortized
posterior can be checked against ground truth. The two-parameter variant also
hosts the synthetic projector instances used by the null-space checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..probcore import DiagNormal, gaussian_logpdf
from .base import InputScaler


@dataclass
class LinearGaussianModel:
    """Scalar design, theta in R^d: ``y = xi * (a . theta) + noise``.

    With ``d = 1`` and ``a = (1,)`` this is the classical toy whose information
    gain is ``0.5 * log(1 + xi^2 sigma_theta^2 / sigma_n^2)``.
    """

    weights: np.ndarray = field(default_factory=lambda: np.array([1.0]))
    sigma_theta: float = 1.0
    sigma_n: float = 1.0
    design_T: float = 4.0

    name = "toy"
    y_dim = 1
    xi_dim = 1
    family = "normal"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.theta_dim = self.weights.size
        self.prior = DiagNormal(np.zeros(self.theta_dim), np.full(self.theta_dim, self.sigma_theta))
        self.design_grid = [float(x) for x in np.linspace(0.0, self.design_T, 9)]
        self.xi_bounds = (0.0, self.design_T)

    def sample_prior(self, gen: np.random.Generator, n: int) -> np.ndarray:
        return self.prior.sample(gen, n)

    def mean_response(self, xi, thetas: np.ndarray) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return (float(xi) * (thetas @ self.weights))[:, None]

    def sample_obs(self, gen: np.random.Generator, xi, theta: np.ndarray) -> np.ndarray:
        m = self.mean_response(xi, theta[None, :])[0]
        return m + self.sigma_n * gen.standard_normal(1)

    def loglik_from_response(self, y: np.ndarray, response: np.ndarray) -> np.ndarray:
        return gaussian_logpdf(
            np.asarray(y, dtype=float), response, np.array([self.sigma_n])
        )

    def loglik(self, y: np.ndarray, thetas: np.ndarray, xi) -> np.ndarray:
        return self.loglik_from_response(y, self.mean_response(xi, thetas))

    def loglik_grad_theta(self, y: np.ndarray, thetas: np.ndarray, xi) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        m = self.mean_response(xi, thetas)[:, 0]
        resid = (float(np.asarray(y).reshape(-1)[0]) - m) / self.sigma_n**2
        return resid[:, None] * (float(xi) * self.weights)[None, :]

    def score_dxi_batch(self, ys: np.ndarray, thetas: np.ndarray, xi: float, h_fd=None) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        proj = thetas @ self.weights
        m = float(xi) * proj
        ys = np.atleast_2d(np.asarray(ys, dtype=float))[:, 0]
        return (ys - m) / self.sigma_n**2 * proj

    def score_dxi(self, y: np.ndarray, theta: np.ndarray, xi: float) -> float:
        return float(self.score_dxi_batch(np.asarray(y).reshape(1, 1), theta[None, :], xi)[0])

    # -- closed forms ------------------------------------------------------

    def eig_exact(self, xi: float) -> float:
        gain = float(xi) ** 2 * self.sigma_theta**2 * float(self.weights @ self.weights)
        return 0.5 * math.log(1.0 + gain / self.sigma_n**2)

    def log_evidence(self, y: np.ndarray, xi: float) -> float:
        var = self.sigma_n**2 + float(xi) ** 2 * self.sigma_theta**2 * float(
            self.weights @ self.weights
        )
        r = float(np.asarray(y).reshape(-1)[0])
        return -0.5 * math.log(2.0 * math.pi * var) - 0.5 * r * r / var

    def posterior_exact(self, y: np.ndarray, xi: float) -> DiagNormal:
        """Exact Gaussian posterior (diagonal only when one coordinate loads)."""
        if np.count_nonzero(self.weights) != 1:
            raise ValueError("diagonal posterior requires a single loaded coordinate")
        k = int(np.flatnonzero(self.weights)[0])
        a = float(self.weights[k]) * float(xi)
        prec = 1.0 / self.sigma_theta**2 + a**2 / self.sigma_n**2
        mean = (a * float(np.asarray(y).reshape(-1)[0]) / self.sigma_n**2) / prec
        mu = np.zeros(self.theta_dim)
        sig = np.full(self.theta_dim, self.sigma_theta)
        mu[k] = mean
        sig[k] = math.sqrt(1.0 / prec)
        return DiagNormal(mu, sig)

    def xi_scaler(self) -> InputScaler:
        return InputScaler(shift=np.zeros(1), scale=np.array([max(self.design_T, 1.0)]))

    def y_scaler(self) -> InputScaler:
        spread = math.sqrt(
            self.sigma_n**2
            + self.design_T**2 * self.sigma_theta**2 * float(self.weights @ self.weights)
        )
        return InputScaler(shift=np.zeros(1), scale=np.array([spread]))

"""Elementary densities, reparameterized sampling, and importance weighting.

All functions are pure and operate on float64 numpy arrays. Log-domain
quantities are combined with max-subtraction so that badly mismatched
proposals cannot underflow to zero in linear space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateWeights, InvalidArgument, NonFiniteWeight

_LOG_2PI = math.log(2.0 * math.pi)

# Exact log-factorials for small counts; lgamma is used beyond the table.
_LOG_FACTORIAL = [0.0]
for _k in range(1, 21):
    _LOG_FACTORIAL.append(_LOG_FACTORIAL[-1] + math.log(_k))


def log_factorial(k: int) -> float:
    if k < 0:
        raise InvalidArgument(f"k must be nonnegative, got {k}")
    if k <= 20:
        return _LOG_FACTORIAL[k]
    return math.lgamma(k + 1.0)


@dataclass(frozen=True)
class DiagNormal:
    """Independent Gaussian coordinates with means ``mu`` and stds ``sigma``."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        if mu.shape != sigma.shape:
            raise InvalidArgument("mu and sigma must have matching shapes")
        if np.any(sigma <= 0):
            raise InvalidArgument("sigma must be strictly positive")

    @property
    def dim(self) -> int:
        return self.mu.size

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        eps = gen.standard_normal((n, self.dim))
        return self.mu + self.sigma * eps

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        z = (x - self.mu) / self.sigma
        per_coord = -0.5 * z * z - np.log(self.sigma) - 0.5 * _LOG_2PI
        return per_coord.sum(axis=-1)


@dataclass(frozen=True)
class DiagLogNormal:
    """Componentwise LogNormal: ``log theta ~ N(mu, diag(sigma^2))``."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        if mu.shape != sigma.shape:
            raise InvalidArgument("mu and sigma must have matching shapes")
        if np.any(sigma <= 0):
            raise InvalidArgument("sigma must be strictly positive")

    @property
    def dim(self) -> int:
        return self.mu.size

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        eps = gen.standard_normal((n, self.dim))
        return np.exp(self.mu + self.sigma * eps)

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise InvalidArgument("LogNormal support is strictly positive")
        lx = np.log(x)
        z = (lx - self.mu) / self.sigma
        per_coord = -0.5 * z * z - np.log(self.sigma) - 0.5 * _LOG_2PI - lx
        return per_coord.sum(axis=-1)


def reparam_sample(family: DiagNormal | DiagLogNormal, eps: np.ndarray) -> np.ndarray:
    """Deterministic sample path ``eps -> theta`` for the given family."""
    eps = np.asarray(eps, dtype=float)
    if eps.shape[-1] != family.dim:
        raise InvalidArgument(
            f"eps has trailing dim {eps.shape[-1]}, family has dim {family.dim}"
        )
    loc = family.mu + family.sigma * eps
    if isinstance(family, DiagLogNormal):
        return np.exp(loc)
    return loc


def logsumexp(a: np.ndarray, axis=None) -> np.ndarray:
    """Overflow-safe log-sum-exp; tolerates -inf entries."""
    a = np.asarray(a, dtype=float)
    amax = np.max(a, axis=axis, keepdims=True)
    amax = np.where(np.isfinite(amax), amax, 0.0)
    out = np.log(np.sum(np.exp(a - amax), axis=axis, keepdims=True)) + amax
    if axis is None:
        return float(out)
    return np.squeeze(out, axis=axis)


def normalize_weights(log_w: np.ndarray) -> np.ndarray:
    """Self-normalize log-weights: ``w_i ~ exp(log_w_i)``, summing to one.

    Computed with max-subtraction; invariant to adding a constant to all
    entries. Inputs must be finite (use :func:`normalize_log_weights_lenient`
    where zero-likelihood samples are legitimate).
    """
    log_w = np.asarray(log_w, dtype=float)
    if log_w.size == 0:
        raise InvalidArgument("log_w must be nonempty")
    if not np.all(np.isfinite(log_w)):
        raise NonFiniteWeight("log_w contains non-finite entries")
    shifted = log_w - log_w.max()
    w = np.exp(shifted)
    return w / math.fsum(w)


def normalize_log_weights_lenient(log_w: np.ndarray) -> np.ndarray:
    """Like :func:`normalize_weights` but maps ``-inf`` entries to weight zero.

    NaN or +inf still raise; if every entry is ``-inf`` the weight vector is
    degenerate and :class:`DegenerateWeights` is raised.
    """
    log_w = np.asarray(log_w, dtype=float)
    if log_w.size == 0:
        raise InvalidArgument("log_w must be nonempty")
    if np.any(np.isnan(log_w)) or np.any(log_w == np.inf):
        raise NonFiniteWeight("log_w contains NaN or +inf entries")
    m = log_w.max()
    if m == -np.inf:
        raise DegenerateWeights("all log-weights are -inf")
    w = np.exp(log_w - m)
    return w / math.fsum(w)


def effective_sample_size(w_tilde: np.ndarray) -> float:
    """Kish effective sample size ``1 / sum(w_i^2)`` of normalized weights."""
    w_tilde = np.asarray(w_tilde, dtype=float)
    return 1.0 / math.fsum(w_tilde * w_tilde)


def poisson_logpmf(k, lam) -> float | np.ndarray:
    """Poisson log-probability ``k ln(lam) - lam - ln k!``.

    ``lam == 0`` is treated as a point mass at zero. Vectorized over both
    arguments; counts are expected to be small so log-factorials come from an
    exact table below 21 and lgamma above.
    """
    k_arr = np.asarray(k)
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr < 0):
        raise InvalidArgument("lambda must be nonnegative")
    if np.any(k_arr < 0) or not np.issubdtype(k_arr.dtype, np.integer):
        raise InvalidArgument("k must be a nonnegative integer")
    if k_arr.ndim == 0 and lam_arr.ndim == 0:
        lam_f = float(lam_arr)
        k_i = int(k_arr)
        if lam_f == 0.0:
            return 0.0 if k_i == 0 else -np.inf
        return k_i * math.log(lam_f) - lam_f - log_factorial(k_i)
    k_b, lam_b = np.broadcast_arrays(k_arr, lam_arr)
    lfact = np.vectorize(log_factorial, otypes=[float])(k_b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = k_b * np.log(lam_b) - lam_b - lfact
    zero_rate = lam_b == 0.0
    if np.any(zero_rate):
        out = np.where(zero_rate, np.where(k_b == 0, 0.0, -np.inf), out)
    return out


def gaussian_logpdf(x, mu, sigma) -> float | np.ndarray:
    """Sum of independent 1-D Gaussian log-densities along the last axis."""
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise InvalidArgument("sigma must be strictly positive")
    z = (x - mu) / sigma
    per_coord = -0.5 * z * z - np.log(sigma) - 0.5 * _LOG_2PI
    out = per_coord.sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class WeightedPosterior:
    """Reparameterized posterior samples with self-normalized weights.

    ``dtheta_dxi`` holds the pathwise Jacobian of each sample with respect to
    a scalar design (``None`` when the design derivative was not requested).
    Weights carry no design derivative: they are frozen in the backward pass.
    """

    thetas: np.ndarray  # (N, d)
    eps: np.ndarray  # (N, d)
    log_w: np.ndarray  # (N,)
    w_tilde: np.ndarray  # (N,)
    dtheta_dxi: np.ndarray | None = None  # (N, d)
    ess: float = field(init=False)

    def __post_init__(self):
        self.ess = effective_sample_size(self.w_tilde)

    @property
    def n(self) -> int:
        return self.thetas.shape[0]

    def mean(self) -> np.ndarray:
        return self.w_tilde @ self.thetas

    def validate(self, atol: float = 1e-12):
        assert abs(math.fsum(self.w_tilde) - 1.0) <= atol
        assert np.all(self.w_tilde >= 0)

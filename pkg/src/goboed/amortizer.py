"""Amortized variational posterior: bounded MLP encoder trained by ELBO ascent.

One network per model maps a standardized (design, observation) pair to the
parameters of a diagonal posterior in log space. Both heads are bounded
elementwise: the mean stays within ``delta_max`` of the prior log-mean through
a tanh, and the scale is squashed into ``(sigma_min, sigma_max)`` through a
sigmoid, so the reparameterization path can never degenerate during training.

Gradients with respect to the network weights are pathwise: the per-sample
integrand has closed-form derivatives in (mu, sigma) given the model's
likelihood gradient, and those seed one reverse pass through the encoder tape.
After training the network is frozen; design optimization only queries it for
samples, importance weights, and the sample Jacobians d theta / d xi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import (
    InvalidArgument,
    NonFiniteElbo,
    NonFiniteEncoder,
    TrainingDiverged,
)
from .probcore import (
    DiagLogNormal,
    DiagNormal,
    WeightedPosterior,
    normalize_log_weights_lenient,
)
from .rng import RandomStream

HIDDEN = 64
DELTA_MAX = 1.0
SIGMA_MIN = 0.01
SIGMA_MAX = 1.0

_LOG_2PI = math.log(2.0 * math.pi)
WEIGHT_KEYS = ("w1", "b1", "w2", "b2", "w_mu", "b_mu", "w_sig", "b_sig")


@dataclass
class VariationalParams:
    mu: np.ndarray
    sigma: np.ndarray


@dataclass
class EncoderWeights:
    model_name: str
    family: str  # "lognormal" | "normal"
    in_dim: int
    hidden: int
    out_dim: int
    weights: dict[str, np.ndarray]
    mu0: np.ndarray
    delta_max: float
    sigma_min: float
    sigma_max: float
    xi_shift: np.ndarray
    xi_scale: np.ndarray
    y_shift: np.ndarray
    y_scale: np.ndarray

    def copy(self) -> "EncoderWeights":
        out = EncoderWeights(**{**self.__dict__})
        out.weights = {k: v.copy() for k, v in self.weights.items()}
        return out

    def standardize(self, xi, y) -> np.ndarray:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return np.concatenate(
            [(xi - self.xi_shift) / self.xi_scale, (y - self.y_shift) / self.y_scale]
        )


@dataclass
class TrainConfig:
    learning_rate: float
    epochs: int
    outer_batch: int
    inner_samples: int
    seed: int = 0

    def __post_init__(self):
        if min(self.learning_rate, self.epochs, self.outer_batch, self.inner_samples) < 0:
            raise InvalidArgument("train configuration values must be positive")


DEFAULT_TRAIN = {
    # paper-scale rates; desk-scale batch sizes and epochs
    "srcloc": TrainConfig(learning_rate=3e-3, epochs=400, outer_batch=128, inner_samples=8),
    "siqr": TrainConfig(learning_rate=3e-4, epochs=400, outer_batch=96, inner_samples=8),
    "pk": TrainConfig(learning_rate=1e-3, epochs=400, outer_batch=128, inner_samples=8),
    "toy": TrainConfig(learning_rate=3e-3, epochs=300, outer_batch=64, inner_samples=8),
}


def init_encoder(model, stream: RandomStream, hidden: int = HIDDEN) -> EncoderWeights:
    """Fresh encoder with scaled-normal weights and model-derived bounds."""
    gen = stream.generator()
    in_dim = model.xi_dim + model.y_dim
    d = model.theta_dim

    def glorot(n_in, n_out):
        return gen.standard_normal((n_in, n_out)) * math.sqrt(2.0 / (n_in + n_out))

    weights = {
        "w1": glorot(in_dim, hidden),
        "b1": np.zeros(hidden),
        "w2": glorot(hidden, hidden),
        "b2": np.zeros(hidden),
        "w_mu": glorot(hidden, d),
        "b_mu": np.zeros(d),
        "w_sig": glorot(hidden, d),
        "b_sig": np.zeros(d),
    }
    xi_sc = model.xi_scaler()
    y_sc = model.y_scaler()
    return EncoderWeights(
        model_name=model.name,
        family=model.family,
        in_dim=in_dim,
        hidden=hidden,
        out_dim=d,
        weights=weights,
        mu0=np.array(model.prior.mu, dtype=float),
        delta_max=DELTA_MAX,
        sigma_min=SIGMA_MIN,
        sigma_max=SIGMA_MAX,
        xi_shift=np.asarray(xi_sc.shift, dtype=float),
        xi_scale=np.asarray(xi_sc.scale, dtype=float),
        y_shift=np.asarray(y_sc.shift, dtype=float),
        y_scale=np.asarray(y_sc.scale, dtype=float),
    )


def _encode_on_tape(tape: ad.Tape, phi: EncoderWeights, x: ad.Var):
    """Bounded two-head MLP; ``x`` is a (B, in_dim) standardized input node."""
    w = {k: tape.input(k, phi.weights[k]) for k in WEIGHT_KEYS}
    h1 = tape.tanh(x @ w["w1"] + w["b1"])
    h2 = tape.tanh(h1 @ w["w2"] + w["b2"])
    mu = tape.const(phi.mu0) + phi.delta_max * tape.tanh(h2 @ w["w_mu"] + w["b_mu"])
    sigma = tape.const(phi.sigma_min) + (phi.sigma_max - phi.sigma_min) * tape.sigmoid(
        h2 @ w["w_sig"] + w["b_sig"]
    )
    return mu, sigma


def _encode_batch(phi: EncoderWeights, x_std: np.ndarray):
    tape = ad.Tape()
    x = tape.input("x", np.atleast_2d(x_std))
    mu, sigma = _encode_on_tape(tape, phi, x)
    if not (np.all(np.isfinite(mu.value)) and np.all(np.isfinite(sigma.value))):
        raise NonFiniteEncoder("encoder produced non-finite outputs")
    return tape, x, mu, sigma


def encode(phi: EncoderWeights, xi, y) -> VariationalParams:
    """Variational parameters for one (design, observation) pair."""
    _, _, mu, sigma = _encode_batch(phi, phi.standardize(xi, y)[None, :])
    return VariationalParams(mu=mu.value[0].copy(), sigma=sigma.value[0].copy())


def encode_jacobian_xi(phi: EncoderWeights, xi, y) -> tuple[VariationalParams, np.ndarray, np.ndarray]:
    """Variational parameters plus d mu / d xi and d sigma / d xi.

    Jacobians are with respect to the raw (unstandardized) design and have
    shape (out_dim, xi_dim).
    """
    tape, x, mu, sigma = _encode_batch(phi, phi.standardize(xi, y)[None, :])
    d = phi.out_dim
    n_xi = phi.xi_scale.size
    dmu = np.empty((d, n_xi))
    dsig = np.empty((d, n_xi))
    for k in range(d):
        seed = np.zeros((1, d))
        seed[0, k] = 1.0
        for out, store in ((mu, dmu), (sigma, dsig)):
            scalar = tape.sum(out * tape.const(seed))
            gx = ad.backward(tape, scalar)["x"][0]
            store[k] = gx[:n_xi] / phi.xi_scale
    params = VariationalParams(mu=mu.value[0].copy(), sigma=sigma.value[0].copy())
    return params, dmu, dsig


def _family(phi: EncoderWeights, mu: np.ndarray, sigma: np.ndarray):
    if phi.family == "lognormal":
        return DiagLogNormal(mu, sigma)
    return DiagNormal(mu, sigma)


def _integrand_terms(phi: EncoderWeights, prior, mu, sigma, eps, theta, loglik, loglik_grad):
    """Per-sample ELBO integrand and its total (mu, sigma) derivatives.

    Shapes: mu/sigma (..., d); eps/theta (..., n, d); loglik (..., n);
    loglik_grad (..., n, d). Derivatives hold the base noise fixed, which is
    exactly the pathwise estimator.
    """
    mu_e = mu[..., None, :]
    sig_e = sigma[..., None, :]
    loc = mu_e + sig_e * eps  # = log theta (lognormal) or theta (normal)
    if phi.family == "lognormal":
        dthe_dmu = theta
        dthe_dsig = theta * eps
        log_q = (-loc - np.log(sig_e) - 0.5 * _LOG_2PI - 0.5 * eps * eps).sum(axis=-1)
        dlq_dmu = np.broadcast_to(-1.0 - np.zeros_like(eps), eps.shape)
        dlq_dsig = -eps - 1.0 / sig_e
        z = (loc - prior.mu) / prior.sigma
        log_p = (-loc - np.log(prior.sigma) - 0.5 * _LOG_2PI - 0.5 * z * z).sum(axis=-1)
        dlp_dmu = -1.0 - z / prior.sigma
        dlp_dsig = eps * (-1.0 - z / prior.sigma)
    else:
        dthe_dmu = np.ones_like(theta)
        dthe_dsig = eps
        log_q = (-np.log(sig_e) - 0.5 * _LOG_2PI - 0.5 * eps * eps).sum(axis=-1)
        dlq_dmu = np.zeros_like(eps)
        dlq_dsig = np.broadcast_to(-1.0 / sig_e, eps.shape)
        z = (theta - prior.mu) / prior.sigma
        log_p = (-np.log(prior.sigma) - 0.5 * _LOG_2PI - 0.5 * z * z).sum(axis=-1)
        dlp_dmu = -z / prior.sigma
        dlp_dsig = -z / prior.sigma * eps

    value = loglik + log_p - log_q
    dmu = loglik_grad * dthe_dmu + dlp_dmu - dlq_dmu
    dsig = loglik_grad * dthe_dsig + dlp_dsig - dlq_dsig
    return value, dmu, dsig


def elbo(phi: EncoderWeights, model, xi, y, n_samples: int, stream: RandomStream):
    """Monte Carlo ELBO and its pathwise gradient in the encoder weights."""
    if n_samples < 1:
        raise InvalidArgument("n_samples must be at least 1")
    tape, _, mu_v, sig_v = _encode_batch(phi, phi.standardize(xi, y)[None, :])
    mu, sigma = mu_v.value[0], sig_v.value[0]
    gen = stream.generator()
    eps = gen.standard_normal((n_samples, phi.out_dim))
    loc = mu + sigma * eps
    theta = np.exp(loc) if phi.family == "lognormal" else loc
    ll = model.loglik(y, theta, xi)
    gll = model.loglik_grad_theta(y, theta, xi)
    value, dmu, dsig = _integrand_terms(phi, model.prior, mu, sigma, eps, theta, ll, gll)
    if not np.all(np.isfinite(value)):
        raise NonFiniteElbo("ELBO integrand is non-finite")
    seed_mu = dmu.mean(axis=0)[None, :]
    seed_sig = dsig.mean(axis=0)[None, :]
    scalar = tape.sum(mu_v * tape.const(seed_mu)) + tape.sum(sig_v * tape.const(seed_sig))
    grads = ad.backward(tape, scalar)
    return float(value.mean()), {k: grads[k] for k in WEIGHT_KEYS}


def _simulate_pairs(model, stream: RandomStream, n_pairs: int):
    """Fresh (xi, theta, y) triples with designs uniform over the grid."""
    xis, ys, gens = [], [], []
    designs = model.design_grid
    for i in range(n_pairs):
        gen = stream.child(("pair", i)).generator()
        xi = designs[int(gen.integers(0, len(designs)))]
        theta = model.sample_prior(gen, 1)[0]
        y = model.sample_obs(gen, xi, theta)
        xis.append(xi)
        ys.append(y)
        gens.append(gen)
    return xis, ys, gens


def _batch_elbo_grads(phi: EncoderWeights, model, xis, ys, eps_list):
    """Batched ELBO over pairs; returns (mean value, weight gradients)."""
    n_pairs = len(xis)
    x_std = np.stack([phi.standardize(xi, y) for xi, y in zip(xis, ys)])
    tape, _, mu_v, sig_v = _encode_batch(phi, x_std)
    mu, sigma = mu_v.value, sig_v.value

    seed_mu = np.empty_like(mu)
    seed_sig = np.empty_like(sigma)
    total = 0.0
    for b in range(n_pairs):
        eps = eps_list[b]
        loc = mu[b] + sigma[b] * eps
        theta = np.exp(loc) if phi.family == "lognormal" else loc
        ll = model.loglik(ys[b], theta, xis[b])
        gll = model.loglik_grad_theta(ys[b], theta, xis[b])
        value, dmu, dsig = _integrand_terms(
            phi, model.prior, mu[b], sigma[b], eps, theta, ll, gll
        )
        if not np.all(np.isfinite(value)):
            raise NonFiniteElbo("ELBO integrand is non-finite")
        total += float(value.mean())
        seed_mu[b] = dmu.mean(axis=0) / n_pairs
        seed_sig[b] = dsig.mean(axis=0) / n_pairs
    scalar = tape.sum(mu_v * tape.const(seed_mu)) + tape.sum(sig_v * tape.const(seed_sig))
    grads = ad.backward(tape, scalar)
    return total / n_pairs, {k: grads[k] for k in WEIGHT_KEYS}


def _batch_elbo_value(phi: EncoderWeights, model, xis, ys, eps_list) -> float:
    """Value-only ELBO with frozen base noise (held-out monitoring)."""
    x_std = np.stack([phi.standardize(xi, y) for xi, y in zip(xis, ys)])
    _, _, mu_v, sig_v = _encode_batch(phi, x_std)
    mu, sigma = mu_v.value, sig_v.value
    total = 0.0
    for b in range(len(xis)):
        eps = eps_list[b]
        loc = mu[b] + sigma[b] * eps
        theta = np.exp(loc) if phi.family == "lognormal" else loc
        ll = model.loglik(ys[b], theta, xis[b])
        value, _, _ = _integrand_terms(
            phi,
            model.prior,
            mu[b],
            sigma[b],
            eps,
            theta,
            ll,
            np.zeros_like(theta),
        )
        total += float(value.mean())
    return total / len(xis)


@dataclass
class TrainingRecord:
    epochs: list[int] = field(default_factory=list)
    train_elbo: list[float] = field(default_factory=list)
    heldout_elbo: list[float] = field(default_factory=list)


def train_amortizer(
    model,
    config: TrainConfig,
    stream: RandomStream | None = None,
    n_heldout: int = 64,
) -> tuple[EncoderWeights, TrainingRecord]:
    """Adam ascent of the batched ELBO over freshly simulated pairs.

    Deterministic given (model constants, config, stream): simulation streams
    are keyed by epoch and pair index, and updates run in a fixed order.
    """
    stream = stream if stream is not None else RandomStream(config.seed).child("train")
    phi = init_encoder(model, stream.child("init"))

    ho_xis, ho_ys, ho_gens = _simulate_pairs(model, stream.child("heldout"), n_heldout)
    ho_eps = [g.standard_normal((config.inner_samples, phi.out_dim)) for g in ho_gens]

    moment1 = {k: np.zeros_like(v) for k, v in phi.weights.items()}
    moment2 = {k: np.zeros_like(v) for k, v in phi.weights.items()}
    beta1, beta2, eps_adam = 0.9, 0.999, 1e-8
    record = TrainingRecord()

    for epoch in range(config.epochs):
        xis, ys, gens = _simulate_pairs(model, stream.child(("epoch", epoch)), config.outer_batch)
        eps_list = [g.standard_normal((config.inner_samples, phi.out_dim)) for g in gens]
        value, grads = _batch_elbo_grads(phi, model, xis, ys, eps_list)
        if not math.isfinite(value):
            raise TrainingDiverged(f"ELBO became non-finite at epoch {epoch}")
        step = epoch + 1
        for k in WEIGHT_KEYS:
            g = -grads[k]  # ascend the ELBO
            moment1[k] = beta1 * moment1[k] + (1 - beta1) * g
            moment2[k] = beta2 * moment2[k] + (1 - beta2) * g * g
            m_hat = moment1[k] / (1 - beta1**step)
            v_hat = moment2[k] / (1 - beta2**step)
            phi.weights[k] -= config.learning_rate * m_hat / (np.sqrt(v_hat) + eps_adam)
        record.epochs.append(epoch)
        record.train_elbo.append(value)
        record.heldout_elbo.append(_batch_elbo_value(phi, model, ho_xis, ho_ys, ho_eps))
    return phi, record


def posterior_with_jacobian(
    phi: EncoderWeights,
    model,
    xi,
    y,
    n: int,
    stream: RandomStream,
    want_jacobian: bool = True,
) -> WeightedPosterior:
    """Reparameterized samples, self-normalized weights, and d theta / d xi.

    Weights carry no design derivative (they are frozen in the backward
    pass); the Jacobian flows only through the encoder heads. Scalar designs
    only for the Jacobian path.
    """
    if n < 1:
        raise InvalidArgument("n must be at least 1")
    if want_jacobian:
        params, dmu, dsig = encode_jacobian_xi(phi, xi, y)
    else:
        params = encode(phi, xi, y)
    gen = stream.generator()
    eps = gen.standard_normal((n, phi.out_dim))
    loc = params.mu + params.sigma * eps
    theta = np.exp(loc) if phi.family == "lognormal" else loc

    q = _family(phi, params.mu, params.sigma)
    log_w = model.loglik(y, theta, xi) + model.prior.logpdf(theta) - q.logpdf(theta)
    w_tilde = normalize_log_weights_lenient(log_w)

    dtheta_dxi = None
    if want_jacobian:
        path = dmu[None, :, 0] + eps * dsig[None, :, 0]
        dtheta_dxi = theta * path if phi.family == "lognormal" else path
    return WeightedPosterior(
        thetas=theta, eps=eps, log_w=log_w, w_tilde=w_tilde, dtheta_dxi=dtheta_dxi
    )

"""Epidemic benchmark: four-compartment dynamics with quarantine controls.

Compartments are population fractions (susceptible, asymptomatic infected,
symptomatic infected, recovered). New infections enter the asymptomatic
compartment, symptoms develop at a fixed rate, and quarantine controls remove
infected individuals from circulation. With zero controls the total is a
linear invariant, conserved exactly by Runge-Kutta steps.

Observations at a chosen day are Poisson counts of the two infected
compartments, with the rate set to 0.95 of the scaled model prediction.

The stability of the infection subsystem is governed by a 2x2 matrix whose
largest eigenvalue has a closed form through its trace and determinant; the
decision layer constrains that eigenvalue, so the closed form and its
eigenvector-based derivative are exposed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import IntegrationError, InvalidArgument, NumericalError, ZeroRateError
from ..probcore import DiagLogNormal, poisson_logpmf
from ..rng import RandomStream
from .base import InputScaler

try:  # hot loops compile with numba when present; numpy fallback otherwise
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on minimal installs
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap(args[0]) if args and callable(args[0]) else wrap


EPS_RATE = 0.2  # symptom-development rate, per day
INIT_STATE = (0.98, 0.01, 0.01, 0.0)
N_POP = 1000.0
OBS_SCALE = 0.95
SIM_HORIZON = 100.0
DESIGN_T = 15.0  # last candidate observation day
DT_DEFAULT = 0.05
PRIOR_LOG_MEAN = (0.5, 0.8, 0.2, 0.2)  # (beta_a, beta_s, gamma_a, gamma_s)
PRIOR_LOG_STD = (0.5, 0.5, 0.3, 0.3)

_STATE_LO = -1e-6
_STATE_HI = 1.0 + 1e-6


@dataclass(frozen=True)
class SIQRParams:
    beta_a: float
    beta_s: float
    gamma_a: float
    gamma_s: float
    eps_rate: float = EPS_RATE
    s0_frac: float = INIT_STATE[0]

    def __post_init__(self):
        vals = (self.beta_a, self.beta_s, self.gamma_a, self.gamma_s, self.eps_rate)
        if any(v <= 0 for v in vals):
            raise InvalidArgument("SIQR rates must be strictly positive")
        if not (0.0 < self.s0_frac <= 1.0):
            raise InvalidArgument("s0_frac must lie in (0, 1]")

    def as_theta(self) -> np.ndarray:
        return np.array([self.beta_a, self.beta_s, self.gamma_a, self.gamma_s])


@dataclass(frozen=True)
class SIQRState:
    s: float
    x_a: float
    x_s: float
    h: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.x_a, self.x_s, self.h])


DEFAULT_INIT = SIQRState(*INIT_STATE)


def _rhs_np(state: np.ndarray, th: np.ndarray, g_a: float, g_s: float, eps_rate: float) -> np.ndarray:
    s, xa, xs = state[:, 0], state[:, 1], state[:, 2]
    ba, bs, ga, gs = th[:, 0], th[:, 1], th[:, 2], th[:, 3]
    infect = (ba * xa + bs * xs) * s
    out = np.empty_like(state)
    out[:, 0] = -infect
    out[:, 1] = infect - (eps_rate + ga + g_a) * xa
    out[:, 2] = eps_rate * xa - (gs + g_s) * xs
    out[:, 3] = ga * xa + gs * xs
    return out


def _n_steps(t_end: float, dt: float) -> int:
    return max(1, int(math.ceil(t_end / dt - 1e-12)))


@dataclass
class Trajectory:
    """Dense Runge-Kutta output with cubic Hermite interpolation between knots."""

    times: np.ndarray  # (K,)
    states: np.ndarray  # (K, n, 4)
    derivs: np.ndarray  # (K, n, 4)
    sens: np.ndarray | None = None  # (K, n, 4, 4)
    sens_derivs: np.ndarray | None = None

    def _bracket(self, t: float) -> tuple[int, float, float]:
        times = self.times
        if t < times[0] - 1e-9 or t > times[-1] + 1e-9:
            raise InvalidArgument(f"t={t} outside trajectory range [{times[0]}, {times[-1]}]")
        t = min(max(t, times[0]), times[-1])
        k = int(np.searchsorted(times, t, side="right") - 1)
        k = min(k, len(times) - 2)
        h = times[k + 1] - times[k]
        return k, (t - times[k]) / h, h

    @staticmethod
    def _hermite(tau: float, h: float, y0, d0, y1, d1):
        t2, t3 = tau * tau, tau * tau * tau
        return (
            (2 * t3 - 3 * t2 + 1) * y0
            + (t3 - 2 * t2 + tau) * h * d0
            + (-2 * t3 + 3 * t2) * y1
            + (t3 - t2) * h * d1
        )

    def eval(self, t: float) -> np.ndarray:
        k, tau, h = self._bracket(t)
        return self._hermite(tau, h, self.states[k], self.derivs[k], self.states[k + 1], self.derivs[k + 1])

    def eval_sens(self, t: float) -> np.ndarray:
        if self.sens is None:
            raise InvalidArgument("trajectory was integrated without sensitivities")
        k, tau, h = self._bracket(t)
        return self._hermite(tau, h, self.sens[k], self.sens_derivs[k], self.sens[k + 1], self.sens_derivs[k + 1])


def integrate_batch(
    thetas: np.ndarray,
    controls: tuple[float, float] = (0.0, 0.0),
    init: SIQRState = DEFAULT_INIT,
    t_end: float = SIM_HORIZON,
    dt: float = DT_DEFAULT,
    eps_rate: float = EPS_RATE,
) -> Trajectory:
    """Classical RK4 over a batch of parameter rows, storing every knot."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    g_a, g_s = controls
    if t_end <= 0 or dt <= 0:
        raise InvalidArgument("t_end and dt must be positive")
    if not (0.0 <= g_a < 1.0 and 0.0 <= g_s < 1.0):
        raise InvalidArgument("controls must lie in [0, 1)")
    n_steps = _n_steps(t_end, dt)
    h = t_end / n_steps
    n = thetas.shape[0]
    times = np.linspace(0.0, t_end, n_steps + 1)
    states = np.empty((n_steps + 1, n, 4))
    derivs = np.empty_like(states)
    x = np.broadcast_to(init.as_array(), (n, 4)).copy()
    states[0] = x
    derivs[0] = _rhs_np(x, thetas, g_a, g_s, eps_rate)
    for k in range(n_steps):
        k1 = derivs[k]
        k2 = _rhs_np(x + 0.5 * h * k1, thetas, g_a, g_s, eps_rate)
        k3 = _rhs_np(x + 0.5 * h * k2, thetas, g_a, g_s, eps_rate)
        k4 = _rhs_np(x + h * k3, thetas, g_a, g_s, eps_rate)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.any(x < _STATE_LO) or np.any(x > _STATE_HI):
            raise IntegrationError(f"state left [0, 1] at t={times[k + 1]:.4f}")
        states[k + 1] = x
        derivs[k + 1] = _rhs_np(x, thetas, g_a, g_s, eps_rate)
    return Trajectory(times, states, derivs)


def siqr_integrate(
    params: SIQRParams,
    controls: tuple[float, float] = (0.0, 0.0),
    init: SIQRState = DEFAULT_INIT,
    t_end: float = SIM_HORIZON,
    dt: float = DT_DEFAULT,
) -> Trajectory:
    """Dense solution for a single parameter set."""
    return integrate_batch(
        params.as_theta()[None, :], controls, init, t_end, dt, eps_rate=params.eps_rate
    )


@njit(cache=True)
def _terminal_nb(th, g_a, g_s, eps_rate, init, t_end, dt):  # pragma: no cover - compiled
    n = th.shape[0]
    out = np.empty((n, 4))
    n_steps = max(1, int(np.ceil(t_end / dt - 1e-12)))
    h = t_end / n_steps
    for i in range(n):
        ba, bs, ga, gs = th[i, 0], th[i, 1], th[i, 2], th[i, 3]
        ca = eps_rate + ga + g_a
        cs = gs + g_s
        s, xa, xs, hh = init[0], init[1], init[2], init[3]
        for _ in range(n_steps):
            i1 = (ba * xa + bs * xs) * s
            k1s, k1a = -i1, i1 - ca * xa
            k1x, k1h = eps_rate * xa - cs * xs, ga * xa + gs * xs
            s2, a2 = s + 0.5 * h * k1s, xa + 0.5 * h * k1a
            x2, h2 = xs + 0.5 * h * k1x, hh + 0.5 * h * k1h
            i2 = (ba * a2 + bs * x2) * s2
            k2s, k2a = -i2, i2 - ca * a2
            k2x, k2h = eps_rate * a2 - cs * x2, ga * a2 + gs * x2
            s3, a3 = s + 0.5 * h * k2s, xa + 0.5 * h * k2a
            x3, h3 = xs + 0.5 * h * k2x, hh + 0.5 * h * k2h
            i3 = (ba * a3 + bs * x3) * s3
            k3s, k3a = -i3, i3 - ca * a3
            k3x, k3h = eps_rate * a3 - cs * x3, ga * a3 + gs * x3
            s4, a4 = s + h * k3s, xa + h * k3a
            x4, h4 = xs + h * k3x, hh + h * k3h
            i4 = (ba * a4 + bs * x4) * s4
            k4s, k4a = -i4, i4 - ca * a4
            k4x, k4h = eps_rate * a4 - cs * x4, ga * a4 + gs * x4
            s = s + (h / 6.0) * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
            xa = xa + (h / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
            xs = xs + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            hh = hh + (h / 6.0) * (k1h + 2.0 * k2h + 2.0 * k3h + k4h)
        out[i, 0], out[i, 1], out[i, 2], out[i, 3] = s, xa, xs, hh
    return out


def _terminal_np(th, g_a, g_s, eps_rate, init, t_end, dt):
    n_steps = _n_steps(t_end, dt)
    h = t_end / n_steps
    x = np.broadcast_to(init, (th.shape[0], 4)).copy()
    for _ in range(n_steps):
        k1 = _rhs_np(x, th, g_a, g_s, eps_rate)
        k2 = _rhs_np(x + 0.5 * h * k1, th, g_a, g_s, eps_rate)
        k3 = _rhs_np(x + 0.5 * h * k2, th, g_a, g_s, eps_rate)
        k4 = _rhs_np(x + h * k3, th, g_a, g_s, eps_rate)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def terminal_states(
    thetas: np.ndarray,
    t_end: float,
    dt: float = DT_DEFAULT,
    controls: tuple[float, float] = (0.0, 0.0),
    eps_rate: float = EPS_RATE,
    init: SIQRState = DEFAULT_INIT,
) -> np.ndarray:
    """Batch state at ``t_end`` without dense storage (Monte Carlo hot path)."""
    thetas = np.ascontiguousarray(np.atleast_2d(np.asarray(thetas, dtype=float)))
    init_arr = init.as_array()
    if HAVE_NUMBA:
        out = _terminal_nb(thetas, controls[0], controls[1], eps_rate, init_arr, t_end, dt)
    else:
        out = _terminal_np(thetas, controls[0], controls[1], eps_rate, init_arr, t_end, dt)
    if np.any(out < _STATE_LO) or np.any(out > _STATE_HI):
        raise IntegrationError("state left [0, 1] during integration")
    return out


# -- sensitivities -----------------------------------------------------------


def _rhs_sens_np(state, sens, th, g_a, g_s, eps_rate):
    """Time derivative of (state, d state / d theta) for the batch."""
    f = _rhs_np(state, th, g_a, g_s, eps_rate)
    s, xa, xs = state[:, 0], state[:, 1], state[:, 2]
    ba, bs, ga, gs = th[:, 0], th[:, 1], th[:, 2], th[:, 3]
    n = state.shape[0]
    jx = np.zeros((n, 4, 4))
    pressure = ba * xa + bs * xs
    jx[:, 0, 0] = -pressure
    jx[:, 0, 1] = -ba * s
    jx[:, 0, 2] = -bs * s
    jx[:, 1, 0] = pressure
    jx[:, 1, 1] = ba * s - (eps_rate + ga + g_a)
    jx[:, 1, 2] = bs * s
    jx[:, 2, 1] = eps_rate
    jx[:, 2, 2] = -(gs + g_s)
    jx[:, 3, 1] = ga
    jx[:, 3, 2] = gs
    jth = np.zeros((n, 4, 4))
    jth[:, 0, 0] = -s * xa
    jth[:, 1, 0] = s * xa
    jth[:, 0, 1] = -s * xs
    jth[:, 1, 1] = s * xs
    jth[:, 1, 2] = -xa
    jth[:, 3, 2] = xa
    jth[:, 2, 3] = -xs
    jth[:, 3, 3] = xs
    sdot = np.einsum("nij,njk->nik", jx, sens) + jth
    return f, sdot


@njit(cache=True)
def _terminal_sens_nb(th, g_a, g_s, eps_rate, init, t_end, dt):  # pragma: no cover - compiled
    n = th.shape[0]
    out = np.empty((n, 4))
    out_s = np.empty((n, 4, 4))
    n_steps = max(1, int(np.ceil(t_end / dt - 1e-12)))
    h = t_end / n_steps
    stages = np.array([0.5, 0.5, 1.0])
    for i in range(n):
        ba, bs, ga, gs = th[i, 0], th[i, 1], th[i, 2], th[i, 3]
        x = init.copy()
        sx = np.zeros((4, 4))
        kx = np.empty((4, 4))
        ks = np.empty((4, 4, 4))
        for _ in range(n_steps):
            for st in range(4):
                if st == 0:
                    xc = x
                    sc = sx
                else:
                    a = stages[st - 1] * h
                    xc = x + a * kx[st - 1]
                    sc = sx + a * ks[st - 1]
                s_, xa, xs = xc[0], xc[1], xc[2]
                infect = (ba * xa + bs * xs) * s_
                kx[st, 0] = -infect
                kx[st, 1] = infect - (eps_rate + ga + g_a) * xa
                kx[st, 2] = eps_rate * xa - (gs + g_s) * xs
                kx[st, 3] = ga * xa + gs * xs
                pressure = ba * xa + bs * xs
                for j in range(4):
                    s0j, s1j, s2j, s3j = sc[0, j], sc[1, j], sc[2, j], sc[3, j]
                    row0 = -pressure * s0j - ba * s_ * s1j - bs * s_ * s2j
                    row1 = pressure * s0j + (ba * s_ - (eps_rate + ga + g_a)) * s1j + bs * s_ * s2j
                    row2 = eps_rate * s1j - (gs + g_s) * s2j
                    row3 = ga * s1j + gs * s2j
                    ks[st, 0, j] = row0
                    ks[st, 1, j] = row1
                    ks[st, 2, j] = row2
                    ks[st, 3, j] = row3
                # explicit parameter columns of d f / d theta
                ks[st, 0, 0] += -s_ * xa
                ks[st, 1, 0] += s_ * xa
                ks[st, 0, 1] += -s_ * xs
                ks[st, 1, 1] += s_ * xs
                ks[st, 1, 2] += -xa
                ks[st, 3, 2] += xa
                ks[st, 2, 3] += -xs
                ks[st, 3, 3] += xs
            for c in range(4):
                x[c] = x[c] + (h / 6.0) * (kx[0, c] + 2.0 * kx[1, c] + 2.0 * kx[2, c] + kx[3, c])
                for j in range(4):
                    sx[c, j] = sx[c, j] + (h / 6.0) * (
                        ks[0, c, j] + 2.0 * ks[1, c, j] + 2.0 * ks[2, c, j] + ks[3, c, j]
                    )
        out[i] = x
        out_s[i] = sx
    return out, out_s


def terminal_states_with_sens(
    thetas: np.ndarray,
    t_end: float,
    dt: float = DT_DEFAULT,
    controls: tuple[float, float] = (0.0, 0.0),
    eps_rate: float = EPS_RATE,
    init: SIQRState = DEFAULT_INIT,
) -> tuple[np.ndarray, np.ndarray]:
    """State and its parameter Jacobian at ``t_end`` via forward sensitivities."""
    th = np.ascontiguousarray(np.atleast_2d(np.asarray(thetas, dtype=float)))
    g_a, g_s = controls
    if HAVE_NUMBA:
        x, sx = _terminal_sens_nb(th, g_a, g_s, eps_rate, init.as_array(), t_end, dt)
    else:
        x, sx = _terminal_sens_np(th, g_a, g_s, eps_rate, init, t_end, dt)
    if np.any(x < _STATE_LO) or np.any(x > _STATE_HI):
        raise IntegrationError("state left [0, 1] during integration")
    return x, sx


def _terminal_sens_np(th, g_a, g_s, eps_rate, init, t_end, dt):
    n_steps = _n_steps(t_end, dt)
    h = t_end / n_steps
    n = th.shape[0]
    x = np.broadcast_to(init.as_array(), (n, 4)).copy()
    sx = np.zeros((n, 4, 4))
    for _ in range(n_steps):
        f1, d1 = _rhs_sens_np(x, sx, th, g_a, g_s, eps_rate)
        f2, d2 = _rhs_sens_np(x + 0.5 * h * f1, sx + 0.5 * h * d1, th, g_a, g_s, eps_rate)
        f3, d3 = _rhs_sens_np(x + 0.5 * h * f2, sx + 0.5 * h * d2, th, g_a, g_s, eps_rate)
        f4, d4 = _rhs_sens_np(x + h * f3, sx + h * d3, th, g_a, g_s, eps_rate)
        x = x + (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
        sx = sx + (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
    return x, sx


# -- stability matrix --------------------------------------------------------


def stability_entries(params: SIQRParams, g_a: float, g_s: float) -> tuple[float, float, float, float]:
    """Entries (a, b, e, d) of the 2x2 infection-subsystem matrix."""
    a = params.beta_a * params.s0_frac - params.eps_rate - params.gamma_a - g_a
    b = params.beta_s * params.s0_frac
    d = -params.gamma_s - g_s
    return a, b, params.eps_rate, d


def lambda_max_closed(a: float, b: float, e: float, d: float) -> float:
    """Largest eigenvalue of [[a, b], [e, d]] with nonnegative off-diagonals."""
    disc = (0.5 * (a - d)) ** 2 + b * e
    if disc < 0:
        raise NumericalError("negative discriminant; off-diagonal product must be >= 0")
    return 0.5 * (a + d) + math.sqrt(disc)


def _pick_eigvec(primary: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    for cand in (primary, fallback):
        nrm = float(np.linalg.norm(cand))
        if nrm > 1e-14:
            return cand / nrm
    return np.array([1.0, 0.0])


def siqr_lambda_max(params: SIQRParams, g_a: float, g_s: float):
    """Closed-form dominant eigenvalue with left/right eigenvectors.

    Returns ``(lam, v, u)`` with unit-norm vectors and v.u > 0; degenerate
    (repeated, decoupled) cases fall back to axis vectors.
    """
    a, b, e, d = stability_entries(params, g_a, g_s)
    lam = lambda_max_closed(a, b, e, d)
    u = _pick_eigvec(np.array([lam - d, e]), np.array([b, lam - a]))
    v = _pick_eigvec(np.array([e, lam - a]), np.array([lam - d, b]))
    if float(v @ u) < 0:
        v = -v
    if float(v @ u) <= 1e-14:  # decoupled repeated eigenvalue: any direction works
        u = np.array([1.0, 0.0])
        v = np.array([1.0, 0.0])
    return lam, v, u


def lambda_max_matrix_grad(v: np.ndarray, u: np.ndarray) -> np.ndarray:
    """d lambda_max / d M from the left/right eigenvectors."""
    return np.outer(v, u) / float(v @ u)


# -- observation model -------------------------------------------------------


def observed_rates(thetas: np.ndarray, xi: float, dt: float = DT_DEFAULT) -> np.ndarray:
    """Poisson rates (n, 2) for the two infected-count channels at day ``xi``."""
    states = terminal_states(thetas, t_end=float(xi), dt=dt)
    return OBS_SCALE * N_POP * states[:, 1:3]


def siqr_observe(params: SIQRParams, xi: float, stream: RandomStream) -> np.ndarray:
    """Draw (asymptomatic, symptomatic) counts at day ``xi`` under no controls."""
    if not (1.0 <= xi <= SIM_HORIZON):
        raise InvalidArgument(f"xi={xi} outside [1, {SIM_HORIZON}]")
    rate = observed_rates(params.as_theta()[None, :], xi)[0]
    gen = stream.generator()
    return gen.poisson(rate).astype(float)


def siqr_score_dxi(y_obs: np.ndarray, params: SIQRParams, xi: float, h_fd: float = 1e-3) -> float:
    """Design derivative of the conditional Poisson log-likelihood.

    Sums the per-channel score terms; the time derivative of the model
    prediction comes from central differences over the dense trajectory.
    """
    traj = siqr_integrate(params, t_end=float(xi) + h_fd)
    x_mid = traj.eval(float(xi))[0, 1:3]
    x_hi = traj.eval(float(xi) + h_fd)[0, 1:3]
    x_lo = traj.eval(float(xi) - h_fd)[0, 1:3]
    rate = OBS_SCALE * N_POP * x_mid
    if np.any(rate <= 0):
        raise ZeroRateError("Poisson rate vanished at the requested design")
    dy_true = N_POP * (x_hi - x_lo) / (2.0 * h_fd)
    y = np.asarray(y_obs, dtype=float)
    return float(np.sum((y / rate - 1.0) * OBS_SCALE * dy_true))


@dataclass
class SiqrModel:
    dt: float = DT_DEFAULT

    name = "siqr"
    theta_dim = 4
    y_dim = 2
    xi_dim = 1
    family = "lognormal"

    def __post_init__(self):
        self.prior = DiagLogNormal(np.array(PRIOR_LOG_MEAN), np.array(PRIOR_LOG_STD))
        self.design_grid = [float(d) for d in range(1, 16)]
        self.design_T = DESIGN_T
        self.xi_bounds = (1.0, DESIGN_T)
        self._y_stats: tuple[np.ndarray, np.ndarray] | None = None

    def sample_prior(self, gen: np.random.Generator, n: int) -> np.ndarray:
        return self.prior.sample(gen, n)

    def mean_response(self, xi, thetas: np.ndarray) -> np.ndarray:
        """Scaled infected counts N_pop * (x_a, x_s) at day ``xi``."""
        states = terminal_states(np.atleast_2d(thetas), t_end=float(xi), dt=self.dt)
        return N_POP * states[:, 1:3]

    def sample_obs(self, gen: np.random.Generator, xi, theta: np.ndarray) -> np.ndarray:
        rate = OBS_SCALE * self.mean_response(xi, theta[None, :])[0]
        return gen.poisson(rate).astype(float)

    def rates_from_response(self, response: np.ndarray) -> np.ndarray:
        return OBS_SCALE * response

    def loglik_from_response(self, y: np.ndarray, response: np.ndarray) -> np.ndarray:
        rates = self.rates_from_response(response)
        ks = np.asarray(y, dtype=float).astype(int)
        out = np.zeros(response.shape[0])
        for c in range(2):
            out += poisson_logpmf(np.full(response.shape[0], ks[c]), rates[:, c])
        return out

    def loglik(self, y: np.ndarray, thetas: np.ndarray, xi) -> np.ndarray:
        return self.loglik_from_response(y, self.mean_response(xi, thetas))

    def loglik_grad_theta(self, y: np.ndarray, thetas: np.ndarray, xi) -> np.ndarray:
        thetas = np.atleast_2d(thetas)
        states, sens = terminal_states_with_sens(thetas, t_end=float(xi), dt=self.dt)
        rates = OBS_SCALE * N_POP * states[:, 1:3]
        y = np.asarray(y, dtype=float)
        grad = np.zeros((thetas.shape[0], 4))
        for c in range(2):
            # d/d theta of (y log rate - rate), rate = scale * N * x_c
            coeff = (y[c] / rates[:, c] - 1.0) * OBS_SCALE * N_POP
            grad += coeff[:, None] * sens[:, 1 + c, :]
        return grad

    def score_dxi(self, y: np.ndarray, theta: np.ndarray, xi: float) -> float:
        params = SIQRParams(*np.asarray(theta, dtype=float))
        return siqr_score_dxi(y, params, xi)

    def score_dxi_batch(self, ys: np.ndarray, thetas: np.ndarray, xi: float, h_fd: float = 1e-3) -> np.ndarray:
        """Vectorized conditional score over outer samples at one design."""
        thetas = np.atleast_2d(thetas)
        traj = integrate_batch(thetas, t_end=float(xi) + h_fd, dt=self.dt)
        x_mid = traj.eval(float(xi))[:, 1:3]
        x_hi = traj.eval(float(xi) + h_fd)[:, 1:3]
        x_lo = traj.eval(float(xi) - h_fd)[:, 1:3]
        rate = OBS_SCALE * N_POP * x_mid
        if np.any(rate <= 0):
            raise ZeroRateError("Poisson rate vanished at the requested design")
        dy_true = N_POP * (x_hi - x_lo) / (2.0 * h_fd)
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        return np.sum((ys / rate - 1.0) * OBS_SCALE * dy_true, axis=1)

    def xi_scaler(self) -> InputScaler:
        return InputScaler(shift=np.zeros(1), scale=np.array([DESIGN_T]))

    def y_scaler(self) -> InputScaler:
        if self._y_stats is None:
            gen = RandomStream(seed=0x5EED5CA1E, stream_id=2).generator()
            n = 10_000
            thetas = self.sample_prior(gen, n)
            xis = gen.integers(1, int(DESIGN_T) + 1, size=n)
            ys = np.empty((n, 2))
            for day in range(1, int(DESIGN_T) + 1):
                mask = xis == day
                if not np.any(mask):
                    continue
                rates = OBS_SCALE * self.mean_response(float(day), thetas[mask])
                ys[mask] = gen.poisson(rates).astype(float)
            self._y_stats = (ys.mean(axis=0), ys.std(axis=0) + 1e-12)
        mean, std = self._y_stats
        return InputScaler(shift=mean, scale=std)

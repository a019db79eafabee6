"""Log-barrier interior-point solver for small smooth convex programs.

Minimizes ``f(x)`` subject to ``c_k(x) <= 0`` by damped Newton steps on the
barrier objective ``t f(x) - sum log(-c_k)``, increasing ``t`` by a factor of
10 per outer iteration until the duality gap ``K / t`` falls below tolerance.
At each barrier center the multipliers ``1 / (t * (-c_k))`` satisfy original
stationarity exactly, so the final KKT residual is limited only by the
complementarity level ``1/t``.

A generic phase-1 (minimize the worst violation) produces strictly feasible
starts and doubles as the feasibility test.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from ..errors import SolverError


class Objective(Protocol):
    def value(self, x: np.ndarray) -> float: ...

    def grad(self, x: np.ndarray) -> np.ndarray: ...

    def hess(self, x: np.ndarray) -> np.ndarray: ...


@dataclass
class QuadraticObjective:
    """f(x) = 0.5 x'Qx + b'x + c with constant PSD Q."""

    Q: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def value(self, x):
        return 0.5 * float(x @ self.Q @ x) + float(self.b @ x) + self.c

    def grad(self, x):
        return self.Q @ x + self.b

    def hess(self, x):
        return self.Q


@dataclass
class FunctionObjective:
    value_fn: Callable[[np.ndarray], float]
    grad_fn: Callable[[np.ndarray], np.ndarray]
    hess_fn: Callable[[np.ndarray], np.ndarray]

    def value(self, x):
        return float(self.value_fn(x))

    def grad(self, x):
        return self.grad_fn(x)

    def hess(self, x):
        return self.hess_fn(x)


class ConstraintBlock(Protocol):
    """A group of inequality constraints sharing structure."""

    def count(self) -> int: ...

    def values(self, x: np.ndarray) -> np.ndarray: ...

    def jacobian(self, x: np.ndarray) -> np.ndarray: ...

    def hess_weighted(self, x: np.ndarray, w: np.ndarray) -> np.ndarray: ...


@dataclass
class LinearBlock:
    """c(x) = A x - b <= 0."""

    A: np.ndarray
    b: np.ndarray

    def count(self):
        return self.A.shape[0]

    def values(self, x):
        return self.A @ x - self.b

    def jacobian(self, x):
        return self.A

    def hess_weighted(self, x, w):
        return None


def box_block(n: int, lo: np.ndarray, hi: np.ndarray, offset: int = 0, dim: int | None = None) -> LinearBlock:
    """Bounds ``lo <= x[offset:offset+n] <= hi`` as a linear block in R^dim."""
    dim = n if dim is None else dim
    A = np.zeros((2 * n, dim))
    b = np.empty(2 * n)
    for i in range(n):
        A[2 * i, offset + i] = 1.0
        b[2 * i] = hi[i]
        A[2 * i + 1, offset + i] = -1.0
        b[2 * i + 1] = -lo[i]
    return LinearBlock(A, b)


@dataclass
class BarrierResult:
    x: np.ndarray
    lam: np.ndarray  # one multiplier per constraint, in block order
    value: float
    gap: float
    newton_iters: int
    converged: bool


def _all_values(blocks, x) -> np.ndarray:
    return np.concatenate([blk.values(x) for blk in blocks])


def _strictly_feasible(blocks, x) -> bool:
    vals = _all_values(blocks, x)
    return bool(np.all(vals < 0.0) and np.all(np.isfinite(vals)))


def _barrier_grad_hess(objective, blocks, x, t):
    g = t * objective.grad(x)
    H = t * objective.hess(x)
    H = np.array(H, dtype=float, copy=True)
    for blk in blocks:
        c = blk.values(x)
        J = blk.jacobian(x)
        inv = 1.0 / (-c)
        g = g + J.T @ inv
        H += (J * (inv**2)[:, None]).T @ J
        extra = blk.hess_weighted(x, inv)
        if extra is not None:
            H += extra
    return g, H


def _barrier_value(objective, blocks, x, t) -> float:
    vals = _all_values(blocks, x)
    if np.any(vals >= 0):
        return np.inf
    return t * objective.value(x) - float(np.sum(np.log(-vals)))


def _newton_center(objective, blocks, x, t, tol, max_iter):
    """Damped Newton on the barrier subproblem; returns (x, iterations)."""
    iters = 0
    for _ in range(max_iter):
        g, H = _barrier_grad_hess(objective, blocks, x, t)
        ridge = 0.0
        for attempt in range(8):
            try:
                L = np.linalg.cholesky(H + ridge * np.eye(H.shape[0]))
                break
            except np.linalg.LinAlgError:
                ridge = max(10.0 * ridge, 1e-12 * max(1.0, float(np.trace(H)) / H.shape[0]))
        else:  # pragma: no cover
            raise SolverError("barrier Hessian factorization failed")
        p = -np.linalg.solve(L.T, np.linalg.solve(L, g))
        decrement = -0.5 * float(g @ p)
        iters += 1
        if decrement <= tol:
            return x, iters
        f0 = _barrier_value(objective, blocks, x, t)
        alpha = 1.0
        gp = float(g @ p)
        while alpha > 1e-14:
            trial = x + alpha * p
            if _strictly_feasible(blocks, trial) and _barrier_value(
                objective, blocks, trial, t
            ) <= f0 + 0.25 * alpha * gp:
                break
            alpha *= 0.5
        else:
            return x, iters  # no admissible step: already as centered as float64 allows
        x = x + alpha * p
    return x, iters


def minimize_barrier(
    objective: Objective,
    blocks: list,
    x0: np.ndarray,
    gap_tol: float = 1e-8,
    t_init: float = 1.0,
    t_factor: float = 10.0,
    newton_tol: float = 1e-12,
    max_newton: int = 60,
) -> BarrierResult:
    """Run the barrier method from a strictly feasible ``x0``."""
    if not _strictly_feasible(blocks, x0):
        raise SolverError("barrier start is not strictly feasible")
    n_cons = sum(blk.count() for blk in blocks)
    x = np.array(x0, dtype=float, copy=True)
    t = t_init
    total_iters = 0
    while True:
        x, iters = _newton_center(objective, blocks, x, t, newton_tol, max_newton)
        total_iters += iters
        gap = n_cons / t
        if gap <= gap_tol:
            break
        t *= t_factor
    lam = np.concatenate([1.0 / (t * (-blk.values(x))) for blk in blocks])
    lam = _polish_multipliers(objective, blocks, x, lam)
    return BarrierResult(
        x=x, lam=lam, value=objective.value(x), gap=gap, newton_iters=total_iters, converged=True
    )


def _polish_multipliers(objective, blocks, x, lam, active_tol: float = 1e-7) -> np.ndarray:
    """Least-squares refit of the near-active multipliers.

    Barrier centering leaves a stationarity residual proportional to the exit
    Newton decrement; refitting the active multipliers against the cost
    gradient removes it without touching the primal point. Inactive
    multipliers keep their (tiny) barrier values.
    """
    jac = np.vstack([blk.jacobian(x) for blk in blocks]) if blocks else np.zeros((0, x.size))
    active = lam > active_tol
    if not np.any(active):
        return lam
    g0 = objective.grad(x)
    sol, *_ = np.linalg.lstsq(jac[active].T, -g0, rcond=None)
    sol = np.maximum(sol, 0.0)
    out = lam.copy()
    out[active] = sol
    return out


# -- phase 1 -----------------------------------------------------------------


@dataclass
class _Phase1Objective:
    n: int  # x = (original vars, slack); objective = slack

    def value(self, x):
        return float(x[-1])

    def grad(self, x):
        g = np.zeros(self.n + 1)
        g[-1] = 1.0
        return g

    def hess(self, x):
        return np.zeros((self.n + 1, self.n + 1))


@dataclass
class _ShiftedBlock:
    """c_k(x) - slack <= 0 lifted to the (x, slack) space."""

    inner: ConstraintBlock
    n: int

    def count(self):
        return self.inner.count()

    def values(self, z):
        return self.inner.values(z[: self.n]) - z[-1]

    def jacobian(self, z):
        J = self.inner.jacobian(z[: self.n])
        out = np.zeros((J.shape[0], self.n + 1))
        out[:, : self.n] = J
        out[:, -1] = -1.0
        return out

    def hess_weighted(self, z, w):
        inner = self.inner.hess_weighted(z[: self.n], w)
        if inner is None:
            return None
        out = np.zeros((self.n + 1, self.n + 1))
        out[: self.n, : self.n] = inner
        return out


def find_strict_point(
    blocks: list,
    x0: np.ndarray,
    margin: float = 1e-9,
    gap_tol: float = 1e-10,
) -> np.ndarray | None:
    """Phase-1: find x with all c_k(x) < 0, or None when none exists.

    ``x0`` need not satisfy the constraints; the lifted problem minimizing the
    worst violation is always strictly feasible from any start.
    """
    n = x0.size
    vals = _all_values(blocks, x0)
    slack0 = float(np.max(vals)) + 1.0
    z0 = np.concatenate([x0, [slack0]])
    lifted: list = [_ShiftedBlock(blk, n) for blk in blocks]
    # Keep the lifted program bounded: the slack may not drop below -1.
    floor = np.zeros((1, n + 1))
    floor[0, -1] = -1.0
    lifted.append(LinearBlock(floor, np.array([1.0])))
    res = minimize_barrier(_Phase1Objective(n), lifted, z0, gap_tol=gap_tol)
    x = res.x[:n]
    if float(np.max(_all_values(blocks, x))) < -margin:
        return x
    return None

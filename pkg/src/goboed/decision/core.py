"""Risk-specified solves, optimal-value sensitivities, and KKT diagnostics.

The three entry points build one convex program each (constraints at the
weighted posterior mean, at a covering scenario subset, or in the lifted CVaR
epigraph space), hand it to the barrier solver, and return a
:class:`DecisionSolution` carrying multipliers. Infeasibility is a flag on
the solution, not an exception.

Optimal-value gradients with respect to the parameter samples follow the
envelope identity: multipliers times constraint gradients at the optimum,
with the scenario set and importance weights held fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..probcore import WeightedPosterior
from .risk import CHANCE, CVAR, MEAN, RiskSpec, cvar_value, select_scenarios
from .solver import (
    FunctionObjective,
    LinearBlock,
    box_block,
    find_strict_point,
    minimize_barrier,
)

STRICT_COMPLEMENTARITY_TOL = 1e-7


@dataclass
class _ScenarioBlock:
    """Rows c_j(g, theta_i) <= 0, (i, j) flattened row-major; x = g."""

    problem: object
    thetas: np.ndarray

    def count(self):
        return self.thetas.shape[0] * self.problem.m

    def values(self, x):
        return self.problem.constraints(x, self.thetas).reshape(-1)

    def jacobian(self, x):
        grads = self.problem.constraint_grad_g(x, self.thetas)
        return grads.reshape(-1, self.problem.dim_g)

    def hess_weighted(self, x, w):
        w2d = w.reshape(self.thetas.shape[0], self.problem.m)
        return self.problem.constraint_hess_g(x, self.thetas, w2d)


@dataclass
class _CvarEpigraphBlock:
    """Rows c_j(g, theta_i) - tau_j - s_ij <= 0 in the lifted space.

    Lifted layout: x = (g, tau_1..tau_m, s_00..s_(N-1)(m-1)) with s stored
    (i, j) row-major.
    """

    problem: object
    thetas: np.ndarray

    def _split(self, x):
        dg, m = self.problem.dim_g, self.problem.m
        return x[:dg], x[dg : dg + m], x[dg + m :]

    def count(self):
        return self.thetas.shape[0] * self.problem.m

    def values(self, x):
        g, tau, s = self._split(x)
        cons = self.problem.constraints(g, self.thetas)
        return (cons - tau[None, :]).reshape(-1) - s

    def jacobian(self, x):
        g, _, s = self._split(x)
        n_rows = self.count()
        dg, m = self.problem.dim_g, self.problem.m
        out = np.zeros((n_rows, x.size))
        out[:, :dg] = self.problem.constraint_grad_g(g, self.thetas).reshape(n_rows, dg)
        rows = np.arange(n_rows)
        out[rows, dg + rows % m] = -1.0
        out[rows, dg + m + rows] = -1.0
        return out

    def hess_weighted(self, x, w):
        g, _, _ = self._split(x)
        w2d = w.reshape(self.thetas.shape[0], self.problem.m)
        inner = self.problem.constraint_hess_g(g, self.thetas, w2d)
        if inner is None:
            return None
        out = np.zeros((x.size, x.size))
        dg = self.problem.dim_g
        out[:dg, :dg] = inner
        return out


@dataclass
class _LiftedObjective:
    problem: object
    dim: int

    def value(self, x):
        return self.problem.cost(x[: self.problem.dim_g])

    def grad(self, x):
        g = np.zeros(self.dim)
        g[: self.problem.dim_g] = self.problem.cost_grad(x[: self.problem.dim_g])
        return g

    def hess(self, x):
        h = np.zeros((self.dim, self.dim))
        dg = self.problem.dim_g
        h[:dg, :dg] = self.problem.cost_hess(x[: self.problem.dim_g])
        return h


@dataclass
class DecisionSolution:
    risk: RiskSpec
    feasible: bool
    g_star: np.ndarray | None = None
    j_star: float = math.nan
    lam_scenario: np.ndarray | None = None  # (K, m) multipliers on sample constraints
    scenario_idx: np.ndarray | None = None  # posterior indices those rows refer to
    lam_box: np.ndarray | None = None
    tau_star: np.ndarray | None = None
    s_star: np.ndarray | None = None
    lam_budget: np.ndarray | None = None
    active_set: list = field(default_factory=list)
    degenerate: bool = False
    newton_iters: int = 0
    _kkt: tuple | None = None  # (objective, blocks, x, lam) at the solver's point


def _infeasible(risk: RiskSpec) -> DecisionSolution:
    return DecisionSolution(risk=risk, feasible=False)


def _classify(values: np.ndarray, lam: np.ndarray, tol: float = STRICT_COMPLEMENTARITY_TOL):
    active = lam > tol
    degenerate = bool(np.any((lam <= tol) & (np.abs(values) <= tol)))
    return active, degenerate


def _problem_objective(problem):
    return FunctionObjective(problem.cost, problem.cost_grad, problem.cost_hess)


def _solve_scenario_program(problem, thetas: np.ndarray, risk: RiskSpec, scenario_idx) -> DecisionSolution:
    """Shared path for mean (one pseudo-scenario) and chance (covering set)."""
    thetas = np.atleast_2d(thetas)
    g0 = problem.strict_start(thetas)
    if g0 is None:
        from .problems import generic_strict_start

        g0 = generic_strict_start(problem, thetas)
    if g0 is None:
        return _infeasible(risk)

    dg = problem.dim_g
    blocks: list = [box_block(dg, problem.box_lo, problem.box_hi)]
    if problem.m > 0:
        blocks.append(_ScenarioBlock(problem, thetas))
    objective = _problem_objective(problem)
    res = minimize_barrier(objective, blocks, np.asarray(g0, dtype=float))

    lam_box = res.lam[: 2 * dg]
    lam_scn = res.lam[2 * dg :].reshape(thetas.shape[0], problem.m) if problem.m else None
    sol = DecisionSolution(
        risk=risk,
        feasible=True,
        g_star=res.x,
        j_star=res.value,
        lam_scenario=lam_scn,
        scenario_idx=scenario_idx,
        lam_box=lam_box,
        newton_iters=res.newton_iters,
        _kkt=(objective, blocks, res.x, res.lam),
    )
    cons = np.concatenate([blk.values(res.x) for blk in blocks])
    active, degen = _classify(cons, res.lam)
    sol.degenerate = degen
    if problem.m > 0:
        scn_active = active[2 * dg :].reshape(thetas.shape[0], problem.m)
        idx = scenario_idx if scenario_idx is not None else np.arange(thetas.shape[0])
        sol.active_set = [
            (int(idx[i]), int(j)) for i, j in zip(*np.nonzero(scn_active))
        ]
    return sol


def solve_mean(problem, posterior: WeightedPosterior) -> DecisionSolution:
    """Enforce every constraint at the weighted posterior mean."""
    theta_bar = posterior.mean()
    return _solve_scenario_program(problem, theta_bar[None, :], RiskSpec(MEAN), None)


def solve_chance(problem, posterior: WeightedPosterior, eta: float) -> DecisionSolution:
    """Enforce constraints jointly on the smallest covering scenario subset."""
    risk = RiskSpec(CHANCE, eta)
    idx = select_scenarios(posterior.w_tilde, eta)
    return _solve_scenario_program(problem, posterior.thetas[idx], risk, idx)


def solve_cvar(problem, posterior: WeightedPosterior, eta: float) -> DecisionSolution:
    """Bound the tail expectation of each constraint via its epigraph form."""
    risk = RiskSpec(CVAR, eta)
    thetas = posterior.thetas
    w = posterior.w_tilde
    n, m, dg = thetas.shape[0], problem.m, problem.dim_g
    if m == 0:
        return _solve_scenario_program(problem, thetas[:0], risk, np.arange(0))
    dim = dg + m + n * m

    x0 = _cvar_start(problem, thetas, w, eta, dim)
    if x0 is None:
        return _infeasible(risk)

    blocks: list = [box_block(dg, problem.box_lo, problem.box_hi, dim=dim)]
    epigraph = _CvarEpigraphBlock(problem, thetas)
    blocks.append(epigraph)
    # s_ij >= 0
    neg_s = np.zeros((n * m, dim))
    neg_s[np.arange(n * m), dg + m + np.arange(n * m)] = -1.0
    blocks.append(LinearBlock(neg_s, np.zeros(n * m)))
    # tau_j + (1/(1-eta)) sum_i w_i s_ij <= 0
    budget = np.zeros((m, dim))
    for j in range(m):
        budget[j, dg + j] = 1.0
        budget[j, dg + m + np.arange(n) * m + j] = w / (1.0 - eta)
    blocks.append(LinearBlock(budget, np.zeros(m)))

    objective = _LiftedObjective(problem, dim)
    res = minimize_barrier(objective, blocks, x0)

    g_star = res.x[:dg]
    lam_box = res.lam[: 2 * dg]
    rho = res.lam[2 * dg : 2 * dg + n * m].reshape(n, m)
    lam_budget = res.lam[-m:]

    # Canonical epigraph point: variational minimizer per constraint and hinge
    # slacks. Equal to the solver's point whenever the budget row is active.
    cons = problem.constraints(g_star, thetas)
    tau_star = np.empty(m)
    s_star = np.empty((n, m))
    for j in range(m):
        tau_star[j] = _canonical_tau(cons[:, j], w, eta)
        s_star[:, j] = np.maximum(cons[:, j] - tau_star[j], 0.0)

    sol = DecisionSolution(
        risk=risk,
        feasible=True,
        g_star=g_star,
        j_star=res.value,
        lam_scenario=rho,
        scenario_idx=np.arange(n),
        lam_box=lam_box,
        tau_star=tau_star,
        s_star=s_star,
        lam_budget=lam_budget,
        newton_iters=res.newton_iters,
        _kkt=(objective, blocks, res.x, res.lam),
    )
    vals = np.concatenate([blk.values(res.x) for blk in blocks])
    active, degen = _classify(vals, res.lam)
    sol.degenerate = degen
    scn_active = active[2 * dg : 2 * dg + n * m].reshape(n, m)
    sol.active_set = [(int(i), int(j)) for i, j in zip(*np.nonzero(scn_active))]
    return sol


def _canonical_tau(values: np.ndarray, w: np.ndarray, eta: float) -> float:
    best_tau, best = 0.0, math.inf
    scale = 1.0 / (1.0 - eta)
    for tau in np.unique(values):
        val = tau + scale * float(w @ np.maximum(values - tau, 0.0))
        if val < best - 1e-15:
            best, best_tau = val, tau
    return best_tau


def _cvar_start(problem, thetas, w, eta, dim) -> np.ndarray | None:
    """Strictly feasible lifted point, or None if the program is infeasible."""
    n, m, dg = thetas.shape[0], problem.m, problem.dim_g
    g0 = problem.strict_start(thetas)
    if g0 is not None:
        cons = problem.constraints(g0, thetas)
        tau0 = np.empty(m)
        s0 = np.empty((n, m))
        ok = True
        for j in range(m):
            tau_j = _canonical_tau(cons[:, j], w, eta)
            margin = -(tau_j + float(w @ np.maximum(cons[:, j] - tau_j, 0.0)) / (1.0 - eta))
            if margin <= 1e-12:
                ok = False
                break
            delta = min(0.1, 0.5 * (1.0 - eta) * margin)
            tau0[j] = tau_j
            s0[:, j] = np.maximum(cons[:, j] - tau_j, 0.0) + delta
        if ok:
            return np.concatenate([np.asarray(g0, dtype=float), tau0, s0.reshape(-1)])

    # Worst-case start failed: fall back to phase-1 on the lifted program.
    blocks: list = [box_block(dg, problem.box_lo, problem.box_hi, dim=dim)]
    blocks.append(_CvarEpigraphBlock(problem, thetas))
    neg_s = np.zeros((n * m, dim))
    neg_s[np.arange(n * m), dg + m + np.arange(n * m)] = -1.0
    blocks.append(LinearBlock(neg_s, np.zeros(n * m)))
    budget = np.zeros((m, dim))
    for j in range(m):
        budget[j, dg + j] = 1.0
        budget[j, dg + m + np.arange(n) * m + j] = w / (1.0 - eta)
    blocks.append(LinearBlock(budget, np.zeros(m)))
    z0 = np.zeros(dim)
    z0[:dg] = 0.5 * (problem.box_lo + problem.box_hi)
    z0[dg + m :] = 1.0
    return find_strict_point(blocks, z0)


def envelope_grad(problem, solution: DecisionSolution, posterior: WeightedPosterior) -> np.ndarray:
    """Per-sample optimal-value gradients d J* / d theta_i, shape (N, d).

    Multipliers times constraint gradients at the optimum; samples outside the
    enforced set contribute zero. Under mean risk the dependence flows through
    the weighted mean, so sample i picks up its weight as a chain factor. For
    CVaR the epigraph multipliers already carry weight/(1-eta) times the tail
    indicator. A solution failing strict complementarity keeps its
    ``degenerate`` flag set; gradients at such points are unreliable.
    """
    n, d = posterior.thetas.shape
    out = np.zeros((n, d))
    if not solution.feasible or solution.lam_scenario is None or problem.m == 0:
        return out
    if solution.risk.kind == MEAN:
        theta_bar = posterior.mean()
        grads = problem.constraint_grad_theta(solution.g_star, theta_bar[None, :])[0]
        total = solution.lam_scenario[0] @ grads  # (d,)
        out[:] = posterior.w_tilde[:, None] * total[None, :]
        return out
    idx = solution.scenario_idx
    thetas = posterior.thetas[idx]
    grads = problem.constraint_grad_theta(solution.g_star, thetas)  # (K, m, d)
    contrib = np.einsum("km,kmd->kd", solution.lam_scenario, grads)
    out[idx] = contrib
    return out


def kkt_residual(problem, solution: DecisionSolution, posterior: WeightedPosterior | None = None) -> float:
    """Max violation over stationarity, primal/dual feasibility, complementarity.

    Evaluated at the solver's own primal-dual point (the one the multipliers
    belong to), including box rows.
    """
    if solution._kkt is None:
        raise ValueError("solution carries no solver state")
    objective, blocks, x, lam = solution._kkt
    grad = objective.grad(x)
    vals = []
    offset = 0
    stat = grad.astype(float).copy()
    for blk in blocks:
        c = blk.values(x)
        J = blk.jacobian(x)
        lam_blk = lam[offset : offset + blk.count()]
        stat += J.T @ lam_blk
        vals.append(c)
        offset += blk.count()
    cons = np.concatenate(vals) if vals else np.zeros(0)
    residuals = [float(np.max(np.abs(stat)))]
    if cons.size:
        residuals.append(float(np.max(np.maximum(cons, 0.0))))
        residuals.append(float(np.max(np.maximum(-lam, 0.0))))
        residuals.append(float(np.max(np.abs(lam * cons))))
    return max(residuals)

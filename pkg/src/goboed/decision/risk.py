"""Risk functionals mapping per-sample constraint values to deterministic ones.

Three interchangeable notions of robustness: enforce at the weighted mean,
enforce on a scenario subset covering a posterior probability level, or bound
the tail expectation (CVaR) through its variational representation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument

MEAN = "mean"
CHANCE = "chance"
CVAR = "cvar"


@dataclass(frozen=True)
class RiskSpec:
    kind: str
    eta: float | None = None

    def __post_init__(self):
        if self.kind not in (MEAN, CHANCE, CVAR):
            raise InvalidArgument(f"unknown risk kind {self.kind!r}")
        if self.kind == MEAN:
            if self.eta is not None:
                raise InvalidArgument("mean risk takes no level")
        else:
            if self.eta is None or not (0.0 < self.eta < 1.0):
                raise InvalidArgument("eta must lie in (0, 1)")

    def label(self) -> str:
        if self.kind == MEAN:
            return "mean"
        return f"{self.kind}{self.eta:g}"


def select_scenarios(w_tilde: np.ndarray, eta: float) -> np.ndarray:
    """Smallest prefix of indices, by descending weight, covering level ``eta``.

    Ties are broken by ascending original index; zero-weight samples are never
    selected. Returns the selected indices in selection order.
    """
    w = np.asarray(w_tilde, dtype=float)
    if not (0.0 < eta <= 1.0):
        raise InvalidArgument("eta must lie in (0, 1]")
    order = np.lexsort((np.arange(w.size), -w))
    order = order[w[order] > 0.0]
    total = 0.0
    chosen = []
    threshold = eta - 1e-12
    for idx in order:
        chosen.append(int(idx))
        total = math.fsum((total, float(w[idx])))
        if total >= threshold:
            break
    return np.array(chosen, dtype=int)


def cvar_value(values: np.ndarray, w_tilde: np.ndarray, eta: float) -> float:
    """Tail expectation beyond the ``eta`` quantile, via the variational form.

    Minimizes ``tau + (1/(1-eta)) * sum_i w_i (v_i - tau)_+`` over tau; some
    sample value always attains the minimum, so it suffices to scan them.
    """
    v = np.asarray(values, dtype=float)
    w = np.asarray(w_tilde, dtype=float)
    if not (0.0 <= eta < 1.0):
        raise InvalidArgument("eta must lie in [0, 1)")
    if v.size == 0:
        raise InvalidArgument("values must be nonempty")
    scale = 1.0 / (1.0 - eta)
    best = math.inf
    for tau in np.unique(v):
        val = tau + scale * float(w @ np.maximum(v - tau, 0.0))
        best = min(best, val)
    return best


def cvar_value_many(values: np.ndarray, w_tilde: np.ndarray, eta: float) -> np.ndarray:
    """Vectorized CVaR over rows of ``values`` (grid-search oracles).

    Uses the sorted-tail formula rather than the variational scan: take
    samples in decreasing order until probability mass 1 - eta is covered,
    weighting the boundary sample fractionally.
    """
    v = np.atleast_2d(np.asarray(values, dtype=float))
    w = np.asarray(w_tilde, dtype=float)
    tail = 1.0 - eta
    order = np.argsort(-v, axis=1)
    vs = np.take_along_axis(v, order, axis=1)
    ws = np.broadcast_to(w, v.shape)
    ws = np.take_along_axis(ws, order, axis=1)
    cum = np.cumsum(ws, axis=1)
    take = np.minimum(ws, np.maximum(tail - (cum - ws), 0.0))
    return (vs * take).sum(axis=1) / tail


def pad_infeasible(costs, penalty: float = 1e3) -> np.ndarray:
    """Replace infeasible entries by the mean over feasible ones.

    ``costs`` is a sequence of ``(value, feasible)`` pairs. When nothing is
    feasible every entry becomes ``penalty`` and a warning is emitted.
    """
    values = np.array([float(v) for v, _ in costs])
    feas = np.array([bool(f) for _, f in costs])
    if np.all(feas):
        return values
    if not np.any(feas):
        warnings.warn("no feasible decision at any sample; padding with penalty constant")
        return np.full(values.shape, float(penalty))
    fill = math.fsum(values[feas]) / int(feas.sum())
    out = values.copy()
    out[~feas] = fill
    return out

"""Concrete downstream decision problems.

Each problem declares a convex cost over a box, per-sample constraint
functions convex in the decision, and closed-form gradients in both the
decision and the model parameters. The epidemic problem constrains the
dominant eigenvalue of the infection subsystem through its smooth
trace/determinant closed form, which avoids eigenvector computations and is
differentiable wherever the constraint can be active.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..models import pk as pk_mod
from ..models import siqr as siqr_mod
from .solver import LinearBlock, box_block, find_strict_point

DELTA_BOX = 1e-3  # quarantine rates live in [0, 1 - DELTA_BOX]: cost diverges at 1
ALPHA_STABILITY = 0.05
Z_A = 0.4
Z_S = 0.6


@dataclass
class QuarantineProblem:
    """Minimal economic cost of quarantine rates subject to epidemic stability.

    Decision g = (g_a, g_s); cost z_a/(1-g_a) + z_s/(1-g_s). One constraint
    per parameter sample: the dominant eigenvalue of the infection matrix must
    not exceed -alpha.
    """

    z_a: float = Z_A
    z_s: float = Z_S
    alpha: float = ALPHA_STABILITY
    eps_rate: float = siqr_mod.EPS_RATE
    s_t0: float = siqr_mod.INIT_STATE[0]
    delta_box: float = DELTA_BOX

    dim_g = 2
    m = 1

    def __post_init__(self):
        self.box_lo = np.zeros(2)
        self.box_hi = np.full(2, 1.0 - self.delta_box)

    # -- cost ---------------------------------------------------------------

    def cost(self, g) -> float:
        return self.z_a / (1.0 - g[0]) + self.z_s / (1.0 - g[1])

    def cost_grad(self, g) -> np.ndarray:
        return np.array([self.z_a / (1.0 - g[0]) ** 2, self.z_s / (1.0 - g[1]) ** 2])

    def cost_hess(self, g) -> np.ndarray:
        return np.diag(
            [2.0 * self.z_a / (1.0 - g[0]) ** 3, 2.0 * self.z_s / (1.0 - g[1]) ** 3]
        )

    # -- constraints ----------------------------------------------------------

    def _entries(self, thetas: np.ndarray):
        """Uncontrolled matrix entries (a0, b, d0) per sample row."""
        th = np.atleast_2d(np.asarray(thetas, dtype=float))
        a0 = th[:, 0] * self.s_t0 - self.eps_rate - th[:, 2]
        b = th[:, 1] * self.s_t0
        d0 = -th[:, 3]
        return a0, b, d0

    def _spectral_parts(self, g, thetas):
        a0, b, d0 = self._entries(thetas)
        a = a0 - g[0]
        d = d0 - g[1]
        w = 0.5 * (a - d)
        root = np.sqrt(w * w + b * self.eps_rate)
        return a, d, w, root, b

    def constraints(self, g, thetas) -> np.ndarray:
        a, d, w, root, _ = self._spectral_parts(g, thetas)
        return (0.5 * (a + d) + root + self.alpha)[:, None]

    def constraint_grad_g(self, g, thetas) -> np.ndarray:
        _, _, w, root, _ = self._spectral_parts(g, thetas)
        ratio = w / root
        grad = np.stack([-0.5 * (1.0 + ratio), -0.5 * (1.0 - ratio)], axis=1)
        return grad[:, None, :]

    def constraint_hess_g(self, g, thetas, w_ij) -> np.ndarray:
        _, _, w, root, b = self._spectral_parts(g, thetas)
        k = b * self.eps_rate
        coeff = float(np.sum(w_ij[:, 0] * k / (4.0 * root**3)))
        return coeff * np.array([[1.0, -1.0], [-1.0, 1.0]])

    def constraint_grad_theta(self, g, thetas) -> np.ndarray:
        _, _, w, root, _ = self._spectral_parts(g, thetas)
        da = 0.5 + w / (2.0 * root)  # d constraint / d a
        dd = 0.5 - w / (2.0 * root)
        db = self.eps_rate / (2.0 * root)
        n = root.size
        out = np.empty((n, 1, 4))
        out[:, 0, 0] = da * self.s_t0  # beta_a enters a through s(t0)
        out[:, 0, 1] = db * self.s_t0
        out[:, 0, 2] = -da
        out[:, 0, 3] = -dd
        return out

    def strict_start(self, thetas: np.ndarray) -> np.ndarray | None:
        """Constraints decrease in g, so feasibility peaks at the box corner.

        When feasible, prefer an interior point near the constraint region
        over the corner (whose cost is huge), which saves Newton iterations.
        """
        corner = self.box_hi - 1e-7
        if not float(self.constraints(corner, thetas).max()) < -1e-12:
            return None
        a0, b, d0 = self._entries(thetas)
        margin = math.sqrt(float(np.max(b)) * self.eps_rate) + 1e-4
        interior = np.array(
            [float(np.max(a0)) + self.alpha + margin, float(np.max(d0)) + self.alpha + margin]
        )
        interior = np.minimum(np.maximum(interior, self.box_lo + 1e-7), corner)
        if float(self.constraints(interior, thetas).max()) < -1e-12:
            return interior
        return corner


@dataclass
class DoseProblem:
    """Smallest dose fraction meeting exposure while bounding peak concentration.

    Decision g in [0, 1] scales the reference dose. Constraint 1 is toxicity
    (peak concentration at most c_thresh), constraint 2 is efficacy (area
    under the curve at least auc_min); both are linear in g per sample.
    """

    c_thresh: float
    auc_min: float
    cost_slope: float = pk_mod.COST_SLOPE
    d0: float = pk_mod.D0

    dim_g = 1
    m = 2

    def __post_init__(self):
        self.box_lo = np.zeros(1)
        self.box_hi = np.ones(1)

    @classmethod
    def with_calibrated_thresholds(cls) -> "DoseProblem":
        c_thresh, auc_min = pk_mod.calibrated_thresholds()
        return cls(c_thresh=c_thresh, auc_min=auc_min)

    def cost(self, g) -> float:
        return self.cost_slope * float(g[0])

    def cost_grad(self, g) -> np.ndarray:
        return np.array([self.cost_slope])

    def cost_hess(self, g) -> np.ndarray:
        return np.zeros((1, 1))

    def _coeffs(self, thetas: np.ndarray):
        th = np.atleast_2d(np.asarray(thetas, dtype=float))
        ka, ke, vol = th[:, 0], th[:, 1], th[:, 2]
        cmax_per_g = self.d0 / vol * pk_mod.cmax_ratio(ka, ke)
        auc_per_g = self.d0 / (vol * ke)
        return cmax_per_g, auc_per_g

    def constraints(self, g, thetas) -> np.ndarray:
        cmax_per_g, auc_per_g = self._coeffs(thetas)
        gval = float(g[0])
        return np.stack(
            [gval * cmax_per_g - self.c_thresh, self.auc_min - gval * auc_per_g], axis=1
        )

    def constraint_grad_g(self, g, thetas) -> np.ndarray:
        cmax_per_g, auc_per_g = self._coeffs(thetas)
        return np.stack([cmax_per_g[:, None], -auc_per_g[:, None]], axis=1)

    def constraint_hess_g(self, g, thetas, w_ij) -> np.ndarray:
        return None  # both constraints are linear in g

    def constraint_grad_theta(self, g, thetas) -> np.ndarray:
        th = np.atleast_2d(np.asarray(thetas, dtype=float))
        ka, ke, vol = th[:, 0], th[:, 1], th[:, 2]
        gval = float(g[0])
        r = pk_mod.cmax_ratio(ka, ke)
        dr_dka, dr_dke = pk_mod.cmax_ratio_grads(ka, ke)
        out = np.empty((th.shape[0], 2, 3))
        out[:, 0, 0] = gval * self.d0 / vol * dr_dka
        out[:, 0, 1] = gval * self.d0 / vol * dr_dke
        out[:, 0, 2] = -gval * self.d0 * r / vol**2
        out[:, 1, 0] = 0.0
        out[:, 1, 1] = gval * self.d0 / (vol * ke**2)
        out[:, 1, 2] = gval * self.d0 / (vol**2 * ke)
        return out

    def strict_start(self, thetas: np.ndarray) -> np.ndarray | None:
        cmax_per_g, auc_per_g = self._coeffs(thetas)
        lo = max(float(np.max(self.auc_min / auc_per_g)), 0.0)
        hi = min(float(np.min(self.c_thresh / cmax_per_g)), 1.0)
        if lo >= hi - 1e-12:
            return None
        return np.array([0.5 * (lo + hi)])


@dataclass
class LinearThetaProblem:
    """Synthetic scalar-decision problem with c(g, theta) = w . theta - g.

    The constraint depends on theta only through the fixed direction ``w``;
    with ``w`` a basis vector this realizes the task-subspace structure used
    by the null-space checks. Cost is a convex quadratic pulled toward
    ``g_ref``.
    """

    w: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))
    g_ref: float = 0.0
    box: tuple[float, float] = (-50.0, 50.0)

    dim_g = 1
    m = 1

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        self.box_lo = np.array([self.box[0]])
        self.box_hi = np.array([self.box[1]])

    def cost(self, g) -> float:
        return float((g[0] - self.g_ref) ** 2)

    def cost_grad(self, g) -> np.ndarray:
        return np.array([2.0 * (g[0] - self.g_ref)])

    def cost_hess(self, g) -> np.ndarray:
        return np.array([[2.0]])

    def constraints(self, g, thetas) -> np.ndarray:
        th = np.atleast_2d(np.asarray(thetas, dtype=float))
        return (th @ self.w - float(g[0]))[:, None]

    def constraint_grad_g(self, g, thetas) -> np.ndarray:
        th = np.atleast_2d(np.asarray(thetas, dtype=float))
        return np.full((th.shape[0], 1, 1), -1.0)

    def constraint_hess_g(self, g, thetas, w_ij) -> np.ndarray:
        return None

    def constraint_grad_theta(self, g, thetas) -> np.ndarray:
        th = np.atleast_2d(np.asarray(thetas, dtype=float))
        out = np.empty((th.shape[0], 1, self.w.size))
        out[:, 0, :] = self.w
        return out

    def strict_start(self, thetas: np.ndarray) -> np.ndarray | None:
        th = np.atleast_2d(np.asarray(thetas, dtype=float))
        need = float(np.max(th @ self.w))
        g0 = max(need + 1.0, self.g_ref)
        if g0 >= self.box_hi[0]:
            return None
        return np.array([g0])


@dataclass
class UnconstrainedQuadratic:
    """m = 0 control: box-interior quadratic, used by exactness tests."""

    center: np.ndarray = field(default_factory=lambda: np.array([0.3, -0.2]))
    box: tuple[float, float] = (-10.0, 10.0)

    m = 0

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.dim_g = self.center.size
        self.box_lo = np.full(self.dim_g, self.box[0])
        self.box_hi = np.full(self.dim_g, self.box[1])

    def cost(self, g) -> float:
        d = g - self.center
        return float(d @ d)

    def cost_grad(self, g) -> np.ndarray:
        return 2.0 * (g - self.center)

    def cost_hess(self, g) -> np.ndarray:
        return 2.0 * np.eye(self.dim_g)

    def constraints(self, g, thetas) -> np.ndarray:
        th = np.atleast_2d(np.asarray(thetas, dtype=float))
        return np.zeros((th.shape[0], 0))

    def constraint_grad_g(self, g, thetas) -> np.ndarray:
        th = np.atleast_2d(np.asarray(thetas, dtype=float))
        return np.zeros((th.shape[0], 0, self.dim_g))

    def constraint_hess_g(self, g, thetas, w_ij):
        return None

    def constraint_grad_theta(self, g, thetas) -> np.ndarray:
        th = np.atleast_2d(np.asarray(thetas, dtype=float))
        return np.zeros((th.shape[0], 0, th.shape[1]))

    def strict_start(self, thetas: np.ndarray) -> np.ndarray:
        return 0.5 * (self.box_lo + self.box_hi)


def generic_strict_start(problem, thetas: np.ndarray) -> np.ndarray | None:
    """Phase-1 fallback for problems without an analytic start."""
    from .core import _ScenarioBlock  # local import to avoid a cycle

    n = problem.dim_g
    blocks = [box_block(n, problem.box_lo, problem.box_hi)]
    if problem.m > 0:
        blocks.append(_ScenarioBlock(problem, np.atleast_2d(thetas)))
    x0 = 0.5 * (problem.box_lo + problem.box_hi)
    return find_strict_point(blocks, x0)

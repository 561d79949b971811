"""Inner distance engines.

Exact OT between uniform equal-size measures reduces to a linear assignment
(the optimal coupling is a scaled permutation), entropic OT runs a log-domain
Sinkhorn loop, and the sliced distance averages closed-form 1-d costs over
random projection directions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInputError
from .measures import CostMatrix, DiscreteMeasure, TransportPlan, as_cost_values

SINKHORN_TOL = 1e-6
SINKHORN_MAX_ITER = 10_000


@dataclass(frozen=True)
class ExactW:
    """Wasserstein-p via exact assignment between equal-size uniform measures."""

    p: float = 2.0

    def __post_init__(self):
        if self.p < 1:
            raise InvalidInputError(f"order p must be >= 1, got {self.p}")


@dataclass(frozen=True)
class EntropicW:
    """Entropic Wasserstein-p solved with Sinkhorn at regularization tau."""

    p: float = 2.0
    tau: float = 0.05

    def __post_init__(self):
        if self.p < 1:
            raise InvalidInputError(f"order p must be >= 1, got {self.p}")
        if self.tau <= 0:
            raise InvalidInputError(f"tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class Sliced:
    """Sliced Wasserstein-p over n_projections random directions."""

    p: float = 2.0
    n_projections: int = 100

    def __post_init__(self):
        if self.p < 1:
            raise InvalidInputError(f"order p must be >= 1, got {self.p}")
        if self.n_projections < 1:
            raise InvalidInputError(f"n_projections must be >= 1, got {self.n_projections}")


InnerMetric = Union[ExactW, EntropicW, Sliced]


@dataclass(frozen=True)
class SolverReport:
    """Solver outcome: `objective` is the transport cost <pi, C>, pre-root."""

    objective: float
    iterations: int
    converged: bool
    marginal_residual: float
    regularized_objective: Optional[float] = None


def _pairwise_values(A: DiscreteMeasure, B: DiscreteMeasure, p: float) -> np.ndarray:
    if A.dim != B.dim:
        raise InvalidInputError(f"ambient dimensions differ: {A.dim} vs {B.dim}")
    diff = A.support.points[:, None, :] - B.support.points[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    if p == 2.0:
        return sq
    return np.power(sq, p / 2.0)


def pairwise_cost(A: DiscreteMeasure, B: DiscreteMeasure, p: float = 2.0) -> CostMatrix:
    """Matrix of ||x_i - y_j||^p between the supports of A and B."""
    return CostMatrix(_pairwise_values(A, B, p))


def _assignment_plan(values: np.ndarray) -> tuple[TransportPlan, float]:
    # core of the exact uniform solver, used on internally built costs
    a = values.shape[0]
    rows, cols = linear_sum_assignment(values)
    objective = float(values[rows, cols].sum() / a)
    uniform = np.full(a, 1.0 / a)
    plan = TransportPlan((a, a), rows, cols, np.full(a, 1.0 / a), uniform, uniform)
    return plan, objective


def exact_ot_uniform(C) -> tuple[TransportPlan, SolverReport]:
    """Optimal coupling between uniform measures over a square cost matrix.

    The optimum is (1/a) times a permutation matrix; the permutation is found
    by the shortest-augmenting-path assignment solver. Ties between equal-cost
    assignments are broken by the solver's deterministic scan order.
    """
    values = as_cost_values(C)
    a, b = values.shape
    if a != b:
        raise InvalidInputError(f"exact uniform OT needs a square cost matrix, got {a}x{b}")
    plan, objective = _assignment_plan(values)
    report = SolverReport(objective, iterations=0, converged=True, marginal_residual=0.0)
    return plan, report


def _lse(A: np.ndarray, axis: int) -> np.ndarray:
    # scipy's logsumexp carries too much overhead for the small matrices
    # solved here; inputs are finite by construction.
    m = A.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(A - m).sum(axis=axis, keepdims=True))).squeeze(axis=axis)


_ANNEAL_FACTOR = 0.5
_ANNEAL_SWEEPS = 15


def sinkhorn(
    C,
    a_weights,
    b_weights,
    tau: float,
    tol: float = SINKHORN_TOL,
    max_iter: int = SINKHORN_MAX_ITER,
) -> tuple[TransportPlan, SolverReport]:
    """Entropic OT plan diag(u) exp(-C/tau) diag(v) via log-domain Sinkhorn.

    When tau is small against the cost scale, the regularization is annealed
    geometrically down to tau with the dual potentials carried across stages
    (potentials are kept in cost units so a warm start survives the change);
    plain Sinkhorn stalls with an O(1/iterations) residual in that regime.
    All updates are log-sum-exp, so no cost/tau combination overflows.

    Stops once the L1 row-marginal residual at the target tau drops below
    `tol` (column sums are exact right after each column update) or when the
    total sweep budget `max_iter` runs out, which is flagged via `converged`.
    The report carries the transport cost <pi, C> and, separately, the
    regularized objective <pi, C> + tau*KL(pi | a x b).
    """
    values = as_cost_values(C)
    if tau <= 0:
        raise InvalidInputError(f"tau must be positive, got {tau}")
    a = np.asarray(a_weights, dtype=np.float64).ravel()
    b = np.asarray(b_weights, dtype=np.float64).ravel()
    if a.shape[0] != values.shape[0] or b.shape[0] != values.shape[1]:
        raise InvalidInputError("marginal lengths do not match cost matrix shape")
    for w, name in ((a, "row"), (b, "column")):
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise InvalidInputError(f"{name} weights must be strictly positive and sum to 1")
    return _sinkhorn_values(values, a, b, tau, tol, max_iter)


def _sinkhorn_values(values, a, b, tau, tol, max_iter) -> tuple[TransportPlan, SolverReport]:
    log_a = np.log(a)
    log_b = np.log(b)
    neg = -values
    alpha = np.zeros_like(log_a)  # row potential, cost units
    beta = np.zeros_like(log_b)

    stages = []
    lam = float(values.max()) * _ANNEAL_FACTOR
    while lam > tau:
        stages.append(lam)
        lam *= _ANNEAL_FACTOR

    iterations = 0
    converged = False
    residual = np.inf

    for lam in stages:
        for _ in range(_ANNEAL_SWEEPS):
            if iterations >= max_iter:
                break
            alpha = lam * (log_a - _lse((neg + beta[None, :]) / lam, axis=1))
            beta = lam * (log_b - _lse((neg + alpha[:, None]) / lam, axis=0))
            iterations += 1

    while iterations < max_iter:
        alpha = tau * (log_a - _lse((neg + beta[None, :]) / tau, axis=1))
        scaled = (neg + alpha[:, None]) / tau
        beta = tau * (log_b - _lse(scaled, axis=0))
        iterations += 1
        row_sums = np.exp(_lse(scaled + (beta / tau)[None, :], axis=1))
        residual = float(np.abs(row_sums - a).sum())
        if residual <= tol:
            converged = True
            break

    log_pi = (neg + alpha[:, None] + beta[None, :]) / tau
    if not np.isfinite(residual):
        row_sums = np.exp(_lse(log_pi, axis=1))
        residual = float(np.abs(row_sums - a).sum())
    pi = np.exp(log_pi)
    objective = float((pi * values).sum())
    kl = float((pi * (log_pi - log_a[:, None] - log_b[None, :])).sum())
    plan = TransportPlan.from_dense(pi, a, b)
    report = SolverReport(
        objective,
        iterations=iterations,
        converged=converged,
        marginal_residual=residual,
        regularized_objective=objective + tau * kl,
    )
    return plan, report


def round_to_marginals(pi: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Project an almost-feasible positive coupling onto Pi(a, b).

    Scale rows and columns down where they overshoot, then patch the mass
    deficit with a rank-one correction. The result has exact marginals (up
    to roundoff), so its transport cost never undercuts the true optimum;
    the cost moves by at most the L1 marginal residual times max cost.
    """
    pi = np.asarray(pi, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    rows = pi.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(rows > 0, np.minimum(a / rows, 1.0), 1.0)
    pi = pi * scale[:, None]
    cols = pi.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(cols > 0, np.minimum(b / cols, 1.0), 1.0)
    pi = pi * scale[None, :]
    err_a = np.maximum(a - pi.sum(axis=1), 0.0)
    err_b = np.maximum(b - pi.sum(axis=0), 0.0)
    total = err_a.sum()
    if total > 0:
        pi = pi + np.outer(err_a, err_b) / total
    return pi


def wasserstein_1d(x, y, p: float = 2.0) -> float:
    """Closed-form W_p between equal-size 1-d samples by quantile matching."""
    xs = np.sort(np.asarray(x, dtype=np.float64).ravel())
    ys = np.sort(np.asarray(y, dtype=np.float64).ravel())
    if xs.shape[0] != ys.shape[0]:
        raise InvalidInputError(f"sample sizes differ: {xs.shape[0]} vs {ys.shape[0]}")
    return float(np.mean(np.abs(xs - ys) ** p) ** (1.0 / p))


def sliced_wasserstein(
    A: DiscreteMeasure,
    B: DiscreteMeasure,
    p: float = 2.0,
    n_projections: int = 100,
    rng: np.random.Generator | None = None,
) -> float:
    """SW_p: average 1-d W_p^p over random unit directions, then 1/p root.

    Directions are standard Gaussian vectors normalized to the unit sphere,
    which is exactly uniform in any dimension. Deterministic given `rng`.
    """
    if A.n != B.n:
        raise InvalidInputError(f"support counts differ: {A.n} vs {B.n}")
    if A.dim != B.dim:
        raise InvalidInputError(f"ambient dimensions differ: {A.dim} vs {B.dim}")
    if n_projections < 1:
        raise InvalidInputError(f"n_projections must be >= 1, got {n_projections}")
    if A.dim == 1:
        # S^0 is {-1, +1} and |(-x) - (-y)| = |x - y|: every direction gives
        # the same value, so the average collapses to the 1-d distance.
        return wasserstein_1d(A.support.points[:, 0], B.support.points[:, 0], p)
    if rng is None:
        raise InvalidInputError("sliced_wasserstein needs an rng for projection directions")
    theta = rng.standard_normal((n_projections, A.dim))
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)
    proj_a = np.sort(A.support.points @ theta.T, axis=0)
    proj_b = np.sort(B.support.points @ theta.T, axis=0)
    per_direction = np.mean(np.abs(proj_a - proj_b) ** p, axis=0)
    return float(np.mean(per_direction) ** (1.0 / p))


def inner_distance(
    A: DiscreteMeasure,
    B: DiscreteMeasure,
    metric: InnerMetric,
    rng: np.random.Generator | None = None,
) -> tuple[float, TransportPlan | None]:
    """Dispatch to the solver for `metric`; returns the distance and, for the
    plan-producing metrics, the optimal coupling."""
    if A.n != B.n:
        raise InvalidInputError(f"support counts differ: {A.n} vs {B.n}")
    if isinstance(metric, ExactW):
        plan, objective = _assignment_plan(_pairwise_values(A, B, metric.p))
        return objective ** (1.0 / metric.p), plan
    if isinstance(metric, EntropicW):
        plan, report = _sinkhorn_values(
            _pairwise_values(A, B, metric.p), A.weights, B.weights,
            metric.tau, SINKHORN_TOL, SINKHORN_MAX_ITER,
        )
        return report.objective ** (1.0 / metric.p), plan
    if isinstance(metric, Sliced):
        return sliced_wasserstein(A, B, metric.p, metric.n_projections, rng), None
    raise InvalidInputError(f"unknown inner metric: {metric!r}")

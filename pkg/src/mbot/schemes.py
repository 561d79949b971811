"""Mini-batch transport schemes.

Batches of size m are drawn from each cloud (without replacement inside a
batch, batches may overlap), every pair of batches gets an inner OT distance,
and the k x k cost matrix is reduced to a loss in one of three ways:

* averaging all pairs uniformly,
* coupling the two sets of batches by an exact outer OT problem,
* coupling them by an entropic outer problem, which interpolates between
  the two as the regularization moves from 0 to infinity.

Inner plans can be scattered back through the batch indices into a sparse
coupling between the original clouds, weighted by the outer coupling.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.sparse

from . import seeding
from .errors import ConfigurationError, ConsistencyError, InvalidInputError
from .measures import (
    CostMatrix,
    DiscreteMeasure,
    MiniBatchIndex,
    PointCloud,
    TransportPlan,
    as_cost_values,
    batch_measure,
)
from .solvers import (
    SINKHORN_MAX_ITER,
    SINKHORN_TOL,
    ExactW,
    InnerMetric,
    Sliced,
    exact_ot_uniform,
    inner_distance,
    round_to_marginals,
    sinkhorn,
)


@dataclass(frozen=True)
class Average:
    """Uniform average over all batch pairs (the m-OT scheme)."""


@dataclass(frozen=True)
class ExactOuter:
    """Exact OT coupling between the two sets of batches (BoMb-OT)."""


@dataclass(frozen=True)
class EntropicOuter:
    """Entropic outer coupling at regularization lam (eBoMb-OT)."""

    lam: float = 1.0

    def __post_init__(self):
        if self.lam <= 0:
            raise InvalidInputError(f"lam must be positive, got {self.lam}")


OuterScheme = Union[Average, ExactOuter, EntropicOuter]


@dataclass(frozen=True)
class SchemeConfig:
    """All mini-batch hyperparameters.

    `seed` drives both batch sampling and the per-cell streams of randomized
    inner metrics. `seed_x` / `seed_y` override the derived per-side batch
    seeds; passing the same value for both forces identical batch index
    lists when the clouds have equal size, and swapping them lets a caller
    reproduce the same batch pairs with the arguments exchanged.
    """

    k: int
    m: int
    inner: InnerMetric = field(default_factory=ExactW)
    outer: OuterScheme = field(default_factory=ExactOuter)
    seed: int = 0
    aggregate_plan: bool = False
    seed_x: Optional[int] = None
    seed_y: Optional[int] = None

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError(f"k must be >= 1, got {self.k}")
        if self.m < 1:
            raise InvalidInputError(f"m must be >= 1, got {self.m}")

    def batch_seed_x(self) -> int:
        return self.seed_x if self.seed_x is not None else seeding.derive_seed(self.seed, seeding.BATCH_X)

    def batch_seed_y(self) -> int:
        return self.seed_y if self.seed_y is not None else seeding.derive_seed(self.seed, seeding.BATCH_Y)


@dataclass(frozen=True)
class MbResult:
    """Scheme output: scalar loss, outer coupling over batches, the batch
    index lists, the k x k cost matrix, and optionally the aggregated plan
    between the original clouds."""

    loss: float
    outer_plan: TransportPlan
    aggregated_plan: Optional[TransportPlan]
    batches_x: list[MiniBatchIndex]
    batches_y: list[MiniBatchIndex]
    cost_matrix: CostMatrix


def _sample_side(n: int, k: int, m: int, seed: int) -> list[MiniBatchIndex]:
    rng = seeding.derive_rng(seed)
    return [MiniBatchIndex(rng.choice(n, size=m, replace=False), n) for _ in range(k)]


def sample_batches(n: int, cfg: SchemeConfig) -> tuple[list[MiniBatchIndex], list[MiniBatchIndex]]:
    """Draw k batches of m distinct indices for each side, deterministically.

    Indices inside a batch never repeat; distinct batches are drawn
    independently and may overlap.
    """
    if cfg.m > n:
        raise InvalidInputError(f"batch size {cfg.m} exceeds population size {n}")
    return (
        _sample_side(n, cfg.k, cfg.m, cfg.batch_seed_x()),
        _sample_side(n, cfg.k, cfg.m, cfg.batch_seed_y()),
    )


def batch_cost_matrix(
    data_x: PointCloud,
    data_y: PointCloud,
    batches_x: list[MiniBatchIndex],
    batches_y: list[MiniBatchIndex],
    inner: InnerMetric,
    seed: int = 0,
    keep_plans: bool = False,
    threads: int = 1,
) -> tuple[CostMatrix, list[list[Optional[TransportPlan]]]]:
    """Inner distance for every batch pair; optionally keep the inner plans.

    Each cell (i, j) draws from its own stream derived from (seed, i, j), so
    the result is bit-identical no matter how cells are scheduled.
    """
    kx, ky = len(batches_x), len(batches_y)
    measures_x = [batch_measure(data_x, b) for b in batches_x]
    measures_y = [batch_measure(data_y, b) for b in batches_y]
    randomized = isinstance(inner, Sliced)

    def solve_cell(cell: tuple[int, int]):
        i, j = cell
        rng = seeding.derive_rng(seed, seeding.INNER_CELL, i, j) if randomized else None
        return inner_distance(measures_x[i], measures_y[j], inner, rng)

    cells = list(itertools.product(range(kx), range(ky)))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(solve_cell, cells))
    else:
        results = [solve_cell(c) for c in cells]

    values = np.zeros((kx, ky))
    plans: list[list[Optional[TransportPlan]]] = [[None] * ky for _ in range(kx)]
    for (i, j), (dist, plan) in zip(cells, results):
        values[i, j] = dist
        if keep_plans:
            plans[i][j] = plan
    return CostMatrix(values), plans


def _uniform(k: int) -> np.ndarray:
    return np.full(k, 1.0 / k)


def mot_loss(C) -> tuple[float, TransportPlan]:
    """Mean of all batch-pair distances; outer coupling is uniform 1/k^2."""
    values = as_cost_values(C)
    k, k2 = values.shape
    if k != k2:
        raise InvalidInputError(f"outer cost matrix must be square, got {k}x{k2}")
    plan = TransportPlan.from_dense(np.full((k, k), 1.0 / (k * k)), _uniform(k), _uniform(k))
    return float(values.mean()), plan


def bomb_loss(C) -> tuple[float, TransportPlan]:
    """Optimal outer coupling: exact OT between uniform measures on batches."""
    plan, report = exact_ot_uniform(C)
    return report.objective, plan


def ebomb_loss(
    C,
    lam: float,
    tol: float = SINKHORN_TOL,
    max_iter: int = SINKHORN_MAX_ITER,
) -> tuple[float, TransportPlan]:
    """Entropic outer coupling; reported loss is <gamma, C> without the
    regularization term, so it interpolates bomb_loss -> mot_loss in lam.

    The Sinkhorn coupling is rounded onto exact uniform marginals before the
    loss is taken: an infeasible coupling's cost can undercut the exact
    optimum by its marginal residual times the cost scale, which would break
    the bomb <= ebomb <= mot bracketing that makes the interpolation usable.
    """
    values = as_cost_values(C)
    k, k2 = values.shape
    if k != k2:
        raise InvalidInputError(f"outer cost matrix must be square, got {k}x{k2}")
    u = _uniform(k)
    plan, _ = sinkhorn(values, u, u, lam, tol=tol, max_iter=max_iter)
    gamma = round_to_marginals(plan.dense(), u, u)
    return float((gamma * values).sum()), TransportPlan.from_dense(gamma, u, u)


def aggregate_plan(
    outer: TransportPlan,
    inner_plans: list[list[Optional[TransportPlan]]],
    batches_x: list[MiniBatchIndex],
    batches_y: list[MiniBatchIndex],
    n_rows: int,
    n_cols: Optional[int] = None,
) -> TransportPlan:
    """Scatter outer-weighted inner plans into a sparse coupling of the
    original clouds. Mass landing on a repeated (row, col) pair accumulates;
    the total stays 1 because the outer coupling and each inner plan sum to 1.
    """
    if n_cols is None:
        n_cols = n_rows
    rows_parts, cols_parts, mass_parts = [], [], []
    for bi, bj, g in zip(outer.rows, outer.cols, outer.mass):
        if g == 0.0:
            continue
        plan_ij = inner_plans[bi][bj]
        if plan_ij is None:
            raise ConsistencyError(
                f"outer coupling puts mass {g} on batch pair ({bi}, {bj}) "
                "but no inner plan was kept for it"
            )
        rows_parts.append(batches_x[bi].indices[plan_ij.rows])
        cols_parts.append(batches_y[bj].indices[plan_ij.cols])
        mass_parts.append(g * plan_ij.mass)
    coo = scipy.sparse.coo_array(
        (np.concatenate(mass_parts), (np.concatenate(rows_parts), np.concatenate(cols_parts))),
        shape=(n_rows, n_cols),
    ).tocsr().tocoo()
    realized_rows = np.zeros(n_rows)
    np.add.at(realized_rows, coo.row, coo.data)
    realized_cols = np.zeros(n_cols)
    np.add.at(realized_cols, coo.col, coo.data)
    return TransportPlan((n_rows, n_cols), coo.row, coo.col, coo.data, realized_rows, realized_cols)


def _reduce_outer(C: CostMatrix, outer: OuterScheme) -> tuple[float, TransportPlan]:
    if isinstance(outer, Average):
        return mot_loss(C)
    if isinstance(outer, ExactOuter):
        return bomb_loss(C)
    if isinstance(outer, EntropicOuter):
        return ebomb_loss(C, outer.lam)
    raise InvalidInputError(f"unknown outer scheme: {outer!r}")


def mb_distance(X: PointCloud, Y: PointCloud, cfg: SchemeConfig, threads: int = 1) -> MbResult:
    """Full mini-batch pipeline: sample batches, build the batch cost matrix,
    reduce it with the configured outer scheme, optionally aggregate the
    inner plans. Deterministic given cfg.seed."""
    if not isinstance(X, PointCloud):
        X = PointCloud(X)
    if not isinstance(Y, PointCloud):
        Y = PointCloud(Y)
    if cfg.m > min(X.n, Y.n):
        raise InvalidInputError(
            f"batch size {cfg.m} exceeds the smaller cloud size {min(X.n, Y.n)}"
        )
    if cfg.aggregate_plan and isinstance(cfg.inner, Sliced):
        raise ConfigurationError(
            "the sliced inner metric produces no transport plan, so plan aggregation "
            "is unavailable; use an exact or entropic inner metric"
        )
    batches_x = _sample_side(X.n, cfg.k, cfg.m, cfg.batch_seed_x())
    batches_y = _sample_side(Y.n, cfg.k, cfg.m, cfg.batch_seed_y())
    C, plans = batch_cost_matrix(
        X, Y, batches_x, batches_y, cfg.inner,
        seed=cfg.seed, keep_plans=cfg.aggregate_plan, threads=threads,
    )
    loss, outer_plan = _reduce_outer(C, cfg.outer)
    aggregated = None
    if cfg.aggregate_plan:
        aggregated = aggregate_plan(outer_plan, plans, batches_x, batches_y, X.n, Y.n)
    return MbResult(loss, outer_plan, aggregated, batches_x, batches_y, C)


EXHAUSTIVE_MAX_N = 8
EXHAUSTIVE_MAX_M = 3


def exhaustive_mb_distance(
    X: PointCloud,
    Y: PointCloud,
    m: int,
    inner: InnerMetric,
    outer: OuterScheme = ExactOuter(),
    seed: int = 0,
) -> MbResult:
    """Scheme loss over ALL C(n, m) batches of each cloud instead of sampled
    ones. Only feasible for tiny instances; used by the metric test suites."""
    if not isinstance(X, PointCloud):
        X = PointCloud(X)
    if not isinstance(Y, PointCloud):
        Y = PointCloud(Y)
    if X.n != Y.n:
        raise InvalidInputError("exhaustive mode needs equal-size clouds")
    if X.n > EXHAUSTIVE_MAX_N or m > EXHAUSTIVE_MAX_M:
        raise InvalidInputError(
            f"exhaustive enumeration is limited to n <= {EXHAUSTIVE_MAX_N}, "
            f"m <= {EXHAUSTIVE_MAX_M}; got n={X.n}, m={m}"
        )
    subsets = [np.array(c, dtype=np.int64) for c in itertools.combinations(range(X.n), m)]
    batches_x = [MiniBatchIndex(s, X.n) for s in subsets]
    batches_y = [MiniBatchIndex(s, Y.n) for s in subsets]
    C, plans = batch_cost_matrix(X, Y, batches_x, batches_y, inner, seed=seed)
    loss, outer_plan = _reduce_outer(C, outer)
    return MbResult(loss, outer_plan, None, batches_x, batches_y, C)

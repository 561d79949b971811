"""Point clouds, empirical measures, mini-batch index sets and transport plans.

These are the domain types every other module builds on. All of them are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

SIMPLEX_ATOL = 1e-12
PLAN_MASS_ATOL = 1e-9


def _as_float_matrix(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-d array, got ndim={arr.ndim}")
    return arr


@dataclass(frozen=True)
class PointCloud:
    """n points in R^N, one per row. Coordinates must be finite."""

    points: np.ndarray

    def __post_init__(self):
        pts = _as_float_matrix(self.points, "points")
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InvalidInputError(f"point cloud must be non-empty, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("point cloud contains non-finite coordinates")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class DiscreteMeasure:
    """A point cloud with a weight vector on the probability simplex."""

    support: PointCloud
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel().copy()
        if w.shape[0] != self.support.n:
            raise InvalidInputError(
                f"weights length {w.shape[0]} does not match support count {self.support.n}"
            )
        if np.any(w < 0):
            raise InvalidInputError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > SIMPLEX_ATOL:
            raise InvalidInputError(f"weights sum to {w.sum()!r}, expected 1 within {SIMPLEX_ATOL}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.support.n

    @property
    def dim(self) -> int:
        return self.support.dim


@dataclass(frozen=True)
class MiniBatchIndex:
    """m distinct indices into a parent point cloud of size n."""

    indices: np.ndarray
    n: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel().copy()
        if idx.shape[0] < 1:
            raise InvalidInputError("batch must contain at least one index")
        if np.any(idx < 0) or np.any(idx >= self.n):
            raise InvalidInputError(f"batch indices out of range [0, {self.n})")
        if np.unique(idx).shape[0] != idx.shape[0]:
            raise InvalidInputError("batch indices must be pairwise distinct")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @property
    def m(self) -> int:
        return self.indices.shape[0]


def empirical_measure(points: PointCloud) -> DiscreteMeasure:
    """Uniform measure putting mass 1/n on each point."""
    if not isinstance(points, PointCloud):
        points = PointCloud(points)
    return DiscreteMeasure(points, np.full(points.n, 1.0 / points.n))


def batch_measure(data: PointCloud, batch: MiniBatchIndex) -> DiscreteMeasure:
    """Uniform measure on the m points of `data` selected by `batch`."""
    if batch.n != data.n:
        raise InvalidInputError(
            f"batch was drawn from a cloud of size {batch.n}, data has {data.n} points"
        )
    return empirical_measure(PointCloud(data.points[batch.indices]))


@dataclass(frozen=True)
class TransportPlan:
    """Sparse nonnegative coupling stored as coordinate triplets.

    `row_marginal` / `col_marginal` are the marginals the producing solver
    aimed for; `validate_plan` reports how closely the realized sums match.
    The constructor is deliberately permissive (it only checks shapes) so
    that invalid plans can be built and fed to `validate_plan` in tests.
    """

    shape: tuple[int, int]
    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64).ravel().copy()
        cols = np.asarray(self.cols, dtype=np.int64).ravel().copy()
        mass = np.asarray(self.mass, dtype=np.float64).ravel().copy()
        if not (rows.shape == cols.shape == mass.shape):
            raise InvalidInputError("rows, cols and mass must have identical lengths")
        a, b = self.shape
        if rows.size and (rows.min() < 0 or rows.max() >= a):
            raise InvalidInputError(f"row indices out of range [0, {a})")
        if cols.size and (cols.min() < 0 or cols.max() >= b):
            raise InvalidInputError(f"col indices out of range [0, {b})")
        rm = np.asarray(self.row_marginal, dtype=np.float64).ravel().copy()
        cm = np.asarray(self.col_marginal, dtype=np.float64).ravel().copy()
        if rm.shape[0] != a or cm.shape[0] != b:
            raise InvalidInputError("declared marginals do not match plan shape")
        for arr in (rows, cols, mass, rm, cm):
            arr.setflags(write=False)
        object.__setattr__(self, "shape", (int(a), int(b)))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "row_marginal", rm)
        object.__setattr__(self, "col_marginal", cm)

    @classmethod
    def from_dense(cls, matrix, row_marginal, col_marginal) -> "TransportPlan":
        """Build a plan from a dense coupling, keeping strictly positive cells."""
        dense = np.asarray(matrix, dtype=np.float64)
        if dense.ndim != 2:
            raise InvalidInputError("coupling matrix must be 2-d")
        rows, cols = np.nonzero(dense > 0)
        return cls(dense.shape, rows, cols, dense[rows, cols], row_marginal, col_marginal)

    @property
    def nnz(self) -> int:
        return int(self.mass.shape[0])

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    def dense(self) -> np.ndarray:
        """Dense view; entries at repeated (row, col) pairs accumulate."""
        out = np.zeros(self.shape)
        np.add.at(out, (self.rows, self.cols), self.mass)
        return out

    def row_sums(self) -> np.ndarray:
        out = np.zeros(self.shape[0])
        np.add.at(out, self.rows, self.mass)
        return out

    def col_sums(self) -> np.ndarray:
        out = np.zeros(self.shape[1])
        np.add.at(out, self.cols, self.mass)
        return out


@dataclass(frozen=True)
class CostMatrix:
    """Dense a x b matrix of finite, nonnegative pairwise costs."""

    values: np.ndarray

    def __post_init__(self):
        vals = _as_float_matrix(self.values, "cost matrix")
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("cost matrix contains non-finite entries")
        if np.any(vals < 0):
            raise InvalidInputError("cost matrix contains negative entries")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def as_cost_values(C) -> np.ndarray:
    """Accept a CostMatrix or array-like, return validated ndarray values."""
    if isinstance(C, CostMatrix):
        return C.values
    return CostMatrix(C).values


@dataclass(frozen=True)
class PlanCheck:
    """Residual report from validate_plan; `ok` is the verdict at `tol`."""

    ok: bool
    tol: float
    mass_residual: float
    negativity_residual: float
    row_residual: float
    col_residual: float


def validate_plan(plan: TransportPlan, tol: float) -> PlanCheck:
    """Check mass, nonnegativity and marginals of a plan against `tol`.

    Residuals are reported regardless of the verdict. Marginal residuals are
    max-abs deviations of realized row/column sums from the declared targets,
    which the Sinkhorn stopping rule (L1) upper-bounds.
    """
    mass_residual = abs(plan.total_mass - 1.0)
    negativity_residual = float(max(0.0, -plan.mass.min())) if plan.nnz else 0.0
    row_residual = float(np.abs(plan.row_sums() - plan.row_marginal).max())
    col_residual = float(np.abs(plan.col_sums() - plan.col_marginal).max())
    ok = (
        mass_residual <= tol
        and negativity_residual <= tol
        and row_residual <= tol
        and col_residual <= tol
    )
    return PlanCheck(ok, tol, mass_residual, negativity_residual, row_residual, col_residual)


# ---------------------------------------------------------------------------
# File formats: point clouds and plans as CSV.


def read_point_cloud(path) -> PointCloud:
    """Read a CSV point cloud: one point per row, optional '#' header line."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([float(tok) for tok in line.split(",")])
    if not rows:
        raise InvalidInputError(f"no points found in {path}")
    return PointCloud(np.array(rows))


def write_point_cloud(path, points: PointCloud | np.ndarray) -> None:
    pts = points.points if isinstance(points, PointCloud) else np.asarray(points, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.atleast_2d(pts):
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def write_plan_csv(path, plan: TransportPlan) -> None:
    """Export triplets `row,col,mass`, sorted by (row, col) for stable output."""
    order = np.lexsort((plan.cols, plan.rows))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# row,col,mass\n")
        for i in order:
            fh.write(f"{plan.rows[i]},{plan.cols[i]},{format(plan.mass[i], '.17g')}\n")

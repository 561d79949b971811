import numpy as np
import pytest

from mbot import (
    DiscreteMeasure,
    InvalidInputError,
    MiniBatchIndex,
    PointCloud,
    TransportPlan,
    batch_measure,
    empirical_measure,
    read_point_cloud,
    sinkhorn,
    validate_plan,
    write_plan_csv,
    write_point_cloud,
)


class TestEmpiricalMeasure:
    def test_three_points_uniform(self):
        mu = empirical_measure(PointCloud(np.array([[0.0], [1.0], [2.0]])))
        np.testing.assert_allclose(mu.weights, [1 / 3, 1 / 3, 1 / 3])

    def test_single_point(self):
        mu = empirical_measure(PointCloud(np.array([[5.0, 1.0]])))
        np.testing.assert_array_equal(mu.weights, [1.0])

    def test_hundred_gaussian_draws(self):
        pts = np.random.default_rng(0).normal(size=(100, 3))
        mu = empirical_measure(PointCloud(pts))
        assert mu.weights.shape == (100,)
        np.testing.assert_allclose(mu.weights, 0.01)
        assert abs(mu.weights.sum() - 1.0) < 1e-12

    def test_empty_cloud_rejected(self):
        with pytest.raises(InvalidInputError):
            empirical_measure(np.empty((0, 2)))


class TestBatchMeasure:
    def test_gather_two_of_four(self):
        data = PointCloud(np.array([[0.0], [1.0], [2.0], [3.0]]))
        mu = batch_measure(data, MiniBatchIndex(np.array([0, 2]), 4))
        np.testing.assert_array_equal(mu.support.points, [[0.0], [2.0]])
        np.testing.assert_allclose(mu.weights, [0.5, 0.5])

    def test_single_index(self):
        data = PointCloud(np.array([[0.0], [1.0]]))
        mu = batch_measure(data, MiniBatchIndex(np.array([1]), 2))
        assert mu.n == 1
        np.testing.assert_array_equal(mu.support.points, [[1.0]])

    def test_full_batch_equals_empirical(self):
        data = PointCloud(np.random.default_rng(1).normal(size=(4, 2)))
        full = batch_measure(data, MiniBatchIndex(np.array([0, 1, 2, 3]), 4))
        ref = empirical_measure(data)
        np.testing.assert_array_equal(full.support.points, ref.support.points)
        np.testing.assert_array_equal(full.weights, ref.weights)

    def test_out_of_range_index_rejected(self):
        with pytest.raises(InvalidInputError):
            MiniBatchIndex(np.array([0, 4]), 4)

    def test_duplicate_indices_rejected(self):
        with pytest.raises(InvalidInputError):
            MiniBatchIndex(np.array([1, 1]), 4)

    def test_uniform_weights_always(self):
        rng = np.random.default_rng(7)
        data = PointCloud(rng.normal(size=(20, 3)))
        for _ in range(25):
            m = int(rng.integers(1, 10))
            batch = MiniBatchIndex(rng.choice(20, size=m, replace=False), 20)
            mu = batch_measure(data, batch)
            np.testing.assert_allclose(mu.weights, 1.0 / m)


class TestValidatePlan:
    def test_identity_permutation_plan(self):
        u = np.full(4, 0.25)
        plan = TransportPlan((4, 4), np.arange(4), np.arange(4), u.copy(), u, u)
        assert validate_plan(plan, 1e-9).ok

    def test_negative_entry_flagged(self):
        u = np.full(2, 0.5)
        plan = TransportPlan((2, 2), [0, 0, 1], [0, 1, 1], [0.75, -0.25, 0.5], u, u)
        check = validate_plan(plan, 1e-9)
        assert not check.ok
        assert check.negativity_residual == pytest.approx(0.25)

    def test_sinkhorn_output_validates_at_its_tolerance(self):
        rng = np.random.default_rng(3)
        C = rng.random((6, 6))
        a = np.full(6, 1 / 6)
        plan, report = sinkhorn(C, a, a, tau=0.1, tol=1e-6)
        assert report.converged
        assert validate_plan(plan, 1e-6).ok

    def test_wrong_marginals_reported(self):
        u = np.full(2, 0.5)
        skew = np.array([0.9, 0.1])
        plan = TransportPlan((2, 2), [0, 1], [0, 1], u.copy(), skew, u)
        check = validate_plan(plan, 1e-9)
        assert not check.ok
        assert check.row_residual == pytest.approx(0.4)
        assert check.col_residual == 0.0


class TestTypes:
    def test_point_cloud_rejects_nan(self):
        with pytest.raises(InvalidInputError):
            PointCloud(np.array([[0.0, np.nan]]))

    def test_measure_weights_must_sum_to_one(self):
        pts = PointCloud(np.zeros((2, 1)))
        with pytest.raises(InvalidInputError):
            DiscreteMeasure(pts, np.array([0.5, 0.6]))

    def test_measure_weight_length_checked(self):
        pts = PointCloud(np.zeros((2, 1)))
        with pytest.raises(InvalidInputError):
            DiscreteMeasure(pts, np.array([1.0]))

    def test_plan_dense_roundtrip_accumulates(self):
        u = np.full(2, 0.5)
        plan = TransportPlan((2, 2), [0, 0], [1, 1], [0.5, 0.5], u, u)
        dense = plan.dense()
        assert dense[0, 1] == 1.0
        assert plan.total_mass == 1.0


class TestCsvIO:
    def test_point_cloud_roundtrip(self, tmp_path):
        pts = np.random.default_rng(11).normal(size=(7, 3))
        path = tmp_path / "cloud.csv"
        write_point_cloud(path, pts)
        back = read_point_cloud(path)
        np.testing.assert_array_equal(back.points, pts)

    def test_header_lines_skipped(self, tmp_path):
        path = tmp_path / "cloud.csv"
        path.write_text("# x,y\n1.0,2.0\n3.0,4.0\n")
        cloud = read_point_cloud(path)
        np.testing.assert_array_equal(cloud.points, [[1.0, 2.0], [3.0, 4.0]])

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("# nothing\n")
        with pytest.raises(InvalidInputError):
            read_point_cloud(path)

    def test_plan_export_format(self, tmp_path):
        u = np.full(2, 0.5)
        plan = TransportPlan((2, 2), [1, 0], [0, 1], [0.5, 0.5], u, u)
        path = tmp_path / "plan.csv"
        write_plan_csv(path, plan)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("#")
        assert lines[1] == "0,1,0.5"  # sorted by (row, col)
        assert lines[2] == "1,0,0.5"

import numpy as np
import pytest
from dataclasses import replace

from mbot import (
    Average,
    ConfigurationError,
    ConsistencyError,
    EntropicOuter,
    ExactOuter,
    ExactW,
    InvalidInputError,
    MiniBatchIndex,
    PointCloud,
    SchemeConfig,
    Sliced,
    TransportPlan,
    aggregate_plan,
    batch_cost_matrix,
    bomb_loss,
    ebomb_loss,
    empirical_measure,
    exact_ot_uniform,
    exhaustive_mb_distance,
    inner_distance,
    mb_distance,
    mot_loss,
    pairwise_cost,
    sample_batches,
    validate_plan,
)
from mbot.measures import batch_measure


def gauss(n, dim=2, seed=0, shift=0.0):
    return PointCloud(np.random.default_rng(seed).normal(size=(n, dim)) + shift)


class TestSampleBatches:
    def test_full_batch_is_permutation(self):
        bx, by = sample_batches(4, SchemeConfig(k=1, m=4, seed=7))
        assert sorted(bx[0].indices) == [0, 1, 2, 3]
        assert sorted(by[0].indices) == [0, 1, 2, 3]

    def test_deterministic_given_seed(self):
        cfg = SchemeConfig(k=3, m=2, seed=42)
        first = sample_batches(10, cfg)
        second = sample_batches(10, cfg)
        for a, b in zip(first[0] + first[1], second[0] + second[1]):
            np.testing.assert_array_equal(a.indices, b.indices)

    def test_bounds_and_within_batch_distinctness(self):
        bx, by = sample_batches(10, SchemeConfig(k=100, m=2, seed=3))
        for batch in bx + by:
            assert batch.m == 2
            assert batch.indices.min() >= 0 and batch.indices.max() < 10
            assert batch.indices[0] != batch.indices[1]

    def test_oversized_batch_rejected(self):
        with pytest.raises(InvalidInputError):
            sample_batches(3, SchemeConfig(k=1, m=4))

    def test_seed_overrides_force_equal_draws(self):
        cfg = SchemeConfig(k=2, m=3, seed=0, seed_x=99, seed_y=99)
        bx, by = sample_batches(8, cfg)
        for a, b in zip(bx, by):
            np.testing.assert_array_equal(a.indices, b.indices)


class TestBatchCostMatrix:
    def test_single_pair_matches_direct_call(self):
        X, Y = gauss(6, seed=1), gauss(6, seed=2, shift=1.0)
        bx, by = sample_batches(6, SchemeConfig(k=1, m=3, seed=5))
        C, _ = batch_cost_matrix(X, Y, bx, by, ExactW())
        direct, _ = inner_distance(batch_measure(X, bx[0]), batch_measure(Y, by[0]), ExactW())
        assert C.values[0, 0] == direct

    def test_zero_diagonal_for_shared_batches(self):
        X = gauss(8, seed=3)
        bx, _ = sample_batches(8, SchemeConfig(k=3, m=2, seed=9))
        C, _ = batch_cost_matrix(X, X, bx, bx, ExactW())
        np.testing.assert_array_equal(np.diag(C.values), 0.0)

    def test_entries_match_standalone_calls(self):
        X = PointCloud(np.array([[0.0], [1.0], [2.0], [3.0]]))
        Y = PointCloud(np.array([[0.5], [1.5], [2.5], [3.5]]))
        bx, by = sample_batches(4, SchemeConfig(k=2, m=2, seed=11))
        C, _ = batch_cost_matrix(X, Y, bx, by, ExactW())
        for i in range(2):
            for j in range(2):
                expect, _ = inner_distance(
                    batch_measure(X, bx[i]), batch_measure(Y, by[j]), ExactW()
                )
                assert C.values[i, j] == expect

    def test_threaded_result_identical(self):
        X, Y = gauss(12, seed=4), gauss(12, seed=5, shift=2.0)
        bx, by = sample_batches(12, SchemeConfig(k=4, m=3, seed=13))
        C1, _ = batch_cost_matrix(X, Y, bx, by, Sliced(n_projections=16), seed=1, threads=1)
        C8, _ = batch_cost_matrix(X, Y, bx, by, Sliced(n_projections=16), seed=1, threads=8)
        np.testing.assert_array_equal(C1.values, C8.values)


class TestOuterLosses:
    def test_mot_single_cell(self):
        loss, plan = mot_loss(np.array([[3.7]]))
        assert loss == 3.7
        np.testing.assert_array_equal(plan.dense(), [[1.0]])

    def test_mot_constant_matrix(self):
        loss, _ = mot_loss(np.full((4, 4), 2.5))
        assert loss == 2.5

    def test_mot_mean(self):
        loss, plan = mot_loss(np.array([[0.0, 2.0], [2.0, 0.0]]))
        assert loss == 1.0
        np.testing.assert_array_equal(plan.dense(), np.full((2, 2), 0.25))

    def test_bomb_zero_diagonal(self):
        loss, plan = bomb_loss(np.array([[0.0, 2.0], [2.0, 0.0]]))
        assert loss == 0.0
        np.testing.assert_array_equal(plan.dense(), [[0.5, 0.0], [0.0, 0.5]])

    def test_bomb_equals_mot_at_k1(self):
        C = np.array([[1.3]])
        assert bomb_loss(C)[0] == mot_loss(C)[0] == 1.3

    def test_bomb_two_by_two(self):
        loss, plan = bomb_loss(np.array([[1.0, 2.0], [3.0, 1.0]]))
        assert loss == pytest.approx(1.0)
        np.testing.assert_array_equal(plan.rows, plan.cols)

    def test_ebomb_small_lambda_near_bomb(self):
        C = np.array([[1.0, 2.0], [3.0, 1.0]])
        loss, _ = ebomb_loss(C, 1e-4)
        assert abs(loss - 1.0) <= 1e-3

    def test_ebomb_large_lambda_near_mot(self):
        C = np.array([[1.0, 2.0], [3.0, 1.0]]) / 3.0
        loss, plan = ebomb_loss(C, 1e3)
        mot, _ = mot_loss(C)
        assert abs(loss - mot) <= 1e-3 * mot
        assert np.abs(plan.dense() - 0.25).max() <= 1e-4

    def test_ebomb_interpolates_strictly(self):
        loss, _ = ebomb_loss(np.array([[0.0, 2.0], [2.0, 0.0]]), 1.0)
        assert 0.0 < loss < 1.0

    def test_bomb_never_exceeds_mot(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            k = int(rng.integers(1, 9))
            C = rng.random((k, k)) * rng.uniform(0.1, 10)
            assert bomb_loss(C)[0] <= mot_loss(C)[0] + 1e-12

    def test_monotone_interpolation(self):
        rng = np.random.default_rng(19)
        for _ in range(10):
            C = rng.random((8, 8))
            lo, _ = bomb_loss(C)
            hi, _ = mot_loss(C)
            prev = lo - 1e-9
            for lam in (1e-3, 1e-1, 1.0, 10.0, 1e3):
                val, _ = ebomb_loss(C, lam)
                assert val >= prev - 1e-9
                assert lo - 1e-9 <= val <= hi + 1e-9
                prev = val


class TestAggregatePlan:
    def test_single_cell_embeds_inner_plan(self):
        X, Y = gauss(6, seed=21), gauss(6, seed=22, shift=1.0)
        cfg = SchemeConfig(k=1, m=4, seed=23, aggregate_plan=True)
        result = mb_distance(X, Y, cfg)
        inner = batch_cost_matrix(
            X, Y, result.batches_x, result.batches_y, ExactW(), seed=cfg.seed, keep_plans=True
        )[1][0][0]
        expected = np.zeros((6, 6))
        expected[result.batches_x[0].indices[inner.rows], result.batches_y[0].indices[inner.cols]] = inner.mass
        np.testing.assert_allclose(result.aggregated_plan.dense(), expected)

    def test_bomb_sparsity_bound(self):
        X, Y = gauss(10, seed=25), gauss(10, seed=26, shift=3.0)
        for k, m in [(2, 8), (8, 2), (20, 2)]:
            cfg = SchemeConfig(k=k, m=m, seed=27, aggregate_plan=True)
            result = mb_distance(X, Y, cfg)
            assert result.aggregated_plan.nnz <= k * m
            assert result.aggregated_plan.total_mass == pytest.approx(1.0, abs=1e-9)

    def test_mot_sparsity_bound(self):
        X, Y = gauss(10, seed=28), gauss(10, seed=29, shift=3.0)
        for k, m in [(2, 8), (8, 2), (20, 2)]:
            cfg = SchemeConfig(k=k, m=m, seed=30, outer=Average(), aggregate_plan=True)
            result = mb_distance(X, Y, cfg)
            assert result.aggregated_plan.nnz <= k * k * m

    def test_missing_inner_plan_raises(self):
        X = gauss(6, seed=31)
        bx, by = sample_batches(6, SchemeConfig(k=2, m=2, seed=32))
        C, plans = batch_cost_matrix(X, X, bx, by, ExactW(), keep_plans=True)
        plans[0][0] = None
        _, outer = mot_loss(C)
        with pytest.raises(ConsistencyError):
            aggregate_plan(outer, plans, bx, by, 6)

    def test_row_sum_bounded_by_batch_membership(self):
        X, Y = gauss(12, seed=33), gauss(12, seed=34, shift=1.0)
        for outer in (ExactOuter(), Average()):
            cfg = SchemeConfig(k=5, m=4, seed=35, outer=outer, aggregate_plan=True)
            result = mb_distance(X, Y, cfg)
            counts = np.zeros(12)
            for batch in result.batches_x:
                counts[batch.indices] += 1
            bound = counts / (cfg.k * cfg.m) + 1e-12
            assert np.all(result.aggregated_plan.row_sums() <= bound)


class TestMbDistance:
    def test_identical_clouds_forced_batches(self):
        X = gauss(10, seed=41)
        cfg = SchemeConfig(k=3, m=4, seed=0, seed_x=5, seed_y=5)
        assert mb_distance(X, X, cfg).loss == 0.0

    def test_k1_schemes_coincide(self):
        X, Y = gauss(9, seed=43), gauss(9, seed=44, shift=2.0)
        shared = dict(k=1, m=5, seed=45, aggregate_plan=True)
        avg = mb_distance(X, Y, SchemeConfig(outer=Average(), **shared))
        bomb = mb_distance(X, Y, SchemeConfig(outer=ExactOuter(), **shared))
        assert avg.loss == bomb.loss
        np.testing.assert_array_equal(avg.aggregated_plan.dense(), bomb.aggregated_plan.dense())

    def test_sliced_with_aggregation_rejected(self):
        X = gauss(8, seed=46)
        cfg = SchemeConfig(k=2, m=2, inner=Sliced(n_projections=4), aggregate_plan=True)
        with pytest.raises(ConfigurationError):
            mb_distance(X, X, cfg)

    def test_deterministic_and_thread_invariant(self):
        X, Y = gauss(10, seed=47), gauss(10, seed=48, shift=1.0)
        cfg = SchemeConfig(k=4, m=3, seed=49, inner=Sliced(n_projections=32))
        r1 = mb_distance(X, Y, cfg, threads=1)
        r2 = mb_distance(X, Y, cfg, threads=8)
        assert r1.loss == r2.loss
        np.testing.assert_array_equal(r1.cost_matrix.values, r2.cost_matrix.values)

    def test_symmetry_with_swapped_batch_seeds(self):
        X, Y = gauss(11, seed=51), gauss(11, seed=52, shift=1.5)
        fwd = SchemeConfig(k=3, m=4, seed=0, seed_x=61, seed_y=62)
        rev = SchemeConfig(k=3, m=4, seed=0, seed_x=62, seed_y=61)
        loss_xy = mb_distance(X, Y, fwd).loss
        loss_yx = mb_distance(Y, X, rev).loss
        assert loss_xy == pytest.approx(loss_yx, rel=1e-12, abs=1e-14)

    def test_outer_plan_validates(self):
        X, Y = gauss(9, seed=53), gauss(9, seed=54, shift=1.0)
        for outer, tol in ((ExactOuter(), 1e-9), (Average(), 1e-9), (EntropicOuter(0.5), 1e-6)):
            result = mb_distance(X, Y, SchemeConfig(k=3, m=3, seed=55, outer=outer))
            assert validate_plan(result.outer_plan, tol).ok

    def test_batch_size_guard(self):
        with pytest.raises(InvalidInputError):
            mb_distance(gauss(4, seed=56), gauss(9, seed=57), SchemeConfig(k=1, m=5))


class TestExhaustiveMode:
    def test_guards(self):
        with pytest.raises(InvalidInputError):
            exhaustive_mb_distance(gauss(9, seed=61), gauss(9, seed=62), 2, ExactW())
        with pytest.raises(InvalidInputError):
            exhaustive_mb_distance(gauss(6, seed=63), gauss(6, seed=64), 4, ExactW())

    def test_identity_gives_zero(self):
        X = gauss(5, seed=65)
        assert exhaustive_mb_distance(X, X, 2, ExactW()).loss == pytest.approx(0.0, abs=1e-12)

    def test_batch_level_triangle_inequality(self):
        rng = np.random.default_rng(67)
        for _ in range(20):
            A = PointCloud(rng.normal(size=(5, 2)))
            B = PointCloud(rng.normal(size=(5, 2)) + rng.normal(size=2))
            C = PointCloud(rng.normal(size=(5, 2)) + rng.normal(size=2))
            dab = exhaustive_mb_distance(A, B, 2, ExactW()).loss
            dbc = exhaustive_mb_distance(B, C, 2, ExactW()).loss
            dac = exhaustive_mb_distance(A, C, 2, ExactW()).loss
            assert dac <= dab + dbc + 1e-9

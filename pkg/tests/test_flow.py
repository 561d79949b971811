import numpy as np
import pytest
from dataclasses import replace

from mbot import (
    Average,
    ConfigurationError,
    EntropicW,
    ExactOuter,
    ExactW,
    FlowConfig,
    InvalidInputError,
    PointCloud,
    SchemeConfig,
    Sliced,
    exact_w2,
    flow_gradient,
    flow_step,
    mb_distance,
    run_flow,
)
from mbot import seeding
from mbot.datasets import s_shape, two_cluster


def frozen_loss(points: np.ndarray, Y: PointCloud, plan) -> float:
    """Quadratic transport loss at fixed couplings; the oracle the gradient
    is checked against."""
    dx = points[plan.rows] - Y.points[plan.cols]
    return float(plan.mass @ (dx * dx).sum(axis=1))


class TestFlowGradient:
    def test_identical_clouds_forced_batches_zero_gradient(self):
        X = PointCloud(np.random.default_rng(1).normal(size=(12, 2)))
        cfg = SchemeConfig(k=3, m=4, seed=0, seed_x=9, seed_y=9)
        grad, loss = flow_gradient(X, X, cfg)
        assert loss == pytest.approx(0.0, abs=1e-15)
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)

    def test_single_pair_closed_form(self):
        x = np.array([[1.0, -2.0]])
        y = np.array([[0.5, 3.0]])
        grad, loss = flow_gradient(PointCloud(x), PointCloud(y), SchemeConfig(k=1, m=1))
        np.testing.assert_allclose(grad, 2 * (x - y))
        assert loss == pytest.approx(float(((x - y) ** 2).sum()))

    def test_matches_central_finite_differences(self):
        worst = 0.0
        for seed in range(20):
            rng = np.random.default_rng(300 + seed)
            X = rng.normal(size=(16, 2))
            Y = PointCloud(rng.normal(size=(16, 2)) + 1.0)
            cfg = SchemeConfig(k=2, m=4, seed=seed)
            grad, loss = flow_gradient(PointCloud(X), Y, cfg)
            plan = mb_distance(PointCloud(X), Y, replace(cfg, aggregate_plan=True)).aggregated_plan
            assert frozen_loss(X, Y, plan) == pytest.approx(loss, abs=1e-12)
            h = 1e-6
            fd = np.zeros_like(grad)
            for a in range(16):
                for d in range(2):
                    xp, xm = X.copy(), X.copy()
                    xp[a, d] += h
                    xm[a, d] -= h
                    fd[a, d] = (frozen_loss(xp, Y, plan) - frozen_loss(xm, Y, plan)) / (2 * h)
            worst = max(worst, np.abs(fd - grad).max() / np.abs(fd).max())
        assert worst <= 1e-5

    def test_sliced_metric_rejected(self):
        X = PointCloud(np.zeros((4, 2)))
        cfg = SchemeConfig(k=1, m=2, inner=Sliced(n_projections=4))
        with pytest.raises(ConfigurationError):
            flow_gradient(X, X, cfg)

    def test_wrong_order_rejected(self):
        X = PointCloud(np.zeros((4, 2)))
        cfg = SchemeConfig(k=1, m=2, inner=ExactW(p=3.0))
        with pytest.raises(InvalidInputError):
            flow_gradient(X, X, cfg)


class TestFlowStep:
    def test_zero_gradient_leaves_particles(self):
        X = PointCloud(np.random.default_rng(2).normal(size=(8, 2)))
        # identical clouds with mirrored batch draws: optimum is the identity
        mirrored = SchemeConfig(k=2, m=3, seed=0, seed_x=77, seed_y=77)
        grad, _ = flow_gradient(X, X, mirrored)
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)

    def test_single_particle_half_step_lands_on_target(self):
        x = np.array([[0.1, -0.7]])
        y = np.array([[0.3, 0.4]])
        cfg = FlowConfig(steps=1, step_size=0.5, scheme=SchemeConfig(k=1, m=1, seed=1), seed=2)
        moved, _ = flow_step(PointCloud(x), PointCloud(y), cfg, step=1)
        np.testing.assert_allclose(moved.points, y, atol=1e-14)

    def test_unsampled_particles_unmoved(self):
        rng = np.random.default_rng(4)
        X = PointCloud(rng.normal(size=(10, 2)))
        Y = PointCloud(rng.normal(size=(10, 2)) + 2.0)
        cfg = FlowConfig(steps=1, step_size=0.1, scheme=SchemeConfig(k=1, m=2, seed=5), seed=6)
        step_seed = seeding.derive_seed(cfg.seed, seeding.STEP, 1, cfg.scheme.seed)
        plan = mb_distance(
            X, Y, replace(cfg.scheme, seed=step_seed, aggregate_plan=True)
        ).aggregated_plan
        untouched = plan.row_sums() == 0
        assert untouched.sum() == 8  # k*m = 2 of 10 sampled
        moved, _ = flow_step(X, Y, cfg, step=1)
        np.testing.assert_array_equal(moved.points[untouched], X.points[untouched])
        assert not np.array_equal(moved.points[~untouched], X.points[~untouched])

    def test_small_step_does_not_increase_frozen_loss(self):
        rng = np.random.default_rng(7)
        X = PointCloud(rng.normal(size=(20, 2)))
        Y = PointCloud(rng.normal(size=(20, 2)) + 1.5)
        scheme = SchemeConfig(k=3, m=5, seed=8)
        cfg = FlowConfig(steps=1, step_size=1e-3, scheme=scheme, seed=9)
        step_seed = seeding.derive_seed(cfg.seed, seeding.STEP, 1, scheme.seed)
        plan = mb_distance(X, Y, replace(scheme, seed=step_seed, aggregate_plan=True)).aggregated_plan
        before = frozen_loss(X.points, Y, plan)
        moved, _ = flow_step(X, Y, cfg, step=1)
        after = frozen_loss(moved.points, Y, plan)
        assert after <= before + 1e-12

    def test_unnormalized_variant_also_descends(self):
        rng = np.random.default_rng(10)
        X = PointCloud(rng.normal(size=(20, 2)))
        Y = PointCloud(rng.normal(size=(20, 2)) + 1.5)
        scheme = SchemeConfig(k=3, m=5, seed=11)
        cfg = FlowConfig(steps=1, step_size=1e-3, scheme=scheme, seed=12, normalize_mass=False)
        step_seed = seeding.derive_seed(cfg.seed, seeding.STEP, 1, scheme.seed)
        plan = mb_distance(X, Y, replace(scheme, seed=step_seed, aggregate_plan=True)).aggregated_plan
        before = frozen_loss(X.points, Y, plan)
        moved, _ = flow_step(X, Y, cfg, step=1)
        assert frozen_loss(moved.points, Y, plan) <= before + 1e-12


class TestRunFlow:
    def test_identity_start_stays_near_target(self):
        Y = s_shape(100, seed=5)
        scheme = SchemeConfig(k=4, m=16, seed=6)
        cfg = FlowConfig(steps=100, step_size=0.05, scheme=scheme, eval_every=25, seed=7)
        trace = run_flow(Y, Y, cfg)
        assert trace.evals[0][1] == 0.0
        assert all(w2 < 0.25 for _, w2, _ in trace.evals)

    def test_toy_flow_decreases_w2(self):
        X0 = two_cluster(100, seed=1)
        Y = s_shape(100, seed=2)
        scheme = SchemeConfig(k=4, m=16, seed=3)
        cfg = FlowConfig(steps=150, step_size=0.05, scheme=scheme, eval_every=150, seed=4)
        trace = run_flow(X0, Y, cfg)
        assert trace.evals[-1][1] < trace.evals[0][1]

    def test_zero_steps_records_only_initial_eval(self):
        X0 = two_cluster(20, seed=8)
        Y = s_shape(20, seed=9)
        cfg = FlowConfig(steps=0, step_size=0.1, scheme=SchemeConfig(k=2, m=4, seed=10), seed=11)
        trace = run_flow(X0, Y, cfg)
        assert len(trace.evals) == 1
        assert trace.evals[0][0] == 0
        np.testing.assert_array_equal(trace.final_points.points, X0.points)

    def test_deterministic_given_seeds(self):
        X0 = two_cluster(30, seed=12)
        Y = s_shape(30, seed=13)
        cfg = FlowConfig(steps=20, step_size=0.05, scheme=SchemeConfig(k=2, m=8, seed=14),
                         eval_every=5, seed=15)
        t1 = run_flow(X0, Y, cfg)
        t2 = run_flow(X0, Y, cfg)
        assert t1.evals == t2.evals
        np.testing.assert_array_equal(t1.final_points.points, t2.final_points.points)

    def test_entropic_inner_supported(self):
        X0 = two_cluster(20, seed=16)
        Y = s_shape(20, seed=17)
        scheme = SchemeConfig(k=2, m=5, inner=EntropicW(p=2.0, tau=0.5), seed=18)
        cfg = FlowConfig(steps=5, step_size=0.05, scheme=scheme, eval_every=5, seed=19)
        trace = run_flow(X0, Y, cfg)
        assert len(trace.evals) == 2
        assert np.all(np.isfinite(trace.final_points.points))

    def test_exact_w2_matches_sorted_matching_in_1d(self):
        rng = np.random.default_rng(20)
        x, y = rng.normal(size=12), rng.normal(size=12)
        got = exact_w2(PointCloud(x[:, None]), PointCloud(y[:, None]))
        want = np.sqrt(np.mean((np.sort(x) - np.sort(y)) ** 2))
        assert got == pytest.approx(want, abs=1e-12)

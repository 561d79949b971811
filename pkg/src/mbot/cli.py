"""Command-line front end.

Subcommands: `plan` (couple two point clouds and export the plans), `flow`
(particle gradient flow), `color` (palette transfer between PPM images),
`abc` (posterior sampling), and `bench` (timing grid). Every run writes a
JSON manifest recording the resolved configuration, seeds, wallclock and
emitted files. Primary outputs are byte-identical across reruns and thread
counts with the same flags.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import abc as abc_mod
from . import datasets, seeding
from .color import color_transfer, read_ppm, write_palette_csv, write_ppm
from .errors import ConsistencyError, InvalidInputError, NoAcceptanceError
from .flow import FlowConfig, exact_w2, run_flow, write_trace_csv
from .measures import read_point_cloud, write_plan_csv, write_point_cloud
from .schemes import Average, EntropicOuter, ExactOuter, SchemeConfig, mb_distance
from .solvers import EntropicW, ExactW, Sliced, exact_ot_uniform, pairwise_cost
from .measures import empirical_measure

FULL_OT_MAX_N = 2048

EXIT_OK = 0
EXIT_INVALID_INPUT = 2
EXIT_NO_ACCEPTANCE = 3
EXIT_INTERNAL = 4


def _default_threads() -> int:
    return os.cpu_count() or 1


def _make_inner(args):
    if args.inner == "w2":
        return ExactW(p=2.0)
    if args.inner == "sinkhorn":
        return EntropicW(p=2.0, tau=args.tau)
    if args.inner == "sw":
        return Sliced(p=2.0, n_projections=args.n_projections)
    raise InvalidInputError(f"unknown inner metric {args.inner!r}")


def _make_outer(args):
    if args.outer == "avg":
        return Average()
    if args.outer == "bomb":
        return ExactOuter()
    if args.outer == "ebomb":
        return EntropicOuter(lam=args.lam)
    raise InvalidInputError(f"unknown outer scheme {args.outer!r}")


def _add_scheme_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=2, help="number of mini-batches per side")
    p.add_argument("--m", type=int, default=8, help="mini-batch size")
    p.add_argument("--inner", choices=["w2", "sinkhorn", "sw"], default="w2",
                   help="inner metric between batch measures")
    p.add_argument("--outer", choices=["avg", "bomb", "ebomb"], default="bomb",
                   help="how batch-pair costs are combined")
    p.add_argument("--tau", type=float, default=0.05, help="inner entropic regularization")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="outer entropic regularization (ebomb)")
    p.add_argument("--n-projections", type=int, default=100, help="sliced projection count")


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--out-dir", type=Path, default=Path("."))


def _json_safe(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def _write_manifest(out_dir: Path, subcommand: str, args, extra: dict, artifacts: list[Path],
                    started: float) -> Path:
    config = {k: _json_safe(v) for k, v in vars(args).items() if k != "func"}
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "seed": args.seed,
        "wallclock_seconds": time.perf_counter() - started,
        "artifacts": [str(p) for p in artifacts],
    }
    manifest.update(_json_safe(extra))
    path = out_dir / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, allow_nan=False)
        fh.write("\n")
    return path


def _write_matrix_csv(path, values: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.atleast_2d(values):
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


# ---------------------------------------------------------------------------
# plan


def cmd_plan(args) -> int:
    started = time.perf_counter()
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    X = read_point_cloud(args.source)
    Y = read_point_cloud(args.target)
    cfg = SchemeConfig(
        k=args.k, m=args.m, inner=_make_inner(args), outer=_make_outer(args),
        seed=args.seed, aggregate_plan=True,
    )
    result = mb_distance(X, Y, cfg, threads=args.threads)
    artifacts = []
    agg_path = out / "aggregated_plan.csv"
    write_plan_csv(agg_path, result.aggregated_plan)
    artifacts.append(agg_path)
    outer_path = out / "outer_plan.csv"
    write_plan_csv(outer_path, result.outer_plan)
    artifacts.append(outer_path)
    cost_path = out / "cost_matrix.csv"
    _write_matrix_csv(cost_path, result.cost_matrix.values)
    artifacts.append(cost_path)
    extra = {"loss": result.loss, "aggregated_nnz": result.aggregated_plan.nnz}
    if args.full_ot:
        n = max(X.n, Y.n)
        if X.n != Y.n:
            raise InvalidInputError("--full-ot needs equal-size clouds")
        if n > FULL_OT_MAX_N:
            raise InvalidInputError(f"--full-ot guard: n={n} exceeds {FULL_OT_MAX_N}")
        full_plan, full_report = exact_ot_uniform(
            pairwise_cost(empirical_measure(X), empirical_measure(Y), 2.0)
        )
        full_path = out / "full_ot_plan.csv"
        write_plan_csv(full_path, full_plan)
        artifacts.append(full_path)
        extra["full_ot_objective"] = full_report.objective
    manifest = _write_manifest(out, "plan", args, extra, artifacts, started)
    print(f"loss={result.loss:.6g} nnz={result.aggregated_plan.nnz} manifest={manifest}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# flow


def cmd_flow(args) -> int:
    started = time.perf_counter()
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    if args.toy is not None:
        if args.toy != "s-shape":
            raise InvalidInputError(f"unknown toy dataset {args.toy!r}")
        X0 = datasets.two_cluster(args.n, seed=seeding.derive_seed(args.seed, 21))
        Y = datasets.s_shape(args.n, seed=seeding.derive_seed(args.seed, 22))
    else:
        if args.source is None or args.target is None:
            raise InvalidInputError("flow needs --source/--target CSVs or --toy s-shape")
        X0 = read_point_cloud(args.source)
        Y = read_point_cloud(args.target)
    scheme = SchemeConfig(k=args.k, m=args.m, inner=_make_inner(args),
                          outer=_make_outer(args), seed=args.seed)
    cfg = FlowConfig(
        steps=args.steps, step_size=args.eta, scheme=scheme,
        eval_every=args.eval_every, seed=args.seed,
        normalize_mass=not args.no_mass_normalization,
        keep_snapshots=args.snapshots,
    )
    trace = run_flow(X0, Y, cfg, threads=args.threads)
    artifacts = []
    trace_path = out / "trace.csv"
    write_trace_csv(trace_path, trace)
    artifacts.append(trace_path)
    final_path = out / "final_points.csv"
    write_point_cloud(final_path, trace.final_points)
    artifacts.append(final_path)
    for step, points in trace.snapshots:
        snap = out / f"snapshot_{step:06d}.csv"
        write_point_cloud(snap, points)
        artifacts.append(snap)
    extra = {
        "initial_w2": trace.evals[0][1],
        "final_w2": trace.evals[-1][1],
        "eta": args.eta,
    }
    manifest = _write_manifest(out, "flow", args, extra, artifacts, started)
    print(f"w2: {trace.evals[0][1]:.6g} -> {trace.evals[-1][1]:.6g} manifest={manifest}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# color


def cmd_color(args) -> int:
    started = time.perf_counter()
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    source = read_ppm(args.source)
    target = read_ppm(args.target)
    transferred, src_pal, tgt_pal, new_centers = color_transfer(
        source, target, K=args.palette, k=args.k, m=args.m, iterations=args.iterations,
        inner=_make_inner(args), outer=_make_outer(args), seed=args.seed,
        kmeans_iters=args.kmeans_iters, threads=args.threads,
    )
    artifacts = []
    img_path = out / "transferred.ppm"
    write_ppm(img_path, transferred)
    artifacts.append(img_path)
    for name, centers in (
        ("palette_source.csv", src_pal.centers),
        ("palette_target.csv", tgt_pal.centers),
        ("palette_transferred.csv", new_centers),
    ):
        path = out / name
        write_palette_csv(path, centers)
        artifacts.append(path)
    extra = {"palette_size_source": src_pal.k, "palette_size_target": tgt_pal.k}
    manifest = _write_manifest(out, "color", args, extra, artifacts, started)
    print(f"transferred {source.width}x{source.height} image, manifest={manifest}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# abc


def cmd_abc(args) -> int:
    started = time.perf_counter()
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    if args.mu_star is not None:
        mu_star = np.array([float(tok) for tok in args.mu_star.split(",")])
        if mu_star.shape[0] != args.dims:
            raise InvalidInputError(f"--mu-star must have {args.dims} components")
    else:
        mu_star = seeding.derive_rng(args.seed, 31).standard_normal(args.dims)
    if args.obs is not None:
        obs = read_point_cloud(args.obs)
        if obs.dim != args.dims:
            raise InvalidInputError(f"observation file has dim {obs.dim}, expected {args.dims}")
    else:
        obs = abc_mod.simulate(args.sigma2_star, mu_star, args.n_obs, args.dims,
                               seeding.derive_rng(args.seed, 32))
    scheme = SchemeConfig(k=args.k, m=args.m, inner=_make_inner(args),
                          outer=_make_outer(args), seed=args.seed)
    cfg_kwargs = dict(
        prior_shape=args.alpha, prior_scale=args.beta, mu_star=mu_star,
        n_obs=obs.n, dims=args.dims, scheme=scheme,
        n_posterior=args.n_posterior, max_proposals=args.max_proposals, seed=args.seed,
    )
    if args.epsilon is not None:
        epsilon = args.epsilon
    else:
        pilot_cfg = abc_mod.AbcConfig(epsilon=np.inf, **cfg_kwargs)
        epsilon = abc_mod.pilot_epsilon(obs, pilot_cfg, args.eps_percentile,
                                        n_pilot=args.pilot, threads=args.threads)
    cfg = abc_mod.AbcConfig(epsilon=epsilon, **cfg_kwargs)
    sample = abc_mod.rejection_abc(obs, cfg, threads=args.threads)

    shape, scale = abc_mod.true_posterior_params(obs, mu_star, args.alpha, args.beta)
    exact_draws = 1.0 / seeding.derive_rng(args.seed, 33).gamma(
        shape, 1.0 / scale, size=max(sample.values.size, 1000)
    )
    w2_to_truth = abc_mod.posterior_w2(sample.values, exact_draws, seed=args.seed)

    artifacts = []
    samples_path = out / "samples.csv"
    abc_mod.write_samples_csv(samples_path, sample)
    artifacts.append(samples_path)
    obs_path = out / "observations.csv"
    write_point_cloud(obs_path, obs)
    artifacts.append(obs_path)
    extra = {
        "epsilon": epsilon,
        "acceptance_rate": sample.acceptance_rate,
        "proposals_used": sample.proposals_used,
        "complete": sample.complete,
        "posterior_shape": shape,
        "posterior_scale": scale,
        "posterior_mean_exact": scale / (shape - 1.0) if shape > 1 else None,
        "posterior_mean_accepted": float(sample.values.mean()),
        "posterior_w2": w2_to_truth,
        "mu_star": mu_star,
    }
    manifest = _write_manifest(out, "abc", args, extra, artifacts, started)
    print(
        f"accepted {sample.values.size} samples, rate={sample.acceptance_rate:.4g}, "
        f"posterior_w2={w2_to_truth:.6g} manifest={manifest}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench


def cmd_bench(args) -> int:
    started = time.perf_counter()
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    k_grid = [int(tok) for tok in args.k_grid.split(",")]
    m_grid = [int(tok) for tok in args.m_grid.split(",")]
    rows = []
    for k in k_grid:
        for m in m_grid:
            n = max(args.n, m)
            X = datasets.gaussian_cloud(n, np.zeros(2), np.eye(2), seed=seeding.derive_seed(args.seed, 41))
            Y = datasets.gaussian_cloud(n, np.ones(2), np.eye(2), seed=seeding.derive_seed(args.seed, 42))
            cfg = SchemeConfig(k=k, m=m, inner=_make_inner(args), outer=_make_outer(args), seed=args.seed)
            best = np.inf
            for _ in range(args.repeats):
                t0 = time.perf_counter()
                mb_distance(X, Y, cfg, threads=args.threads)
                best = min(best, time.perf_counter() - t0)
            rows.append((k, m, args.inner, args.outer, best))
    timings_path = out / "timings.csv"
    with open(timings_path, "w", encoding="utf-8") as fh:
        fh.write("# k,m,inner,outer,seconds\n")
        for k, m, inner, outer, seconds in rows:
            fh.write(f"{k},{m},{inner},{outer},{format(seconds, '.17g')}\n")
    manifest = _write_manifest(out, "bench", args, {"cells": len(rows)}, [timings_path], started)
    print(f"{len(rows)} timing rows, manifest={manifest}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mbot",
        description="Mini-batch optimal transport toolkit",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("plan", help="couple two point clouds and export plans")
    p.add_argument("--source", required=True, type=Path, help="source cloud CSV")
    p.add_argument("--target", required=True, type=Path, help="target cloud CSV")
    p.add_argument("--full-ot", action="store_true",
                   help=f"also solve the full problem (n <= {FULL_OT_MAX_N})")
    _add_scheme_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("flow", help="particle gradient flow")
    p.add_argument("--source", type=Path, help="initial particle CSV")
    p.add_argument("--target", type=Path, help="target cloud CSV")
    p.add_argument("--toy", choices=["s-shape"], help="built-in two-cluster to S-shape toy")
    p.add_argument("--n", type=int, default=100, help="toy cloud size")
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--eta", type=float, default=0.001, help="Euler step size")
    p.add_argument("--eval-every", type=int, default=10)
    p.add_argument("--snapshots", action="store_true", help="write particle CSVs at eval steps")
    p.add_argument("--no-mass-normalization", action="store_true",
                   help="use the raw frozen-plan gradient without per-particle scaling")
    _add_scheme_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("color", help="palette-level color transfer between PPM images")
    p.add_argument("--source", required=True, type=Path, help="source PPM (P6)")
    p.add_argument("--target", required=True, type=Path, help="target PPM (P6)")
    p.add_argument("--palette", "-K", type=int, default=512, help="K-means palette size")
    p.add_argument("--iterations", "-T", type=int, default=20, help="transfer iterations")
    p.add_argument("--kmeans-iters", type=int, default=50)
    _add_scheme_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_color)

    p = sub.add_parser("abc", help="rejection ABC for a Gaussian variance")
    p.add_argument("--obs", type=Path, help="observation CSV (default: generated)")
    p.add_argument("--n-obs", type=int, default=100)
    p.add_argument("--dims", type=int, default=2)
    p.add_argument("--sigma2-star", type=float, default=4.0, help="generating variance")
    p.add_argument("--mu-star", type=str, default=None, help="comma-separated mean (default: seeded draw)")
    p.add_argument("--alpha", type=float, default=1.0, help="inverse-gamma prior shape")
    p.add_argument("--beta", type=float, default=1.0, help="inverse-gamma prior scale")
    p.add_argument("--epsilon", type=float, default=None, help="acceptance threshold (inf allowed)")
    p.add_argument("--eps-percentile", type=float, default=5.0,
                   help="pilot percentile used when --epsilon is not given")
    p.add_argument("--pilot", type=int, default=500, help="pilot proposal count")
    p.add_argument("--n-posterior", type=int, default=100)
    p.add_argument("--max-proposals", type=int, default=100_000)
    _add_scheme_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_abc)

    p = sub.add_parser("bench", help="timing grid over k and m")
    p.add_argument("--k-grid", type=str, default="2,4,8")
    p.add_argument("--m-grid", type=str, default="32")
    p.add_argument("--n", type=int, default=256, help="population size per cloud")
    p.add_argument("--repeats", type=int, default=3, help="best-of repeats per cell")
    _add_scheme_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NoAcceptanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_ACCEPTANCE
    except ConsistencyError as exc:
        print(f"internal consistency failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT


if __name__ == "__main__":
    sys.exit(main())

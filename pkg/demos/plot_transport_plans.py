"""
Mini-batch transport plans vs. the full coupling
================================================

Two 10-point 2-d Gaussian clouds are coupled three ways: the full exact
plan, the averaged mini-batch plan (m-OT) and the outer-coupled plan
(BoMb-OT). With small batches the averaged plan smears mass over many
pairs while the outer coupling concentrates it near the true matching.
"""

from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from mbot import Average, ExactOuter, SchemeConfig, mb_distance
from mbot import empirical_measure, exact_ot_uniform, pairwise_cost
from mbot.datasets import skew_gaussian_pair

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

X, Y = skew_gaussian_pair(10, seed=0)
full_plan, _ = exact_ot_uniform(pairwise_cost(empirical_measure(X), empirical_measure(Y), 2.0))
F = full_plan.dense()

settings = [(20, 2), (8, 2), (2, 8)]
fig, axes = plt.subplots(len(settings), 3, figsize=(9, 3 * len(settings)))
for row, (k, m) in enumerate(settings):
    bomb = mb_distance(X, Y, SchemeConfig(k=k, m=m, seed=1, aggregate_plan=True))
    avg = mb_distance(X, Y, SchemeConfig(k=k, m=m, seed=1, outer=Average(), aggregate_plan=True))
    for col, (title, P) in enumerate(
        [("full OT", F), (f"m-OT (k={k}, m={m})", avg.aggregated_plan.dense()),
         (f"BoMb-OT (k={k}, m={m})", bomb.aggregated_plan.dense())]
    ):
        ax = axes[row, col]
        ax.imshow(P, cmap="Blues")
        ax.set_title(title, fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
fig.tight_layout()
fig.savefig(out_dir / "transport_plans.png", dpi=120)
print(f"wrote {out_dir / 'transport_plans.png'}")

# %%
# Matchings drawn in the plane: each source point connects to every target
# point receiving at least 5% of its mass.

fig, axes = plt.subplots(1, 3, figsize=(12, 4))
plans = {
    "full OT": F,
    "m-OT": mb_distance(X, Y, SchemeConfig(k=20, m=2, seed=1, outer=Average(), aggregate_plan=True)).aggregated_plan.dense(),
    "BoMb-OT": mb_distance(X, Y, SchemeConfig(k=20, m=2, seed=1, aggregate_plan=True)).aggregated_plan.dense(),
}
for ax, (title, P) in zip(axes, plans.items()):
    ax.scatter(*X.points.T, c="tab:blue", marker="s", label="source")
    ax.scatter(*Y.points.T, c="tab:orange", label="target")
    for i in range(10):
        row_mass = P[i].sum()
        if row_mass == 0:
            continue
        for j in np.nonzero(P[i] > 0.05 * row_mass)[0]:
            ax.plot([X.points[i, 0], Y.points[j, 0]], [X.points[i, 1], Y.points[j, 1]],
                    "k-", alpha=min(1.0, 10 * P[i, j]), lw=0.8)
    ax.set_title(f"{title} (k=20, m=2)", fontsize=10)
    ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig(out_dir / "matchings.png", dpi=120)
print(f"wrote {out_dir / 'matchings.png'}")

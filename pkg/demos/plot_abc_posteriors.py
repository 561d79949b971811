"""
ABC posteriors under mini-batch acceptance criteria
===================================================

Rejection sampling for a Gaussian variance with an inverse-gamma prior.
The exact posterior is available in closed form, so the approximate
posteriors produced with the averaged and outer-coupled acceptance
distances can be compared against the truth directly.
"""

from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np
from scipy import stats

from mbot import (
    AbcConfig,
    Average,
    ExactOuter,
    SchemeConfig,
    pilot_epsilon,
    posterior_w2,
    rejection_abc,
    simulate,
    true_posterior_params,
)
from mbot import seeding

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

rng = seeding.derive_rng(0, 900)
mu_star = rng.standard_normal(2)
obs = simulate(4.0, mu_star, 100, 2, rng)
shape, scale = true_posterior_params(obs, mu_star, 1.0, 1.0)
exact_draws = 1.0 / seeding.derive_rng(0, 901).gamma(shape, 1.0 / scale, size=4000)
print(f"true posterior: IG({shape:.0f}, {scale:.1f}), mean {scale / (shape - 1):.3f}")

samples = {}
for name, outer in (("m-OT", Average()), ("BoMb-OT", ExactOuter())):
    scheme = SchemeConfig(k=2, m=16, outer=outer, seed=0)
    kw = dict(prior_shape=1.0, prior_scale=1.0, mu_star=mu_star, n_obs=100, dims=2,
              scheme=scheme, n_posterior=200, max_proposals=40_000, seed=0)
    eps = pilot_epsilon(obs, AbcConfig(epsilon=np.inf, **kw), 5.0, n_pilot=500)
    sample = rejection_abc(obs, AbcConfig(epsilon=eps, **kw))
    w2 = posterior_w2(sample.values, exact_draws, seed=0)
    samples[name] = (sample, w2)
    print(f"{name}: eps={eps:.3f} rate={sample.acceptance_rate:.3f} W2 to truth={w2:.3f}")

grid = np.linspace(0.01, 12, 400)
density = stats.invgamma(shape, scale=scale).pdf(grid)

fig, ax = plt.subplots(figsize=(7, 4))
ax.plot(grid, density, "k-", lw=2, label="true posterior")
for name, (sample, w2) in samples.items():
    ax.hist(sample.values, bins=40, range=(0, 12), density=True, alpha=0.45,
            label=f"{name} (W2 {w2:.2f})")
ax.set_xlabel("variance")
ax.set_ylabel("density")
ax.legend()
fig.tight_layout()
fig.savefig(out_dir / "abc_posteriors.png", dpi=120)
print(f"wrote {out_dir / 'abc_posteriors.png'}")

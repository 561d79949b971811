"""Rejection ABC with mini-batch transport acceptance criteria.

The verification setting is a Gaussian likelihood with an inverse-gamma
prior on the variance, where the exact posterior is available in closed
form, so approximate posteriors can be scored against the truth.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import seeding
from .errors import InvalidInputError, NoAcceptanceError
from .measures import PointCloud
from .schemes import SchemeConfig, mb_distance
from .solvers import wasserstein_1d


@dataclass(frozen=True)
class AbcConfig:
    """Prior, data model, scheme and stopping rules for rejection sampling."""

    prior_shape: float
    prior_scale: float
    mu_star: np.ndarray
    n_obs: int
    dims: int
    scheme: SchemeConfig
    epsilon: float
    n_posterior: int = 100
    max_proposals: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.prior_shape <= 0 or self.prior_scale <= 0:
            raise InvalidInputError("inverse-gamma prior needs positive shape and scale")
        if self.epsilon <= 0:
            raise InvalidInputError(f"epsilon must be positive, got {self.epsilon}")
        if self.n_obs < 1:
            raise InvalidInputError(f"n_obs must be >= 1, got {self.n_obs}")
        if self.dims < 1:
            raise InvalidInputError(f"dims must be >= 1, got {self.dims}")
        if self.n_posterior < 1 or self.max_proposals < 1:
            raise InvalidInputError("n_posterior and max_proposals must be >= 1")
        mu = np.asarray(self.mu_star, dtype=np.float64).ravel().copy()
        if mu.shape[0] != self.dims:
            raise InvalidInputError(f"mu_star must have length {self.dims}, got {mu.shape[0]}")
        mu.setflags(write=False)
        object.__setattr__(self, "mu_star", mu)


@dataclass(frozen=True)
class PosteriorSample:
    """Accepted variance draws with their distances and run statistics."""

    values: np.ndarray
    distances: np.ndarray
    proposals_used: int
    acceptance_rate: float
    complete: bool


def sample_inverse_gamma(shape: float, scale: float, rng: np.random.Generator) -> float:
    """Draw from IG(shape, scale) as 1 / Gamma(shape, 1/scale)."""
    return 1.0 / rng.gamma(shape, 1.0 / scale)


def simulate(sigma2: float, mu_star, n: int, dims: int, rng: np.random.Generator) -> PointCloud:
    """n i.i.d. draws from N(mu_star, sigma2 * I)."""
    if sigma2 <= 0:
        raise InvalidInputError(f"sigma2 must be positive, got {sigma2}")
    mu = np.asarray(mu_star, dtype=np.float64).ravel()
    if mu.shape[0] != dims:
        raise InvalidInputError(f"mu_star must have length {dims}, got {mu.shape[0]}")
    return PointCloud(mu[None, :] + np.sqrt(sigma2) * rng.standard_normal((n, dims)))


def abc_distance(obs: PointCloud, sim: PointCloud, scheme: SchemeConfig, threads: int = 1) -> float:
    """Mini-batch scheme loss between observed and simulated clouds."""
    return mb_distance(obs, sim, scheme, threads=threads).loss


def true_posterior_params(obs, mu_star, alpha: float = 1.0, beta: float = 1.0) -> tuple[float, float]:
    """Closed-form inverse-gamma posterior for the Gaussian variance.

    shape = alpha + n * dim / 2, scale = beta + half the total squared
    deviation of the observations from the known mean.
    """
    pts = obs.points if isinstance(obs, PointCloud) else np.atleast_2d(np.asarray(obs, dtype=np.float64))
    mu = np.asarray(mu_star, dtype=np.float64).ravel()
    if pts.size == 0:
        return float(alpha), float(beta)
    if pts.shape[1] != mu.shape[0]:
        raise InvalidInputError("observation dimension does not match mu_star")
    n, dim = pts.shape
    diff = pts - mu[None, :]
    return float(alpha + n * dim / 2.0), float(beta + 0.5 * (diff * diff).sum())


def _proposal_distance(obs: PointCloud, cfg: AbcConfig, index: int, path: int) -> tuple[float, float]:
    """(sigma2, distance) for one prior draw; fully determined by the index."""
    rng = seeding.derive_rng(cfg.seed, path, index)
    sigma2 = sample_inverse_gamma(cfg.prior_shape, cfg.prior_scale, rng)
    sim = simulate(sigma2, cfg.mu_star, obs.n, cfg.dims, rng)
    scheme = replace(cfg.scheme, seed=seeding.derive_seed(cfg.seed, path, index, 1), seed_x=None, seed_y=None)
    return sigma2, abc_distance(obs, sim, scheme, threads=1)


def _evaluate_range(obs, cfg, start, stop, path, threads):
    # Parallelism is across proposals; each proposal's scheme runs single
    # threaded so the per-proposal streams stay the unit of determinism.
    indices = range(start, stop)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda t: _proposal_distance(obs, cfg, t, path), indices))
    return [_proposal_distance(obs, cfg, t, path) for t in indices]


def prior_predictive_distances(obs: PointCloud, cfg: AbcConfig, n_pilot: int, threads: int = 1) -> np.ndarray:
    """Distances of n_pilot independent prior draws, for threshold calibration."""
    results = _evaluate_range(obs, cfg, 0, n_pilot, seeding.PILOT, threads)
    return np.array([d for _, d in results])


def pilot_epsilon(obs: PointCloud, cfg: AbcConfig, percentile: float, n_pilot: int = 500, threads: int = 1) -> float:
    """Percentile of the prior-predictive distance distribution."""
    if not 0 < percentile <= 100:
        raise InvalidInputError(f"percentile must be in (0, 100], got {percentile}")
    return float(np.percentile(prior_predictive_distances(obs, cfg, n_pilot, threads), percentile))


def rejection_abc(obs: PointCloud, cfg: AbcConfig, threads: int = 1) -> PosteriorSample:
    """Accept prior draws whose simulated data lie within epsilon of the
    observations under the configured scheme distance.

    Proposals are evaluated in index order from per-proposal streams, so the
    output is identical however the evaluation is scheduled. Stops after
    n_posterior acceptances or max_proposals draws; running out with zero
    acceptances raises, carrying the smallest distance seen.
    """
    if not isinstance(obs, PointCloud):
        obs = PointCloud(obs)
    accepted_values: list[float] = []
    accepted_distances: list[float] = []
    smallest = np.inf
    used = 0
    chunk = max(16, 4 * threads)
    while used < cfg.max_proposals and len(accepted_values) < cfg.n_posterior:
        stop = min(cfg.max_proposals, used + chunk)
        for sigma2, dist in _evaluate_range(obs, cfg, used, stop, seeding.PROPOSAL, threads):
            used += 1
            smallest = min(smallest, dist)
            if dist <= cfg.epsilon:
                accepted_values.append(sigma2)
                accepted_distances.append(dist)
                if len(accepted_values) >= cfg.n_posterior:
                    break
    if not accepted_values:
        raise NoAcceptanceError(
            f"no proposal came within epsilon={cfg.epsilon} after {used} draws "
            f"(smallest distance seen: {smallest})",
            smallest_distance=float(smallest),
        )
    return PosteriorSample(
        values=np.array(accepted_values),
        distances=np.array(accepted_distances),
        proposals_used=used,
        acceptance_rate=len(accepted_values) / used,
        complete=len(accepted_values) >= cfg.n_posterior,
    )


def posterior_w2(samples_a, samples_b, seed: int = 0) -> float:
    """1-d W2 between sample sets; the larger set is subsampled to match."""
    a = np.asarray(samples_a, dtype=np.float64).ravel()
    b = np.asarray(samples_b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise InvalidInputError("posterior_w2 needs non-empty sample sets")
    size = min(a.size, b.size)
    rng = seeding.derive_rng(seed, seeding.RESAMPLE)
    if a.size > size:
        a = a[rng.choice(a.size, size=size, replace=False)]
    if b.size > size:
        b = b[rng.choice(b.size, size=size, replace=False)]
    return wasserstein_1d(a, b, p=2.0)


def write_samples_csv(path, sample: PosteriorSample) -> None:
    """Accepted draws as `index,sigma2,distance`."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# index,sigma2,distance\n")
        for i, (v, d) in enumerate(zip(sample.values, sample.distances)):
            fh.write(f"{i},{format(v, '.17g')},{format(d, '.17g')}\n")

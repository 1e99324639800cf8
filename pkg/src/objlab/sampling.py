"""Seeded random finite models for the verification sweeps.

Each trial draws from its own counter-based stream keyed by (seed, trial), so
serial and parallel sweeps see identical models.
"""

from __future__ import annotations

import numpy as np

from .objectives import DesireDistribution, GenerativeModel, PolicySimplex

DEFAULT_CARDS = (2, 5)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(trial)])))


def dirichlet_rows(rng: np.random.Generator, n_rows: int, n_cols: int) -> np.ndarray:
    """Flat-Dirichlet rows, renormalized so each sums to 1 to the last ulp."""
    rows = rng.dirichlet(np.ones(n_cols), size=n_rows)
    return rows / rows.sum(axis=1, keepdims=True)


def dirichlet(rng: np.random.Generator, n: int) -> np.ndarray:
    return dirichlet_rows(rng, 1, n)[0]


def random_model(rng: np.random.Generator, cards=DEFAULT_CARDS, n_actions=None, n_latent=None, n_obs=None) -> GenerativeModel:
    lo, hi = cards
    n_actions = n_actions or int(rng.integers(lo, hi + 1))
    n_latent = n_latent or int(rng.integers(lo, hi + 1))
    n_obs = n_obs or int(rng.integers(lo, hi + 1))
    return GenerativeModel.from_arrays(dirichlet_rows(rng, n_actions, n_latent), dirichlet_rows(rng, n_latent, n_obs))


def random_desire(rng: np.random.Generator, n: int) -> DesireDistribution:
    return DesireDistribution(dirichlet(rng, n))


def random_policy(rng: np.random.Generator, n: int) -> PolicySimplex:
    return PolicySimplex(dirichlet(rng, n))

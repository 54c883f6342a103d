"""Brute-force ground truth for discrete projection DPPs.

Enumerates every size-m subset probability det(K_J) from the orthonormal
basis rows; the table is a probability measure, which makes it an exact
reference for validating the sequential sampler.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .discretize import DiscreteProjectionDPP, sample_discrete

ENUMERATION_CAP = 100_000
CLAMP = -1e-12


def enumerate_subset_probabilities(dpp: DiscreteProjectionDPP) -> dict[tuple[int, ...], float]:
    """{subset J of size m: det(K_{J x J})} over all C(N, m) subsets."""
    n, m = dpp.size, dpp.rank
    count = math.comb(n, m)
    if count > ENUMERATION_CAP:
        raise ValueError(f"C({n},{m}) = {count} exceeds enumeration cap {ENUMERATION_CAP}")
    u = dpp.basis
    table: dict[tuple[int, ...], float] = {}
    for subset in itertools.combinations(range(n), m):
        rows = u[list(subset)]
        p = float(np.linalg.det(rows @ rows.T))
        if p < CLAMP:
            raise RuntimeError(f"negative subset probability {p:.2e} at {subset}")
        table[subset] = max(p, 0.0)
    return table


def empirical_subset_frequencies(dpp: DiscreteProjectionDPP, trials: int,
                                 rng: np.random.Generator) -> dict[tuple[int, ...], float]:
    """Normalized counts of sampled subsets."""
    if trials < 1:
        raise ValueError("need at least one trial")
    counts: dict[tuple[int, ...], int] = {}
    for _ in range(trials):
        subset = tuple(sample_discrete(dpp, rng))
        counts[subset] = counts.get(subset, 0) + 1
    return {k: v / trials for k, v in counts.items()}


def tv_distance(p: dict, q: dict) -> float:
    """(1/2) sum |p - q| over the union of supports."""
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)

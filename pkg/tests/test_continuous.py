import numpy as np
import pytest
from scipy import stats

from dppss.continuous import (sample_continuous, sample_projection_chain,
                              sample_stratified_haar)
from dppss.kernels import ProjectionKernel, ope_kernel, wavelet_kernel
from dppss.experiments import trial_rng
from dppss.wavelets import haar


def test_stratified_cardinality_and_domain(rng):
    s = sample_stratified_haar(2, 1, rng)
    assert len(s) == 4
    assert np.all((s.points >= 0.0) & (s.points < 1.0))
    s2 = sample_stratified_haar(1, 2, rng)
    assert len(s2) == 4 and s2.points.shape == (4, 2)


def test_stratified_j0_single_uniform(rng):
    vals = np.array([sample_stratified_haar(0, 1, rng).points[0, 0] for _ in range(3000)])
    assert stats.kstest(vals, "uniform").pvalue > 0.01


def test_stratified_one_point_per_cell(rng):
    for _ in range(2000):
        pts = sample_stratified_haar(2, 1, rng).points[:, 0]
        assert np.array_equal(np.sort(np.floor(pts * 4).astype(int)), np.arange(4))


def test_chain_rank1_constant_kernel_uniform(rng):
    k = ope_kernel(1, 1)
    vals = np.array([sample_projection_chain(k, rng).points[0, 0] for _ in range(3000)])
    assert stats.kstest(vals, "uniform").pvalue > 0.01


def test_chain_matches_stratified_law():
    # Haar law reference: compare order statistics of the two samplers
    k = wavelet_kernel(haar(), 1, 1)
    chain_min, chain_max, strat_min, strat_max = [], [], [], []
    for t in range(4000):
        c = sample_projection_chain(k, trial_rng(11, "chain", t)).points[:, 0]
        s = sample_stratified_haar(1, 1, trial_rng(12, "strat", t)).points[:, 0]
        chain_min.append(c.min())
        chain_max.append(c.max())
        strat_min.append(s.min())
        strat_max.append(s.max())
    assert stats.ks_2samp(chain_min, strat_min).pvalue > 0.01
    assert stats.ks_2samp(chain_max, strat_max).pvalue > 0.01


def test_chain_cardinality_and_exchangeability(db2, rng):
    k = wavelet_kernel(db2, 3, 1, "periodized")
    s = sample_projection_chain(k, rng)
    assert len(s) == 8
    assert np.all((s.points >= 0.0) & (s.points < 1.0))
    # output order carries no information: a representative coordinate is
    # distributed like the one-point intensity / n (uniform marginal mean 0.5)
    first = np.array([sample_projection_chain(k, rng).points[0, 0] for _ in range(800)])
    assert abs(first.mean() - 0.5) < 4 * first.std(ddof=1) / np.sqrt(first.size)


def test_ope_first_marginal_chi_square():
    # marginal density K(x,x)/2 = (1 + 3(2x-1)^2)/2 for the rank-2 Legendre kernel
    k = ope_kernel(1, 2)
    draws = 100_000
    vals = np.empty(draws)
    for t in range(draws):
        vals[t] = sample_projection_chain(k, trial_rng(5, "ope-chix", t)).points[0, 0]
    bins = np.linspace(0.0, 1.0, 21)

    def cdf(x):
        return 0.5 * (x + ((2.0 * x - 1.0) ** 3 + 1.0) / 2.0)

    probs = np.diff(cdf(bins))
    counts, _ = np.histogram(vals, bins=bins)
    p = stats.chisquare(counts, draws * probs).pvalue
    assert p > 0.01, p


def test_one_point_intensity_haar():
    # all points pooled: counts per bin match trials * n * |bin| for Haar
    j, trials = 2, 25_000
    pooled = np.concatenate([
        sample_stratified_haar(j, 1, trial_rng(7, "intensity", t)).points[:, 0]
        for t in range(trials)])
    counts, _ = np.histogram(pooled, bins=np.linspace(0.0, 1.0, 9))
    # stratified counts per dyadic half-bin are deterministic: exactly n/8 each
    assert stats.chisquare(counts, np.full(8, pooled.size / 8)).pvalue > 0.01


def test_negative_cell_count_correlation():
    counts = np.empty((4000, 2))
    for t in range(4000):
        x = sample_stratified_haar(2, 1, trial_rng(3, "negcorr", t)).points[:, 0]
        counts[t, 0] = np.sum((x >= 0.0) & (x < 0.3))
        counts[t, 1] = np.sum((x >= 0.3) & (x < 0.55))
    cov = np.cov(counts.T)[0, 1]
    dev = (counts[:, 0] - counts[:, 0].mean()) * (counts[:, 1] - counts[:, 1].mean())
    se = dev.std(ddof=1) / np.sqrt(counts.shape[0])
    assert cov <= 3 * se


def test_haar_routes_to_stratified(rng):
    k = wavelet_kernel(haar(), 2, 1)
    s = sample_continuous(k, rng)
    assert s.metadata.get("family") == "haar"
    k2 = ope_kernel(1, 2)
    s2 = sample_continuous(k2, rng)
    assert s2.metadata.get("family") == "ope"


class _ZeroSpikeKernel(ProjectionKernel):
    """Density mass confined to a null set no uniform candidate ever hits."""

    rank = 1
    dim = 1
    metadata = {}

    def feature_matrix(self, points):
        pts = self._check_points(points)
        # nonzero only at x = 0 exactly: the envelope grid sees it, continuous
        # uniform candidates never do
        return np.where(pts[:, 0] == 0.0, 1.0, 0.0)[:, None]


def test_rejection_cap_error(rng):
    with pytest.raises(RuntimeError, match="rejection cap"):
        sample_projection_chain(_ZeroSpikeKernel(), rng)


class _EnvelopeCheater(ProjectionKernel):
    """Reports a low diagonal on the first (grid) call, then spikes."""

    rank = 1
    dim = 1
    metadata = {}

    def __init__(self):
        self.calls = 0

    def feature_matrix(self, points):
        pts = self._check_points(points)
        self.calls += 1
        scale = 1.0 if self.calls == 1 else 10.0
        return np.full((pts.shape[0], 1), scale)


def test_envelope_violation_error(rng):
    with pytest.raises(RuntimeError, match="envelope violated"):
        sample_projection_chain(_EnvelopeCheater(), rng)


def test_chain_rejects_high_dimension():
    with pytest.raises(ValueError):
        sample_projection_chain(ope_kernel(3, 2), np.random.default_rng(0))

import numpy as np
import pytest

from dppss.discretize import (TransferBoundInputs, build_discrete_dpp, build_feature_matrix,
                              error_functional, inclusion_probability, l_matrix_entries,
                              sample_discrete, variance_transfer_interval)
from dppss.estimators import discrete_variance_exact
from dppss.experiments import trial_rng
from dppss.kernels import ope_kernel, wavelet_kernel
from dppss.oracle import enumerate_subset_probabilities
from dppss.wavelets import haar


def test_feature_matrix_haar_example():
    k = wavelet_kernel(haar(), 1, 1)
    psi = build_feature_matrix(k, np.array([[0.2], [0.7]]))
    assert np.allclose(psi, np.array([[np.sqrt(2.0), 0.0], [0.0, np.sqrt(2.0)]]))


def test_feature_matrix_ope_ones():
    psi = build_feature_matrix(ope_kernel(1, 1), np.array([[0.1], [0.4], [0.9]]))
    assert np.allclose(psi, 1.0)


def test_feature_matrix_domain_check():
    k = wavelet_kernel(haar(), 1, 1)
    with pytest.raises(ValueError):
        build_feature_matrix(k, np.array([[1.2]]))


def test_feature_matrix_consistent_with_kernel(rng, db2):
    k = wavelet_kernel(db2, 3, 1, "periodized")
    pts = rng.uniform(size=(12, 1))
    psi = build_feature_matrix(k, pts)
    gram_pts = psi @ psi.T
    direct = np.array([[k(pts[i], pts[j]) for j in range(12)] for i in range(12)])
    assert np.max(np.abs(gram_pts - direct)) < 1e-10


def test_build_identity_case():
    k = wavelet_kernel(haar(), 1, 1)
    psi = build_feature_matrix(k, np.array([[0.2], [0.7]]))
    dpp = build_discrete_dpp(psi, np.ones(2))
    assert dpp.rank == 2
    assert np.allclose(dpp.kernel_matrix(), np.eye(2), atol=1e-12)
    assert np.allclose(dpp.eigenvalues, 1.0)
    # the DPP must return both points every time
    for t in range(16):
        assert np.array_equal(sample_discrete(dpp, trial_rng(0, t)), [0, 1])


def test_build_rank_one_uniform():
    psi = build_feature_matrix(ope_kernel(1, 1), np.array([[0.1], [0.5], [0.9]]))
    dpp = build_discrete_dpp(psi, np.ones(3))
    assert dpp.rank == 1
    assert np.allclose(dpp.inclusion_probabilities(), 1.0 / 3.0)
    assert abs(inclusion_probability(dpp, 0) - 1.0 / 3.0) < 1e-12


def test_build_rejects_bad_inputs():
    with pytest.raises(ValueError):
        build_discrete_dpp(np.zeros((0, 2)), np.ones(0))
    with pytest.raises(ValueError):
        build_discrete_dpp(np.ones((3, 1)), np.array([1.0, 0.0, 1.0]))
    with pytest.raises(ValueError):
        build_discrete_dpp(np.zeros((3, 2)), np.ones(3))


def test_basis_invariants(rng, db2):
    pts = rng.uniform(size=(400, 1))
    for kernel in (wavelet_kernel(haar(), 2, 1), ope_kernel(1, 5),
                   wavelet_kernel(db2, 3, 1, "periodized")):
        psi = build_feature_matrix(kernel, pts)
        rho = 0.5 + rng.uniform(size=400)
        dpp = build_discrete_dpp(psi, rho)
        u = dpp.basis
        assert np.max(np.abs(u.T @ u - np.eye(dpp.rank))) < 1e-10
        incl = dpp.inclusion_probabilities()
        assert np.all((incl >= -1e-12) & (incl <= 1.0 + 1e-12))
        assert abs(incl.sum() - dpp.rank) < 1e-8
        assert dpp.rank <= kernel.rank


def test_deterministic_sign_convention(rng):
    pts = rng.uniform(size=(100, 1))
    psi = build_feature_matrix(ope_kernel(1, 3), pts)
    a = build_discrete_dpp(psi, np.ones(100))
    b = build_discrete_dpp(psi.copy(), np.ones(100))
    assert np.array_equal(a.basis, b.basis)
    cols = a.basis
    # U = B V / sqrt(lambda) inherits V's sign fix; reconstruction determines V
    assert a.eigenvalues[0] >= a.eigenvalues[-1]


def test_l_matrix_reproducible_from_kernel(rng):
    kernel = ope_kernel(1, 3)
    pts = rng.uniform(size=(40, 1))
    rho = 0.5 + rng.uniform(size=40)
    psi = build_feature_matrix(kernel, pts)
    b = psi / np.sqrt(40 * rho)[:, None]
    l_direct = b @ b.T
    l_formula = l_matrix_entries(kernel, pts, rho, np.arange(40), np.arange(40))
    assert np.max(np.abs(l_direct - l_formula)) < 1e-12


def test_eigenvalue_concentration_uniform_data():
    kernel = wavelet_kernel(haar(), 2, 1)
    for t in range(3):
        pts = trial_rng(21, "eig", t).uniform(size=(10_000, 1))
        dpp = build_discrete_dpp(build_feature_matrix(kernel, pts), np.ones(10_000))
        assert dpp.rank == 4
        assert np.all((dpp.eigenvalues > 0.8) & (dpp.eigenvalues < 1.2))


def test_sample_discrete_identity_and_singleton(rng):
    dpp_id = build_discrete_dpp(np.eye(3) * np.sqrt(3.0), np.ones(3))
    assert np.array_equal(sample_discrete(dpp_id, rng), [0, 1, 2])
    # U = e1: always picks the first index
    from dppss.discretize import DiscreteProjectionDPP
    single = DiscreteProjectionDPP(basis=np.array([[1.0], [0.0]]),
                                   eigenvalues=np.ones(1), rank_tol=1e-10)
    for _ in range(8):
        assert np.array_equal(sample_discrete(single, rng), [0])


def test_marginals_match_inclusion_probabilities():
    kernel = wavelet_kernel(haar(), 1, 1)
    pts = trial_rng(2, "marg").uniform(size=(8, 1))
    dpp = build_discrete_dpp(build_feature_matrix(kernel, pts), np.ones(8))
    incl = dpp.inclusion_probabilities()
    trials = 20_000
    counts = np.zeros(8)
    for t in range(trials):
        counts[sample_discrete(dpp, trial_rng(3, "marg", t))] += 1
    freq = counts / trials
    se = np.sqrt(incl * (1 - incl) / trials)
    assert np.all(np.abs(freq - incl) <= 3 * se + 1e-9)


def test_enumeration_normalization_small_cases(rng):
    # all pipeline outputs with N <= 8, m <= 3: probabilities clamp >= 0, sum to 1
    for n_pts, kernel in [(4, ope_kernel(1, 2)), (6, wavelet_kernel(haar(), 1, 1)),
                          (8, ope_kernel(1, 3))]:
        pts = np.sort(rng.uniform(size=n_pts))[:, None]
        dpp = build_discrete_dpp(build_feature_matrix(kernel, pts), np.ones(n_pts))
        table = enumerate_subset_probabilities(dpp)
        assert all(p >= 0.0 for p in table.values())
        assert abs(sum(table.values()) - 1.0) < 1e-9


def test_discrete_variance_exact_examples(rng):
    dpp_id = build_discrete_dpp(np.eye(4) * 2.0, np.ones(4))
    assert discrete_variance_exact(dpp_id, rng.standard_normal(4)) < 1e-12
    psi = build_feature_matrix(ope_kernel(1, 1), np.array([[0.2], [0.8]]))
    dpp = build_discrete_dpp(psi, np.ones(2))
    assert abs(discrete_variance_exact(dpp, np.array([0.0, 1.0])) - 0.25) < 1e-12


def test_discrete_variance_matches_enumeration(rng):
    kernel = wavelet_kernel(haar(), 1, 1)
    pts = np.sort(rng.uniform(size=6))[:, None]
    dpp = build_discrete_dpp(build_feature_matrix(kernel, pts), np.ones(6))
    fvals = pts[:, 0] ** 2
    table = enumerate_subset_probabilities(dpp)
    stats = [(p, fvals[list(subset)].sum()) for subset, p in table.items()]
    mean = sum(p * s for p, s in stats)
    var_enum = sum(p * s * s for p, s in stats) - mean**2
    assert abs(discrete_variance_exact(dpp, fvals) - var_enum) < 1e-8


def test_discrete_variance_empirical_agreement(rng):
    kernel = wavelet_kernel(haar(), 1, 1)
    pts = np.sort(rng.uniform(size=6))[:, None]
    dpp = build_discrete_dpp(build_feature_matrix(kernel, pts), np.ones(6))
    fvals = np.sin(7 * pts[:, 0])
    exact = discrete_variance_exact(dpp, fvals)
    draws = 100_000
    stats_vals = np.empty(draws)
    for t in range(draws):
        stats_vals[t] = fvals[sample_discrete(dpp, trial_rng(9, "dv", t))].sum()
    dev = stats_vals - stats_vals.mean()
    var_emp = np.mean(dev**2)
    se = np.sqrt(max(np.mean(dev**4) - var_emp**2, 0.0) / draws)
    assert abs(var_emp - exact) <= 3 * se


def test_weighted_variance_variant():
    psi = build_feature_matrix(ope_kernel(1, 1), np.array([[0.2], [0.8]]))
    dpp = build_discrete_dpp(psi, np.ones(2))
    base = discrete_variance_exact(dpp, np.array([0.0, 2.0]))
    weighted = discrete_variance_exact(dpp, np.array([0.0, 1.0]),
                                       weights=np.array([1.0, 2.0]))
    assert abs(base - weighted) < 1e-12


def test_variance_cost_guard():
    dpp = build_discrete_dpp(np.ones((10, 1)), np.ones(10))
    with pytest.raises(ValueError):
        discrete_variance_exact(dpp, np.ones(10), max_points=5)


def test_error_functional_values():
    err, err_t = error_functional(TransferBoundInputs(4, 10_000, 0.1, 0.1))
    # independent re-derivation of the three closed-form terms
    t1 = 4.0 * np.sqrt(2.0 * np.log(20.0) / 1e4)
    t2 = (4.0 / (9.0 * 1e8)) * np.log(170.0) ** 2
    t3 = (4.0 / 1e4) * np.log(170.0)
    assert abs(err - (t1 + t2 + t3)) < 1e-14
    assert abs(err - 0.0999643) < 1e-6
    assert abs(err - 0.1000) < 2e-4
    # the tilde variant swaps both 4-coefficients of the log terms for (n+4)
    assert abs(err_t - (t1 + 2.0 * t2 + 2.0 * t3)) < 1e-14


def test_error_functional_limits_and_monotonicity():
    big, _ = error_functional(TransferBoundInputs(4, 10**12, 0.1, 0.1))
    assert big < 1e-4
    grid = [10**p for p in range(3, 10)]
    vals = [error_functional(TransferBoundInputs(4, n, 0.1, 0.1))[0] for n in grid]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        TransferBoundInputs(4, 100, 1.5, 0.1)
    with pytest.raises(ValueError):
        TransferBoundInputs(4, 100, 0.1, 0.0)


def test_transfer_interval_widening():
    lo, hi = variance_transfer_interval(1.0, 1.0, 4.0, 0.1, 1000)
    lo_w, hi_w = variance_transfer_interval(1.0, 1.0, 4.0, 0.1, 1000,
                                            epsilon=0.2, rank=4)
    assert lo_w < lo and hi_w > hi
    with pytest.raises(ValueError):
        variance_transfer_interval(1.0, 1.0, 4.0, 0.1, 1000, epsilon=0.2)


def test_vanished_residual_guard():
    from dppss.discretize import DiscreteProjectionDPP
    # duplicated rows leave no mass for the second step
    bad = DiscreteProjectionDPP(basis=np.array([[1.0, 0.0], [1.0, 0.0]]),
                                eigenvalues=np.ones(2), rank_tol=1e-10)
    with pytest.raises(RuntimeError, match="vanished"):
        sample_discrete(bad, trial_rng(1, 0))

import numpy as np
import pytest

from dppss.wavelets import (CASCADE_TOL, DB2_FILTER, ScalingFunction, TensorWavelet,
                            daubechies2_cascade, eval_scaling, eval_tensor, haar,
                            haar_eval, shift_value_matrix)


def trapezoid(values, step):
    return np.trapezoid(values, dx=step)


def test_haar_eval_halfopen():
    assert haar_eval(0.5) == 1.0
    assert haar_eval(1.0) == 0.0
    assert haar_eval(-0.2) == 0.0
    assert haar_eval(0.0) == 1.0


def test_db2_filter_identities():
    # closed-form Daubechies coefficients; oracle is exact arithmetic
    assert abs(DB2_FILTER.sum() - np.sqrt(2.0)) < 1e-12
    double_shift = DB2_FILTER[0] * DB2_FILTER[2] + DB2_FILTER[1] * DB2_FILTER[3]
    assert abs(double_shift) < 1e-12
    assert abs(np.sum(DB2_FILTER**2) - 1.0) < 1e-12


def test_cascade_requires_min_levels():
    with pytest.raises(ValueError):
        daubechies2_cascade(5)


def test_cascade_table_integral(db2):
    step = 2.0 ** -db2.cascade_levels
    assert abs(trapezoid(db2.table, step) - 1.0) < 1e-6


def test_db2_scaling_function_invariants(db2):
    step = 2.0 ** -db2.cascade_levels
    assert abs(trapezoid(db2.table, step) - 1.0) < 1e-6
    assert abs(trapezoid(db2.table**2, step) - 1.0) < 1e-4
    for k in (1, 2):
        shifted = np.zeros_like(db2.table)
        shifted[k * 2**db2.cascade_levels:] = db2.table[:-k * 2**db2.cascade_levels]
        assert abs(trapezoid(db2.table * shifted, step)) < 1e-4


def test_haar_scaling_invariants():
    sf = haar()
    xs = np.linspace(-0.5, 1.5, 20001)
    vals = sf(xs)
    step = xs[1] - xs[0]
    assert abs(trapezoid(vals, step) - 1.0) < 1e-3  # trapezoid at the jump
    assert np.all((vals == 0.0) | (vals == 1.0))


def test_eval_scaling_examples(db2):
    assert eval_scaling(haar(), 0.25) == 1.0
    assert eval_scaling(db2, -1.0) == 0.0
    assert abs(eval_scaling(db2, 3.0)) < 1e-6
    assert eval_scaling(db2, 5.0) == 0.0


def test_eval_tensor_haar_examples():
    sf = haar()
    w = TensorWavelet(scale=1, shift=(0,), dim=1)
    assert abs(eval_tensor(w, sf, [[0.25]]) - np.sqrt(2.0)) < 1e-12
    assert eval_tensor(w, sf, [[0.75]]) == 0.0
    w2 = TensorWavelet(scale=1, shift=(0, 1), dim=2)
    assert abs(eval_tensor(w2, sf, [[0.25, 0.75]]) - 2.0) < 1e-12


def test_eval_tensor_dimension_mismatch():
    w = TensorWavelet(scale=1, shift=(0, 1), dim=2)
    with pytest.raises(ValueError):
        w.eval(haar(), [[0.25]])
    with pytest.raises(ValueError):
        TensorWavelet(scale=1, shift=(0,), dim=2)


def test_periodized_wrap_matches_manual(db2):
    # j=2: support [0,3] wraps modulo 4; sum the shifted copies by hand
    w = TensorWavelet(scale=2, shift=(3,), dim=1, periodized=True)
    x = np.array([[0.1], [0.6], [0.9]])
    manual = np.zeros(3)
    for l in (-1, 0, 1):
        manual += db2(4.0 * x[:, 0] - 3.0 + 4.0 * l)
    manual *= 2.0
    got = w.eval(db2, x)
    assert np.allclose(got, manual, atol=1e-12)


@pytest.mark.parametrize("d,j", [(1, 0), (1, 2), (1, 4), (2, 2)])
def test_partition_of_unity_haar(d, j):
    sf = haar()
    axis = np.linspace(0.0, 1.0, 101, endpoint=False)
    coords = (axis[:, None] if d == 1 else
              np.stack(np.meshgrid(axis, axis, indexing="ij"), -1).reshape(-1, 2))
    shifts = np.arange(0, 2**j)
    total = np.ones(coords.shape[0])
    for i in range(d):
        cols = shift_value_matrix(sf, j, shifts, coords[:, i], False)
        total *= cols.sum(axis=1) * 2.0 ** (-j / 2.0)
    assert np.max(np.abs(total - 1.0)) < 1e-12


@pytest.mark.parametrize("j", [1, 2, 4])
def test_partition_of_unity_periodized_db2(db2, j):
    xs = np.linspace(0.0, 1.0, 101, endpoint=False)
    cols = shift_value_matrix(db2, j, np.arange(2**j), xs, True)
    total = cols.sum(axis=1) * 2.0 ** (-j / 2.0)
    assert np.max(np.abs(total - 1.0)) < 1e-6


def test_shift_square_sum_lower_bound(db2):
    # sum_k phi(x - k)^2 >= c > 0; Haar attains exactly 1
    xs = np.linspace(0.0, 1.0, 2001, endpoint=False)
    hk = shift_value_matrix(haar(), 0, np.arange(-1, 2), xs, False)
    assert np.allclose((hk**2).sum(axis=1), 1.0)
    dk = shift_value_matrix(db2, 0, np.arange(-3, 2), xs, False)
    sq = (dk**2).sum(axis=1)
    assert sq.min() > 0.4  # measured c_phi for db2 is about 0.5


def test_interpolation_error_halves_with_resolution(db2_hires, rng):
    # error vs the high-resolution table roughly halves per level (factor 2.5 slack)
    x = rng.uniform(0.0, 3.0, 1000)
    ref = db2_hires(x)
    errs = []
    for r in (7, 8, 9, 10):
        sf = daubechies2_cascade(r)
        errs.append(np.max(np.abs(sf(x) - ref)))
    for coarse, fine in zip(errs, errs[1:]):
        ratio = coarse / fine
        assert 0.8 <= ratio <= 5.0, (errs, ratio)


def test_first_moment(db2):
    assert haar().first_moment() == 0.5
    assert abs(db2.first_moment() - (3.0 - np.sqrt(3.0)) / 2.0) < 1e-4


def test_scaling_function_immutable(db2):
    with pytest.raises(Exception):
        db2.kind = "other"

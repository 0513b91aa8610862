import math
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import hypergeom

from qadjust import (
    UnsupportedQError,
    asymptotic_expected_jaccard,
    asymptotic_expected_measure,
    entropy_q,
    expected_joint_entropy_q,
    expected_mi_q,
    expected_phi_cell,
    expected_sum_phi,
    expected_vi_q,
    from_counts,
    hypergeometric_pmf_series,
    jaccard,
    moment_report,
    second_moment_sum_phi,
    variance_joint_entropy_q,
    variance_mi_q,
    variance_vi_q,
)
from qadjust.moments import (
    CallablePhi,
    PowerPhi,
    _clamped_variance,
    _first_moments,
    _second_moments,
    asymptotic_variance_limit_check,
    variance_sum_phi,
)
from qadjust.exceptions import NumericalConsistencyError
from qadjust.oracle import monte_carlo_moments

from conftest import tables


def _draw_pmf(a, b, n):
    """PMF of successes when drawing a of n objects, b of which are marked."""
    counts = {}
    for draw in combinations(range(n), a):
        k = sum(1 for x in draw if x < b)
        counts[k] = counts.get(k, 0) + 1
    total = math.comb(n, a)
    return {k: Fraction(v, total) for k, v in counts.items()}


def test_pmf_small_examples():
    assert hypergeometric_pmf_series(1, 1, 2) == [(0, 0.5), (1, 0.5)]
    assert hypergeometric_pmf_series(2, 2, 2) == [(2, 1.0)]


def test_pmf_matches_draw_enumeration():
    series = hypergeometric_pmf_series(3, 4, 10)
    exact = _draw_pmf(3, 4, 10)
    assert [k for k, _ in series] == sorted(exact)
    for k, p in series:
        assert p == pytest.approx(float(exact[k]), abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 3000), st.data())
def test_pmf_normalized_and_correct(n, data):
    a = data.draw(st.integers(0, n))
    b = data.draw(st.integers(0, n))
    series = hypergeometric_pmf_series(a, b, n)
    ks = [k for k, _ in series]
    assert ks == list(range(max(0, a + b - n), min(a, b) + 1))
    probs = np.array([p for _, p in series])
    assert abs(math.fsum(probs) - 1.0) <= 1e-12
    ref = hypergeom.pmf(ks, n, b, a)
    assert np.allclose(probs, ref, rtol=1e-9, atol=1e-300)


def test_pmf_rejects_bad_marginals():
    with pytest.raises(ValueError):
        hypergeometric_pmf_series(5, 2, 4)
    with pytest.raises(ValueError):
        hypergeometric_pmf_series(-1, 2, 4)


def test_expected_phi_cell_examples():
    assert expected_phi_cell(1, 1, 2, 2) == pytest.approx(0.5, abs=1e-15)
    assert expected_phi_cell(2, 2, 4, 2) == pytest.approx(8 / 6, abs=1e-15)
    identity = CallablePhi(lambda n: n.astype(float), "n")
    for a, b, n in [(3, 4, 10), (7, 11, 30), (50, 60, 200)]:
        assert expected_phi_cell(a, b, n, phi=identity) == pytest.approx(a * b / n, rel=1e-13)


def test_sum_phi_examples():
    assert expected_sum_phi(from_counts([[7]]), 2) == 49.0
    assert expected_sum_phi(from_counts([[1, 0], [0, 1]]), 2) == pytest.approx(2.0, abs=1e-15)
    assert second_moment_sum_phi(from_counts([[7]]), 3) == pytest.approx(343.0**2, rel=1e-15)
    # both permutation outcomes give sum n^2 = 2, so E[(sum n^2)^2] = 4
    assert second_moment_sum_phi(from_counts([[1, 0], [0, 1]]), 2) == pytest.approx(4.0, abs=1e-14)
    assert variance_sum_phi(from_counts([[1, 0], [0, 1]]), 2) == pytest.approx(0.0, abs=1e-14)


def test_entropy_expectation_examples():
    one = from_counts([[6]])
    for q in (None, 2.0, 3.0):
        assert expected_joint_entropy_q(one, q) == pytest.approx(0.0, abs=1e-15)
        assert expected_mi_q(one, q) == pytest.approx(0.0, abs=1e-15)
        assert expected_vi_q(one, q) == pytest.approx(0.0, abs=1e-15)
        assert variance_joint_entropy_q(one, q) == 0.0
    assert expected_joint_entropy_q(from_counts([[1, 0], [0, 1]]), 2) == pytest.approx(0.5, abs=1e-15)


# Exact rational moments of sum n^q from weighted enumeration of every table
# with the given marginals (checked by hand for the first pair).
FROZEN = [
    ([2, 1], [2, 1], 2, Fraction(11, 3), Fraction(43, 3)),
    ([2, 1], [2, 1], 3, Fraction(5), Fraction(33)),
    ([3, 2], [2, 2, 1], 2, Fraction(33, 5), Fraction(229, 5)),
    ([3, 2], [2, 2, 1], 3, Fraction(49, 5), Fraction(581, 5)),
    ([2, 2, 2], [3, 3], 2, Fraction(42, 5), Fraction(372, 5)),
    ([2, 2, 2], [3, 3], 3, Fraction(66, 5), Fraction(1044, 5)),
]


def _table_with(a, b):
    # northwest-corner fill: any table with these marginals
    a, b = list(a), list(b)
    grid = np.zeros((len(a), len(b)), dtype=int)
    i = j = 0
    while i < len(a) and j < len(b):
        x = min(a[i], b[j])
        grid[i, j] = x
        a[i] -= x
        b[j] -= x
        if a[i] == 0:
            i += 1
        else:
            j += 1
    return from_counts(grid)


@pytest.mark.parametrize("a, b, q, e1, e2", FROZEN)
def test_frozen_rational_moments(a, b, q, e1, e2):
    t = _table_with(a, b)
    assert expected_sum_phi(t, q) == pytest.approx(float(e1), rel=1e-14)
    assert second_moment_sum_phi(t, q) == pytest.approx(float(e2), rel=1e-14)
    assert second_moment_sum_phi(t.T, q) == pytest.approx(float(e2), rel=1e-14)


def test_moment_identities():
    t = from_counts([[5, 2, 0], [1, 4, 3], [0, 2, 6]])
    for q in (None, 0.5, 2.0, 3.0):
        hu, hv = entropy_q(t, q, "U"), entropy_q(t, q, "V")
        eh = expected_joint_entropy_q(t, q)
        assert expected_mi_q(t, q) == pytest.approx(hu + hv - eh, abs=1e-12)
        assert expected_vi_q(t, q) == pytest.approx(2 * eh - hu - hv, abs=1e-12)
        v = variance_joint_entropy_q(t, q)
        assert variance_mi_q(t, q) == v
        assert variance_vi_q(t, q) == 4 * v
        rep = moment_report(t, q)
        assert rep.var_mi == rep.var_joint_entropy
        assert rep.var_vi == 4 * rep.var_joint_entropy
        assert rep.e_joint_entropy == pytest.approx(eh, abs=1e-14)


def test_batched_cell_functions_agree_with_single():
    t = from_counts([[9, 3, 1, 0], [2, 8, 4, 1], [0, 1, 5, 7]])
    phis = [PowerPhi(2.0), PowerPhi(0.5), PowerPhi(3.0)]
    first, second = _second_moments(t, phis)
    for k, phi in enumerate(phis):
        f1, s1 = _second_moments(t, [phi])
        assert first[k] == pytest.approx(f1[0], rel=1e-14)
        assert second[k] == pytest.approx(s1[0], rel=1e-14)
    assert np.allclose(_first_moments(t, phis), first, rtol=1e-14)


@settings(max_examples=60, deadline=None)
@given(tables(max_rows=4, max_cols=4, max_cell=15), st.sampled_from([None, 0.5, 2.0, 3.0]))
def test_transposition_invariance(t, q):
    assert expected_sum_phi(t, q) == pytest.approx(expected_sum_phi(t.T, q), rel=1e-12, abs=1e-12)
    assert second_moment_sum_phi(t, q) == pytest.approx(second_moment_sum_phi(t.T, q), rel=1e-12, abs=1e-12)
    assert variance_mi_q(t, q) == pytest.approx(variance_mi_q(t.T, q), rel=1e-8, abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(tables(max_cell=20), st.sampled_from([1.5, 2.0, 3.0]))
def test_expected_mi_nonnegative_above_one(t, q):
    assert expected_mi_q(t, q) >= -1e-12


def test_clamped_variance():
    assert _clamped_variance(2.0, 4.0 - 1e-13) == 0.0
    assert _clamped_variance(1.0, 3.0) == 2.0
    with pytest.raises(NumericalConsistencyError):
        _clamped_variance(2.0, 3.0)


@pytest.mark.parametrize("grid", [[[3, 2], [1, 4]], [[5, 5, 0], [0, 5, 5]], [[20, 10], [5, 15], [10, 10]]])
def test_monte_carlo_contains_exact(grid):
    t = from_counts(grid)
    phi = np.square

    def stat(counts):
        return phi(counts.astype(float)).sum(axis=(1, 2))

    om = monte_carlo_moments(t.row_marginals, t.col_marginals, stat, 100_000, seed=3, vectorized=True)
    exact = expected_sum_phi(t, 2)
    # 99.9% half-width from the reported 99% one
    half = om.ci99_halfwidth * 3.2905 / 2.5758
    assert abs(om.mean - exact) <= half
    var = variance_sum_phi(t, 2)
    assert om.variance == pytest.approx(var, rel=0.03)


def test_monte_carlo_report_method():
    t = from_counts([[5, 0], [0, 5]])
    rep = moment_report(t, 2, "mc", n_samples=20_000, seed=11)
    exact = moment_report(t, 2)
    assert rep.method == "monte-carlo"
    assert rep.extra["seed"] == 11
    assert abs(rep.e_sum_phi - exact.e_sum_phi) <= 4 * rep.extra["ci99_halfwidth_sum_phi"]
    with pytest.raises(ValueError):
        moment_report(t, 2, "mc")
    assert moment_report(t, 2, "enumeration").e_sum_phi == pytest.approx(exact.e_sum_phi, rel=1e-12)


def test_asymptotic_closed_forms():
    t = from_counts([[250, 250], [250, 250]])
    assert asymptotic_expected_measure(t, 2, "MI") == pytest.approx(0.25, abs=1e-15)
    assert abs(expected_mi_q(t, 2) - 0.25) <= 0.01
    assert abs(expected_joint_entropy_q(t, 2) - asymptotic_expected_measure(t, 2, "JointH")) <= 0.01
    one = from_counts([[40, 60]])
    assert asymptotic_expected_measure(one, 2, "MI") == 0.0
    # one-cluster U: the joint entropy is H_q(V) exactly and in the limit
    assert expected_joint_entropy_q(one, 2) == pytest.approx(asymptotic_expected_measure(one, 2, "JointH"),
                                                             abs=1e-15)
    hu, hv = entropy_q(t, 3, "U"), entropy_q(t, 3, "V")
    assert asymptotic_expected_measure(t, 3, "VI") == pytest.approx(hu + hv - 4 * hu * hv, abs=1e-15)
    rep = moment_report(t, 2, "asymptotic")
    assert rep.var_mi == 0.0 and rep.method == "asymptotic"
    with pytest.raises(UnsupportedQError):
        asymptotic_expected_measure(t, None, "MI")
    with pytest.raises(ValueError):
        asymptotic_expected_measure(t, 2, "NMI")


def test_asymptotic_jaccard_against_monte_carlo():
    t = from_counts([[300, 100, 100], [100, 200, 200]])
    om = monte_carlo_moments(t.row_marginals, t.col_marginals, jaccard, 2000, seed=5)
    assert abs(asymptotic_expected_jaccard(t) - om.mean) <= 0.01


def test_variance_vanishing_trend():
    t = from_counts([[3, 1], [2, 4]])
    for q in (2.0, 3.0):
        v = asymptotic_variance_limit_check(t, q)
        assert v[0] > v[1] > v[2] > 0
    assert asymptotic_variance_limit_check(from_counts([[4]]), 2) == [0.0, 0.0, 0.0]
    small = variance_mi_q(from_counts([[3, 2], [2, 3]]), 2)
    big = variance_mi_q(from_counts([[30, 20], [20, 30]]), 2)
    assert big < small

import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
import scipy.stats

from volembed.bounds import (
    BoundParams,
    InfeasibleError,
    KCapWarning,
    analytic_bound_checks,
    contraction_tail_bound,
    distance_distortion_bound,
    distance_union_bound_feasible,
    expansion_tail_bound,
    exponent_h,
    l_param,
    search_thresholds,
    t_param,
    volume_distortion_bound,
    volume_union_bound_feasible,
    volume_union_bound_sum,
)
from volembed.gamma import DomainError, chi_square_cdf, chi_square_sf


def scipy_union_sum(n, d, k, a, b):
    """Union-bound sum from scipy's chi-square, independent of our incomplete gamma."""
    con = sum(math.comb(n, i + 1) * scipy.stats.chi2.cdf(i * a * a, t_param(i, d)) for i in range(1, k + 1))
    exp_ = sum(math.comb(n, i + 1) * scipy.stats.chi2.sf(i * b * b, l_param(i, d)) for i in range(1, k + 1))
    return con, exp_


def test_dof_params():
    assert (t_param(1, 8), l_param(1, 8)) == (8, 8)
    assert (t_param(3, 8), l_param(3, 8)) == (18, 19)
    for d in range(1, 33):
        for s in range(1, d + 1):
            assert l_param(s, d) - t_param(s, d) == (s - 1) * (s - 2) // 2


def test_contraction_tail_bound_examples():
    assert contraction_tail_bound(1, 3, 0.5) == pytest.approx((math.e * 0.25) ** 1.5 / 3, rel=1e-14)
    assert contraction_tail_bound(1, 3, 0.5) == pytest.approx(0.18677, abs=1e-4)
    assert contraction_tail_bound(2, 8, 1e-6) < 1e-80
    with pytest.raises(DomainError):
        contraction_tail_bound(1, 2, 0.5)  # t = 2


def test_contraction_bound_dominates_exact_cdf():
    for s in range(1, 9):
        for d in range(max(3, s), 21):
            t = t_param(s, d)
            if t <= 2:
                continue
            for a in np.linspace(0.05, 1.0, 12):
                assert chi_square_cdf(t, s * a * a) <= contraction_tail_bound(s, d, a)


def test_expansion_tail_bound_examples():
    # direct evaluation: l = 3, s b^2 = 16
    assert expansion_tail_bound(1, 3, 4) == pytest.approx(math.exp(-6.5) * 16**2.5, rel=1e-14)
    assert expansion_tail_bound(1, 3, 4) == pytest.approx(1.539522, abs=1e-6)
    with pytest.raises(DomainError):
        expansion_tail_bound(1, 3, 3)  # 9 < 2l + 4 = 10
    values = [expansion_tail_bound(2, 8, b) for b in (5, 10, 20, 40)]
    assert values == sorted(values, reverse=True) and values[-1] < 1e-100


def test_expansion_bound_dominates_exact_survival():
    for s in range(1, 9):
        for d in range(max(3, s), 21):
            l = l_param(s, d)
            if l <= 2:
                continue
            b0 = math.sqrt((2 * l + 4) / s)
            for factor in (1.001, 1.2, 2.0, 3.0):
                b = b0 * factor
                assert chi_square_sf(l, s * b * b) <= expansion_tail_bound(s, d, b)


def test_exponent_h_endpoints():
    assert exponent_h(8, 1) == 0.25
    assert exponent_h(8, 4) == 0.25
    for d in range(4, 65, 2):
        values = [exponent_h(Fraction(d), Fraction(i)) for i in range(1, d // 2 + 1)]
        assert max(values) == Fraction(2, d)
        assert values[0] == values[-1] == Fraction(2, d)
    with pytest.raises(DomainError):
        exponent_h(8, 9)


def test_exponent_h_increasing_beyond_its_minimum():
    # h_d'(x) has the sign of x^2 + 2x - d - 1, so h_d increases from sqrt(d+2) - 1 on
    for d in range(3, 65):
        start = max(d / 4, math.sqrt(d + 2) - 1)
        xs = np.linspace(start, d, 200)[:-1]
        eps = 1e-6
        assert all(exponent_h(d, x + eps) - exponent_h(d, x) > 0 for x in xs)


def test_exponent_h_not_increasing_from_quarter_for_small_d():
    # d/4 lies left of the minimiser sqrt(d+2) - 1 when d < 4 + 4 sqrt(2)
    for d in range(4, 10):
        x = d / 4
        assert exponent_h(d, x + 1e-6) < exponent_h(d, x)
    for d in range(10, 65):
        x = d / 4
        assert exponent_h(d, x + 1e-6) > exponent_h(d, x)


def test_exponent_h_midpoint_convex():
    for d in range(4, 65):
        xs = np.linspace(1, d / 2, 60)
        for x in xs:
            for y in xs[::7]:
                mid = exponent_h(d, (x + y) / 2)
                assert mid <= (exponent_h(d, x) + exponent_h(d, y)) / 2 + 1e-15


def test_k_cap_exponent():
    for d in range(4, 65):
        for i in range(1, d // 2 + 1):
            assert exponent_h(Fraction(d), Fraction(i)) <= Fraction(2, d)
        if d % 2 == 0:
            assert exponent_h(Fraction(d), Fraction(d // 2 + 1)) > Fraction(2, d)


def test_distance_distortion_bound():
    for d in (3, 8, 20):
        assert distance_distortion_bound(math.exp(d), d, 1.0) == pytest.approx(math.e**2, rel=1e-12)
    assert distance_distortion_bound(32, 8, 1.0) == pytest.approx(32**0.25 * math.sqrt(math.log(32) / 8), rel=1e-14)
    assert distance_distortion_bound(32, 8, 1.0) == pytest.approx(1.5655, abs=1e-4)
    sweep = [distance_distortion_bound(1000, d, 1.0) for d in range(3, 21)]
    assert all(a > b for a, b in zip(sweep, sweep[1:]))


def test_volume_distortion_bound():
    assert volume_distortion_bound(32, 8, 1.0) == pytest.approx(4.936, abs=1e-3)
    assert volume_distortion_bound(32, 8, 3.0) == pytest.approx(3 * volume_distortion_bound(32, 8, 1.0), rel=1e-15)
    ratio = volume_distortion_bound(32, 8, 1.0) / distance_distortion_bound(32, 8, 1.0)
    assert ratio == pytest.approx(math.sqrt(8 * math.log(math.log(32))), rel=1e-14)
    assert ratio > 1
    with pytest.raises(DomainError):
        volume_distortion_bound(15, 8, 1.0)


def test_distance_certificate_from_closed_form_thresholds():
    n, d = 32, 8
    a = 0.1 * math.sqrt(d) / n ** (2 / d)
    b = 5 * 1.0 * math.sqrt(math.log(n))
    cert = distance_union_bound_feasible(n, d, a, b)
    assert cert is not None
    con, exp_ = scipy_union_sum(n, d, 1, a, b)
    assert cert.failure_bound == pytest.approx(con + exp_, rel=1e-9)
    assert cert.failure_bound < 1
    assert distance_union_bound_feasible(n, d, 2.0, 1.0) is None
    assert distance_union_bound_feasible(n, d, 2.0, 2.0) is None


def test_distance_failure_bound_monotone_in_b():
    values = []
    for b in np.linspace(3, 8, 20):
        cert = distance_union_bound_feasible(32, 8, 0.3, b)
        values.append(math.inf if cert is None else cert.failure_bound)
    assert all(x >= y for x, y in zip(values, values[1:]))


def test_volume_union_bound_regression():
    con, exp_ = volume_union_bound_sum(32, 8, 4, 0.2, 8.0)
    ref_con, ref_exp = scipy_union_sum(32, 8, 4, 0.2, 8.0)
    assert con == pytest.approx(ref_con, rel=1e-9)
    assert exp_ == pytest.approx(ref_exp, rel=1e-9)
    # frozen baseline
    assert con + exp_ == pytest.approx(3.2920839150037257e-06, rel=1e-9)
    cert = volume_union_bound_feasible(32, 8, 4, 0.2, 8.0)
    assert cert is not None and cert.failure_bound == con + exp_


def test_volume_k1_is_distance_case():
    vol = volume_union_bound_sum(32, 8, 1, 0.5, 5.0)
    dist = distance_union_bound_feasible(32, 8, 0.5, 5.0)
    assert sum(vol) == dist.failure_bound


def test_volume_sum_monotone_in_k():
    sums = [sum(volume_union_bound_sum(32, 8, k, 0.5, 5.0)) for k in range(1, 5)]
    assert all(x <= y for x, y in zip(sums, sums[1:]))


def test_volume_certificate_refused_beyond_cap():
    with pytest.warns(KCapWarning):
        assert volume_union_bound_feasible(32, 8, 5, 0.01, 50.0) is None
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert volume_union_bound_feasible(32, 8, 4, 0.01, 50.0) is not None


def test_search_distance():
    bp = search_thresholds(32, 8, 1, "distance")
    assert bp.mode == "distance" and bp.k == 1
    cert = distance_union_bound_feasible(32, 8, bp.a, bp.b)
    assert cert is not None
    assert bp.contraction < 0.5 and bp.expansion < 0.5
    # maximal to 1e-3 relative: a slightly larger a or slightly smaller b breaks its half
    assert sum(scipy_union_sum(32, 8, 1, bp.a * 1.002, 1e9)) >= 0.5
    assert sum(scipy_union_sum(32, 8, 1, 1e-9, bp.b / 1.002)) >= 0.5
    c = bp.implied_constant()
    assert bp.distortion == pytest.approx(distance_distortion_bound(32, 8, c), rel=1e-12)


def test_search_ratio_grows_with_n():
    ratios = [search_thresholds(n, 8, 1, "distance").distortion for n in (32, 64, 128)]
    assert ratios == sorted(ratios)


def test_search_volume():
    bp = search_thresholds(16, 8, 4, "volume")
    assert volume_union_bound_feasible(16, 8, 4, bp.a, bp.b) is not None
    with pytest.raises(InfeasibleError):
        search_thresholds(16, 8, 5, "volume")


def test_search_self_consistency_over_grid():
    for n, d, k in [(4, 3, 1), (20, 4, 2), (50, 6, 3), (100, 10, 5)]:
        bp = search_thresholds(n, d, k, "volume")
        con, exp_ = scipy_union_sum(n, d, k, bp.a, bp.b)
        assert con < 0.5 and exp_ < 0.5


def test_bound_params_invariants():
    with pytest.raises(ValueError):
        BoundParams(10, 8, 2, 2.0, 1.0)
    with pytest.raises(ValueError):
        BoundParams(10, 2, 1, 1.0, 2.0)
    with pytest.raises(ValueError):
        BoundParams(10, 8, 10, 1.0, 2.0)


def test_analytic_bound_checks_report_no_violations():
    checks = analytic_bound_checks()
    assert {c["check"] for c in checks} == {
        "stirling_sandwich",
        "lower_incgamma_bound",
        "upper_incgamma_bound",
        "contraction_tail_bound",
        "expansion_tail_bound",
    }
    assert all(c["violations"] == 0 and c["points"] > 0 for c in checks)

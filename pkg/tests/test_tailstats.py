"""Empirical tails, power-law and lognormal fits, percentiles, KDE, CSV IO."""
import math

import numpy as np
import pytest
from scipy import special

from nlkesten.errors import (EmptyInput, InsufficientPoints, MissingPercentile,
                             ZeroVariance)
from nlkesten.tailstats import (EmpiricalTail, default_window, empirical_tail,
                                fit_lognormal, fit_power_law, kernel_density,
                                percentile_wealth, read_tail_csv,
                                write_tail_csv)


def test_empirical_tail_tiny_cases():
    t = empirical_tail([5.0])
    assert t.wealth.tolist() == [5.0]
    assert t.exceedance.tolist() == [0.0]
    assert t.households_total == 1

    t = empirical_tail([2.0, 1.0, 4.0, 3.0])
    assert t.wealth.tolist() == [1.0, 2.0, 3.0, 4.0]
    assert t.exceedance.tolist() == [0.75, 0.5, 0.25, 0.0]


def test_empirical_tail_collapses_ties():
    t = empirical_tail([1.0, 1.0, 1.0, 9.0])
    assert t.wealth.tolist() == [1.0, 9.0]
    assert t.exceedance.tolist() == [0.25, 0.0]


def test_tail_validation():
    with pytest.raises(EmptyInput):
        EmpiricalTail(np.array([]), np.array([]))
    with pytest.raises(ValueError):
        EmpiricalTail(np.array([2.0, 1.0]), np.array([0.5, 0.2]))
    with pytest.raises(ValueError):
        EmpiricalTail(np.array([1.0, 2.0]), np.array([0.2, 0.5]))
    with pytest.raises(ValueError):
        EmpiricalTail(np.array([1.0]), np.array([1.5]))
    with pytest.raises(ValueError):
        empirical_tail([1.0, -1.0])


def test_power_law_exact_recovery():
    # Points sitting exactly on a Pareto CCDF come back with the same slope
    # and coefficient up to rounding in the linear algebra.
    w = np.geomspace(2.0e5, 1.0e9, 60)
    p = (w / 2.0e5) ** -2.13
    tail = EmpiricalTail(w, p)
    fit = fit_power_law(tail, window=(2.0e5, 1.0e9))
    assert fit.beta == pytest.approx(2.13, abs=1e-10)
    assert fit.alpha_coef == pytest.approx(2.0e5**2.13, rel=1e-8)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.n_points == 60


def test_power_law_window_restricts_points():
    w = np.geomspace(1.0e4, 1.0e9, 100)
    knee = 10.0 ** -1.6
    p = np.where(w < 1.0e6, (w / 1.0e4) ** -0.8, knee * (w / 1.0e6) ** -2.0)
    tail = EmpiricalTail(w, p)
    upper = fit_power_law(tail, window=(1.0e6, 1.0e9))
    assert upper.beta == pytest.approx(2.0, abs=1e-10)
    both = fit_power_law(tail, window=(1.0e4, 1.0e9))
    assert 0.8 < both.beta < 2.0
    with pytest.raises(InsufficientPoints):
        fit_power_law(tail, window=(9.0e8, 1.0e9))


def test_default_window_thresholds():
    # 1000 distinct values: the lower edge is the smallest wealth with
    # exceedance <= 1%, the upper edge the largest with >= 10 exceeders.
    sample = np.arange(1.0, 1001.0)
    tail = empirical_tail(sample)
    lo, hi = default_window(tail)
    assert lo == 990.0
    assert hi == 990.0
    survey = EmpiricalTail(tail.wealth, tail.exceedance)
    with pytest.raises(InsufficientPoints):
        default_window(survey)


def test_power_law_default_window_on_pareto_sample():
    rng = np.random.default_rng(2718)
    sample = 1.0e5 * (1.0 + rng.pareto(1.8, size=200_000))
    fit = fit_power_law(empirical_tail(sample))
    assert fit.window[0] >= percentile_wealth(sample, 0.011)
    assert fit.beta == pytest.approx(1.8, abs=0.1)


def test_lognormal_fit_recovers_moments():
    rng = np.random.default_rng(555)
    sample = np.exp(rng.normal(3.0, 2.0, size=10**6))
    fit = fit_lognormal(sample)
    assert fit.mu_log == pytest.approx(3.0, abs=0.01)
    assert fit.sigma_log == pytest.approx(2.0, abs=0.01)
    assert fit.ks_distance < 0.002


def test_lognormal_ks_flags_wrong_family():
    rng = np.random.default_rng(556)
    sample = 1.0 + rng.pareto(1.2, size=50_000)
    fit = fit_lognormal(sample)
    assert fit.ks_distance > 0.02
    with pytest.raises(ZeroVariance):
        fit_lognormal(np.full(10, 3.0))


def test_percentile_wealth_small_cases():
    sample = [1.0, 2.0, 3.0, 4.0]
    assert percentile_wealth(sample, 0.5) == 2.0
    assert percentile_wealth(sample, 0.0) == 4.0
    assert percentile_wealth(sample, 1.0) == 1.0
    assert percentile_wealth(sample, 0.26) == 3.0
    truncated = EmpiricalTail(np.array([1.0e5, 2.0e5]), np.array([0.4, 0.2]))
    assert percentile_wealth(truncated, 0.25) == 2.0e5
    with pytest.raises(MissingPercentile):
        percentile_wealth(truncated, 0.1)


def test_kde_single_point_is_the_kernel():
    grid, dens = kernel_density([0.0], bandwidth=1.0, gridsize=301)
    assert grid[0] == -3.0 and grid[-1] == 3.0
    expect = np.exp(-0.5 * grid**2) / math.sqrt(2.0 * math.pi)
    np.testing.assert_allclose(dens, expect, atol=1e-12)


def test_kde_integrates_to_one():
    rng = np.random.default_rng(818)
    sample = np.exp(rng.normal(0.0, 0.5, size=20_000))
    grid, dens = kernel_density(sample)
    integral = float(np.sum(np.diff(grid) * (dens[1:] + dens[:-1]) / 2.0))
    assert integral == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(ZeroVariance):
        kernel_density(np.full(5, 2.0))


def test_kde_matches_direct_mixture():
    rng = np.random.default_rng(819)
    sample = rng.normal(0.0, 1.0, size=50)
    grid, dens = kernel_density(sample, bandwidth=0.4, gridsize=64)
    at = grid[17]
    direct = np.mean(np.exp(-0.5 * ((at - sample) / 0.4) ** 2)) \
        / (0.4 * math.sqrt(2.0 * math.pi))
    assert dens[17] == pytest.approx(direct, rel=1e-12)


def test_tail_csv_round_trip(tmp_path):
    rng = np.random.default_rng(42)
    tail = empirical_tail(np.exp(rng.normal(11.0, 1.0, size=500)))
    path = tmp_path / "tail.csv"
    write_tail_csv(tail, path)
    again = read_tail_csv(path, households_total=tail.households_total)
    np.testing.assert_array_equal(again.wealth, tail.wealth)
    np.testing.assert_array_equal(again.exceedance, tail.exceedance)
    write_tail_csv(again, tmp_path / "tail2.csv")
    assert (tmp_path / "tail2.csv").read_bytes() == path.read_bytes()


def test_tail_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("wealth,survival\n1.0,0.5\n")
    with pytest.raises(ValueError, match="survival"):
        read_tail_csv(path)
    (tmp_path / "empty.csv").write_text("wealth,exceedance\n")
    with pytest.raises(EmptyInput):
        read_tail_csv(tmp_path / "empty.csv")


def test_ks_distance_is_the_exact_statistic():
    # Any symmetric three-point log sample standardises to -sqrt(3/2), 0,
    # sqrt(3/2) under population moments, so the KS statistic follows from
    # the normal CDF at those points.
    sample = np.exp(np.array([-1.0, 0.0, 1.0]))
    fit = fit_lognormal(sample)
    z = np.array([-1.0, 0.0, 1.0]) * math.sqrt(1.5)
    cdf = special.ndtr(z)
    hi = np.array([1, 2, 3]) / 3.0
    lo = np.array([0, 1, 2]) / 3.0
    expect = max(np.max(hi - cdf), np.max(cdf - lo))
    assert fit.ks_distance == pytest.approx(expect, abs=1e-15)

"""Asymptotic regime checks: lognormal growth phase, stationary power-law
tails and the scaled-log limit of the super-exponential recursion."""
import numpy as np
import pytest
from scipy.optimize import brentq

from nlkesten.distributions import RICH_LIST_ALPHA
from nlkesten.errors import EmptyInput, GammaIsOne, NoRoot, WrongRegime
from nlkesten.process import (Constant, SavingsModel, SimulationConfig,
                              sample_initial, step, wealth_update)
from nlkesten.tailstats import empirical_tail, fit_power_law, percentile_wealth
from nlkesten.theory import (GrowthConstant, LinearKestenSpec, constant_law,
                             linear_clt_check, lognormal_law,
                             nct_multiplier_law, nonlinear_growth_constant,
                             read_growth_diagnostic, ror_band,
                             simulate_linear, stationary_tail_exponent,
                             two_point_law, write_growth_diagnostic)

TWO_POINT_BETA = 0.694241913630617  # root of (2**b + 4**-b) / 2 = 1


def growth_config(gamma=1.075, w0=1.0e4, seed=11, n_agents=8):
    return SimulationConfig(gamma=gamma, alpha_law=RICH_LIST_ALPHA,
                            premultiplier=1.0, savings=SavingsModel.zero(),
                            replacement="R2", initial=Constant(w0),
                            n_agents=n_agents, horizon=0, master_seed=seed)


# --- linear recursion ------------------------------------------------------

def test_simulate_linear_contraction_fixed_point():
    spec = LinearKestenSpec(constant_law(0.5), constant_law(1.0))
    w = simulate_linear(spec, 60, trajectories=5, seed=0)
    np.testing.assert_allclose(w, 2.0, rtol=1e-12)
    start = simulate_linear(spec, 0, trajectories=3, seed=0, w0=7.0)
    assert start.tolist() == [7.0, 7.0, 7.0]


def test_clt_check_exact_lognormal_multiplier():
    spec = LinearKestenSpec(lognormal_law(0.05, 0.1), constant_law(0.0),
                            mu=0.05, nu2=0.01)
    res = linear_clt_check(spec, n_steps=400, trajectories=10_000, seed=3)
    assert res.ks_distance < 0.02
    assert res.standardized.shape == (10_000,)
    assert abs(np.mean(res.standardized)) < 0.05


def test_clt_check_heavy_tailed_multiplier():
    spec = LinearKestenSpec(nct_multiplier_law(RICH_LIST_ALPHA, 2.5),
                            constant_law(0.0))
    res = linear_clt_check(spec, n_steps=400, trajectories=10_000, seed=4)
    assert res.mu > 0.0
    assert res.ks_distance < 0.05


def test_clt_check_wrong_regimes():
    degenerate = LinearKestenSpec(constant_law(1.5), constant_law(0.0))
    with pytest.raises(WrongRegime, match="degenerate"):
        linear_clt_check(degenerate, 10, 100)
    contracting = LinearKestenSpec(lognormal_law(-0.05, 0.1),
                                   constant_law(0.0))
    with pytest.raises(WrongRegime, match="positive"):
        linear_clt_check(contracting, 10, 100)


def test_tail_exponent_two_point_multiplier():
    law = two_point_law((2.0, 0.25), p_first=0.5)
    res = stationary_tail_exponent(law, seed=8)
    oracle = brentq(lambda b: 0.5 * (2.0**b + 4.0**-b) - 1.0, 0.1, 2.0,
                    xtol=1e-14)
    assert oracle == pytest.approx(TWO_POINT_BETA, abs=1e-12)
    assert res.beta == pytest.approx(oracle, abs=0.01)
    assert 0.0 < res.std_error < 0.01


def test_tail_exponent_error_cases():
    with pytest.raises(NoRoot):
        stationary_tail_exponent(constant_law(0.9), seed=1)
    with pytest.raises(WrongRegime):
        stationary_tail_exponent(constant_law(1.1), seed=1)


def test_stationary_simulation_tail_matches_exponent():
    law = two_point_law((2.0, 0.25), p_first=0.5)
    spec = LinearKestenSpec(law, constant_law(1.0))
    w = simulate_linear(spec, 200, trajectories=200_000, seed=9)
    tail = empirical_tail(w)
    window = (percentile_wealth(tail, 0.1), percentile_wealth(tail, 0.001))
    fit = fit_power_law(tail, window=window)
    assert fit.beta == pytest.approx(TWO_POINT_BETA, abs=0.1)


# --- scaled-log limit ------------------------------------------------------

def test_growth_constant_deterministic_convergence():
    config = growth_config()
    short = nonlinear_growth_constant(config, alpha_draws=0.01, n_steps=500)
    long = nonlinear_growth_constant(config, alpha_draws=0.01, n_steps=1000)
    assert short.converged and long.converged
    assert abs(short.scaled_log[-1] - long.scaled_log[-1]) < 1e-6
    assert short.estimate == pytest.approx(np.exp(short.scaled_log[-1]))
    assert short.estimate > 0.0
    assert short.depth == 500


def test_growth_constant_increments_obey_geometric_bound():
    config = growth_config()
    res = nonlinear_growth_constant(config, alpha_draws=0.01, n_steps=200)
    increments = np.abs(np.diff(res.scaled_log))
    # |B_k| never exceeds |log alpha| once wealth is large, and starts
    # smaller; allow a hair of slack over that ceiling.
    bound = 1.0001 * abs(np.log(0.01)) * 1.075 ** -np.arange(1, 201)
    assert (increments <= bound).all()


def test_growth_constant_is_numerically_cauchy():
    # alpha = 0.4 puts the crossover scale near the starting wealth, so
    # the scaled series settles fast instead of decaying toward zero.
    config = growth_config()
    res = nonlinear_growth_constant(config, alpha_draws=0.4, n_steps=512)
    q = res.scaled_log
    gaps = [abs(q[2 * n] - q[n]) for n in (16, 32, 64, 128, 256)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_log_domain_matches_wealth_domain():
    config = growth_config(w0=1.0e6)
    rng = np.random.default_rng(21)
    draws = 0.005 + 0.01 * rng.random(40)
    res = nonlinear_growth_constant(config, alpha_draws=draws, n_steps=40)
    w = 1.0e6
    for k in range(40):
        w = wealth_update(w, draws[k], config.gamma)
        x = res.scaled_log[k + 1] * config.gamma ** (k + 1)
        np.testing.assert_allclose(np.exp(x), w, rtol=1e-12)


def test_config_stream_matches_population_step():
    config = growth_config(w0=1.0e6, seed=11)
    pop = sample_initial(config)
    for _ in range(30):
        pop = step(pop, config)
        assert not pop.flagged.any()
    res = nonlinear_growth_constant(config, trajectory=5, n_steps=30)
    x = res.scaled_log[-1] * config.gamma**30
    np.testing.assert_allclose(np.exp(x), pop.wealth[5], rtol=1e-10)


def test_growth_constant_witnesses_non_ergodicity():
    # Same draw path, doubled starting wealth: an ergodic map would forget
    # the start, but the scaled-log limits stay apart. Draws around 0.4
    # keep the crossover within reach of the horizon.
    rng = np.random.default_rng(31)
    draws = 0.3 + 0.2 * rng.random(400)
    small = nonlinear_growth_constant(growth_config(w0=1.0e4),
                                      alpha_draws=draws, n_steps=400)
    large = nonlinear_growth_constant(growth_config(w0=2.0e4),
                                      alpha_draws=draws, n_steps=400)
    assert small.converged and large.converged
    assert large.estimate > small.estimate * 1.2


def test_growth_constant_rejections():
    with pytest.raises(GammaIsOne):
        nonlinear_growth_constant(growth_config(gamma=1.0), alpha_draws=0.01)
    with pytest.raises(WrongRegime, match="step 0"):
        nonlinear_growth_constant(growth_config(), alpha_draws=-1.0,
                                  n_steps=10)
    with pytest.raises(ValueError):
        nonlinear_growth_constant(growth_config(),
                                  alpha_draws=np.full(5, 0.01), n_steps=10)


def test_growth_diagnostic_round_trip(tmp_path):
    res = nonlinear_growth_constant(growth_config(), alpha_draws=0.01,
                                    n_steps=25)
    path = tmp_path / "scaled.csv"
    write_growth_diagnostic(path, res)
    values = read_growth_diagnostic(path)
    assert values.tolist() == res.scaled_log.tolist()
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_growth_diagnostic(bad)
    empty = tmp_path / "empty.csv"
    empty.write_text("n,scaled_log_wealth\n")
    with pytest.raises(EmptyInput):
        read_growth_diagnostic(empty)


# --- return band -----------------------------------------------------------

def test_ror_band_values():
    lo, hi = ror_band(0.013, 0.0, 1.075, 1.0e6)
    assert lo == hi == pytest.approx(0.013 * 10**0.45)
    assert (lo + hi) / 2.0 == pytest.approx(0.0366, abs=5e-4)
    lo, hi = ror_band(0.02, 0.005, 1.0, 123.0)
    assert (lo, hi) == (pytest.approx(0.015), pytest.approx(0.025))
    los, his = ror_band(0.013, 0.001, 1.075, np.array([1.0e4, 1.0e6]))
    assert los.shape == (2,)
    assert (his > los).all()
    with pytest.raises(ValueError):
        ror_band(0.013, 0.001, 1.075, 0.0)


# --- ensemble concentration -------------------------------------------------

@pytest.mark.parametrize("gamma,mult", [(1.0, 2.5), (1.075, 1.0)])
def test_max_wealth_share_grows(gamma, mult):
    from nlkesten.process import apply_replacement, run

    config = SimulationConfig(gamma=gamma, alpha_law=RICH_LIST_ALPHA,
                              premultiplier=mult, savings=SavingsModel.zero(),
                              replacement="R2", initial=Constant(1.0e4),
                              n_agents=1000, horizon=300, master_seed=77)
    result = run(config, observation_times=(10, 300))
    shares = {}
    for snap in result.snapshots:
        shares[snap.step] = snap.wealth_max / (snap.wealth_mean * 1000)
    assert shares[300] > shares[10]

"""Exit times and the waiting-time law.

The crossing engine is pinned down by hand-worked walks (including jumps
over the target and censoring at the day end), by the exact first-passage
law of the fair +-1 walk, and by a shift-invariance property.  The
parametric law is tested as sampler -> histogram -> fit recovery, with the
sampler itself validated against its defining gamma transform.
"""

import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from tickphys import (
    DayTicks,
    EmptyInput,
    ExitTimeConfig,
    FirstPassageFit,
    RegularSeries,
    TickSizeViolation,
    TooFewBins,
    TooFewSamples,
    entry_time_distribution,
    exit_times,
    first_passage_hist,
    fit_first_passage,
    fit_tail_power_law,
    gen_tick_walk,
    horizon_scaling,
    fit_horizon_power_law,
    log_bin,
    log_passage_density,
    optimal_horizon,
    passage_density,
    quadrature,
    sample_first_passage,
)

NS = 1_000_000_000

UP1 = ExitTimeConfig(threshold=1, direction="up", clock="tick")


def test_config_validation():
    with pytest.raises(ValueError):
        ExitTimeConfig(threshold=0)
    with pytest.raises(ValueError):
        ExitTimeConfig(threshold=1, direction="sideways")
    with pytest.raises(ValueError):
        ExitTimeConfig(threshold=1, clock="lunar")


def test_exit_times_staircase():
    exits = exit_times([0, 1, 2, 3], ExitTimeConfig(threshold=2))
    assert exits.tau.tolist() == [2, 2]
    assert exits.entry_index.tolist() == [0, 1]
    assert exits.censored_count == 2
    assert exits.n_entries == 4


def test_exit_times_jump_over_target():
    # the jump 0 -> 3 crosses level 2 at the arrival index
    exits = exit_times([0, 3, 0], ExitTimeConfig(threshold=2))
    assert exits.tau.tolist() == [1]
    assert exits.entry_index.tolist() == [0]
    assert exits.censored_count == 2


def test_exit_times_flat_stretch():
    exits = exit_times([0, 0, 0, 1], UP1)
    assert exits.tau.tolist() == [3, 2, 1]
    assert exits.censored_count == 1


def test_exit_times_down_mirrors_up():
    up = exit_times([0, 1, -2, 3], ExitTimeConfig(threshold=2, direction="up"))
    down = exit_times([0, -1, 2, -3], ExitTimeConfig(threshold=2, direction="down"))
    assert np.array_equal(up.tau, down.tau)
    assert np.array_equal(up.entry_index, down.entry_index)


def test_exit_times_both_takes_earlier_side():
    exits = exit_times([0, -1, 2], ExitTimeConfig(threshold=2, direction="both"))
    # entry 0: up crossing at index 2; down never -> tau 2
    # entry 1: up crossing (level 1 <= 2) at index 2 -> tau 1
    assert exits.tau.tolist() == [2, 1]


def test_exit_times_wall_clock_rounds_up_seconds():
    day = DayTicks(
        timestamps_ns=[NS, NS + NS // 2, 4 * NS],
        prices=[0, 1, 2],
        session_open_ns=NS,
    )
    exits = exit_times(day, ExitTimeConfig(threshold=1, clock="wall"))
    # entry 0 exits half a second later: ceil to 1; entry 1 exits 2.5 s later: ceil to 3
    assert exits.tau.tolist() == [1, 3]
    assert np.allclose(exits.entry_second, [0.0, 0.5])


def test_exit_times_wall_clock_needs_timestamps():
    with pytest.raises(ValueError):
        exit_times(np.array([0, 1, 2]), ExitTimeConfig(threshold=1, clock="wall"))


def test_exit_times_days_are_independent():
    day1 = DayTicks(timestamps_ns=[NS, 2 * NS], prices=[0, 1])
    day2 = DayTicks(timestamps_ns=[NS, 2 * NS], prices=[5, 6])
    exits = exit_times([day1, day2], ExitTimeConfig(threshold=3))
    assert exits.tau.size == 0  # the cross-day gap 1 -> 5 never counts
    assert exits.censored_count == 4
    assert exits.n_entries == 4


def test_exit_times_regular_series_days_and_ticks():
    series = RegularSeries(
        start_ns=0,
        interval_ns=NS,
        values=[0.0, 1.0, 2.0, 0.0, 1.0],
        session_boundaries=(0, 3),
    )
    exits = exit_times(series, UP1)
    # day one: taus 1,1; day two: tau 1; entry indices stay concatenated
    assert exits.tau.tolist() == [1, 1, 1]
    assert exits.entry_index.tolist() == [0, 1, 3]
    with pytest.raises(TickSizeViolation):
        exit_times(RegularSeries(start_ns=0, interval_ns=1, values=[0.0, 0.5]), UP1)


@settings(max_examples=60, deadline=None)
@given(
    prices=st.lists(st.integers(min_value=-50, max_value=50), min_size=2, max_size=120),
    shift=st.integers(min_value=-1000, max_value=1000),
    threshold=st.integers(min_value=1, max_value=8),
)
def test_exit_times_shift_invariance(prices, shift, threshold):
    cfg = ExitTimeConfig(threshold=threshold)
    base = exit_times(np.array(prices), cfg)
    moved = exit_times(np.array(prices) + shift, cfg)
    assert np.array_equal(base.tau, moved.tau)
    assert np.array_equal(base.entry_index, moved.entry_index)
    assert base.censored_count == moved.censored_count


def exact_plus_minus_one_law(tau: int) -> float:
    if tau < 1 or tau % 2 == 0:
        return 0.0
    k = (tau + 1) // 2
    return math.comb(tau, k) / (tau * 2**tau)


def test_exit_times_match_exact_walk_law():
    walk = gen_tick_walk(200_001, p_zero=0.0, seed=42)
    exits = exit_times(walk, UP1)
    n = exits.n_entries
    for tau in (1, 3, 5, 7):
        p = exact_plus_minus_one_law(tau)
        freq = float(np.count_nonzero(exits.tau == tau)) / n
        z = abs(freq - p) / math.sqrt(p * (1.0 - p) / n)
        assert z < 4.0, f"tau={tau}: freq {freq:.5f} vs exact {p:.5f}"
    assert float(np.count_nonzero(exits.tau == 2)) == 0.0  # even tau impossible


def test_first_passage_hist_enforces_min_samples():
    exits = exit_times([0, 1, 2, 3], UP1)
    with pytest.raises(TooFewSamples):
        first_passage_hist(exits, 10)
    hist = first_passage_hist(exits, 10, min_samples=3)
    # censored entry stays in the normalization
    assert hist.total_count == 4
    assert hist.censored_count == 1


# ----------------------------------------------------------------- the law


def test_log_passage_density_hand_value():
    # alpha = nu = beta = 1, tau0 = 0: P(tau) = exp(-1/tau) / tau^2
    tau = np.array([1.0, 2.0, 10.0])
    expected = np.exp(-1.0 / tau) / tau**2
    assert np.allclose(passage_density(tau, 1.0, 1.0, 1.0, 0.0), expected, rtol=1e-12)
    with pytest.raises(ValueError):
        log_passage_density(1.0, -0.5, 1.0)
    with pytest.raises(ValueError):
        log_passage_density(0.0, 1.0, 1.0, 1.0, 0.0)


def test_passage_density_normalizes_to_one():
    alpha, beta, nu, tau0 = 0.5, 20.0, 1.0, 0.0
    mass = lambda s: float(passage_density(math.exp(s), alpha, beta, nu, tau0)) * math.exp(s)
    s_mid = math.log(beta**2 / (alpha + 1.0))
    breaks = [s_mid + d for d in (-15.0, -5.0, 0.0, 5.0, 15.0, 30.0)]
    integral = sum(
        quadrature(mass, lo, hi, tol=1e-9) for lo, hi in zip(breaks[:-1], breaks[1:])
    )
    assert abs(integral - 1.0) < 1e-6


def test_sampler_matches_gamma_transform():
    alpha, beta, nu, tau0 = 0.8, 5.0, 1.5, 2.0
    draws = sample_first_passage(50_000, alpha, beta, nu, tau0, seed=12)
    w = (beta * beta / (draws + tau0)) ** nu  # must be Gamma(alpha/nu)
    ks = scipy.stats.kstest(w, "gamma", args=(alpha / nu,))
    assert ks.pvalue > 0.01


def test_sampled_density_tracks_the_formula():
    draws = sample_first_passage(100_000, 0.5, 20.0, 1.0, 0.0, seed=15)
    hist = log_bin(draws, 8)
    occ = np.nonzero(hist.occupied & (hist.counts >= 200))[0]
    empirical = hist.densities[occ]
    model = passage_density(hist.centers[occ], 0.5, 20.0, 1.0, 0.0)
    assert np.all(np.abs(np.log(empirical / model)) < 0.25)


def test_fit_recovers_known_parameters():
    draws = sample_first_passage(100_000, 0.5, 20.0, 1.0, 0.0, seed=9)
    fit = fit_first_passage(log_bin(draws, 10))
    assert abs(fit.alpha - 0.5) / 0.5 < 0.10
    assert abs(fit.beta - 20.0) / 20.0 < 0.10
    assert abs(fit.nu - 1.0) / 1.0 < 0.10
    assert fit.tau0 < 0.1 * (20.0**2 / 1.5)
    assert fit.sse < 0.01 and fit.n_bins >= 8


def test_fit_needs_enough_spread():
    with pytest.raises(TooFewBins):
        fit_first_passage(log_bin(np.linspace(10.0, 20.0, 500), 10))


def test_optimal_horizon_closed_form_and_hist():
    fit = FirstPassageFit(alpha=0.5, beta=20.0, nu=1.0, tau0=0.0, sse=0.0, n_bins=0)
    assert np.isclose(optimal_horizon(fit), 400.0 / 1.5)
    monotone = FirstPassageFit(alpha=0.5, beta=0.1, nu=1.0, tau0=5.0, sse=0.0, n_bins=0)
    assert optimal_horizon(monotone) == 0.0

    hist = log_bin(sample_first_passage(50_000, 0.5, 20.0, seed=2), 10)
    tau_hist = optimal_horizon(hist)
    assert 100.0 < tau_hist < 700.0  # around the true mode 266.7
    with pytest.raises(TypeError):
        optimal_horizon([1.0, 2.0])


def test_horizon_scaling_hist_route():
    walk = np.rint(np.cumsum(np.random.default_rng(44).standard_normal(2**17) * 4.0))
    rows = horizon_scaling(walk, (8, 16, 32), bins_per_decade=6, method="hist")
    assert [r.threshold for r in rows] == [8, 16, 32]
    assert all(r.tau_star > 0 for r in rows)
    assert all(r.n_resolved + r.n_censored == 2**17 for r in rows)
    fit = fit_horizon_power_law(rows)
    assert abs(fit.exponent - 2.0) < 0.6  # diffusive scaling, loose at this size
    with pytest.raises(TooFewBins):
        fit_horizon_power_law(rows[:2])


def test_fit_tail_power_law_on_exact_power_law():
    from tickphys import sample_power_law

    draws = sample_power_law(2.5, 1.0, 1e4, 200_000, np.random.default_rng(3))
    fit = fit_tail_power_law(log_bin(draws, 10), (2.0, 2e3))
    assert abs(fit.exponent + 2.5) < 0.1
    with pytest.raises(TooFewBins):
        fit_tail_power_law(log_bin(draws, 10), (1e5, 1e6))
    with pytest.raises(ValueError):
        fit_tail_power_law(log_bin(draws, 10), (5.0, 2.0))


def test_entry_time_distribution():
    day = DayTicks(
        timestamps_ns=[NS * t for t in (0, 1800, 1900, 4000)],
        prices=[0, 1, 2, 3],
        session_open_ns=0,
    )
    exits = exit_times(day, UP1)
    rows = entry_time_distribution(exits, bin_seconds=1800.0)
    # resolved entries at seconds 0, 1800, 1900; the censored one is not timed
    assert [r.count for r in rows] == [1, 2]
    assert rows[0].rate_per_hour == 2.0
    assert rows[1].end_second == 3600.0
    with pytest.raises(ValueError):
        entry_time_distribution(exits, bin_seconds=0.0)
    no_clock = exit_times(np.array([0, 1, 2]), UP1)
    with pytest.raises(EmptyInput):
        entry_time_distribution(no_clock)

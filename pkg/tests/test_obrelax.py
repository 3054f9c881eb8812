"""Imbalance algebra and relaxation-time machinery.

The imbalance identities (range, antisymmetry, scale invariance) must hold
bit for bit, so they are asserted with ==, not isclose.  Entry/relaxation
logic is pinned by hand-worked sequences; the stretched law goes through
the same sampler -> histogram -> fit loop as the waiting-time law, with
the mean formula double-checked by quadrature.
"""

import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from tickphys import (
    BookSnapshot,
    EmptySide,
    ImbalanceSeries,
    StretchedExpFit,
    TooFewBins,
    TooFewSamples,
    entry_times,
    fit_stretched_exp,
    gamma_fn,
    gen_brownian,
    imbalance_series,
    log_bin,
    log_stretched_density,
    mean_relax_vs_kappa,
    mean_relaxation_from_fit,
    quadrature,
    relaxation_hist,
    relaxation_times,
    sample_stretched_exp,
)


def book(bids, asks, ts=1, tcd=0):
    return BookSnapshot(timestamp_ns=ts, trade_count_delta=tcd, bids=tuple(bids), asks=tuple(asks))


def test_imbalance_sixty_forty():
    sig = imbalance_series([book([(99, 60)], [(101, 40)])], depth=1)
    assert sig.values[0] == 0.2  # exact, not approximate
    assert sig.depth == 1


def test_imbalance_depth_slicing_and_trades():
    snaps = [
        book([(99, 10), (98, 30)], [(101, 10), (102, 5)], ts=1, tcd=2),
        book([(99, 7)], [(101, 7), (102, 1)], ts=2, tcd=3),
    ]
    sig = imbalance_series(snaps, depth=1)
    assert sig.values.tolist() == [0.0, 0.0]  # second levels ignored
    assert sig.trades.tolist() == [2, 5]  # cumulative
    assert sig.timestamps_ns.tolist() == [1, 2]


def test_imbalance_empty_side_detection():
    with pytest.raises(EmptySide):
        imbalance_series([book([], [])], depth=2)
    with pytest.raises(EmptySide):
        # volume exists only below the requested depth
        imbalance_series([book([], [(101, 0)]) ], depth=1)
    with pytest.raises(ValueError):
        imbalance_series([book([(99, 1)], [])], depth=0)
    one_sided = imbalance_series([book([(99, 5)], [])], depth=1)
    assert one_sided.values[0] == 1.0


volumes = st.lists(st.integers(min_value=0, max_value=10**6), min_size=1, max_size=5)


@settings(max_examples=200, deadline=None)
@given(bid_v=volumes, ask_v=volumes, m=st.sampled_from([2, 7, 1000]))
def test_imbalance_algebra_bitwise(bid_v, ask_v, m):
    if sum(bid_v) + sum(ask_v) == 0:
        bid_v = bid_v[:1] if bid_v else [0]
        bid_v[0] = 1
    bids = [(100 - i, v) for i, v in enumerate(bid_v)]
    asks = [(101 + i, v) for i, v in enumerate(ask_v)]
    depth = max(len(bids), len(asks))
    s = imbalance_series([book(bids, asks)], depth=depth).values[0]
    assert -1.0 <= s <= 1.0
    mirrored = imbalance_series([book(asks, bids)], depth=depth).values[0]
    assert mirrored == -s
    scaled = imbalance_series(
        [book([(p, v * m) for p, v in bids], [(p, v * m) for p, v in asks])], depth=depth
    ).values[0]
    assert scaled == s


def test_entry_times_hand_case():
    v = np.array([0.0, 0.6, 0.4, 0.6])
    assert entry_times(v, 0.5).tolist() == [1, 3]
    assert entry_times(v, 0.1).tolist() == [1]
    assert entry_times(np.array([-0.2, -0.8]), 0.5).tolist() == [1]  # sign-blind
    with pytest.raises(ValueError):
        entry_times(v, 1.0)


def test_entry_times_skip_day_starts():
    sig = ImbalanceSeries(values=np.array([0.2, 0.3, 0.8, 0.9]), day_boundaries=(0, 2))
    # the 0.3 -> 0.8 crossing lands exactly on the second day's first index
    assert entry_times(sig, 0.5).tolist() == []
    same_day = ImbalanceSeries(values=np.array([0.2, 0.3, 0.8, 0.9]))
    assert entry_times(same_day, 0.5).tolist() == [2]


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=10_000),
    kappas=st.tuples(st.floats(0.05, 0.5), st.floats(0.05, 0.5)),
)
def test_entry_sets_nest_pathwise(seed, kappas):
    # every entry above the higher level traces back to an entry above the
    # lower level since the last visit below it
    k1, k2 = sorted(kappas)
    if k2 - k1 < 1e-3:
        return
    v = np.tanh(gen_brownian(400, seed=seed) / 4.0)
    e1 = set(entry_times(v, k1).tolist())
    for t in entry_times(v, k2):
        below = np.nonzero(np.abs(v[:t]) < k1)[0]
        if below.size:
            assert int(below[-1]) + 1 in e1


def test_relaxation_hand_case():
    sig = ImbalanceSeries(values=np.array([0.1, 0.6, 0.3, -0.2, 0.1]))
    samples = relaxation_times(sig, 0.5)
    assert samples.tau.tolist() == [2]  # entry at 1, sign lost at 3
    assert samples.entry_index.tolist() == [1]
    assert not samples.censored[0]


def test_relaxation_zero_touch_ends_the_excursion():
    sig = ImbalanceSeries(values=np.array([0.1, 0.6, 0.0, 0.7]))
    samples = relaxation_times(sig, 0.5)
    assert samples.tau.tolist() == [1]
    assert samples.censored.tolist() == [False]


def test_relaxation_censoring_at_day_end():
    sig = ImbalanceSeries(values=np.array([0.1, 0.6, 0.5]))
    samples = relaxation_times(sig, 0.5)
    assert samples.tau.tolist() == [1]  # truncated at the last snapshot
    assert samples.censored.tolist() == [True]
    assert samples.censored_count == 1
    assert samples.resolved_tau.size == 0


def test_relaxation_day_final_entry_is_skipped():
    sig = ImbalanceSeries(values=np.array([0.1, 0.6]))
    assert len(relaxation_times(sig, 0.5)) == 0


def test_relaxation_negative_entries_mirror_positive():
    pos = relaxation_times(ImbalanceSeries(values=np.array([0.1, 0.6, 0.2, -0.1])), 0.5)
    neg = relaxation_times(ImbalanceSeries(values=-np.array([0.1, 0.6, 0.2, -0.1])), 0.5)
    assert np.array_equal(pos.tau, neg.tau)
    assert np.array_equal(pos.censored, neg.censored)


def test_relaxation_respects_day_boundaries():
    # sign survives into the next day: censored at the day end, not resolved
    # by the other day's values
    v = np.array([0.1, 0.6, 0.5, -0.4, -0.2, 0.3])
    sig = ImbalanceSeries(values=v, day_boundaries=(0, 3))
    samples = relaxation_times(sig, 0.5)
    assert samples.tau.tolist() == [1]
    assert samples.censored.tolist() == [True]


def test_relaxation_trade_and_wall_clocks():
    sig = ImbalanceSeries(
        values=np.array([0.1, 0.6, 0.4, -0.2]),
        timestamps_ns=np.array([0, 1, 2, 5]) * 10**9 + 1,
        trades=np.array([0, 1, 5, 5]),
    )
    assert relaxation_times(sig, 0.5, clock="event").tau.tolist() == [2]
    assert relaxation_times(sig, 0.5, clock="trade").tau.tolist() == [4]
    assert relaxation_times(sig, 0.5, clock="wall").tau.tolist() == [4]
    bare = ImbalanceSeries(values=sig.values)
    with pytest.raises(ValueError):
        relaxation_times(bare, 0.5, clock="trade")
    with pytest.raises(ValueError):
        relaxation_times(bare, 0.5, clock="lunar")


def test_imbalance_series_concat():
    a = ImbalanceSeries(values=np.array([0.1, 0.2]), day_boundaries=(0,))
    b = ImbalanceSeries(values=np.array([0.3]), day_boundaries=(0,))
    joined = ImbalanceSeries.concat([a, b])
    assert joined.values.tolist() == [0.1, 0.2, 0.3]
    assert joined.day_boundaries == (0, 2)
    assert joined.timestamps_ns is None
    with pytest.raises(ValueError):
        ImbalanceSeries.concat([])


def test_relaxation_hist_min_samples_and_censoring():
    sig = ImbalanceSeries(values=np.array([0.1, 0.6, 0.3, -0.2, 0.1, 0.7, 0.6]))
    samples = relaxation_times(sig, 0.5)
    with pytest.raises(TooFewSamples):
        relaxation_hist(samples, 10)
    hist = relaxation_hist(samples, 10, min_samples=1)
    assert hist.total_count == samples.tau.size
    assert hist.censored_count == samples.censored_count


# ----------------------------------------------------------- stretched law


def test_log_stretched_density_hand_values():
    # at tau = tau_tilde the density is (alpha / tau_tilde) e^-1
    for tau_tilde, alpha in ((10.0, 0.5), (100.0, 0.9)):
        expected = math.log(alpha / tau_tilde) - 1.0
        assert np.isclose(log_stretched_density(tau_tilde, tau_tilde, alpha), expected)
    with pytest.raises(ValueError):
        log_stretched_density(1.0, 10.0, 1.5)
    with pytest.raises(ValueError):
        log_stretched_density(-1.0, 10.0, 0.5)


def test_stretched_density_normalizes_to_one():
    tau_tilde, alpha = 10.0, 0.6
    mass = lambda s: math.exp(float(log_stretched_density(math.exp(s), tau_tilde, alpha)) + s)
    breaks = [math.log(tau_tilde) + d for d in (-25.0, -5.0, 0.0, 5.0, 20.0)]
    integral = sum(
        quadrature(mass, lo, hi, tol=1e-9) for lo, hi in zip(breaks[:-1], breaks[1:])
    )
    assert abs(integral - 1.0) < 1e-6


def test_stretched_sampler_inverts_the_survival_function():
    tau_tilde, alpha = 50.0, 0.4
    draws = sample_stretched_exp(50_000, tau_tilde, alpha, seed=3)
    u = 1.0 - np.exp(-((draws / tau_tilde) ** alpha))
    assert scipy.stats.kstest(u, "uniform").pvalue > 0.01
    with pytest.raises(ValueError):
        sample_stretched_exp(10, 1.0, 1.5)


def test_stretched_fit_recovers_parameters():
    draws = sample_stretched_exp(100_000, 100.0, 0.6, seed=77)
    fit = fit_stretched_exp(log_bin(draws, 10))
    assert abs(fit.tau_tilde - 100.0) / 100.0 < 0.05
    assert abs(fit.alpha - 0.6) / 0.6 < 0.05
    with pytest.raises(TooFewBins):
        fit_stretched_exp(log_bin(np.full(500, 3.0), 10))


def test_mean_relaxation_closed_forms():
    # alpha = 1 is the plain exponential; alpha = 1/2 gives 2 Gamma(2) = 2
    assert np.isclose(mean_relaxation_from_fit(StretchedExpFit(7.0, 1.0, 0.0, 0)), 7.0)
    assert np.isclose(mean_relaxation_from_fit(StretchedExpFit(7.0, 0.5, 0.0, 0)), 14.0)
    # and the sample mean agrees with the formula
    draws = sample_stretched_exp(200_000, 10.0, 0.6, seed=8)
    formula = 10.0 / 0.6 * gamma_fn(1.0 / 0.6)
    assert abs(draws.mean() - formula) / formula < 0.02


def test_mean_relax_vs_kappa_scan():
    v = np.tanh(gen_brownian(20_000, seed=19) / 4.0)
    sig = ImbalanceSeries(values=v)
    scan = mean_relax_vs_kappa(sig, (0.1, 0.2, 0.3, 0.4), fit_range=(0.05, 0.45))
    assert len(scan.rows) == 4
    for row in scan.rows:
        assert row.mean_tau > 0 and row.n_resolved >= 10
    assert scan.fit is not None and scan.fit.n == 4
    # a level the series never reaches yields no rows and hence no fit
    quiet = ImbalanceSeries(values=np.array([0.1, 0.2, 0.15, 0.05]))
    sparse = mean_relax_vs_kappa(quiet, (0.5,), fit_range=(0.0, 1.0))
    assert sparse.rows == () and sparse.fit is None

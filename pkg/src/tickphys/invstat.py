"""Inverse statistics: waiting times until a price path first moves by a
given amount.

For every in-day entry index t the exit time is the first T > 0 with
p(t+T) - p(t) >= threshold (direction "up"; "down" negates the path,
"both" takes the earlier of the two one-sided exits).  Entries overlap,
days are independent, and entries whose exit does not arrive before the
end of the day are counted as censored rather than dropped silently.

Crossings are resolved exactly for arbitrary integer jump sizes: each
upward jump a -> b is expanded into the virtual ladder a+1 .. b at the
arrival index, so "first index at or above level c" becomes "first
virtual element equal to c after the entry's virtual position", which a
stable sort plus one vectorized binary search answers for all entries at
once.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyInput,
    FitDiverged,
    TickSizeViolation,
    TooFewBins,
    TooFewSamples,
)
from .market_data import NS_PER_S, DayTicks, RegularSeries, SessionizedTicks
from .numerics import LogBinnedPdf, linfit, log_bin

__all__ = [
    "ExitTimeConfig",
    "ExitTimes",
    "FirstPassageFit",
    "PowerLawFit",
    "HorizonRow",
    "exit_times",
    "first_passage_hist",
    "passage_density",
    "log_passage_density",
    "sample_first_passage",
    "fit_first_passage",
    "optimal_horizon",
    "horizon_scaling",
    "fit_horizon_power_law",
    "fit_tail_power_law",
    "entry_time_distribution",
]

logger = logging.getLogger(__name__)

DIRECTIONS = ("up", "down", "both")
CLOCKS = ("tick", "wall")


@dataclass(frozen=True)
class ExitTimeConfig:
    """Threshold in ticks, crossing direction, and waiting-time clock.

    clock "tick" counts events; "wall" counts seconds, rounded up and never
    below one so a same-second exit still takes time.
    """

    threshold: int
    direction: str = "up"
    clock: str = "tick"

    def __post_init__(self):
        if self.threshold < 1:
            raise ValueError("threshold must be >= 1 tick")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        if self.clock not in CLOCKS:
            raise ValueError(f"clock must be one of {CLOCKS}")


@dataclass(frozen=True)
class ExitTimes:
    """Resolved waiting times plus the censoring tally.

    ``tau[i]`` belongs to the entry at concatenated index ``entry_index[i]``;
    ``entry_second[i]`` is seconds since that day's open (NaN when the input
    carries no wall-clock information).  ``n_entries`` counts resolved and
    censored entries together and is the denominator for frequencies.
    """

    tau: np.ndarray = field(repr=False)
    entry_index: np.ndarray = field(repr=False)
    entry_second: np.ndarray = field(repr=False)
    censored_count: int
    n_entries: int
    config: ExitTimeConfig

    def __len__(self) -> int:
        return self.tau.size


def _first_crossing(prices: np.ndarray, threshold: int) -> np.ndarray:
    """Per entry t, index of the first j > t with p[j] >= p[t] + threshold.

    Returns -1 where the level is never reached.  The first qualifying
    index is always entered by an upward jump, so it owns the virtual
    ladder element exactly at the target level.
    """
    p = prices
    n = p.size
    if n < 2:
        return np.full(n, -1, dtype=np.int64)
    d = np.diff(p)
    up = d > 0
    lens = np.ones(n, dtype=np.int64)
    lens[1:][up] = d[up]
    starts = np.cumsum(lens) - lens
    total = int(starts[-1] + lens[-1])
    orig = np.repeat(np.arange(n, dtype=np.int64), lens)
    base = np.empty(n, dtype=np.int64)
    base[0] = p[0]
    base[1:] = np.where(up, p[:-1] + 1, p[1:])
    vp = np.repeat(base - starts, lens) + np.arange(total, dtype=np.int64)

    order = np.argsort(vp, kind="stable")  # within equal levels: by position
    svp = vp[order]
    vmin = int(svp[0])
    span = int(svp[-1]) - vmin + 1
    if span >= (2**62) // max(total, 1):
        raise OverflowError("price range times event count exceeds int64 keys")
    skey = (svp - vmin) * np.int64(total) + order  # ascending by construction

    entry_virtual = starts + lens - 1
    targets = p + np.int64(threshold)
    qkey = (targets - vmin) * np.int64(total) + entry_virtual
    idx = np.searchsorted(skey, qkey, side="right")
    hit = idx < total
    safe = np.minimum(idx, total - 1)
    hit &= svp[safe] == targets

    out = np.full(n, -1, dtype=np.int64)
    out[hit] = orig[order[safe[hit]]]
    return out


def _as_days(data) -> list:
    """Normalize input to [(int prices, timestamps_ns or interval info)].

    Yields (prices, ts_ns, open_ns) with ts_ns possibly None.
    """
    if isinstance(data, SessionizedTicks):
        data = list(data.days)
    if isinstance(data, DayTicks):
        data = [data]
    if isinstance(data, RegularSeries):
        vals = np.asarray(data.values, dtype=float)
        ints = np.rint(vals)
        if np.max(np.abs(vals - ints)) > 1e-6:
            raise TickSizeViolation("regular series values are not integer ticks")
        prices = ints.astype(np.int64)
        bounds = list(data.session_boundaries) + [prices.size]
        out = []
        for a, b in zip(bounds, bounds[1:]):
            if b > a:
                ts = np.arange(b - a, dtype=np.int64) * data.interval_ns
                out.append((prices[a:b], ts, 0))
        return out
    if isinstance(data, (list, tuple)) and data and isinstance(data[0], DayTicks):
        out = []
        for day in data:
            open_ns = day.session_open_ns
            if open_ns is None:
                open_ns = int(day.timestamps_ns[0])
            out.append((np.asarray(day.prices, dtype=np.int64), day.timestamps_ns, open_ns))
        return out
    arr = np.asarray(data)
    if not np.issubdtype(arr.dtype, np.integer):
        ints = np.rint(arr.astype(float))
        if np.max(np.abs(arr - ints)) > 1e-6:
            raise TickSizeViolation("prices must be integer ticks")
        arr = ints
    return [(arr.astype(np.int64), None, 0)]


def exit_times(data, config: ExitTimeConfig) -> ExitTimes:
    """Waiting times to the first threshold crossing, day by day."""
    days = _as_days(data)
    if not days:
        raise EmptyInput("no days to scan")

    taus: list[np.ndarray] = []
    entries: list[np.ndarray] = []
    seconds: list[np.ndarray] = []
    censored = 0
    n_entries = 0
    offset = 0

    for prices, ts_ns, open_ns in days:
        n = prices.size
        n_entries += n
        if config.direction == "up":
            exit_idx = _first_crossing(prices, config.threshold)
        elif config.direction == "down":
            exit_idx = _first_crossing(-prices, config.threshold)
        else:
            up_idx = _first_crossing(prices, config.threshold)
            dn_idx = _first_crossing(-prices, config.threshold)
            exit_idx = np.where(
                (up_idx >= 0) & ((dn_idx < 0) | (up_idx <= dn_idx)), up_idx, dn_idx
            )
        hit = exit_idx >= 0
        censored += int(n - hit.sum())
        t = np.nonzero(hit)[0]
        j = exit_idx[hit]
        if config.clock == "tick":
            tau = j - t
        else:
            if ts_ns is None:
                raise ValueError("wall clock needs timestamped input")
            delta = ts_ns[j] - ts_ns[t]
            tau = np.maximum((delta + NS_PER_S - 1) // NS_PER_S, 1)
        taus.append(tau.astype(np.int64))
        entries.append(t + offset)
        if ts_ns is None:
            seconds.append(np.full(t.size, np.nan))
        else:
            seconds.append((ts_ns[t] - open_ns) / NS_PER_S)
        offset += n

    return ExitTimes(
        tau=np.concatenate(taus) if taus else np.empty(0, dtype=np.int64),
        entry_index=np.concatenate(entries) if entries else np.empty(0, dtype=np.int64),
        entry_second=np.concatenate(seconds) if seconds else np.empty(0),
        censored_count=censored,
        n_entries=n_entries,
        config=config,
    )


def first_passage_hist(
    exits, bins_per_decade: int = 10, *, min_samples: int = 100
) -> LogBinnedPdf:
    """Log-binned density of waiting times.

    Censored entries enter the normalization (the density integrates to the
    resolved fraction), so deep thresholds are not flattered by dropping
    their unresolved entries.
    """
    if isinstance(exits, ExitTimes):
        samples = exits.tau
        censored = exits.censored_count
    else:
        samples = np.asarray(exits, dtype=float)
        censored = 0
    if samples.size < min_samples:
        raise TooFewSamples(f"{samples.size} resolved exits < min_samples={min_samples}")
    return log_bin(samples, bins_per_decade, censored_count=censored)


# ----------------------------------------------------------------- the model


def _check_params(alpha: float, beta: float, nu: float, tau0: float) -> None:
    if not (alpha > 0 and beta > 0 and nu > 0):
        raise ValueError("alpha, beta, nu must be positive")
    if tau0 < 0:
        raise ValueError("tau0 must be >= 0")


def log_passage_density(tau, alpha: float, beta: float, nu: float = 1.0, tau0: float = 0.0):
    """log of the generalized inverse-gamma waiting-time density

        P(tau) = nu / Gamma(alpha/nu) * beta^(2 alpha) / (tau + tau0)^(alpha+1)
                 * exp(-(beta^2 / (tau + tau0))^nu)
    """
    _check_params(alpha, beta, nu, tau0)
    t = np.asarray(tau, dtype=float) + tau0
    if np.any(t <= 0):
        raise ValueError("tau + tau0 must be positive")
    with np.errstate(over="ignore"):
        return (
            math.log(nu)
            - math.lgamma(alpha / nu)
            + 2.0 * alpha * math.log(beta)
            - (alpha + 1.0) * np.log(t)
            - (beta * beta / t) ** nu
        )


def passage_density(tau, alpha: float, beta: float, nu: float = 1.0, tau0: float = 0.0):
    return np.exp(log_passage_density(tau, alpha, beta, nu, tau0))


def sample_first_passage(
    n: int, alpha: float, beta: float, nu: float = 1.0, tau0: float = 0.0, seed: int = 0
) -> np.ndarray:
    """Exact draws from the waiting-time law.

    With y = beta^2 / (tau + tau0), y^nu is Gamma(alpha/nu) distributed, so
    a gamma variate transforms back to tau without any numeric inversion.
    """
    _check_params(alpha, beta, nu, tau0)
    rng = np.random.default_rng(seed)
    w = rng.gamma(shape=alpha / nu, scale=1.0, size=n)
    return beta * beta / w ** (1.0 / nu) - tau0


@dataclass(frozen=True)
class FirstPassageFit:
    alpha: float
    beta: float
    nu: float
    tau0: float
    sse: float
    n_bins: int


def _occupied_xyw(hist: LogBinnedPdf):
    occ = hist.occupied
    x = hist.centers[occ]
    y = np.log(hist.densities[occ])
    w = hist.counts[occ].astype(float)  # var(log density) ~ 1/count
    return x, y, w / w.sum()


def fit_first_passage(hist: LogBinnedPdf, restarts: int = 8) -> FirstPassageFit:
    """Count-weighted least squares in log density over occupied bins.

    Needs at least 8 occupied bins spanning two decades; the tail slope of
    the histogram seeds alpha, the empirical mode seeds beta, and a few
    jittered restarts of the simplex search guard against the shallow
    alpha/beta ridge.  Weighting by counts keeps sparse far-tail bins,
    whose log density is biased upward, from tilting the fit.
    """
    from .numerics import minimize

    x, y, w = _occupied_xyw(hist)
    if x.size < 8 or x[-1] < 100.0 * x[0]:
        raise TooFewBins(
            f"{x.size} occupied bins spanning x{x[-1] / x[0]:.1f}; "
            "need >= 8 across >= 2 decades"
        )

    # tail of the law decays like tau^-(alpha+1)
    k = max(3, x.size // 3)
    tail = linfit(np.log(x[-k:]), y[-k:])
    alpha0 = min(max(-tail.slope - 1.0, 0.1), 10.0)
    tau_mode = float(x[np.argmax(y)])
    beta0 = math.sqrt(max(tau_mode, x[0]) * (alpha0 + 1.0))

    lo = np.array([1e-3, math.log(1e-4), math.log(0.05), 0.0])
    hi = np.array([30.0, math.log(1e8), math.log(15.0), 3.0 * x[-1]])

    def objective(theta: np.ndarray) -> float:
        alpha, lbeta, lnu, tau0 = theta
        with np.errstate(over="ignore", invalid="ignore"):
            model = log_passage_density(x, alpha, math.exp(lbeta), math.exp(lnu), tau0)
        if not np.all(np.isfinite(model)):
            return math.inf
        r = model - y
        return float(w @ (r * r))

    rng = np.random.default_rng(0xA1B2)
    best: tuple[float, np.ndarray] | None = None
    for trial in range(max(restarts, 1)):
        theta0 = np.array([alpha0, math.log(beta0), 0.0, 0.0])
        if trial:
            theta0[0] *= math.exp(rng.normal(0.0, 0.3))
            theta0[1] += rng.normal(0.0, 0.3)
            theta0[2] = rng.normal(0.0, 0.2)
            theta0[3] = abs(rng.normal(0.0, 0.05 * tau_mode))
        theta0 = np.clip(theta0, lo, hi)
        try:
            theta, sse = minimize(objective, theta0, bounds=list(zip(lo, hi)))
        except Exception:
            continue
        if math.isfinite(sse) and (best is None or sse < best[0]):
            best = (sse, theta)
    if best is None:
        raise FitDiverged("no simplex start produced a finite fit")

    sse, theta = best
    return FirstPassageFit(
        alpha=float(theta[0]),
        beta=float(math.exp(theta[1])),
        nu=float(math.exp(theta[2])),
        tau0=float(theta[3]),
        sse=float(sse),
        n_bins=int(x.size),
    )


def optimal_horizon(obj) -> float:
    """Most probable waiting time.

    From a fit the mode is closed form,
    tau* = beta^2 (nu / (alpha+1))^(1/nu) - tau0, floored at zero when the
    density is monotone.  From a histogram it is the geometric center of
    the highest-density occupied bin.
    """
    if isinstance(obj, FirstPassageFit):
        tau_star = obj.beta**2 * (obj.nu / (obj.alpha + 1.0)) ** (1.0 / obj.nu) - obj.tau0
        if tau_star <= 0.0:
            logger.warning("fitted density is monotone decreasing; mode at zero")
            return 0.0
        return float(tau_star)
    if isinstance(obj, LogBinnedPdf):
        occ = np.nonzero(obj.occupied)[0]
        if occ.size == 0:
            raise EmptyInput("empty histogram")
        dens = obj.densities[occ]
        k = int(np.argmax(dens))
        if k in (0, occ.size - 1):
            logger.warning("histogram mode sits on the edge of the occupied range")
        return float(obj.centers[occ[k]])
    raise TypeError("expected a FirstPassageFit or LogBinnedPdf")


# ------------------------------------------------------- scaling with theta


@dataclass(frozen=True)
class PowerLawFit:
    """Signed log-log slope: density ~ x^exponent or tau* ~ R^exponent."""

    exponent: float
    stderr: float
    r2: float
    n_points: int


@dataclass(frozen=True)
class HorizonRow:
    threshold: int
    tau_star: float
    n_resolved: int
    n_censored: int
    fit: FirstPassageFit | None


def horizon_scaling(
    data,
    thresholds,
    *,
    direction: str = "up",
    clock: str = "tick",
    bins_per_decade: int = 10,
    min_samples: int = 100,
    method: str = "fit",
) -> list:
    """Optimal horizon per threshold, for the tau* ~ R^gamma diagnostic."""
    if method not in ("fit", "hist"):
        raise ValueError("method must be 'fit' or 'hist'")
    rows = []
    for r in thresholds:
        cfg = ExitTimeConfig(threshold=int(r), direction=direction, clock=clock)
        exits = exit_times(data, cfg)
        hist = first_passage_hist(exits, bins_per_decade, min_samples=min_samples)
        fit = fit_first_passage(hist) if method == "fit" else None
        tau_star = optimal_horizon(fit if fit is not None else hist)
        rows.append(
            HorizonRow(
                threshold=int(r),
                tau_star=tau_star,
                n_resolved=len(exits),
                n_censored=exits.censored_count,
                fit=fit,
            )
        )
    return rows


def fit_horizon_power_law(rows) -> PowerLawFit:
    """Slope of log tau* against log threshold."""
    pts = [(row.threshold, row.tau_star) for row in rows if row.tau_star > 0.0]
    if len(pts) < 3:
        raise TooFewBins("need >= 3 positive-horizon thresholds")
    r = np.array([p[0] for p in pts], dtype=float)
    t = np.array([p[1] for p in pts], dtype=float)
    fit = linfit(np.log(r), np.log(t))
    return PowerLawFit(exponent=fit.slope, stderr=fit.stderr, r2=fit.r2, n_points=len(pts))


def fit_tail_power_law(hist: LogBinnedPdf, fit_range: tuple) -> PowerLawFit:
    """Log-log slope of the density over occupied bins inside fit_range."""
    lo, hi = fit_range
    if not (0 < lo < hi):
        raise ValueError("fit_range must satisfy 0 < lo < hi")
    occ = hist.occupied
    sel = occ & (hist.centers >= lo) & (hist.centers <= hi)
    if np.count_nonzero(sel) < 5:
        raise TooFewBins(f"{np.count_nonzero(sel)} occupied bins in range; need >= 5")
    fit = linfit(np.log(hist.centers[sel]), np.log(hist.densities[sel]))
    return PowerLawFit(
        exponent=fit.slope, stderr=fit.stderr, r2=fit.r2, n_points=int(np.count_nonzero(sel))
    )


@dataclass(frozen=True)
class EntryTimeRow:
    start_second: float
    end_second: float
    count: int
    rate_per_hour: float


def entry_time_distribution(exits: ExitTimes, bin_seconds: float = 1800.0) -> list:
    """When, within the day, resolved entries occur."""
    if bin_seconds <= 0:
        raise ValueError("bin_seconds must be positive")
    sec = exits.entry_second[np.isfinite(exits.entry_second)]
    if sec.size == 0:
        raise EmptyInput("entries carry no wall-clock times")
    n_bins = int(sec.max() // bin_seconds) + 1
    edges = np.arange(n_bins + 1) * bin_seconds
    counts, _ = np.histogram(sec, bins=edges)
    return [
        EntryTimeRow(
            start_second=float(edges[i]),
            end_second=float(edges[i + 1]),
            count=int(counts[i]),
            rate_per_hour=float(counts[i] * 3600.0 / bin_seconds),
        )
        for i in range(n_bins)
    ]

"""Order-book imbalance and its relaxation times.

The imbalance of a snapshot is (sum of bid volume - sum of ask volume) /
(total volume) over the first `depth` levels, a number in [-1, 1].  Sums
are taken over exact integers, so rescaling every volume by a common
factor reproduces bit-identical imbalances.

An entry is an upward crossing of |imbalance| through a level kappa; the
relaxation time is how long the imbalance keeps its sign afterwards.
Entries whose sign survives to the end of the day are censored: their
truncated times are kept but flagged, and they stay in the normalization
of any density built from the samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySide, FitDiverged, TooFewBins, TooFewSamples
from .market_data import NS_PER_S
from .numerics import LinFit, LogBinnedPdf, linfit, log_bin

__all__ = [
    "ImbalanceSeries",
    "RelaxationSamples",
    "StretchedExpFit",
    "KappaRow",
    "KappaScan",
    "imbalance_series",
    "entry_times",
    "relaxation_times",
    "relaxation_hist",
    "fit_stretched_exp",
    "mean_relaxation_from_fit",
    "sample_stretched_exp",
    "mean_relax_vs_kappa",
]

CLOCKS = ("event", "trade", "wall")


@dataclass(frozen=True)
class ImbalanceSeries:
    """Signed depth imbalance per book snapshot, with optional clocks.

    ``trades`` is the cumulative trade count aligned with ``values``;
    ``day_boundaries`` are the start indices of each day, so sign searches
    never cross a session gap.
    """

    values: np.ndarray = field(repr=False)
    timestamps_ns: np.ndarray | None = field(default=None, repr=False)
    trades: np.ndarray | None = field(default=None, repr=False)
    day_boundaries: tuple = (0,)
    depth: int | None = None

    def __len__(self) -> int:
        return self.values.size

    @classmethod
    def concat(cls, parts) -> "ImbalanceSeries":
        parts = list(parts)
        if not parts:
            raise ValueError("nothing to concatenate")
        vals, ts, tr, bounds = [], [], [], []
        offset = 0
        for p in parts:
            vals.append(p.values)
            bounds.extend(b + offset for b in p.day_boundaries)
            ts.append(p.timestamps_ns)
            tr.append(p.trades)
            offset += p.values.size
        has_ts = all(t is not None for t in ts)
        has_tr = all(t is not None for t in tr)
        return cls(
            values=np.concatenate(vals),
            timestamps_ns=np.concatenate(ts) if has_ts else None,
            trades=np.concatenate(tr) if has_tr else None,
            day_boundaries=tuple(bounds),
            depth=parts[0].depth,
        )


def imbalance_series(snaps, depth: int) -> ImbalanceSeries:
    """Depth imbalance of one day of book snapshots.

    Volumes are summed as exact integers before the single float division;
    a snapshot with no volume on either side within ``depth`` has no
    defined imbalance and raises EmptySide.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    n = len(snaps)
    values = np.empty(n)
    ts = np.empty(n, dtype=np.int64)
    trades = np.empty(n, dtype=np.int64)
    running = 0
    for i, snap in enumerate(snaps):
        bid = sum(v for _, v in snap.bids[:depth])
        ask = sum(v for _, v in snap.asks[:depth])
        total = bid + ask
        if total == 0:
            raise EmptySide(f"snapshot {i}: no volume within depth {depth}")
        values[i] = (bid - ask) / total
        ts[i] = snap.timestamp_ns
        running += snap.trade_count_delta
        trades[i] = running
    return ImbalanceSeries(
        values=values, timestamps_ns=ts, trades=trades, day_boundaries=(0,), depth=depth
    )


def entry_times(series, kappa: float) -> np.ndarray:
    """Indices where |imbalance| crosses kappa from below.

    The crossing test compares t-1 and t, so day starts never qualify.
    """
    if not (0.0 < kappa < 1.0):
        raise ValueError("kappa must be in (0, 1)")
    v = np.abs(np.asarray(getattr(series, "values", series), dtype=float))
    if v.size < 2:
        return np.empty(0, dtype=np.int64)
    cross = (v[1:] - kappa) * (v[:-1] - kappa) < 0.0
    rising = v[1:] > v[:-1]
    idx = np.nonzero(cross & rising)[0] + 1
    bounds = np.asarray(getattr(series, "day_boundaries", (0,)), dtype=np.int64)
    if bounds.size > 1:
        idx = idx[~np.isin(idx, bounds)]
    return idx.astype(np.int64)


@dataclass(frozen=True)
class RelaxationSamples:
    """Sign-survival times per entry.

    ``censored[i]`` marks entries whose imbalance never changed sign before
    the day ended; their ``tau`` is the truncated survival up to the last
    snapshot of the day.
    """

    tau: np.ndarray = field(repr=False)
    entry_index: np.ndarray = field(repr=False)
    censored: np.ndarray = field(repr=False)
    kappa: float
    clock: str

    def __len__(self) -> int:
        return self.tau.size

    @property
    def resolved_tau(self) -> np.ndarray:
        return self.tau[~self.censored]

    @property
    def censored_count(self) -> int:
        return int(self.censored.sum())


def relaxation_times(series: ImbalanceSeries, kappa: float, *, clock: str = "event") -> RelaxationSamples:
    """Time until the imbalance first loses its entry sign (or touches 0).

    Entries at the last snapshot of a day are skipped outright; later
    entries that never relax are kept as censored with truncated times.
    """
    if clock not in CLOCKS:
        raise ValueError(f"clock must be one of {CLOCKS}")
    v = series.values
    n = v.size
    entries = entry_times(series, kappa)

    bounds = np.asarray(series.day_boundaries, dtype=np.int64)
    day_end = np.append(bounds[1:], n) - 1  # last index of each day
    day_of = np.searchsorted(bounds, entries, side="right") - 1
    entry_day_end = day_end[day_of]

    keep = entries < entry_day_end  # nothing can follow a day-final entry
    entries = entries[keep]
    entry_day_end = entry_day_end[keep]

    def first_after(sorted_idx: np.ndarray, queries: np.ndarray) -> np.ndarray:
        k = np.searchsorted(sorted_idx, queries, side="right")
        out = np.full(queries.size, n, dtype=np.int64)
        ok = k < sorted_idx.size
        out[ok] = sorted_idx[k[ok]]
        return out

    nonpos = np.nonzero(v <= 0.0)[0]
    nonneg = np.nonzero(v >= 0.0)[0]
    positive = v[entries] > 0.0
    exit_idx = np.empty(entries.size, dtype=np.int64)
    exit_idx[positive] = first_after(nonpos, entries[positive])
    exit_idx[~positive] = first_after(nonneg, entries[~positive])

    censored = exit_idx > entry_day_end
    stop = np.where(censored, entry_day_end, exit_idx)

    if clock == "event":
        tau = stop - entries
    elif clock == "trade":
        if series.trades is None:
            raise ValueError("trade clock needs snapshots with trade counts")
        tau = np.maximum(series.trades[stop] - series.trades[entries], 1)
    else:
        if series.timestamps_ns is None:
            raise ValueError("wall clock needs timestamped snapshots")
        delta = series.timestamps_ns[stop] - series.timestamps_ns[entries]
        tau = np.maximum((delta + NS_PER_S - 1) // NS_PER_S, 1)

    return RelaxationSamples(
        tau=tau.astype(np.int64),
        entry_index=entries,
        censored=censored,
        kappa=float(kappa),
        clock=clock,
    )


def relaxation_hist(
    samples: RelaxationSamples, bins_per_decade: int = 10, *, min_samples: int = 100
) -> LogBinnedPdf:
    """Log-binned density of resolved relaxation times; censored entries
    stay in the normalization."""
    resolved = samples.resolved_tau
    if resolved.size < min_samples:
        raise TooFewSamples(f"{resolved.size} resolved entries < min_samples={min_samples}")
    return log_bin(resolved, bins_per_decade, censored_count=samples.censored_count)


# ------------------------------------------------------------- stretched law


@dataclass(frozen=True)
class StretchedExpFit:
    """Parameters of f(tau) = (alpha/tau_tilde) (tau/tau_tilde)^(alpha-1)
    exp(-(tau/tau_tilde)^alpha), the density whose survival function is the
    stretched exponential exp(-(tau/tau_tilde)^alpha)."""

    tau_tilde: float
    alpha: float
    sse: float
    n_bins: int


def log_stretched_density(tau, tau_tilde: float, alpha: float):
    if not (tau_tilde > 0 and 0 < alpha <= 1):
        raise ValueError("need tau_tilde > 0 and alpha in (0, 1]")
    t = np.asarray(tau, dtype=float)
    if np.any(t <= 0):
        raise ValueError("tau must be positive")
    r = t / tau_tilde
    with np.errstate(over="ignore"):
        return math.log(alpha) - math.log(tau_tilde) + (alpha - 1.0) * np.log(r) - r**alpha


def fit_stretched_exp(hist: LogBinnedPdf, restarts: int = 8) -> StretchedExpFit:
    """Count-weighted least squares in log density over occupied bins.

    tau_tilde is seeded at the 63% point of the resolved mass (the scale
    parameter sits there for every alpha); alpha starts at 0.7 and is
    confined to (0, 1].  Weighting by counts keeps sparse edge bins from
    tilting the fit.
    """
    from .numerics import minimize

    occ = np.nonzero(hist.occupied)[0]
    if occ.size < 8:
        raise TooFewBins(f"{occ.size} occupied bins; need >= 8")
    x = hist.centers[occ]
    y = np.log(hist.densities[occ])

    counts = hist.counts[occ].astype(float)
    w = counts / counts.sum()  # var(log density) ~ 1/count
    cum = np.cumsum(counts) / counts.sum()
    tau0 = float(x[np.searchsorted(cum, 0.632)]) if np.any(cum >= 0.632) else float(x[-1])

    lo = np.array([math.log(x[0] / 10.0), 0.02])
    hi = np.array([math.log(x[-1] * 10.0), 1.0])

    def objective(theta: np.ndarray) -> float:
        ltau, alpha = theta
        with np.errstate(over="ignore", invalid="ignore"):
            model = log_stretched_density(x, math.exp(ltau), alpha)
        if not np.all(np.isfinite(model)):
            return math.inf
        r = model - y
        return float(w @ (r * r))

    rng = np.random.default_rng(0x5E7A)
    best: tuple[float, np.ndarray] | None = None
    for trial in range(max(restarts, 1)):
        theta0 = np.array([math.log(tau0), 0.7])
        if trial:
            theta0[0] += rng.normal(0.0, 0.4)
            theta0[1] = rng.uniform(0.15, 1.0)
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
    return StretchedExpFit(
        tau_tilde=float(math.exp(theta[0])),
        alpha=float(theta[1]),
        sse=float(sse),
        n_bins=int(occ.size),
    )


def mean_relaxation_from_fit(fit: StretchedExpFit) -> float:
    """Mean of the fitted law: (tau_tilde / alpha) Gamma(1 / alpha)."""
    return fit.tau_tilde / fit.alpha * math.gamma(1.0 / fit.alpha)


def sample_stretched_exp(n: int, tau_tilde: float, alpha: float, seed: int = 0) -> np.ndarray:
    """Exact draws by inverting the survival function."""
    if not (tau_tilde > 0 and 0 < alpha <= 1):
        raise ValueError("need tau_tilde > 0 and alpha in (0, 1]")
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    return tau_tilde * (-np.log1p(-u)) ** (1.0 / alpha)


# ------------------------------------------------------------ kappa scaling


@dataclass(frozen=True)
class KappaRow:
    kappa: float
    mean_tau: float
    n_resolved: int
    n_censored: int


@dataclass(frozen=True)
class KappaScan:
    rows: tuple
    fit: LinFit | None


def mean_relax_vs_kappa(
    series: ImbalanceSeries,
    kappas,
    *,
    clock: str = "event",
    min_samples: int = 10,
    fit_range: tuple | None = None,
) -> KappaScan:
    """Mean resolved relaxation time per entry level.

    When at least three levels inside ``fit_range`` have enough entries,
    the scan carries a straight-line fit of mean tau against kappa.
    """
    rows = []
    for kappa in kappas:
        samples = relaxation_times(series, float(kappa), clock=clock)
        resolved = samples.resolved_tau
        if resolved.size < min_samples:
            continue
        rows.append(
            KappaRow(
                kappa=float(kappa),
                mean_tau=float(resolved.mean()),
                n_resolved=int(resolved.size),
                n_censored=samples.censored_count,
            )
        )
    fit = None
    if fit_range is not None:
        lo, hi = fit_range
        pts = [(r.kappa, r.mean_tau) for r in rows if lo <= r.kappa <= hi]
        if len(pts) >= 3:
            fit = linfit([p[0] for p in pts], [p[1] for p in pts])
    return KappaScan(rows=tuple(rows), fit=fit)

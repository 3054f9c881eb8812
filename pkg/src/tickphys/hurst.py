"""Hurst exponent estimation by detrended fluctuation analysis.

``dfa_fluctuation`` implements the classic recipe on an increment series:
integrate the mean-subtracted increments into a profile, split the profile
into non-overlapping boxes of size n taken from the start *and* from the
end (so every point is covered even when n does not divide the length),
least-squares detrend each box with a polynomial, and report
F(n) = the RMS of all box residuals.

``hurst_exponent`` and the sliding-window routines operate on price-like
paths: they difference the path first, so a fractional Brownian motion
path with Hurst exponent H comes back as h ~ H (and a pure trend has
identically vanishing fluctuations).  h is the OLS slope of log2 F(n)
against log2 n with the regression's slope standard error attached.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSeries, SeriesTooShort, WindowTooLarge
from .numerics import linfit

__all__ = [
    "DfaConfig",
    "HurstEstimate",
    "HurstSeries",
    "dfa_fluctuation",
    "hurst_exponent",
    "local_hurst",
    "hurst_pdf",
    "avg_hurst_vs_scale",
]


def max_threads() -> int:
    """Parallelism cap: TICKPHYS_THREADS when set, else machine width."""
    env = os.environ.get("TICKPHYS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class DfaConfig:
    """Box sizes and detrending order for DFA.

    ``box_sizes`` must be strictly increasing, each at least
    ``poly_order + 2`` so every box fit leaves a residual degree of
    freedom; the largest size needs ``min_boxes`` boxes to fit in the
    series for each of the two partition passes.
    """

    box_sizes: tuple
    poly_order: int = 1
    min_boxes: int = 4

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.box_sizes)
        if len(sizes) < 3:
            raise ValueError("need at least 3 box sizes")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("box sizes must be strictly increasing")
        if self.poly_order < 1:
            raise ValueError("poly_order must be >= 1")
        if sizes[0] < self.poly_order + 2:
            raise ValueError(f"smallest box must be >= poly_order + 2 = {self.poly_order + 2}")
        if self.min_boxes < 1:
            raise ValueError("min_boxes must be >= 1")
        object.__setattr__(self, "box_sizes", sizes)

    @classmethod
    def for_length(
        cls,
        n: int,
        n_sizes: int = 20,
        smallest: int = 8,
        poly_order: int = 1,
        min_boxes: int = 4,
    ) -> "DfaConfig":
        """Roughly n_sizes geometrically spaced box sizes from ``smallest``
        up to n // min_boxes."""
        largest = n // min_boxes
        if largest < smallest:
            raise SeriesTooShort(f"series of length {n} is too short for DFA")
        sizes = np.unique(
            np.round(np.geomspace(smallest, largest, n_sizes)).astype(int)
        )
        return cls(box_sizes=tuple(sizes), poly_order=poly_order, min_boxes=min_boxes)


@dataclass(frozen=True)
class HurstEstimate:
    h: float
    stderr: float
    n_points: int


@dataclass(frozen=True)
class HurstSeries:
    """Local Hurst exponents on a sliding window.

    ``times[i]`` is the right edge (exclusive) of window i in grid units,
    so windows are stamped at the moment the last observation arrives.
    Windows that straddle a session boundary are kept but flagged.
    """

    times: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)
    stderr: np.ndarray = field(repr=False)
    spans_boundary: np.ndarray = field(repr=False)
    window: int
    shift: int
    n_points: int

    def __len__(self) -> int:
        return self.times.size

    @property
    def estimates(self) -> list:
        return [
            HurstEstimate(float(h), float(s), self.n_points)
            for h, s in zip(self.h, self.stderr)
        ]


# ---------------------------------------------------------------------- cores


def _poly_basis(n: int, order: int) -> np.ndarray:
    """Orthonormal basis of degree<=order polynomials sampled on n points."""
    t = np.linspace(-1.0, 1.0, n)
    v = np.vander(t, order + 1, increasing=True)
    q, _ = np.linalg.qr(v)
    return q


def _box_rss(segments: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Residual sum of squares of the polynomial fit, per row."""
    seg = segments - segments[:, :1]  # conditioning only; absorbed by the fit
    proj = seg @ q
    return np.einsum("ij,ij->i", seg, seg) - np.einsum("ij,ij->i", proj, proj)


def dfa_fluctuation(increments, config: DfaConfig) -> list:
    """Fluctuation function of an increment series.

    Returns ``[(n, F(n)), ...]`` for each configured box size.  F(n) can be
    exactly zero when the profile is a polynomial the box fits absorb (a
    degree-d increment trend vanishes for poly_order >= d + 1).
    """
    x = np.asarray(increments, dtype=float).ravel()
    n_obs = x.size
    if n_obs < 4:
        raise SeriesTooShort("need at least 4 increments")
    if np.all(x == x[0]):
        raise DegenerateSeries("constant input")
    if n_obs < config.box_sizes[-1] * config.min_boxes:
        raise SeriesTooShort(
            f"length {n_obs} < largest box {config.box_sizes[-1]} x min_boxes {config.min_boxes}"
        )
    profile = np.cumsum(x - x.mean())
    out = []
    for n in config.box_sizes:
        k = n_obs // n
        q = _poly_basis(n, config.poly_order)
        fwd = profile[: k * n].reshape(k, n)
        bwd = profile[n_obs - k * n :].reshape(k, n)
        rss = _box_rss(np.vstack([fwd, bwd]), q)
        f = np.sqrt(max(float(rss.sum()), 0.0) / (2 * k * n))
        out.append((int(n), f))
    return out


def hurst_exponent(series, config: DfaConfig | None = None) -> HurstEstimate:
    """DFA Hurst exponent of a price-like path (differenced internally)."""
    arr = np.asarray(getattr(series, "values", series), dtype=float).ravel()
    inc = np.diff(arr)
    if config is None:
        config = DfaConfig.for_length(inc.size)
    pairs = dfa_fluctuation(inc, config)
    f = np.array([p[1] for p in pairs])
    if np.any(f <= 0.0):
        raise DegenerateSeries("fluctuation function vanishes; no scaling exponent")
    fit = linfit(np.log2([p[0] for p in pairs]), np.log2(f))
    return HurstEstimate(h=fit.slope, stderr=fit.stderr, n_points=len(pairs))


def _box_offsets(m: int, n: int) -> np.ndarray:
    """Start offsets (in price coordinates) of the forward and backward box
    partitions of a window with m increments."""
    k = m // n
    return np.concatenate([np.arange(k) * n, (m - k * n) + np.arange(k) * n]) + 1


def _window_mean_rss_order1(x, starts_a, m, n):
    """Mean degree-1 box RSS per window, O(1) per box via prefix sums.

    The box fit of the windowed profile equals, in exact arithmetic, the
    same polynomial fit applied to the raw price segment covering the box
    (window-mean and profile-offset terms are affine and absorbed for
    poly_order >= 1), so each box costs six prefix lookups.
    """
    xc = x - x.mean()  # keeps the prefix magnitudes small
    p1 = np.concatenate([[0.0], np.cumsum(xc)])
    p2 = np.concatenate([[0.0], np.cumsum(xc * xc)])
    q1 = np.concatenate([[0.0], np.cumsum(np.arange(xc.size) * xc)])
    offs = _box_offsets(m, n)
    sxx = n * (n * n - 1) / 12.0
    half = (n - 1) / 2.0
    # cancellation floor: differences this far below the subtracted terms
    # are rounding residue of an exactly-fitting box, not signal
    tiny = 64.0 * np.finfo(float).eps
    acc = np.zeros(starts_a.size)
    for off in offs:
        s = starts_a + off
        e = s + n
        a = p1[e] - p1[s]
        b = q1[e] - q1[s] - s * a  # sum of (i - s) x[i] over the box
        c1 = b - half * a
        s2 = p2[e] - p2[s]
        quad = a * a / n + c1 * c1 / sxx
        rss = s2 - quad
        rss[rss <= tiny * (s2 + quad)] = 0.0
        acc += rss
    return acc / offs.size


def _window_mean_rss(x, starts_a, m, n, order, chunk_elems=8_000_000):
    """Mean degree-``order`` box RSS per window (gathered segment fits)."""
    if order == 1:
        return _window_mean_rss_order1(x, starts_a, m, n)
    offs = _box_offsets(m, n)
    starts = (starts_a[:, None] + offs[None, :]).ravel()
    uniq, inv = np.unique(starts, return_inverse=True)
    q = _poly_basis(n, order)
    rss_u = np.empty(uniq.size)
    rows_per_chunk = max(1, chunk_elems // n)
    for i in range(0, uniq.size, rows_per_chunk):
        u = uniq[i : i + rows_per_chunk]
        seg = x[u[:, None] + np.arange(n)[None, :]]
        rss_u[i : i + rows_per_chunk] = _box_rss(seg, q)
    return rss_u[inv].reshape(starts_a.size, offs.size).mean(axis=1)


def local_hurst(series, window: int, shift: int, config: DfaConfig | None = None) -> HurstSeries:
    """Hurst exponent over sliding windows [t - window, t), t = window,
    window + shift, ...

    Windows whose fluctuation function vanishes at some scale (flat or
    exactly polynomial price segments) yield NaN estimates rather than an
    error, keeping the time axis intact.
    """
    arr = np.asarray(getattr(series, "values", series), dtype=float).ravel()
    boundaries = np.asarray(getattr(series, "session_boundaries", (0,)), dtype=np.int64)
    n_obs = arr.size
    if window < 8:
        raise WindowTooLarge("window must be at least 8 grid points")
    if window > n_obs:
        raise WindowTooLarge(f"window {window} exceeds series length {n_obs}")
    if shift < 1:
        raise ValueError("shift must be >= 1")
    m = window - 1  # increments per window
    if config is None:
        config = DfaConfig.for_length(m)
    if config.box_sizes[-1] * config.min_boxes > m:
        raise WindowTooLarge(
            f"largest box {config.box_sizes[-1]} needs min_boxes {config.min_boxes} "
            f"inside a window of {m} increments"
        )

    times = np.arange(window, n_obs + 1, shift, dtype=np.int64)
    starts = times - window
    sizes = np.array(config.box_sizes)

    f2 = np.empty((times.size, sizes.size))

    def fill(j: int) -> None:
        mean_rss = _window_mean_rss(arr, starts, m, int(sizes[j]), config.poly_order)
        f2[:, j] = mean_rss / sizes[j]

    workers = min(max_threads(), sizes.size)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, range(sizes.size)))
    else:
        for j in range(sizes.size):
            fill(j)

    with np.errstate(divide="ignore", invalid="ignore"):
        logf = 0.5 * np.log2(f2)
    ok = np.all(np.isfinite(logf), axis=1)

    # vectorized OLS of log2 F on log2 n, one fit per window
    lx = np.log2(sizes)
    lx = lx - lx.mean()
    sxx = float(np.sum(lx**2))
    h = np.full(times.size, np.nan)
    se = np.full(times.size, np.nan)
    if np.any(ok):
        y = logf[ok]
        slopes = (y - y.mean(axis=1, keepdims=True)) @ lx / sxx
        resid = y - y.mean(axis=1, keepdims=True) - slopes[:, None] * lx[None, :]
        rss = np.einsum("ij,ij->i", resid, resid)
        dof = sizes.size - 2
        h[ok] = slopes
        se[ok] = np.sqrt(np.maximum(rss, 0.0) / dof / sxx)

    inner = boundaries[(boundaries > 0) & (boundaries < n_obs)]
    spans = np.zeros(times.size, dtype=bool)
    for b in inner:
        spans |= (starts < b) & (b < times)

    return HurstSeries(
        times=times,
        h=h,
        stderr=se,
        spans_boundary=spans,
        window=window,
        shift=shift,
        n_points=sizes.size,
    )


# ------------------------------------------------------------------ summaries


@dataclass(frozen=True)
class HurstHistogram:
    edges: np.ndarray = field(repr=False)
    densities: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    n_used: int


def hurst_pdf(estimates, bins: int = 20) -> HurstHistogram:
    """Distribution of Hurst estimates over [0, 1], normalized to unit area.

    Accepts a HurstSeries, HurstEstimate list, or plain floats; NaN and
    out-of-range values are excluded from the normalization.
    """
    if hasattr(estimates, "h"):
        values = np.asarray(estimates.h, dtype=float)
    else:
        values = np.array(
            [e.h if isinstance(e, HurstEstimate) else float(e) for e in estimates]
        )
    values = values[np.isfinite(values)]
    values = values[(values >= 0.0) & (values <= 1.0)]
    if bins < 1:
        raise ValueError("bins must be >= 1")
    counts, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    n = int(counts.sum())
    width = 1.0 / bins
    densities = counts / (n * width) if n else counts.astype(float)
    return HurstHistogram(edges=edges, densities=densities, counts=counts, n_used=n)


@dataclass(frozen=True)
class ScaleRow:
    window: int
    mean_h: float
    sd_h: float
    n_windows: int


def avg_hurst_vs_scale(series, windows, shift: int, config: DfaConfig | None = None) -> list:
    """Mean and spread of the local Hurst exponent per window length."""
    rows = []
    for length in windows:
        hs = local_hurst(series, int(length), shift, config)
        vals = hs.h[np.isfinite(hs.h)]
        if vals.size == 0:
            raise DegenerateSeries(f"no usable windows at L={length}")
        sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        rows.append(ScaleRow(int(length), float(vals.mean()), sd, int(vals.size)))
    return rows

"""Synthetic series with known scaling behaviour.

These generators are the ground truth used throughout the test suite: a
Brownian walk (H = 1/2), exact fractional Brownian motion for arbitrary H,
and an integer tick walk for first-passage checks.  All of them take an
explicit seed and draw from ``numpy.random.default_rng`` (PCG64), so a given
(seed, parameters) pair always reproduces the same series.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

__all__ = ["FbmSpec", "gen_brownian", "gen_fbm", "gen_tick_walk"]


@dataclass(frozen=True)
class FbmSpec:
    """Parameters of a fractional Brownian motion sample path.

    ``scale`` is the standard deviation of the lag-1 increment.
    """

    hurst: float
    n: int
    scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise ValueError("hurst must lie in (0, 1)")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.scale <= 0.0:
            raise ValueError("scale must be positive")


def gen_brownian(n: int, scale: float = 1.0, seed: int = 0) -> np.ndarray:
    """Gaussian random walk of length n starting at 0."""
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = np.random.default_rng(seed)
    steps = rng.standard_normal(n - 1) * scale
    out = np.empty(n)
    out[0] = 0.0
    np.cumsum(steps, out=out[1:])
    return out


def _fgn_autocov(n: int, hurst: float) -> np.ndarray:
    """Autocovariance of unit-variance fractional Gaussian noise, lags 0..n."""
    k = np.arange(n + 1, dtype=float)
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 - 2.0 * np.abs(k) ** h2 + np.abs(k - 1) ** h2)


def _fgn_circulant(n: int, hurst: float, rng) -> np.ndarray | None:
    """Exact fGn sample by circulant embedding.

    The covariance of lags 0..m is embedded in a circulant of size 2m (m the
    next power of two >= n, so the FFT length is a power of two).  Returns
    None when the embedding is not non-negative definite.
    """
    m = 1
    while m < n:
        m *= 2
    gamma = _fgn_autocov(m, hurst)
    row = np.concatenate([gamma[: m + 1], gamma[m - 1 : 0 : -1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-9 * lam.max():
        return None
    lam = np.maximum(lam, 0.0)

    two_m = 2 * m
    g = rng.standard_normal(two_m)
    w = np.empty(two_m, dtype=complex)
    w[0] = np.sqrt(lam[0] / two_m) * g[0]
    w[m] = np.sqrt(lam[m] / two_m) * g[m]
    half = np.sqrt(lam[1:m] / (2.0 * two_m))
    w[1:m] = half * (g[1:m] + 1j * g[m + 1 :])
    w[m + 1 :] = np.conj(w[1:m][::-1])
    return np.fft.fft(w).real[:n]


def _fgn_recursive(n: int, hurst: float, rng) -> np.ndarray:
    """Exact fGn by the Durbin-Levinson conditional recursion, O(n^2).

    Fallback for covariance sequences whose circulant embedding fails; slow,
    so only practical for modest n.
    """
    gamma = _fgn_autocov(n, hurst)
    out = np.empty(n)
    out[0] = rng.standard_normal()
    phi = np.zeros(n)  # phi[:t] holds the order-t prediction coefficients
    v = 1.0
    for t in range(1, n):
        if t == 1:
            k = gamma[1]
        else:
            k = (gamma[t] - float(phi[: t - 1] @ gamma[t - 1:0:-1])) / v
        phi[: t - 1] -= k * phi[: t - 1][::-1].copy()
        phi[t - 1] = k
        v *= 1.0 - k * k
        mean = float(phi[:t] @ out[t - 1 :: -1])
        out[t] = mean + np.sqrt(max(v, 0.0)) * rng.standard_normal()
    return out


def gen_fbm(spec: FbmSpec) -> np.ndarray:
    """Fractional Brownian motion path of length spec.n starting at 0.

    Increments are exact fractional Gaussian noise with Hurst exponent
    ``spec.hurst``; the path is their cumulative sum.  Circulant embedding
    is used when the embedding is non-negative definite, otherwise a
    recursive exact sampler takes over (logged, same distribution).
    """
    rng = np.random.default_rng(spec.seed)
    n_inc = spec.n - 1
    fgn = _fgn_circulant(n_inc, spec.hurst, rng)
    if fgn is None:
        log.info(
            "circulant embedding not nonneg-definite for H=%.3f, n=%d; "
            "falling back to recursive sampler",
            spec.hurst,
            spec.n,
        )
        fgn = _fgn_recursive(n_inc, spec.hurst, rng)
    out = np.empty(spec.n)
    out[0] = 0.0
    np.cumsum(fgn * spec.scale, out=out[1:])
    return out


def gen_tick_walk(n: int, p_zero: float = 0.0, seed: int = 0) -> np.ndarray:
    """Integer random walk with steps -1/0/+1, starting at 0.

    Zero steps occur with probability ``p_zero``; the remaining mass is
    split evenly between -1 and +1.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0.0 <= p_zero < 1.0:
        raise ValueError("p_zero must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    u = rng.random(n - 1)
    steps = np.zeros(n - 1, dtype=np.int64)
    half = 0.5 * (1.0 - p_zero)
    steps[u < half] = 1
    steps[u >= 1.0 - half] = -1
    out = np.empty(n, dtype=np.int64)
    out[0] = 0
    np.cumsum(steps, out=out[1:])
    return out

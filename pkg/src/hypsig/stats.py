"""Autocorrelation-aware error estimates for Monte Carlo time series."""

from __future__ import annotations

import math

import numpy as np

WINDOW_C = 6.0
MIN_BLOCKS = 20
MAX_BLOCKS = 64


def autocorrelation(x):
    """Normalized autocorrelation function via FFT."""
    x = np.asarray(x, dtype=float)
    n = x.size
    d = x - x.mean()
    f = np.fft.rfft(d, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    if acf[0] <= 0:
        return np.zeros(n)
    return acf / acf[0]


def tau_int(x, c=WINDOW_C):
    """Integrated autocorrelation time with automatic windowing.

    tau(W) = 1/2 + sum_{t=1..W} rho(t), with W the smallest window
    satisfying W >= c * tau(W).  Returns 0.5 for constant or tiny series.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 4:
        return 0.5
    rho = autocorrelation(x)
    if not rho.any():
        return 0.5
    tau = 0.5 + np.cumsum(rho[1:])
    w = np.arange(1, x.size)
    ok = np.flatnonzero(w >= c * tau)
    if ok.size == 0:
        return float(tau[-1])
    return float(max(tau[ok[0]], 0.5))


def n_blocks_for(n, tau=0.5):
    """Block count: at least MIN_BLOCKS, blocks at least ~10 tau long."""
    if n < MIN_BLOCKS:
        return max(n, 1)
    by_tau = n // max(1, math.ceil(10 * tau))
    return int(min(MAX_BLOCKS, max(MIN_BLOCKS, by_tau)))


def block_means(x, n_blocks):
    x = np.asarray(x, dtype=float)
    size = x.size // n_blocks
    return x[: size * n_blocks].reshape(n_blocks, size).mean(axis=1)


def jackknife(x, n_blocks=None, tau=None):
    """Blocked-jackknife (mean, error) for the mean of a series."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n == 0:
        return float("nan"), float("nan")
    if n == 1:
        return float(x[0]), float("nan")
    if n_blocks is None:
        n_blocks = n_blocks_for(n, tau_int(x) if tau is None else tau)
    b = block_means(x, n_blocks)
    total = b.sum()
    loo = (total - b) / (n_blocks - 1)
    err = math.sqrt((n_blocks - 1) / n_blocks * float(np.sum((loo - loo.mean()) ** 2)))
    return float(x.mean()), err


def jackknife_pooled(series_list, tau=None):
    """Jackknife over blocks pooled from several independent series."""
    blocks = []
    weights = []
    for x in series_list:
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            continue
        nb = n_blocks_for(x.size, tau_int(x) if tau is None else tau)
        size = x.size // nb
        blocks.append(block_means(x, nb))
        weights.append(np.full(nb, size, dtype=float))
    if not blocks:
        return float("nan"), float("nan")
    b = np.concatenate(blocks)
    w = np.concatenate(weights)
    if b.size == 1:
        return float(b[0]), float("nan")
    tot_w = w.sum()
    tot = np.sum(b * w)
    loo = (tot - b * w) / (tot_w - w)
    mean = tot / tot_w
    k = b.size
    err = math.sqrt((k - 1) / k * float(np.sum((loo - loo.mean()) ** 2)))
    return float(mean), err

"""Jackknife and batch-means error bars."""

from __future__ import annotations

import numpy as np


def jackknife(data, statistic=None, axis: int = 0) -> tuple[float, float]:
    """Delete-one jackknife estimate and standard error.

    ``data`` holds one entry (scalar or row) per independent unit along
    ``axis``; ``statistic`` maps such an array to a scalar and defaults to the
    mean, for which the jackknife SE is the usual s / sqrt(n). Returns
    ``(statistic(data), se)``; the SE is nan for a single unit.
    """
    x = np.asarray(data, dtype=float)
    if axis != 0:
        x = np.moveaxis(x, axis, 0)
    n = x.shape[0]
    if n == 0:
        raise ValueError("jackknife needs at least one unit")
    if statistic is None:
        est = float(np.mean(x))
        se = float(np.std(x, ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
        return est, se
    est = float(statistic(x))
    if n == 1:
        return est, float("nan")
    reps = np.array([statistic(np.delete(x, i, axis=0)) for i in range(n)], dtype=float)
    se = float(np.sqrt((n - 1) / n * np.sum((reps - reps.mean()) ** 2)))
    return est, se


def batch_means_se(series, n_batches: int = 20) -> float:
    """Standard error of the mean of a correlated series by non-overlapping batches."""
    x = np.asarray(series, dtype=float)
    n_batches = min(n_batches, len(x))
    if n_batches < 2:
        return float("nan")
    size = len(x) // n_batches
    means = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(np.std(means, ddof=1) / np.sqrt(n_batches))


def effective_sample_size(series) -> float:
    """ESS from the initial positive sequence of autocorrelations."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 4:
        return float(n)
    x = x - x.mean()
    var = x @ x / n
    if var == 0:
        return float(n)
    f = np.fft.rfft(x, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n] / (n * var)
    tau = 1.0
    for k in range(1, n - 1, 2):
        pair = acf[k] + acf[k + 1]
        if pair <= 0:
            break
        tau += 2 * pair
    return float(n / tau)

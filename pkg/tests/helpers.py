"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately re-derive expected values from first
principles (direct textbook recursions, brute-force slot means, generator
processes) so the tests never assume the library's own arithmetic.
"""

from __future__ import annotations

from datetime import datetime, timedelta

import numpy as np

from hwdims import TimeSeries

HOUR = timedelta(hours=1)
START = datetime(2023, 1, 2)  # a Monday


def hourly_series(values, seasons=(), dims=()) -> TimeSeries:
    return TimeSeries(values=np.asarray(values, float), step=HOUR, start=START,
                      seasons=tuple(seasons), dims=tuple(dims))


# ---------------------------------------------------------------------------
# Classic single-seasonality Holt-Winters oracle (multiplicative indices)
# ---------------------------------------------------------------------------

def classic_hw(y, s, alpha, gamma, delta, level0, trend0, ring0, horizon):
    """Direct classic multiplicative Holt-Winters recursion.

    Level uses the index stored one cycle back, the index update uses the
    fresh level, and forecasts are (level + k*trend) times the cycled index.
    Returns (fitted, errors, forecasts, final_level, final_trend, final_ring).
    """
    ring = [float(v) for v in ring0]
    level, trend = float(level0), float(trend0)
    fitted, errors = [], []
    for t, yt in enumerate(y):
        idx = ring[t % s]
        one_step = (level + trend) * idx
        fitted.append(one_step)
        errors.append(yt - one_step)
        new_level = alpha * yt / idx + (1 - alpha) * (level + trend)
        trend = gamma * (new_level - level) + (1 - gamma) * trend
        ring[t % s] = delta * yt / new_level + (1 - delta) * idx
        level = new_level
    n = len(y)
    forecasts = [
        (level + k * trend) * ring[(n - 1 + k) % s] for k in range(1, horizon + 1)
    ]
    return (np.array(fitted), np.array(errors), np.array(forecasts),
            level, trend, np.array(ring))


def classic_hw_seeds(y, s):
    """Textbook seeds: first-cycle mean level, cycle-mean-difference trend,
    ratio-to-centered-moving-average indices normalized to mean one."""
    y = np.asarray(y, float)
    level = y[:s].mean()
    trend = (y[s:2 * s].mean() - y[:s].mean()) / s
    if s % 2 == 0:
        kernel = np.full(s + 1, 1.0 / s)
        kernel[0] = kernel[-1] = 0.5 / s
    else:
        kernel = np.full(s, 1.0 / s)
    ma = np.convolve(y, kernel, mode="valid")
    offset = s // 2
    ratios = y[offset:offset + len(ma)] / ma
    ring = np.empty(s)
    for q in range(s):
        sel = ratios[(np.arange(offset, offset + len(ma)) % s) == q]
        ring[q] = sel.mean()
    ring /= ring.mean()
    return level, trend, ring


# ---------------------------------------------------------------------------
# Synthetic series
# ---------------------------------------------------------------------------

def smooth_daily_pattern(amplitude=0.25, phase=0.0):
    hours = np.arange(24)
    return 1.0 + amplitude * np.sin(2 * np.pi * (hours + phase) / 24)


def smooth_weekly_pattern(amplitude=0.10):
    steps = np.arange(168)
    return 1.0 + amplitude * np.sin(2 * np.pi * steps / 168)


def simulate_double_seasonal(
    n, alpha, gamma, deltas, sigma, rng, phi=1.0,
    level0=100.0, trend0=0.005,
    daily=None, weekly=None,
):
    """Simulate the innovations form of a two-seasonal multiplicative-index
    recursion with additive trend: each observation is the model's own
    one-step forecast plus Gaussian noise, followed by the state update.
    """
    rings = [
        list(daily if daily is not None else smooth_daily_pattern()),
        list(weekly if weekly is not None else smooth_weekly_pattern()),
    ]
    cycles = [len(rings[0]), len(rings[1])]
    d = list(deltas)
    level, trend = level0, trend0
    y = np.empty(n)
    for t in range(n):
        idx = [rings[i][t % cycles[i]] for i in range(2)]
        prod = idx[0] * idx[1]
        one_step = (level + phi * trend) * prod
        yt = one_step + rng.normal(0.0, sigma)
        y[t] = yt
        prev = level
        level = alpha * yt / prod + (1 - alpha) * (prev + phi * trend)
        trend = gamma * (level - prev) + (1 - gamma) * phi * trend
        for i in range(2):
            q = t % cycles[i]
            old = rings[i][q]
            rings[i][q] = d[i] * yt / (level * prod / old) + (1 - d[i]) * old
    return y


def holiday_blocks(n_days_per_year=10, years=2, start_day=20, weekly_jitter=11):
    """Day-start block indices for synthetic holidays, spread over the year
    and staggered across weekdays, never overlapping."""
    blocks = []
    for year in range(years):
        for i in range(n_days_per_year):
            day = year * 365 + start_day + i * 33 + (i * weekly_jitter) % 7
            blocks.append(day * 24)
    return blocks


def shocked_two_year_series(rng, shock=0.85, sigma_rel=0.003, occurrences=None):
    """Two years of hourly demand-like data: level 1000, daily and weekly
    patterns, Gaussian noise and a multiplicative shock on holiday blocks."""
    n = 2 * 365 * 24
    daily = smooth_daily_pattern(amplitude=0.20)
    weekly = smooth_weekly_pattern(amplitude=0.08)
    t = np.arange(n)
    base = 1000.0 * daily[t % 24] * weekly[t % 168]
    y = base * (1.0 + rng.normal(0.0, sigma_rel, size=n))
    occurrences = holiday_blocks() if occurrences is None else occurrences
    for occ in occurrences:
        y[occ:occ + 24] *= shock
    return y, list(occurrences)

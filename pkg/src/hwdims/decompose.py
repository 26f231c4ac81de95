"""Loess-based seasonal-trend decomposition with moving-seasonality extraction.

The decomposition is additive throughout: trend + one component per regular
seasonality + one component per moving seasonality + remainder reconstructs
the input exactly (the remainder closes the identity by construction).
Regular components are extracted by cycle-subseries Loess smoothing inside an
outer refinement loop that cycles through the seasonalities until they stop
changing. Moving-seasonality components are extracted afterwards from the
detrended, deseasonalized residual: the values at the occurrence blocks are
averaged per within-block offset, so the regular components never depend on
whether moving seasonalities are registered.

Each regular component is recentered over every complete cycle, so a full
cycle of a component sums to (numerically) zero. Callers wanting a
multiplicative decomposition should log-transform first.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .timeseries import DataError, TimeSeries


@dataclass(frozen=True)
class LoessConfig:
    """Smoothing windows and iteration limits for the decomposition.

    ``trend_window=None`` derives the classic default from the longest cycle:
    next odd integer >= 1.5 * cycle / (1 - 1.5 / seasonal_window).
    """

    seasonal_window: int = 7
    trend_window: int | None = None
    lowpass_window: int | None = None
    inner_iterations: int = 2
    max_outer_iterations: int = 10
    convergence_tol: float = 1e-6


@dataclass(frozen=True, eq=False)
class DecompositionResult:
    series: TimeSeries
    trend: np.ndarray
    seasonals: dict[str, np.ndarray]
    dims_components: dict[str, np.ndarray]
    dims_profiles: dict[str, np.ndarray]
    remainder: np.ndarray
    converged: bool
    iterations: int

    def reconstruction(self) -> np.ndarray:
        total = self.trend + self.remainder
        for comp in self.seasonals.values():
            total = total + comp
        for comp in self.dims_components.values():
            total = total + comp
        return total


# ---------------------------------------------------------------------------
# Loess primitives (degree-1 local regression, tricube weights)
# ---------------------------------------------------------------------------

def _odd_at_least(x: float) -> int:
    w = max(3, int(math.ceil(x)))
    return w if w % 2 == 1 else w + 1


def _fit_point(y: np.ndarray, x0: float, window: int,
               excluded: np.ndarray | None = None) -> float:
    """Weighted degree-1 fit at coordinate ``x0`` over the nearest grid points."""
    n = len(y)
    if window >= n:
        lo, hi = 0, n
    else:
        half = (window - 1) // 2
        lo = min(max(int(math.floor(x0)) - half, 0), n - window)
        hi = lo + window
    idx = np.arange(lo, hi)
    if excluded is not None:
        kept = idx[~excluded[lo:hi]]
        if kept.size == 0:
            kept = np.flatnonzero(~excluded)
            order = np.argsort(np.abs(kept - x0), kind="stable")
            kept = kept[order[:window]]
        # nothing unmasked anywhere: fit from what exists
        idx = kept if kept.size else idx
    vals = y[idx]
    dist = np.abs(idx - x0)
    h = dist.max()
    if h <= 0:
        return float(vals[0])
    u = dist / h
    wts = np.clip(1.0 - u ** 3, 0.0, None) ** 3
    sw = wts.sum()
    if sw <= 0.0:
        return float(vals.mean())
    xb = float((wts * idx).sum() / sw)
    yb = float((wts * vals).sum() / sw)
    sxx = float((wts * (idx - xb) ** 2).sum())
    if sxx <= 1e-12 * max(h * h, 1.0):
        return yb
    slope = float((wts * (idx - xb) * (vals - yb)).sum() / sxx)
    return yb + slope * (x0 - xb)


def loess_smooth(y, window: int, excluded: np.ndarray | None = None) -> np.ndarray:
    """Loess-smoothed values at every position of an evenly spaced series.

    ``excluded`` marks positions whose values must not influence the fit
    (they still receive a fitted value, interpolated from their neighbours).
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n == 0:
        raise ValueError("empty input")
    w = _odd_at_least(window)
    out = np.empty(n)
    if excluded is not None:
        excluded = np.asarray(excluded, dtype=bool)
        if excluded.all():
            raise ValueError("all positions excluded")
        if not excluded.any():
            excluded = None

    if w >= n:
        for i in range(n):
            out[i] = _fit_point(y, float(i), w, excluded)
        return out

    half = w // 2
    offsets = np.arange(-half, half + 1)
    u = np.abs(offsets) / half
    kernel = np.clip(1.0 - u ** 3, 0.0, None) ** 3
    kernel /= kernel.sum()
    out[half:n - half] = np.convolve(y, kernel, mode="valid")

    redo = np.zeros(n, dtype=bool)
    redo[:half] = True
    redo[n - half:] = True
    if excluded is not None:
        # windows overlapping an excluded point need the exact weighted fit
        redo |= np.convolve(excluded.astype(float), np.ones(w), mode="same") > 0
    for i in np.flatnonzero(redo):
        out[i] = _fit_point(y, float(i), w, excluded)
    return out


def _moving_average(x: np.ndarray, w: int) -> np.ndarray:
    return np.convolve(x, np.full(w, 1.0 / w), mode="valid")


def _subseries_smooth_extended(u: np.ndarray, s: int, window: int,
                               excluded: np.ndarray | None = None) -> np.ndarray:
    """Smooth each cycle-subseries and extend it one cycle at both ends."""
    n = len(u)
    ext = np.empty(n + 2 * s)
    for q in range(s):
        sub = u[q::s]
        sub_excluded = excluded[q::s] if excluded is not None else None
        if sub_excluded is not None and sub_excluded.all():
            # No event-free cycle exists for this slot; use what there is.
            sub_excluded = None
        m = len(sub)
        smoothed = loess_smooth(sub, window, excluded=sub_excluded)
        before = _fit_point(sub, -1.0, _odd_at_least(window), sub_excluded)
        after = _fit_point(sub, float(m), _odd_at_least(window), sub_excluded)
        ext[q:q + s * (m + 2):s] = np.concatenate(([before], smoothed, [after]))
    return ext


def _recenter_cycles(x: np.ndarray, s: int) -> np.ndarray:
    """Subtract each complete aligned cycle's mean so full cycles sum to ~0."""
    out = x.copy()
    m = len(x) // s
    if m:
        head = out[:m * s].reshape(m, s)
        head -= head.mean(axis=1, keepdims=True)
    return out


def _trend_window(cycle: int, cfg: LoessConfig) -> int:
    if cfg.trend_window is not None:
        return _odd_at_least(cfg.trend_window)
    return _odd_at_least(1.5 * cycle / (1.0 - 1.5 / cfg.seasonal_window))


def _extract_seasonal(u: np.ndarray, s: int, cfg: LoessConfig,
                      excluded: np.ndarray | None = None) -> np.ndarray:
    """One STL-style seasonal extraction for cycle length ``s``."""
    n = len(u)
    lowpass_w = _odd_at_least(cfg.lowpass_window if cfg.lowpass_window is not None else s)
    trend = np.zeros(n)
    seasonal = np.zeros(n)
    for _ in range(max(1, cfg.inner_iterations)):
        detrended = u - trend
        ext = _subseries_smooth_extended(detrended, s, cfg.seasonal_window, excluded)
        lowpass = _moving_average(_moving_average(_moving_average(ext, s), s), 3)
        lowpass = loess_smooth(lowpass, lowpass_w)
        seasonal = _recenter_cycles(ext[s:s + n] - lowpass, s)
        trend = loess_smooth(u - seasonal, _trend_window(s, cfg), excluded=excluded)
    return seasonal


def _extract_all_seasonals(
    y: np.ndarray,
    order,
    cfg: LoessConfig,
    tol: float,
    excluded: np.ndarray | None = None,
) -> tuple[dict[str, np.ndarray], bool, int]:
    """Outer refinement loop: re-extract each seasonality against the series
    minus the others until no component moves more than ``tol``."""
    n = len(y)
    seasonals = {spec.id: np.zeros(n) for spec in order}
    converged = not order
    iterations = 0
    for _ in range(max(1, cfg.max_outer_iterations)):
        if not order:
            break
        iterations += 1
        delta = 0.0
        for spec in order:
            others = np.zeros(n)
            for other in order:
                if other.id != spec.id:
                    others += seasonals[other.id]
            new = _extract_seasonal(y - others, spec.cycle_length, cfg, excluded)
            delta = max(delta, float(np.max(np.abs(new - seasonals[spec.id]))))
            seasonals[spec.id] = new
        if delta <= tol:
            converged = True
            break
    return seasonals, converged, iterations


# ---------------------------------------------------------------------------
# Public decomposition API
# ---------------------------------------------------------------------------

def mstl(ts: TimeSeries, config: LoessConfig | None = None) -> DecompositionResult:
    """Multiple-seasonal decomposition of ``ts`` with moving-seasonality
    components extracted after the regular ones converge.

    Raises :class:`DataError` when fewer than two full cycles of any regular
    seasonality are available. A hit iteration cap is reported through
    ``converged=False`` rather than an error.
    """
    cfg = config or LoessConfig()
    y = ts.values
    n = len(y)
    for spec in ts.seasons:
        if n < 2 * spec.cycle_length:
            raise DataError(
                f"season {spec.id!r}: need >= {2 * spec.cycle_length} points "
                f"(2 cycles), series has {n}"
            )
    scale = float(np.max(np.abs(y))) if n else 0.0
    tol = cfg.convergence_tol * max(scale, 1e-300)

    order = sorted(ts.seasons, key=lambda s: s.cycle_length)
    seasonals, converged, iterations = _extract_all_seasonals(y, order, cfg, tol)
    seasonal_sum = np.zeros(n)
    for comp in seasonals.values():
        seasonal_sum += comp

    block_mask = None
    if ts.dims and any(d.occurrences for d in ts.dims):
        block_mask = np.zeros(n, dtype=bool)
        for dspec in ts.dims:
            for occ in dspec.occurrences:
                block_mask[occ:occ + dspec.length] = True
    longest = max((s.cycle_length for s in ts.seasons), default=max(3, n // 10))
    trend_window = _trend_window(longest, cfg)
    trend = loess_smooth(y - seasonal_sum, trend_window, excluded=block_mask)

    # The event residual is measured against an event-blind baseline: with
    # occurrence blocks masked out of every smoother, the regular components
    # carry no echo of the events, so the per-slot averages see the full
    # event effect. The reported trend/seasonals above stay independent of
    # the moving-seasonality registry.
    if block_mask is not None:
        masked_seasonals, _, _ = _extract_all_seasonals(y, order, cfg, tol, block_mask)
        masked_sum = np.zeros(n)
        for comp in masked_seasonals.values():
            masked_sum += comp
        masked_trend = loess_smooth(y - masked_sum, trend_window, excluded=block_mask)
        event_residual = y - masked_trend - masked_sum
    else:
        event_residual = y - trend - seasonal_sum

    dims_components: dict[str, np.ndarray] = {}
    dims_profiles: dict[str, np.ndarray] = {}
    work = event_residual.copy()
    for dspec in ts.dims:
        profile = np.zeros(dspec.length)
        component = np.zeros(n)
        if dspec.occurrences:
            blocks = np.stack([work[o:o + dspec.length] for o in dspec.occurrences])
            profile = blocks.mean(axis=0)
            for occ in dspec.occurrences:
                component[occ:occ + dspec.length] = profile
        dims_components[dspec.id] = component
        dims_profiles[dspec.id] = profile
        work = work - component

    remainder = y - trend - seasonal_sum
    for comp in dims_components.values():
        remainder = remainder - comp

    return DecompositionResult(
        series=ts,
        trend=trend,
        seasonals={spec.id: seasonals[spec.id] for spec in ts.seasons},
        dims_components=dims_components,
        dims_profiles=dims_profiles,
        remainder=remainder,
        converged=converged,
        iterations=iterations,
    )


def stl(ts: TimeSeries, season_id: str, config: LoessConfig | None = None) -> DecompositionResult:
    """Single-seasonality decomposition: the named cycle only, no moving
    seasonalities."""
    matches = [s for s in ts.seasons if s.id == season_id]
    if not matches:
        raise KeyError(f"unknown season id {season_id!r}")
    view = replace(ts, seasons=(matches[0],), dims=())
    return mstl(view, config)


# ---------------------------------------------------------------------------
# Plot-data export
# ---------------------------------------------------------------------------

def _safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label)


def _write_series_csv(path: Path, timestamps, values) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("timestamp,value\n")
        for t, v in zip(timestamps, values):
            fh.write(f"{t.isoformat()},{float(v)!r}\n")


def stlplot_export(result: DecompositionResult, out_dir) -> list[Path]:
    """Write the decomposition as plot-ready CSV panels.

    One ``timestamp,value`` file per panel (original, trend, each seasonal,
    remainder); per moving seasonality a ``slot,value`` profile file plus a
    ``start_timestamp,end_timestamp`` occurrence-location file (end
    exclusive).
    """
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    ts = result.series
    stamps = ts.timestamps
    written: list[Path] = []

    def emit(name, values):
        path = out / name
        _write_series_csv(path, stamps, values)
        written.append(path)

    emit("original.csv", ts.values)
    emit("trend.csv", result.trend)
    for season in ts.seasons:
        emit(f"seasonal_{_safe_name(season.id)}.csv", result.seasonals[season.id])
    emit("remainder.csv", result.remainder)

    for dspec in ts.dims:
        profile_path = out / f"dims_{_safe_name(dspec.id)}_profile.csv"
        with open(profile_path, "w", newline="") as fh:
            fh.write("slot,value\n")
            for q, v in enumerate(result.dims_profiles[dspec.id]):
                fh.write(f"{q},{float(v)!r}\n")
        written.append(profile_path)
        loc_path = out / f"dims_{_safe_name(dspec.id)}_locations.csv"
        with open(loc_path, "w", newline="") as fh:
            fh.write("start_timestamp,end_timestamp\n")
            for occ in dspec.occurrences:
                start = ts.timestamp_at(occ)
                end = ts.timestamp_at(occ + dspec.length)
                fh.write(f"{start.isoformat()},{end.isoformat()}\n")
        written.append(loc_path)
    return written

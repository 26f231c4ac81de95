"""Multi-seasonal time-series container and forecast accuracy metrics.

The :class:`TimeSeries` container holds an evenly spaced observation vector
together with its regular seasonal cycles, its event-window moving
seasonalities (each defined only on irregularly recurring blocks of steps),
and optional covariate columns. Containers are immutable: every mutating
operation returns a new instance, so series can be shared freely across
concurrent fitting jobs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta

import numpy as np

MODES = ("additive", "multiplicative")
SEASON_INIT_METHODS = ("ratio_to_ma", "difference_to_ma", "stl_based")
DIMS_INIT_METHODS = ("stl_based", "neutral")


class DataError(ValueError):
    """Input data violates a container or ingestion contract."""


def neutral_value(mode: str) -> float:
    """Neutral index value: 0 leaves an additive term unchanged, 1 a factor."""
    return 1.0 if mode == "multiplicative" else 0.0


@dataclass(frozen=True)
class SeasonSpec:
    """One regular seasonal cycle (e.g. 24 for an hourly daily pattern)."""

    id: str
    cycle_length: int
    mode: str = "multiplicative"
    init_method: str = "auto"

    def __post_init__(self):
        if self.cycle_length < 2:
            raise ValueError(f"season {self.id!r}: cycle_length must be >= 2")
        if self.mode not in MODES:
            raise ValueError(f"season {self.id!r}: unknown mode {self.mode!r}")
        if self.init_method == "auto":
            method = "ratio_to_ma" if self.mode == "multiplicative" else "difference_to_ma"
            object.__setattr__(self, "init_method", method)
        if self.init_method not in SEASON_INIT_METHODS:
            raise ValueError(f"season {self.id!r}: unknown init_method {self.init_method!r}")
        if self.mode == "additive" and self.init_method == "ratio_to_ma":
            raise ValueError(f"season {self.id!r}: ratio_to_ma seeds a multiplicative index")
        if self.mode == "multiplicative" and self.init_method == "difference_to_ma":
            raise ValueError(f"season {self.id!r}: difference_to_ma seeds an additive index")


@dataclass(frozen=True)
class DimsSpec:
    """A moving seasonality: fixed-length blocks at irregular start positions.

    ``occurrences`` are 0-based start indices into the series; each block
    spans ``[start, start + length)``. Blocks of one spec may not overlap,
    but blocks of different specs may (a holiday inside a festival week).
    """

    id: str
    mode: str
    length: int
    occurrences: tuple[int, ...] = ()
    init_method: str = "neutral"

    def __post_init__(self):
        object.__setattr__(self, "occurrences", tuple(int(o) for o in self.occurrences))
        if self.length < 1:
            raise ValueError(f"dims {self.id!r}: length must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"dims {self.id!r}: unknown mode {self.mode!r}")
        if self.init_method not in DIMS_INIT_METHODS:
            raise ValueError(f"dims {self.id!r}: unknown init_method {self.init_method!r}")
        for prev, cur in zip(self.occurrences, self.occurrences[1:]):
            if cur <= prev:
                raise ValueError(
                    f"dims {self.id!r}: occurrence starts must be strictly increasing "
                    f"({prev} then {cur})"
                )
            if cur < prev + self.length:
                raise ValueError(
                    f"dims {self.id!r}: occurrence block at {cur} overlaps block at {prev} "
                    f"(length {self.length})"
                )
        if self.occurrences and self.occurrences[0] < 0:
            raise ValueError(f"dims {self.id!r}: negative occurrence start {self.occurrences[0]}")


@dataclass(frozen=True, eq=False)
class DimsRecurrence:
    """Per-step activity table of one moving seasonality.

    ``active[t]`` marks steps inside an occurrence block, ``slot[t]`` is the
    within-block offset (-1 outside blocks) and ``lag[t]`` the distance to
    the same offset in the previous occurrence (0 where undefined, i.e. the
    first occurrence). The lag varies per occurrence because the events
    recur irregularly.
    """

    dims_id: str
    active: np.ndarray
    slot: np.ndarray
    lag: np.ndarray


def compute_recurrence(spec: DimsSpec, n: int) -> DimsRecurrence:
    """Build the activity/lag table for ``spec`` over a series of length ``n``."""
    active = np.zeros(n, dtype=bool)
    slot = np.full(n, -1, dtype=np.int64)
    lag = np.zeros(n, dtype=np.int64)
    prev_start = None
    for start in spec.occurrences:
        stop = start + spec.length
        if start >= n or stop > n:
            raise DataError(
                f"dims {spec.id!r}: occurrence block [{start}, {stop}) exceeds series "
                f"length {n}"
            )
        active[start:stop] = True
        slot[start:stop] = np.arange(spec.length)
        if prev_start is not None:
            lag[start:stop] = start - prev_start
        prev_start = start
    return DimsRecurrence(dims_id=spec.id, active=active, slot=slot, lag=lag)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Evenly spaced observations with seasonal structure attached.

    Covariates are stored for alignment only; the smoothing engine never
    consumes them.
    """

    values: np.ndarray
    step: timedelta = timedelta(hours=1)
    start: datetime = datetime(2000, 1, 3)
    seasons: tuple[SeasonSpec, ...] = ()
    dims: tuple[DimsSpec, ...] = ()
    covariates: dict[str, np.ndarray] = field(default_factory=dict)
    _recurrences: dict[str, DimsRecurrence] = field(
        init=False, repr=False, default_factory=dict
    )

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1).copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.step <= timedelta(0):
            raise ValueError("step must be a positive duration")
        object.__setattr__(self, "seasons", tuple(self.seasons))
        object.__setattr__(self, "dims", tuple(self.dims))
        n = len(values)
        seen_ids, seen_cycles = set(), set()
        for spec in self.seasons:
            if spec.id in seen_ids or spec.cycle_length in seen_cycles:
                raise ValueError(f"duplicate season {spec.id!r} / cycle {spec.cycle_length}")
            seen_ids.add(spec.id)
            seen_cycles.add(spec.cycle_length)
            if spec.cycle_length > n:
                raise DataError(
                    f"season {spec.id!r}: cycle {spec.cycle_length} exceeds series length {n}"
                )
        covs = {}
        for name, col in self.covariates.items():
            arr = np.asarray(col, dtype=float).reshape(-1).copy()
            if len(arr) != n:
                raise DataError(f"covariate {name!r}: length {len(arr)} != series length {n}")
            arr.setflags(write=False)
            covs[name] = arr
        object.__setattr__(self, "covariates", covs)
        recurrences = {}
        dims_ids = set()
        for spec in self.dims:
            if spec.id in dims_ids:
                raise ValueError(f"duplicate dims id {spec.id!r}")
            dims_ids.add(spec.id)
            recurrences[spec.id] = compute_recurrence(spec, n)
        object.__setattr__(self, "_recurrences", recurrences)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def timestamps(self) -> list[datetime]:
        return [self.start + i * self.step for i in range(len(self.values))]

    def timestamp_at(self, index: int) -> datetime:
        return self.start + index * self.step

    def recurrence(self, dims_id: str) -> DimsRecurrence:
        try:
            return self._recurrences[dims_id]
        except KeyError:
            raise KeyError(f"unknown dims id {dims_id!r}") from None

    def add_season(self, spec: SeasonSpec) -> TimeSeries:
        return replace(self, seasons=self.seasons + (spec,))

    def add_dims(self, spec: DimsSpec) -> TimeSeries:
        """Register a moving seasonality; the recurrence table is computed eagerly."""
        return replace(self, dims=self.dims + (spec,))

    def remove_dims(self, dims_id: str) -> TimeSeries:
        kept = tuple(d for d in self.dims if d.id != dims_id)
        if len(kept) == len(self.dims):
            raise KeyError(f"unknown dims id {dims_id!r}")
        return replace(self, dims=kept)

    def with_covariate(self, name: str, values) -> TimeSeries:
        covs = dict(self.covariates)
        covs[name] = values
        return replace(self, covariates=covs)

    def without_covariate(self, name: str) -> TimeSeries:
        covs = dict(self.covariates)
        del covs[name]
        return replace(self, covariates=covs)

    def prefix(self, n: int) -> TimeSeries:
        """First ``n`` observations; moving-seasonality blocks that are not
        wholly inside the window are dropped (never truncated)."""
        if not 0 < n <= len(self.values):
            raise ValueError(f"prefix length {n} outside 1..{len(self.values)}")
        dims = tuple(
            replace(d, occurrences=tuple(o for o in d.occurrences if o + d.length <= n))
            for d in self.dims
        )
        return replace(self, values=self.values[:n], dims=dims)


# ---------------------------------------------------------------------------
# Accuracy metrics
# ---------------------------------------------------------------------------

def _paired(actual, forecast) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(actual, dtype=float).reshape(-1)
    f = np.asarray(forecast, dtype=float).reshape(-1)
    if len(a) == 0:
        raise ValueError("empty input")
    if len(a) != len(f):
        raise ValueError(f"length mismatch: {len(a)} vs {len(f)}")
    return a, f


def rmse(actual, forecast) -> float:
    """Root mean squared error between two equally long sequences."""
    a, f = _paired(actual, forecast)
    return math.sqrt(float(np.mean((a - f) ** 2)))


def ape(actual, forecast) -> np.ndarray:
    """Per-point absolute percentage errors (in percent)."""
    a, f = _paired(actual, forecast)
    if np.any(a == 0.0):
        raise ValueError("actual contains zeros; percentage error undefined")
    return 100.0 * np.abs(a - f) / np.abs(a)


def mape(actual, forecast) -> float:
    """Mean absolute percentage error (percent). Rejects zero actuals
    rather than skipping them, so competing models stay comparable."""
    return float(np.mean(ape(actual, forecast)))


def aic(sse: float, n: int, k_params: int) -> float:
    """Gaussian-likelihood information criterion, n*ln(sse/n) + 2k.

    Only comparable between fits produced by this library.
    """
    if sse <= 0:
        raise ValueError("sse must be positive")
    if n <= 0:
        raise ValueError("n must be positive")
    return n * math.log(sse / n) + 2 * k_params

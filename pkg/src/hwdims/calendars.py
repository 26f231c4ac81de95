"""Translate an event calendar into moving-seasonality specifications.

Events carrying the same ``recurrence_group`` label share one moving
seasonality: all national holidays typically form a single group, Easter
another. Grouping is the caller's decision; nothing here tries to infer it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import date, datetime, timedelta

from .timeseries import DimsSpec, TimeSeries

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CalendarEvent:
    """One dated event occurrence (a holiday, a bridge day, an Easter week)."""

    event_id: str
    date_start: date
    span_days: int
    recurrence_group: str

    def __post_init__(self):
        if self.span_days < 1:
            raise ValueError(f"event {self.event_id!r}: span_days must be >= 1")


def build_dims(
    ts: TimeSeries,
    events: list[CalendarEvent],
    steps_per_day: int,
    mode: str | dict[str, str] = "multiplicative",
    init_method: str | dict[str, str] = "neutral",
) -> list[DimsSpec]:
    """Build one moving-seasonality spec per recurrence group.

    Block length is ``span_days * steps_per_day``. Events wholly or partially
    outside the series range are dropped with a warning, never truncated.
    ``mode`` / ``init_method`` apply to every group, or per group when given
    as a mapping.
    """
    if steps_per_day < 1:
        raise ValueError("steps_per_day must be >= 1")
    if ts.step * steps_per_day != timedelta(days=1):
        raise ValueError(
            f"steps_per_day={steps_per_day} inconsistent with series step {ts.step}"
        )
    n = len(ts)
    groups: dict[str, list[CalendarEvent]] = {}
    for ev in sorted(events, key=lambda e: (e.date_start, e.event_id)):
        groups.setdefault(ev.recurrence_group, []).append(ev)

    specs = []
    for group in sorted(groups):
        members = groups[group]
        spans = {ev.span_days for ev in members}
        if len(spans) > 1:
            raise ValueError(
                f"group {group!r}: events must share one span_days, got {sorted(spans)}"
            )
        span = spans.pop()
        length = span * steps_per_day
        occurrences = []
        for ev in members:
            start_dt = datetime.combine(ev.date_start, datetime.min.time())
            offset = start_dt - ts.start
            steps, rem = divmod(offset, ts.step)
            if rem:
                raise ValueError(
                    f"event {ev.event_id!r} at {ev.date_start}: start does not fall on a step"
                )
            if steps < 0 or steps + length > n:
                log.warning(
                    "event %r (%s, group %r) outside series range; dropped",
                    ev.event_id, ev.date_start, group,
                )
                continue
            occurrences.append(int(steps))
        try:
            spec = DimsSpec(
                id=group,
                mode=mode[group] if isinstance(mode, dict) else mode,
                length=length,
                occurrences=tuple(occurrences),
                init_method=init_method[group] if isinstance(init_method, dict) else init_method,
            )
        except ValueError as exc:
            raise ValueError(f"group {group!r}: overlapping events ({exc})") from exc
        specs.append(spec)
    return specs

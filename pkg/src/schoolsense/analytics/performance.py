from __future__ import annotations

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from datetime import date, time, timedelta
from typing import Literal

import numpy as np

from ..domain import HOUR_MS, SchoolSenseError, SiteTopology, format_instant
from .quality import DEFAULT_WINDOW_MS, fill_gaps
from .series import Series, daily_means, local_date, local_instant, resample_five_min

logger = logging.getLogger(__name__)

WEEKEND_WINDOW = (time(6, 0), time(18, 0))


class NoWeekendData(SchoolSenseError):
    pass


def parse_window(text: str) -> tuple[time, time]:
    """``"06:00-18:00"`` -> (06:00, 18:00)."""
    start, _, end = text.partition("-")
    try:
        window = time.fromisoformat(start.strip()), time.fromisoformat(end.strip())
    except ValueError:
        raise ValueError(f"window must look like 06:00-18:00: {text!r}") from None
    if window[0] >= window[1]:
        raise ValueError(f"window start must precede its end: {text!r}")
    return window


def peak_rise_rate(s: Series, span_ms: int = HOUR_MS) -> float:
    """Largest temperature increase over any interval no longer than ``span_ms``."""
    if len(s) < 2:
        return 0.0
    best = 0.0
    starts = np.searchsorted(s.times, s.times - span_ms, side="left")
    for j in range(1, len(s)):
        lo = starts[j]
        if lo < j:
            best = max(best, float(s.values[j] - s.values[lo:j].min()))
    return best


@dataclass(frozen=True)
class WeekendDay:
    room_id: str
    day: date
    rise_c: float
    peak_rate_c_per_h: float
    min_c: float
    max_c: float
    outdoor_mean_c: float | None = None

    def row(self) -> dict[str, object]:
        return {
            "room_id": self.room_id,
            "date": self.day.isoformat(),
            "rise_c": round(self.rise_c, 3),
            "peak_rate_c_per_h": round(self.peak_rate_c_per_h, 3),
            "min_c": round(self.min_c, 3),
            "max_c": round(self.max_c, 3),
            "outdoor_mean_c": self.outdoor_mean_c,
        }


@dataclass(frozen=True)
class RoomPerformance:
    room_id: str
    mean_rise_c: float
    max_rise_c: float
    weekend_days: int
    poor: bool

    def row(self) -> dict[str, object]:
        return {
            "room_id": self.room_id,
            "mean_rise_c": round(self.mean_rise_c, 3),
            "max_rise_c": round(self.max_rise_c, 3),
            "weekend_days": self.weekend_days,
            "poor": self.poor,
        }


@dataclass
class PerformanceReport:
    site_id: str
    days: list[WeekendDay] = field(default_factory=list)
    # highest mean rise first
    ranking: list[RoomPerformance] = field(default_factory=list)

    @property
    def poor_performers(self) -> list[str]:
        return [r.room_id for r in self.ranking if r.poor]


def weekend_performance(
    rooms: Mapping[str, Series],
    site: SiteTopology,
    outdoor: Series | None = None,
    first: date | None = None,
    last: date | None = None,
    window: tuple[time, time] = WEEKEND_WINDOW,
    poor_rise_c: float = 8.0,
    gapfill_window_ms: int = DEFAULT_WINDOW_MS,
) -> PerformanceReport:
    """Daily temperature rise of unoccupied classrooms on weekend days.

    Each room series is averaged into five-minute slots and gap-filled before the rise
    (max - min inside the local window) and the peak one-hour rise are measured. Rooms
    whose mean daily rise exceeds ``poor_rise_c`` are flagged.
    """
    tz = site.timezone
    outdoor_daily = daily_means(outdoor, tz) if outdoor is not None else {}
    report = PerformanceReport(site.site_id)
    per_room: dict[str, list[float]] = {}
    for room_id, raw in sorted(rooms.items()):
        if raw.is_empty:
            continue
        filled = fill_gaps(resample_five_min(raw), gapfill_window_ms)
        day = first or local_date(int(filled.times[0]), tz)
        end_day = last or local_date(int(filled.times[-1]), tz)
        while day <= end_day:
            if day.weekday() >= 5:
                part = filled.between(
                    local_instant(day, window[0], tz), local_instant(day, window[1], tz)
                )
                if len(part):
                    lo, hi = float(part.values.min()), float(part.values.max())
                    report.days.append(
                        WeekendDay(
                            room_id,
                            day,
                            hi - lo,
                            peak_rise_rate(part),
                            lo,
                            hi,
                            outdoor_daily.get(day),
                        )
                    )
                    per_room.setdefault(room_id, []).append(hi - lo)
            day += timedelta(days=1)
    if not per_room:
        raise NoWeekendData(f"site {site.site_id}: no weekend data in period")
    for room_id, rises in per_room.items():
        mean_rise = math.fsum(rises) / len(rises)
        report.ranking.append(
            RoomPerformance(room_id, mean_rise, max(rises), len(rises), mean_rise > poor_rise_c)
        )
    report.ranking.sort(key=lambda r: (-r.mean_rise_c, r.room_id))
    logger.info(
        "weekend performance site=%s rooms=%d poor=%s",
        site.site_id,
        len(report.ranking),
        ",".join(report.poor_performers) or "-",
    )
    return report


@dataclass(frozen=True)
class ThermalEvent:
    time: int
    direction: Literal["rise", "drop"]
    magnitude: float

    def row(self) -> dict[str, object]:
        return {
            "time": format_instant(self.time),
            "direction": self.direction,
            "magnitude": round(self.magnitude, 3),
        }


@dataclass
class _Detection:
    start: int
    end: int
    direction: Literal["rise", "drop"]
    magnitude: float


def _steepest(s: Series, start: int, end: int, direction: str) -> int:
    """Time of the steepest single step inside [start, end] in the event's direction."""
    lo, hi = np.searchsorted(s.times, [start, end], side="left")
    hi = min(hi + 1, len(s))
    if hi - lo < 2:
        return int(s.times[lo])
    dt = np.diff(s.times[lo:hi]).astype(float)
    rate = np.diff(s.values[lo:hi]) / dt
    k = int(np.argmin(rate) if direction == "drop" else np.argmax(rate))
    return int(s.times[lo + k + 1])


def detect_events(s: Series, threshold_c: float = 2.0, span_min: int = 15) -> list[ThermalEvent]:
    """Sudden changes of at least ``threshold_c`` within ``span_min`` minutes.

    Overlapping detections of the same direction merge into one event, reported at the
    steepest step with the largest magnitude seen.
    """
    if threshold_c <= 0 or span_min <= 0:
        raise ValueError("threshold and span must be positive")
    if len(s) < 2:
        return []
    span_ms = span_min * 60_000
    times, values = s.times, s.values
    starts = np.searchsorted(times, times - span_ms, side="left")
    detections: list[_Detection] = []
    for j in range(1, len(s)):
        lo = starts[j]
        if lo >= j:
            continue
        window = values[lo:j]
        i_max = lo + int(np.argmax(window))
        i_min = lo + int(np.argmin(window))
        drop = values[i_max] - values[j]
        rise = values[j] - values[i_min]
        if drop >= threshold_c:
            detections.append(_Detection(int(times[i_max]), int(times[j]), "drop", float(drop)))
        if rise >= threshold_c:
            detections.append(_Detection(int(times[i_min]), int(times[j]), "rise", float(rise)))
    merged: list[_Detection] = []
    for d in detections:
        prev = next((m for m in reversed(merged) if m.direction == d.direction), None)
        if prev is not None and d.start <= prev.end:
            prev.start = min(prev.start, d.start)
            prev.end = max(prev.end, d.end)
            prev.magnitude = max(prev.magnitude, d.magnitude)
        else:
            merged.append(d)
    return [
        ThermalEvent(_steepest(s, m.start, m.end, m.direction), m.direction, m.magnitude)
        for m in merged
    ]


def temperature_histogram(
    s: Series, bins: int | list[float] = 20, value_range: tuple[float, float] | None = None
) -> list[dict[str, float]]:
    counts, edges = np.histogram(s.values, bins=bins, range=value_range)
    return [
        {"lower": float(edges[i]), "upper": float(edges[i + 1]), "count": int(counts[i])}
        for i in range(counts.size)
    ]


def _hourly(s: Series | None) -> dict[int, float]:
    if s is None or s.is_empty:
        return {}
    hours = s.times - s.times % HOUR_MS
    starts, inverse = np.unique(hours, return_inverse=True)
    means = np.bincount(inverse, weights=s.values) / np.bincount(inverse)
    return dict(zip(starts.tolist(), means.tolist()))


def weather_joined_rows(
    rooms: Mapping[str, Series],
    site: SiteTopology,
    outdoor: Series | None,
    cloud: Series | None = None,
) -> list[dict[str, object]]:
    """Hourly indoor means joined with outdoor temperature and cloud coverage per room."""
    orientation = {room.room_id: room.orientation.value for room in site.rooms}
    out_hourly = _hourly(outdoor)
    cloud_hourly = _hourly(cloud)
    rows = []
    for room_id, s in sorted(rooms.items()):
        for hour, indoor in sorted(_hourly(s).items()):
            rows.append(
                {
                    "site_id": site.site_id,
                    "room_id": room_id,
                    "orientation": orientation.get(room_id, ""),
                    "hour": format_instant(hour),
                    "indoor_c": indoor,
                    "outdoor_c": out_hourly.get(hour),
                    "cloud_coverage": cloud_hourly.get(hour),
                }
            )
    return rows


@dataclass(frozen=True)
class ActivityPair:
    weekday: date
    weekend_day: date
    outdoor_weekday_c: float
    outdoor_weekend_c: float
    indoor_weekday_c: float
    indoor_weekend_c: float

    @property
    def difference_c(self) -> float:
        return self.indoor_weekday_c - self.indoor_weekend_c

    def row(self) -> dict[str, object]:
        return {
            "weekday": self.weekday.isoformat(),
            "weekend_day": self.weekend_day.isoformat(),
            "outdoor_weekday_c": round(self.outdoor_weekday_c, 3),
            "outdoor_weekend_c": round(self.outdoor_weekend_c, 3),
            "indoor_weekday_c": round(self.indoor_weekday_c, 3),
            "indoor_weekend_c": round(self.indoor_weekend_c, 3),
            "difference_c": round(self.difference_c, 3),
        }


def activity_comparison(
    room: Series,
    outdoor_daily: Mapping[date, float],
    site: SiteTopology,
    tolerance_c: float = 1.0,
) -> list[ActivityPair]:
    """Pair each school day with the weekend day of the closest outdoor mean.

    Only pairs whose outdoor means differ by at most ``tolerance_c`` are kept; indoor means
    are taken over the site's school hours on both days.
    """
    opening, closing = site.school_hours

    def daytime_mean(day: date) -> float | None:
        part = room.between(
            local_instant(day, opening, site.timezone), local_instant(day, closing, site.timezone)
        )
        return float(part.values.mean()) if len(part) else None

    indoor = {d: daytime_mean(d) for d in outdoor_daily}
    weekends = [d for d in sorted(outdoor_daily) if d.weekday() >= 5 and indoor[d] is not None]
    pairs = []
    for day in sorted(outdoor_daily):
        if day.weekday() >= 5 or indoor[day] is None or not weekends:
            continue
        match = min(weekends, key=lambda w: (abs(outdoor_daily[w] - outdoor_daily[day]), w))
        if abs(outdoor_daily[match] - outdoor_daily[day]) > tolerance_c:
            continue
        pairs.append(
            ActivityPair(
                day,
                match,
                outdoor_daily[day],
                outdoor_daily[match],
                indoor[day],  # type: ignore[arg-type]
                indoor[match],  # type: ignore[arg-type]
            )
        )
    return pairs

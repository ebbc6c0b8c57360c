from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from ..domain import HOUR_MS, SchoolSenseError, SiteTopology
from .quality import NoData
from .series import Series, daily_means, local_day_bounds, local_instant

logger = logging.getLogger(__name__)

APPLICABLE_RANGE_C = (10.0, 33.5)
BAND_HALF_WIDTH_C = {80: 3.5, 90: 2.5}
# (minimum air speed m/s, upper-limit extension °C), strongest first
AIR_SPEED_EXTENSION = ((1.2, 2.2), (0.9, 1.8), (0.6, 1.2))
PREVAILING_DAYS = 7


class NoEvaluableHours(SchoolSenseError):
    pass


@dataclass(frozen=True)
class ComfortBand:
    comfort_c: float
    lower_c: float
    upper_c: float
    applicable: bool

    def contains(self, t: float) -> bool:
        return self.lower_c <= t <= self.upper_c


def comfort_band(
    prevailing_mean_out: float, wind: float = 0.0, acceptability: int = 80
) -> ComfortBand:
    """Adaptive comfort band for a prevailing mean outdoor temperature (°C).

    Air speed (m/s) at or above 0.6 extends the upper limit only.
    """
    try:
        half = BAND_HALF_WIDTH_C[acceptability]
    except KeyError:
        raise ValueError(f"acceptability must be 80 or 90, got {acceptability}") from None
    comfort = 0.31 * prevailing_mean_out + 17.8
    upper = comfort + half
    for speed, extension in AIR_SPEED_EXTENSION:
        if wind >= speed:
            upper += extension
            break
    lo, hi = APPLICABLE_RANGE_C
    return ComfortBand(comfort, comfort - half, upper, lo <= prevailing_mean_out <= hi)


def prevailing_mean(outdoor_daily: Mapping[date, float], day: date) -> float | None:
    """Mean of the previous seven daily means; the same day's mean when any is missing.

    Falls back to whatever earlier days exist when the day itself has no mean either.
    """
    previous = [
        outdoor_daily[d]
        for d in (day - timedelta(days=k) for k in range(1, PREVAILING_DAYS + 1))
        if d in outdoor_daily
    ]
    if len(previous) == PREVAILING_DAYS:
        return math.fsum(previous) / PREVAILING_DAYS
    if day in outdoor_daily:
        return outdoor_daily[day]
    if previous:
        return math.fsum(previous) / len(previous)
    return None


@dataclass(frozen=True)
class DailyComfort:
    site_id: str
    room_id: str
    day: date
    score: float
    hours_evaluated: int
    comfortable_hours: int

    def row(self) -> dict[str, object]:
        return {
            "site_id": self.site_id,
            "room_id": self.room_id,
            "date": self.day.isoformat(),
            "score": self.score,
            "hours_evaluated": self.hours_evaluated,
            "comfortable_hours": self.comfortable_hours,
        }


def school_hour_slots(site: SiteTopology, day: date) -> list[tuple[int, int]]:
    """Consecutive one-hour [start, end) UTC ms slots covering the site's school hours."""
    opening, closing = site.school_hours
    start = local_instant(day, opening, site.timezone)
    end = local_instant(day, closing, site.timezone)
    slots = []
    while start + HOUR_MS <= end:
        slots.append((start, start + HOUR_MS))
        start += HOUR_MS
    return slots


def _as_daily(outdoor: Mapping[date, float] | Series, tz: str) -> Mapping[date, float]:
    return daily_means(outdoor, tz) if isinstance(outdoor, Series) else outdoor


def _day_mean(s: Series | None, day: date, tz: str) -> float | None:
    if s is None or s.is_empty:
        return None
    bounds = local_day_bounds(day, day, tz)
    part = s.between(int(bounds[0]), int(bounds[1]))
    return float(part.values.mean()) if len(part) else None


def _hour_mean(s: Series | None, start: int, end: int, default: float) -> float:
    if s is None:
        return default
    part = s.between(start, end)
    return float(part.values.mean()) if len(part) else default


def daily_comfort(
    indoor: Series,
    outdoor: Mapping[date, float] | Series,
    wind: Series | None,
    day: date,
    site: SiteTopology,
    room_id: str = "",
    acceptability: int = 80,
) -> DailyComfort:
    """Fraction of evaluated school hours whose mean indoor temperature is in the band.

    The band uses the day's prevailing mean outdoor temperature and each hour's mean wind
    speed; hours without wind samples fall back to the day's mean wind. Hours without indoor
    data, or days whose band is inapplicable, are not evaluated.
    """
    daily_out = _as_daily(outdoor, site.timezone)
    pm = prevailing_mean(daily_out, day)
    evaluated = comfortable = 0
    if pm is not None and comfort_band(pm, 0.0, acceptability).applicable:
        day_wind = _day_mean(wind, day, site.timezone) or 0.0
        for start, end in school_hour_slots(site, day):
            hour = indoor.between(start, end)
            if hour.is_empty:
                continue
            band = comfort_band(pm, _hour_mean(wind, start, end, day_wind), acceptability)
            evaluated += 1
            if band.contains(float(hour.values.mean())):
                comfortable += 1
    if evaluated == 0:
        room = room_id or indoor.resource_id
        raise NoEvaluableHours(f"room {room} on {day}: no evaluable hours")
    return DailyComfort(
        site.site_id, room_id, day, comfortable / evaluated, evaluated, comfortable
    )


@dataclass
class SiteComfort:
    site_id: str
    scores: dict[tuple[str, date], DailyComfort] = field(default_factory=dict)
    flagged: list[DailyComfort] = field(default_factory=list)

    @property
    def site_mean(self) -> float:
        values = [c.score for c in self.scores.values()]
        return float(np.mean(values)) if values else math.nan

    def rows(self) -> list[dict[str, object]]:
        floor_flags = {(c.room_id, c.day) for c in self.flagged}
        return [
            {**c.row(), "flagged": (room, day) in floor_flags}
            for (room, day), c in sorted(self.scores.items())
        ]


def site_comfort(
    site: SiteTopology,
    indoor_by_room: Mapping[str, Series],
    outdoor: Series | Mapping[date, float],
    wind: Series | None,
    days: Iterable[date],
    acceptability: int = 80,
    floor: float | None = None,
) -> SiteComfort:
    """Room x day comfort matrix for one site; room-days scoring below ``floor`` are flagged."""
    daily_out = _as_daily(outdoor, site.timezone)
    result = SiteComfort(site.site_id)
    for day in days:
        for room_id, indoor in sorted(indoor_by_room.items()):
            try:
                dc = daily_comfort(indoor, daily_out, wind, day, site, room_id, acceptability)
            except NoEvaluableHours:
                continue
            result.scores[(room_id, day)] = dc
            if floor is not None and dc.score < floor:
                result.flagged.append(dc)
    if not result.scores:
        raise NoData(f"site {site.site_id}: no room-day could be evaluated")
    logger.info(
        "site comfort site=%s room_days=%d mean=%.3f flagged=%d",
        site.site_id,
        len(result.scores),
        result.site_mean,
        len(result.flagged),
    )
    return result


def school_days(first: date, last: date) -> list[date]:
    return [
        first + timedelta(days=i)
        for i in range((last - first).days + 1)
        if (first + timedelta(days=i)).weekday() < 5
    ]

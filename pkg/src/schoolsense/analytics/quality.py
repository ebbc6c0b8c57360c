from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Literal
from zoneinfo import ZoneInfo

import numpy as np

from ..domain import FIVE_MIN_MS, HOUR_MS, SchoolSenseError, SiteTopology
from ..storage import RawLog
from ..topology import Topology
from .series import EmptySeries, Series, local_day_bounds

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_MS = 24 * HOUR_MS
IQR_FACTOR = 3.0


class NoData(SchoolSenseError):
    pass


@dataclass(frozen=True)
class OutlierFlag:
    index: int
    timestamp: int
    original: float
    replacement: float
    fence: Literal["lower", "upper"]


def fences(window: np.ndarray) -> tuple[float, float]:
    """[Q1 - 3 IQR, Q3 + 3 IQR] with linearly interpolated quartiles."""
    q1, q3 = np.quantile(window, [0.25, 0.75])
    iqr = q3 - q1
    return float(q1 - IQR_FACTOR * iqr), float(q3 + IQR_FACTOR * iqr)


def detect_outliers(
    s: Series, window_ms: int = DEFAULT_WINDOW_MS
) -> tuple[Series, list[OutlierFlag]]:
    """Flag points outside the IQR fences of their trailing window and replace them.

    The window of a point at t holds the raw values in [t - window_ms, t). Points in the
    first window span of the series have too little history and are never flagged. Low
    outliers take the smallest in-fence window value, high outliers the largest.
    """
    if window_ms <= 0:
        raise ValueError("window must be positive")
    s.require()
    times, raw = s.times, s.values
    clean = raw.copy()
    flags: list[OutlierFlag] = []
    warmup_end = times[0] + window_ms
    starts = np.searchsorted(times, times - window_ms, side="left")
    for i in range(int(np.searchsorted(times, warmup_end, side="left")), times.size):
        window = raw[starts[i] : i]
        if window.size == 0:
            continue
        lower, upper = fences(window)
        v = raw[i]
        if lower <= v <= upper:
            continue
        inside = window[(window >= lower) & (window <= upper)]
        if v < lower:
            replacement = float(inside.min()) if inside.size else lower
            fence: Literal["lower", "upper"] = "lower"
        else:
            replacement = float(inside.max()) if inside.size else upper
            fence = "upper"
        clean[i] = replacement
        flags.append(OutlierFlag(i, int(times[i]), float(v), replacement, fence))
    return Series(s.resource_id, times, clean, s.unit), flags


def fill_gaps(
    s: Series,
    window_ms: int = DEFAULT_WINDOW_MS,
    start: int | None = None,
    end: int | None = None,
) -> Series:
    """Fill every empty five-minute slot in [start, end] from the centered window mean.

    When the window around a missing slot holds no measured value the last known value is
    carried forward (or, before the first value, the first value carried back).
    """
    s.require()
    if np.any(s.times % FIVE_MIN_MS):
        raise ValueError(f"series {s.resource_id} is not on the five-minute grid")
    first = int(s.times[0]) if start is None else start - start % FIVE_MIN_MS
    last = int(s.times[-1]) if end is None else end - end % FIVE_MIN_MS
    grid = np.arange(first, last + FIVE_MIN_MS, FIVE_MIN_MS, dtype=np.int64)
    pos = np.searchsorted(s.times, grid, side="left")
    present = (pos < s.times.size) & (s.times[np.minimum(pos, s.times.size - 1)] == grid)
    out = np.empty(grid.size, dtype=float)
    out[present] = s.values[pos[present]]
    missing = np.flatnonzero(~present)
    if missing.size:
        prefix = np.concatenate(([0.0], np.cumsum(s.values)))
        half = window_ms / 2
        lo = np.searchsorted(s.times, grid[missing] - half, side="left")
        hi = np.searchsorted(s.times, grid[missing] + half, side="right")
        for k, slot in enumerate(missing):
            n = hi[k] - lo[k]
            if n > 0:
                out[slot] = (prefix[hi[k]] - prefix[lo[k]]) / n
            elif pos[slot] > 0:
                out[slot] = s.values[pos[slot] - 1]
            else:
                out[slot] = s.values[0]
    return Series(s.resource_id, grid, out, s.unit, synthetic=~present)


@dataclass
class SiteQuality:
    site_id: str
    name: str
    pos: int
    sensors: int
    start: date
    outage_pct: float
    outlier_pct: float
    measurements: int

    def row(self) -> dict[str, object]:
        return {
            "Site": self.name,
            "POS": self.pos,
            "Sensors": self.sensors,
            "Start time": self.start.isoformat(),
            "Outages": round(self.outage_pct, 2),
            "Outliers": round(self.outlier_pct, 2),
            "Measurements": self.measurements,
        }


@dataclass
class KindQuality:
    kind: str
    pos: int
    sensors: int
    inactive_pct: float
    outlier_pct: float

    def row(self) -> dict[str, object]:
        return {
            "Name": self.kind,
            "POS": self.pos,
            "Sensors": self.sensors,
            "Inactive": round(self.inactive_pct, 2),
            "Outlier": round(self.outlier_pct, 2),
        }


@dataclass(frozen=True)
class SensorAvailability:
    site_id: str
    resource_id: str
    kind: str
    days: tuple[date, ...]
    present: tuple[bool, ...]
    points: int
    outliers: int

    @property
    def missing_days(self) -> list[date]:
        return [d for d, ok in zip(self.days, self.present) if not ok]


@dataclass
class QualityReport:
    sites: list[SiteQuality] = field(default_factory=list)
    kinds: list[KindQuality] = field(default_factory=list)
    sensors: list[SensorAvailability] = field(default_factory=list)

    def site_rows(self) -> list[dict[str, object]]:
        return [s.row() for s in self.sites]

    def kind_rows(self) -> list[dict[str, object]]:
        return [k.row() for k in self.kinds]

    def matrix_rows(self) -> list[dict[str, object]]:
        """One row per (sensor, local day): present or missing."""
        return [
            {
                "site_id": a.site_id,
                "resource_id": a.resource_id,
                "date": d.isoformat(),
                "status": "present" if ok else "missing",
            }
            for a in self.sensors
            for d, ok in zip(a.days, a.present)
        ]

    def loss_calendar(self) -> dict[str, set[date]]:
        return {a.resource_id: set(a.missing_days) for a in self.sensors if a.missing_days}


def _pct(part: int, whole: int) -> float:
    return 100.0 * part / whole if whole else 0.0


def _pos_keys(site: SiteTopology) -> dict[str, str]:
    """Point of sensing of each resource: its room, else its device."""
    keys = {}
    for room in site.rooms:
        for res in room.resources:
            keys[res.resource_id] = f"room:{room.room_id}"
    for res in site.resources:
        keys[res.resource_id] = f"device:{res.device}"
    return keys


def site_availability(
    site: SiteTopology,
    raw_log: RawLog,
    first: date | None = None,
    last: date | None = None,
    window_ms: int = DEFAULT_WINDOW_MS,
) -> list[SensorAvailability]:
    zone = ZoneInfo(site.timezone)
    first_day = max(site.incorporated, first) if first else site.incorporated
    last_day = last or date.today()
    if last_day < first_day:
        return []
    bounds = local_day_bounds(first_day, last_day, zone)
    days = tuple(first_day + timedelta(days=i) for i in range(bounds.size - 1))
    out = []
    for res in site.all_resources():
        readings = raw_log.get_raw(res.resource_id, int(bounds[0]), int(bounds[-1]))
        series = Series.from_readings(readings, res.resource_id, res.units)
        counts = np.bincount(
            np.searchsorted(bounds, series.times, side="right") - 1, minlength=len(days)
        )
        outliers = len(detect_outliers(series, window_ms)[1]) if len(series) else 0
        out.append(
            SensorAvailability(
                site_id=site.site_id,
                resource_id=res.resource_id,
                kind=res.kind.value,
                days=days,
                present=tuple(bool(c > 0) for c in counts[: len(days)]),
                points=len(series),
                outliers=outliers,
            )
        )
    return out


def availability_report(
    topology: Topology,
    raw_log: RawLog,
    first: date | None = None,
    last: date | None = None,
    window_ms: int = DEFAULT_WINDOW_MS,
) -> QualityReport:
    """Outage and outlier percentages per site and per sensor kind.

    A sensor-day (site-local calendar day from incorporation, or ``first`` if later, through
    ``last``) is an outage when no reading was stored for it.
    """
    report = QualityReport()
    kind_pos: dict[str, set[str]] = defaultdict(set)
    kind_stats: dict[str, list[int]] = defaultdict(lambda: [0, 0, 0, 0, 0])
    for site in topology.sites:
        sensors = site_availability(site, raw_log, first, last, window_ms)
        if not sensors:
            continue
        pos_of = _pos_keys(site)
        sensor_days = sum(len(a.days) for a in sensors)
        outage_days = sum(len(a.missing_days) for a in sensors)
        points = sum(a.points for a in sensors)
        flagged = sum(a.outliers for a in sensors)
        report.sensors.extend(sensors)
        report.sites.append(
            SiteQuality(
                site_id=site.site_id,
                name=site.name,
                pos=len({pos_of[a.resource_id] for a in sensors}),
                sensors=len(sensors),
                start=site.incorporated,
                outage_pct=_pct(outage_days, sensor_days),
                outlier_pct=_pct(flagged, points),
                measurements=points,
            )
        )
        for a in sensors:
            kind_pos[a.kind].add(f"{site.site_id}/{pos_of[a.resource_id]}")
            stats = kind_stats[a.kind]
            stats[0] += 1
            stats[1] += len(a.days)
            stats[2] += len(a.missing_days)
            stats[3] += a.points
            stats[4] += a.outliers
    if not report.sensors:
        raise NoData("no sensor-days in the requested period")
    for kind in sorted(kind_stats):
        n, days, missing, points, flagged = kind_stats[kind]
        report.kinds.append(
            KindQuality(kind, len(kind_pos[kind]), n, _pct(missing, days), _pct(flagged, points))
        )
    logger.info(
        "availability report sites=%d sensors=%d", len(report.sites), len(report.sensors)
    )
    return report


def outlier_report(s: Series, window_ms: int = DEFAULT_WINDOW_MS) -> list[dict[str, object]]:
    try:
        _, flags = detect_outliers(s, window_ms)
    except EmptySeries:
        return []
    return [
        {
            "resource_id": s.resource_id,
            "index": f.index,
            "timestamp": f.timestamp,
            "original": f.original,
            "replacement": f.replacement,
            "fence": f.fence,
        }
        for f in flags
    ]

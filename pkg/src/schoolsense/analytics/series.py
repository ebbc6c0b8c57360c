from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from zoneinfo import ZoneInfo

import numpy as np

from ..domain import FIVE_MIN_MS, IntervalSummary, Reading, SchoolSenseError, to_epoch_ms


class EmptySeries(SchoolSenseError):
    pass


@dataclass(frozen=True, eq=False)
class Series:
    """Time-ordered values of one resource; times are UTC epoch ms, strictly increasing."""

    resource_id: str
    times: np.ndarray
    values: np.ndarray
    unit: str = ""
    # True where a value was filled in rather than measured
    synthetic: np.ndarray | None = None

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError(f"times of {self.resource_id} must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"values of {self.resource_id} must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if self.synthetic is not None:
            object.__setattr__(self, "synthetic", np.asarray(self.synthetic, dtype=bool))

    @classmethod
    def from_pairs(
        cls, resource_id: str, pairs: Iterable[tuple[int, float]], unit: str = ""
    ) -> Series:
        items = list(pairs)
        times = np.array([t for t, _ in items], dtype=np.int64)
        values = np.array([v for _, v in items], dtype=float)
        return cls(resource_id, times, values, unit)

    @classmethod
    def from_readings(
        cls, readings: Sequence[Reading], resource_id: str | None = None, unit: str = ""
    ) -> Series:
        """Series of raw readings; of several readings sharing a timestamp the first wins."""
        rid = resource_id or (readings[0].resource_id if readings else "")
        if not readings:
            return cls(rid, np.array([], dtype=np.int64), np.array([], dtype=float), unit)
        times = np.array([r.timestamp for r in readings], dtype=np.int64)
        values = np.array([r.value for r in readings], dtype=float)
        order = np.argsort(times, kind="stable")
        times, values = times[order], values[order]
        uniq, first = np.unique(times, return_index=True)
        return cls(rid, uniq, values[first], unit)

    @classmethod
    def from_summaries(cls, summaries: Sequence[IntervalSummary], unit: str = "") -> Series:
        rid = summaries[0].resource_id if summaries else ""
        ordered = sorted(summaries, key=lambda s: s.interval.start)
        return cls.from_pairs(rid, ((s.interval.start, s.avg) for s in ordered), unit)

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def is_empty(self) -> bool:
        return self.times.size == 0

    def require(self) -> Series:
        if self.is_empty:
            raise EmptySeries(f"series {self.resource_id} is empty")
        return self

    def between(self, t0: int, t1: int) -> Series:
        """Points with t0 <= time < t1."""
        lo, hi = np.searchsorted(self.times, [t0, t1], side="left")
        synthetic = self.synthetic[lo:hi] if self.synthetic is not None else None
        return Series(
            self.resource_id, self.times[lo:hi], self.values[lo:hi], self.unit, synthetic
        )

    def pairs(self) -> list[tuple[int, float]]:
        return list(zip(self.times.tolist(), self.values.tolist()))


def resample_five_min(s: Series) -> Series:
    """Mean value per UTC-aligned five-minute slot, stamped at the slot start."""
    if s.is_empty:
        return s
    slots = s.times - s.times % FIVE_MIN_MS
    starts, inverse = np.unique(slots, return_inverse=True)
    sums = np.bincount(inverse, weights=s.values)
    counts = np.bincount(inverse)
    return Series(s.resource_id, starts, sums / counts, s.unit)


def local_day_bounds(first: date, last: date, tz: str | ZoneInfo) -> np.ndarray:
    """UTC ms of local midnights from ``first`` through the day after ``last``."""
    zone = ZoneInfo(tz) if isinstance(tz, str) else tz
    days = (last - first).days + 2
    return np.array(
        [
            to_epoch_ms(datetime.combine(first + timedelta(days=i), time(), tzinfo=zone))
            for i in range(days)
        ],
        dtype=np.int64,
    )


def local_instant(day: date, clock: time, tz: str | ZoneInfo) -> int:
    zone = ZoneInfo(tz) if isinstance(tz, str) else tz
    return to_epoch_ms(datetime.combine(day, clock, tzinfo=zone))


def local_date(ts_ms: int, tz: str | ZoneInfo) -> date:
    zone = ZoneInfo(tz) if isinstance(tz, str) else tz
    return datetime.fromtimestamp(ts_ms / 1000, tz=zone).date()


def daily_means(s: Series, tz: str | ZoneInfo) -> dict[date, float]:
    """Mean value per site-local calendar day."""
    if s.is_empty:
        return {}
    first = local_date(int(s.times[0]), tz)
    last = local_date(int(s.times[-1]), tz)
    bounds = local_day_bounds(first, last, tz)
    idx = np.searchsorted(bounds, s.times, side="right") - 1
    sums = np.bincount(idx, weights=s.values, minlength=bounds.size - 1)
    counts = np.bincount(idx, minlength=bounds.size - 1)
    return {
        first + timedelta(days=i): float(sums[i] / counts[i])
        for i in range(bounds.size - 1)
        if counts[i] > 0
    }

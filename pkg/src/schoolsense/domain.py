from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date, datetime, time, timezone
from enum import Enum, IntEnum

FIVE_MIN_MS = 5 * 60 * 1000
HOUR_MS = 60 * 60 * 1000
DAY_MS = 24 * HOUR_MS


class SchoolSenseError(Exception):
    """Root of every domain error raised by schoolsense modules."""

    @property
    def code(self) -> str:
        return type(self).__name__


class InvalidReading(SchoolSenseError):
    pass


class InvalidConfig(SchoolSenseError):
    pass


class Granularity(IntEnum):
    FIVE_MIN = 0
    HOUR = 1
    DAY = 2
    MONTH = 3
    YEAR = 4

    @property
    def label(self) -> str:
        return _LABELS[self]

    @property
    def parent(self) -> Granularity | None:
        if self is Granularity.YEAR:
            return None
        return Granularity(self + 1)

    @classmethod
    def from_label(cls, value: str) -> Granularity:
        token = value.strip().lower()
        for g, label in _LABELS.items():
            if token in (label, g.name.lower()):
                return g
        raise ValueError(f"unknown granularity: {value!r}")


_LABELS = {
    Granularity.FIVE_MIN: "5min",
    Granularity.HOUR: "hour",
    Granularity.DAY: "day",
    Granularity.MONTH: "month",
    Granularity.YEAR: "year",
}

_FIXED_WIDTH_MS = {
    Granularity.FIVE_MIN: FIVE_MIN_MS,
    Granularity.HOUR: HOUR_MS,
    Granularity.DAY: DAY_MS,
}


class SensorKind(str, Enum):
    ENVIRONMENTAL = "environmental"
    ATMOSPHERIC = "atmospheric"
    WEATHER = "weather"
    POWER = "power"


class Orientation(str, Enum):
    N = "N"
    NE = "NE"
    E = "E"
    SE = "SE"
    S = "S"
    SW = "SW"
    W = "W"
    NW = "NW"


@dataclass(frozen=True, slots=True)
class Reading:
    """One timestamped measurement (value, UTC epoch ms) of one sensor of one device."""

    resource_id: str
    device: str
    sensor: str
    value: float
    timestamp: int

    def __post_init__(self) -> None:
        if self.timestamp <= 0:
            raise InvalidReading(f"timestamp must be positive: {self.timestamp}")
        if not math.isfinite(self.value):
            raise InvalidReading(f"value must be finite: {self.value}")


@dataclass(frozen=True, slots=True)
class ResourceDescriptor:
    resource_id: str
    device: str
    sensor: str
    kind: SensorKind
    units: str = ""
    reporting_period: int = 30
    site_id: str = ""
    room_id: str | None = None
    nominal_voltage: float | None = None

    def __post_init__(self) -> None:
        if self.reporting_period <= 0:
            raise ValueError(f"reporting_period must be positive for {self.resource_id}")
        if not isinstance(self.kind, SensorKind):
            object.__setattr__(self, "kind", SensorKind(self.kind))


@dataclass(frozen=True, slots=True, order=True)
class IntervalKey:
    granularity: Granularity
    start: int

    @property
    def end(self) -> int:
        return interval_end(self.granularity, self.start)

    @property
    def width_ms(self) -> int:
        return self.end - self.start


@dataclass(frozen=True, slots=True)
class IntervalSummary:
    resource_id: str
    interval: IntervalKey
    avg: float
    min: float
    max: float
    count: int
    energy_wh: float | None = None
    total: float | None = None

    @property
    def granularity(self) -> Granularity:
        return self.interval.granularity

    @property
    def start(self) -> int:
        return self.interval.start

    def as_dict(self) -> dict[str, object]:
        return {
            "resource_id": self.resource_id,
            "granularity": self.interval.granularity.label,
            "start": self.interval.start,
            "end": self.interval.end,
            "avg": self.avg,
            "min": self.min,
            "max": self.max,
            "count": self.count,
            "energy_wh": self.energy_wh,
            "total": self.total,
        }


@dataclass(frozen=True, slots=True)
class Room:
    room_id: str
    orientation: Orientation
    resources: tuple[ResourceDescriptor, ...] = ()


@dataclass(frozen=True, slots=True)
class SiteTopology:
    site_id: str
    name: str
    timezone: str
    incorporated: date
    school_hours: tuple[time, time] = (time(8, 30), time(16, 30))
    rooms: tuple[Room, ...] = ()
    # Points of sensing outside classrooms (rooftop weather station, breaker box).
    resources: tuple[ResourceDescriptor, ...] = field(default=())

    def all_resources(self) -> list[ResourceDescriptor]:
        out = list(self.resources)
        for room in self.rooms:
            out.extend(room.resources)
        return out

    def room(self, room_id: str) -> Room:
        for room in self.rooms:
            if room.room_id == room_id:
                return room
        raise KeyError(room_id)


def _utc(ts_ms: int) -> datetime:
    return datetime.fromtimestamp(ts_ms / 1000, tz=timezone.utc)


def _epoch_ms(dt: datetime) -> int:
    return int(dt.timestamp()) * 1000


def interval_end(g: Granularity, start: int) -> int:
    if g in _FIXED_WIDTH_MS:
        return start + _FIXED_WIDTH_MS[g]
    dt = _utc(start)
    if g is Granularity.MONTH:
        if dt.month == 12:
            return _epoch_ms(dt.replace(year=dt.year + 1, month=1))
        return _epoch_ms(dt.replace(month=dt.month + 1))
    return _epoch_ms(dt.replace(year=dt.year + 1))


def max_width_ms(g: Granularity) -> int:
    if g in _FIXED_WIDTH_MS:
        return _FIXED_WIDTH_MS[g]
    return (31 if g is Granularity.MONTH else 366) * DAY_MS


def align(timestamp: int, g: Granularity) -> IntervalKey:
    """Return the UTC-aligned interval of granularity ``g`` containing ``timestamp``.

    The epoch itself is accepted so that interval starts in early 1970 re-align to themselves.
    """
    if timestamp < 0:
        raise InvalidReading(f"timestamp must not precede the epoch: {timestamp}")
    if g in _FIXED_WIDTH_MS:
        width = _FIXED_WIDTH_MS[g]
        return IntervalKey(g, timestamp - timestamp % width)
    dt = _utc(timestamp)
    if g is Granularity.MONTH:
        floor = datetime(dt.year, dt.month, 1, tzinfo=timezone.utc)
    else:
        floor = datetime(dt.year, 1, 1, tzinfo=timezone.utc)
    return IntervalKey(g, _epoch_ms(floor))


def to_epoch_ms(dt: datetime) -> int:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(round(dt.timestamp() * 1000))


def parse_instant(value: str | int) -> int:
    """Accept epoch milliseconds or an ISO-8601 date/datetime (UTC when naive)."""
    if isinstance(value, int):
        return value
    text = value.strip()
    if text.isdigit():
        return int(text)
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        return to_epoch_ms(datetime.fromisoformat(text))
    except ValueError:
        return to_epoch_ms(datetime.combine(date.fromisoformat(text), time()))


def format_instant(ts_ms: int) -> str:
    return _utc(ts_ms).isoformat().replace("+00:00", "Z")

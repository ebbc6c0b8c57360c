from __future__ import annotations

import heapq
import logging
import math
import random
from collections.abc import Callable, Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from pathlib import Path
from typing import Any
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

import yaml

from .domain import (
    DAY_MS,
    HOUR_MS,
    InvalidConfig,
    Orientation,
    Reading,
    ResourceDescriptor,
    Room,
    SensorKind,
    SiteTopology,
    parse_instant,
    to_epoch_ms,
)
from .mappers.bus import BusMessage, format_bus_message
from .topology import Topology, default_resource_id

logger = logging.getLogger(__name__)

# Monday
DEFAULT_START = date(2017, 10, 2)
OUTLIER_OFFSET = 100.0
ROOM_SENSORS = (
    ("temperature", "C"),
    ("humidity", "%"),
    ("luminosity", "lx"),
    ("noise", "dB"),
)
ORIENTATIONS = (
    Orientation.S,
    Orientation.SW,
    Orientation.SE,
    Orientation.N,
    Orientation.E,
    Orientation.W,
    Orientation.NE,
    Orientation.NW,
)
SOLAR_GAIN_C = {
    Orientation.S: 2.5,
    Orientation.SW: 2.0,
    Orientation.SE: 2.0,
    Orientation.E: 1.2,
    Orientation.W: 1.2,
    Orientation.NE: 0.5,
    Orientation.NW: 0.5,
    Orientation.N: 0.0,
}

_FLOAT_KEYS = ("random_loss_day_rate", "outlier_rate", "outlier_warmup_hours", "noise_std")
WINDOW_DROP_MS = 10 * 60_000
WINDOW_HOLD_MS = 20 * 60_000
WINDOW_RECOVERY_MS = 3 * HOUR_MS


@dataclass(frozen=True)
class SiteClimate:
    """Outdoor conditions of one simulated site; ``timezone`` overrides the fleet's."""

    timezone: str | None = None
    outdoor_mean_c: float = 15.0
    outdoor_swing_c: float = 6.0
    wind_mean: float = 1.0

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> SiteClimate:
        return cls(
            timezone=str(doc["timezone"]) if doc.get("timezone") else None,
            outdoor_mean_c=float(doc.get("outdoor_mean_c", 15.0)),
            outdoor_swing_c=float(doc.get("outdoor_swing_c", 6.0)),
            wind_mean=float(doc.get("wind_mean", 1.0)),
        )


@dataclass(frozen=True)
class WindowOpening:
    """Indoor temperature falls by ``drop_c`` over ten minutes, holds, then recovers slowly."""

    resource_id: str
    start: int
    drop_c: float

    def offset(self, ts: int) -> float:
        t = ts - self.start
        if t < 0:
            return 0.0
        if t < WINDOW_DROP_MS:
            return -self.drop_c * t / WINDOW_DROP_MS
        t -= WINDOW_DROP_MS
        if t < WINDOW_HOLD_MS:
            return -self.drop_c
        t -= WINDOW_HOLD_MS
        if t < WINDOW_RECOVERY_MS:
            return -self.drop_c * (1 - t / WINDOW_RECOVERY_MS)
        return 0.0


@dataclass
class FleetConfig:
    sites: int = 18
    sensors: int = 850
    start: date = DEFAULT_START
    days: int = 1
    timezone: str = "Europe/Athens"
    # seconds between readings per sensor kind
    reporting_periods: dict[str, int] = field(
        default_factory=lambda: {k.value: 30 for k in SensorKind}
    )
    # resource id -> site-local days with no readings at all
    loss_days: dict[str, list[date]] = field(default_factory=dict)
    # (resource id, start ms, end ms) spans with no readings
    loss_intervals: list[tuple[str, int, int]] = field(default_factory=list)
    random_loss_day_rate: float = 0.0
    outlier_rate: float = 0.0
    outlier_warmup_hours: float = 24.0
    noise_std: float = 0.0
    seed: int = 0
    # site id -> outdoor climate and local timezone
    climates: dict[str, SiteClimate] = field(default_factory=dict)
    # indoor temperature resource id -> (°C at 06:00, °C from 14:00) on weekend days
    weekend_ramps: dict[str, tuple[float, float]] = field(default_factory=dict)
    window_openings: list[WindowOpening] = field(default_factory=list)

    def site_timezone(self, site_id: str) -> str:
        climate = self.climates.get(site_id)
        return climate.timezone if climate and climate.timezone else self.timezone

    def validate(self) -> None:
        if self.sites <= 0 or self.sensors < self.sites:
            raise InvalidConfig("need at least one site and one sensor per site")
        if self.days <= 0:
            raise InvalidConfig("days must be positive")
        zones = [self.timezone] + [c.timezone for c in self.climates.values() if c.timezone]
        for zone in zones:
            try:
                ZoneInfo(zone)
            except (ZoneInfoNotFoundError, ValueError):
                raise InvalidConfig(f"unknown timezone {zone}") from None
        if any(o.drop_c <= 0 for o in self.window_openings):
            raise InvalidConfig("window opening drop must be positive")
        for kind in SensorKind:
            if self.reporting_periods.get(kind.value, 30) <= 0:
                raise InvalidConfig(f"reporting period of {kind.value} must be positive")
        for name in ("random_loss_day_rate", "outlier_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidConfig(f"{name} must lie in [0, 1]")
        if self.noise_std < 0:
            raise InvalidConfig("noise_std must be non-negative")

    @property
    def start_ms(self) -> int:
        return to_epoch_ms(datetime.combine(self.start, time(), tzinfo=ZoneInfo(self.timezone)))

    @property
    def end_ms(self) -> int:
        last = self.start + timedelta(days=self.days)
        return to_epoch_ms(datetime.combine(last, time(), tzinfo=ZoneInfo(self.timezone)))

    @property
    def last_day(self) -> date:
        return self.start + timedelta(days=self.days - 1)

    @classmethod
    def from_yaml(cls, path: str | Path) -> FleetConfig:
        try:
            with open(path, encoding="utf-8") as f:
                doc = yaml.safe_load(f) or {}
        except OSError as exc:
            raise InvalidConfig(f"cannot read fleet config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise InvalidConfig("fleet config must be a mapping")
        return cls.from_doc(doc)

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> FleetConfig:
        cfg = cls()
        try:
            for key in ("sites", "sensors", "days", "seed"):
                if key in doc:
                    setattr(cfg, key, int(doc[key]))
            for key in _FLOAT_KEYS:
                if key in doc:
                    setattr(cfg, key, float(doc[key]))
            if "timezone" in doc:
                cfg.timezone = str(doc["timezone"])
            if "start" in doc:
                start = doc["start"]
                cfg.start = start if isinstance(start, date) else date.fromisoformat(str(start))
            for kind, seconds in (doc.get("reporting_periods") or {}).items():
                cfg.reporting_periods[SensorKind(kind).value] = int(seconds)
            for rid, days in (doc.get("loss_days") or {}).items():
                cfg.loss_days[str(rid)] = [
                    d if isinstance(d, date) else date.fromisoformat(str(d)) for d in days
                ]
            for item in doc.get("loss_intervals") or []:
                cfg.loss_intervals.append(
                    (str(item["resource_id"]), int(item["start"]), int(item["end"]))
                )
            for site_id, climate in (doc.get("climates") or {}).items():
                cfg.climates[str(site_id)] = SiteClimate.from_doc(climate)
            for rid, (low, high) in (doc.get("weekend_ramps") or {}).items():
                cfg.weekend_ramps[str(rid)] = (float(low), float(high))
            for item in doc.get("window_openings") or []:
                cfg.window_openings.append(
                    WindowOpening(
                        str(item["resource_id"]),
                        parse_instant(str(item["start"])),
                        float(item.get("drop_c", 2.0)),
                    )
                )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidConfig(f"bad fleet config: {exc}") from None
        cfg.validate()
        return cfg


def _site_resources(site_no: int, n: int) -> tuple[list[ResourceDescriptor], list[Room]]:
    site_id = f"site-{site_no:02d}"
    fixed = [
        (f"S{site_no:02d}WX", "temperature", SensorKind.WEATHER, "C"),
        (f"S{site_no:02d}WX", "wind_speed", SensorKind.WEATHER, "m/s"),
        (f"S{site_no:02d}WX", "rain", SensorKind.WEATHER, "mm"),
        (f"S{site_no:02d}WX", "cloud_coverage", SensorKind.WEATHER, "%"),
        (f"S{site_no:02d}AT", "pressure", SensorKind.ATMOSPHERIC, "hPa"),
        (f"S{site_no:02d}M1", "current", SensorKind.POWER, "A"),
        (f"S{site_no:02d}M2", "current", SensorKind.POWER, "A"),
        (f"S{site_no:02d}M3", "current", SensorKind.POWER, "A"),
    ][:n]
    site_level = [
        ResourceDescriptor(
            default_resource_id(device, sensor), device, sensor, kind, units, 30, site_id
        )
        for device, sensor, kind, units in fixed
    ]
    rooms = []
    remaining = n - len(site_level)
    room_no = 0
    while remaining > 0:
        room_id = f"R{room_no + 1}"
        device = f"S{site_no:02d}R{room_no + 1:02d}"
        take = ROOM_SENSORS[: min(remaining, len(ROOM_SENSORS))]
        resources = tuple(
            ResourceDescriptor(
                default_resource_id(device, sensor),
                device,
                sensor,
                SensorKind.ENVIRONMENTAL,
                units,
                30,
                site_id,
                room_id,
            )
            for sensor, units in take
        )
        rooms.append(Room(room_id, ORIENTATIONS[room_no % len(ORIENTATIONS)], resources))
        remaining -= len(take)
        room_no += 1
    return site_level, rooms


def build_topology(cfg: FleetConfig) -> Topology:
    sites = []
    per_site, extra = divmod(cfg.sensors, cfg.sites)
    for i in range(cfg.sites):
        n = per_site + (1 if i < extra else 0)
        site_level, rooms = _site_resources(i + 1, n)
        period = cfg.reporting_periods
        site_level = [_with_period(r, period) for r in site_level]
        rooms = [
            Room(r.room_id, r.orientation, tuple(_with_period(x, period) for x in r.resources))
            for r in rooms
        ]
        sites.append(
            SiteTopology(
                site_id=f"site-{i + 1:02d}",
                name=f"School {_site_letter(i)}",
                timezone=cfg.site_timezone(f"site-{i + 1:02d}"),
                incorporated=cfg.start,
                rooms=tuple(rooms),
                resources=tuple(site_level),
            )
        )
    return Topology(tuple(sites))


def _site_letter(i: int) -> str:
    letters = ""
    i += 1
    while i:
        i, r = divmod(i - 1, 26)
        letters = chr(65 + r) + letters
    return letters


def _with_period(r: ResourceDescriptor, periods: Mapping[str, int]) -> ResourceDescriptor:
    return ResourceDescriptor(
        r.resource_id,
        r.device,
        r.sensor,
        r.kind,
        r.units,
        periods.get(r.kind.value, 30),
        r.site_id,
        r.room_id,
        r.nominal_voltage,
    )


class SignalModel:
    """Noiseless value of every simulated resource at any instant."""

    def __init__(
        self,
        topology: Topology,
        seed: int,
        climates: Mapping[str, SiteClimate] | None = None,
        weekend_ramps: Mapping[str, tuple[float, float]] | None = None,
        window_openings: Iterable[WindowOpening] = (),
    ) -> None:
        self.seed = seed
        self.weekend_ramps = dict(weekend_ramps or {})
        self._openings: dict[str, list[WindowOpening]] = {}
        for opening in window_openings:
            self._openings.setdefault(opening.resource_id, []).append(opening)
        self._orientation: dict[str, Orientation] = {}
        self._descriptor: dict[str, ResourceDescriptor] = {}
        self._zone: dict[str, ZoneInfo] = {}
        self._climate: dict[str, SiteClimate] = {}
        for site in topology.sites:
            zone = ZoneInfo(site.timezone)
            climate = (climates or {}).get(site.site_id, SiteClimate())
            for room in site.rooms:
                for res in room.resources:
                    self._orientation[res.resource_id] = room.orientation
            for res in site.all_resources():
                self._descriptor[res.resource_id] = res
                self._zone[res.resource_id] = zone
                self._climate[res.resource_id] = climate

    def _local(self, resource_id: str, ts: int) -> tuple[float, int]:
        dt = datetime.fromtimestamp(ts / 1000, tz=self._zone[resource_id])
        return dt.hour + dt.minute / 60 + dt.second / 3600, dt.weekday()

    @staticmethod
    def _occupied(hour: float, weekday: int) -> bool:
        return weekday < 5 and 8.5 <= hour < 16.5

    def _rain(self, resource_id: str, ts: int) -> float:
        # deterministic bursts: some hours rain, others dry
        rng = random.Random(f"{self.seed}:{resource_id}:{ts // HOUR_MS}")
        return round(rng.expovariate(2.0), 2) if rng.random() < 0.1 else 0.0

    def _indoor_temperature(self, resource_id: str, ts: int, hour: float, weekday: int) -> float:
        ramp = self.weekend_ramps.get(resource_id)
        if ramp is not None and weekday >= 5:
            low, high = ramp
            value = low + (high - low) * min(max((hour - 6.0) / 8.0, 0.0), 1.0)
        else:
            diurnal = math.sin(2 * math.pi * (hour - 9) / 24)
            day_light = max(0.0, math.sin(math.pi * (hour - 7) / 11)) if 7 <= hour <= 18 else 0.0
            gain = SOLAR_GAIN_C[self._orientation.get(resource_id, Orientation.N)]
            occupied = self._occupied(hour, weekday)
            value = 20.0 + 2.0 * diurnal + gain * day_light + (1.5 if occupied else 0.0)
        return value + sum(o.offset(ts) for o in self._openings.get(resource_id, ()))

    def __call__(self, resource_id: str, ts: int) -> float:
        res = self._descriptor[resource_id]
        hour, weekday = self._local(resource_id, ts)
        diurnal = math.sin(2 * math.pi * (hour - 9) / 24)
        occupied = self._occupied(hour, weekday)
        day_light = max(0.0, math.sin(math.pi * (hour - 7) / 11)) if 7 <= hour <= 18 else 0.0
        sensor = res.sensor
        if res.kind is SensorKind.ENVIRONMENTAL:
            if sensor == "temperature":
                return self._indoor_temperature(resource_id, ts, hour, weekday)
            if sensor == "humidity":
                return 50.0 - 5.0 * diurnal
            if sensor == "luminosity":
                return 20.0 + 400.0 * day_light + (150.0 if occupied else 0.0)
            return 35.0 + 3.0 * day_light + (20.0 if occupied else 0.0)
        climate = self._climate[resource_id]
        if sensor == "temperature":
            return climate.outdoor_mean_c + climate.outdoor_swing_c * diurnal
        if sensor == "wind_speed":
            return max(0.0, climate.wind_mean + 0.5 * diurnal)
        if sensor == "rain":
            return self._rain(resource_id, ts)
        if sensor == "cloud_coverage":
            return 40.0 + 30.0 * math.sin(2 * math.pi * ts / (3 * DAY_MS))
        if sensor == "pressure":
            return 1013.0 + 4.0 * math.sin(2 * math.pi * ts / (5 * DAY_MS))
        # phase current
        return 2.0 + 0.5 * day_light + (8.0 if occupied else 0.0)


def _midnight(day: date, zone: ZoneInfo) -> int:
    return to_epoch_ms(datetime.combine(day, time(), tzinfo=zone))


def _merge_spans(spans: list[tuple[int, int]]) -> list[tuple[int, int]]:
    merged: list[tuple[int, int]] = []
    for a, b in sorted(spans):
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return merged


@dataclass
class SimulatedSensor:
    descriptor: ResourceDescriptor
    period_ms: int
    first_ms: int
    dropped: list[tuple[int, int]]
    outliers: dict[int, float]
    rng: random.Random

    def ticks_in(self, a: int, b: int) -> int:
        """Scheduled readings with a <= ts < b."""
        if b <= self.first_ms:
            return 0
        lo = max(0, -(-(a - self.first_ms) // self.period_ms))
        hi = -(-(b - self.first_ms) // self.period_ms)
        return max(0, hi - lo)

    def is_dropped(self, ts: int) -> bool:
        return any(a <= ts < b for a, b in self.dropped)

    def emitted_in(self, a: int, b: int) -> int:
        return self.ticks_in(a, b) - sum(
            self.ticks_in(max(a, x), min(b, y)) for x, y in self.dropped if x < b and y > a
        )


@dataclass
class GroundTruth:
    loss_calendar: dict[str, set[date]]
    outliers: dict[str, set[int]]
    expected_counts: dict[str, int]
    signal: Callable[[str, int], float]

    @property
    def expected_total(self) -> int:
        return sum(self.expected_counts.values())


@dataclass
class Fleet:
    config: FleetConfig
    topology: Topology
    truth: GroundTruth
    sensors: list[SimulatedSensor]

    def readings(self) -> Iterator[Reading]:
        """Every emitted reading in timestamp order (ties by resource id)."""
        end = self.config.end_ms
        signal = self.truth.signal
        noise = self.config.noise_std
        heap = [(s.first_ms, s.descriptor.resource_id, i) for i, s in enumerate(self.sensors)]
        heap = [h for h in heap if h[0] < end]
        heapq.heapify(heap)
        while heap:
            ts, rid, i = heapq.heappop(heap)
            sensor = self.sensors[i]
            nxt = ts + sensor.period_ms
            if nxt < end:
                heapq.heappush(heap, (nxt, rid, i))
            if sensor.is_dropped(ts):
                continue
            value = signal(rid, ts)
            if noise:
                value += sensor.rng.gauss(0.0, noise)
            if ts in sensor.outliers:
                value = sensor.outliers[ts]
            d = sensor.descriptor
            yield Reading(rid, d.device, d.sensor, round(value, 4), ts)

    def messages(self) -> Iterator[BusMessage]:
        for reading in self.readings():
            yield format_bus_message(reading)


def build_fleet(cfg: FleetConfig) -> Fleet:
    cfg.validate()
    topology = build_topology(cfg)
    signal = SignalModel(
        topology, cfg.seed, cfg.climates, cfg.weekend_ramps, cfg.window_openings
    )
    start_ms, end_ms = cfg.start_ms, cfg.end_ms
    days = [cfg.start + timedelta(days=i) for i in range(cfg.days)]
    # site-local day bounds, clipped to the simulated window
    bounds_by_site: dict[str, list[tuple[date, int, int]]] = {}
    for site in topology.sites:
        zone = ZoneInfo(site.timezone)
        bounds_by_site[site.site_id] = [
            (
                d,
                max(start_ms, _midnight(d, zone)),
                min(end_ms, _midnight(d + timedelta(days=1), zone)),
            )
            for d in days
        ]
    rng = random.Random(cfg.seed)
    intervals: dict[str, list[tuple[int, int]]] = {}
    for rid, a, b in cfg.loss_intervals:
        intervals.setdefault(rid, []).append((a, b))
    warmup_end = start_ms + int(cfg.outlier_warmup_hours * HOUR_MS)
    sensors = []
    calendar: dict[str, set[date]] = {}
    outliers: dict[str, set[int]] = {}
    expected: dict[str, int] = {}
    for res in topology.resources():
        rid = res.resource_id
        day_bounds = bounds_by_site[res.site_id]
        period_ms = res.reporting_period * 1000
        sensor_rng = random.Random(f"{cfg.seed}:{rid}")
        first = start_ms + rng.randrange(period_ms)
        lost_days = set(cfg.loss_days.get(rid, ()))
        if cfg.random_loss_day_rate:
            lost_days.update(d for d in days if rng.random() < cfg.random_loss_day_rate)
        spans = list(intervals.get(rid, ()))
        spans += [(a, b) for d, a, b in day_bounds if d in lost_days]
        sensor = SimulatedSensor(res, period_ms, first, _merge_spans(spans), {}, sensor_rng)
        if cfg.outlier_rate and res.sensor != "rain":
            eligible_from = max(first, warmup_end)
            k0 = -(-(eligible_from - first) // period_ms)
            n = sensor.ticks_in(start_ms, end_ms)
            candidates = [first + k * period_ms for k in range(k0, n)]
            count = round(cfg.outlier_rate * len(candidates))
            for ts in sorted(rng.sample(candidates, count)) if count else []:
                if sensor.is_dropped(ts):
                    continue
                sign = 1.0 if rng.random() < 0.5 else -1.0
                sensor.outliers[ts] = round(signal(rid, ts) + sign * OUTLIER_OFFSET, 4)
        for d, a, b in day_bounds:
            if sensor.emitted_in(a, b) == 0:
                calendar.setdefault(rid, set()).add(d)
        expected[rid] = sensor.emitted_in(start_ms, end_ms)
        if sensor.outliers:
            outliers[rid] = set(sensor.outliers)
        sensors.append(sensor)
    truth = GroundTruth(calendar, outliers, expected, signal)
    logger.info(
        "fleet built sites=%d sensors=%d expected_messages=%d lost_sensor_days=%d",
        len(topology.sites),
        len(sensors),
        truth.expected_total,
        sum(len(v) for v in calendar.values()),
    )
    return Fleet(cfg, topology, truth, sensors)


def generate(cfg: FleetConfig) -> tuple[Topology, Iterator[BusMessage], GroundTruth]:
    fleet = build_fleet(cfg)
    return fleet.topology, fleet.messages(), fleet.truth

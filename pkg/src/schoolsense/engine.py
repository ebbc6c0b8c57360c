from __future__ import annotations

import bisect
import logging
import math
import random
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from threading import Lock

import numpy as np

from .config import Settings
from .directory import Directory
from .domain import (
    Granularity,
    IntervalKey,
    IntervalSummary,
    Reading,
    ResourceDescriptor,
    SchoolSenseError,
    SensorKind,
    align,
)
from .storage import RawLog
from .summaries import SummaryStore

logger = logging.getLogger(__name__)

SummaryListener = Callable[[list[IntervalSummary]], None]
ReadingListener = Callable[[Reading], None]


class TooOld(SchoolSenseError):
    pass


class EmptyChildren(SchoolSenseError):
    pass


class NoSamples(SchoolSenseError):
    pass


class EngineUnavailable(SchoolSenseError):
    pass


class AggregationType(str, Enum):
    AVERAGE = "average"
    TOTAL = "total"
    POWER = "power"


_SENSOR_AGGREGATION: dict[str, AggregationType] = {
    "temperature": AggregationType.AVERAGE,
    "humidity": AggregationType.AVERAGE,
    "luminosity": AggregationType.AVERAGE,
    "noise": AggregationType.AVERAGE,
    "wind": AggregationType.AVERAGE,
    "wind_speed": AggregationType.AVERAGE,
    "pressure": AggregationType.AVERAGE,
    "co2": AggregationType.AVERAGE,
    "cloud_coverage": AggregationType.AVERAGE,
    "precipitation": AggregationType.TOTAL,
    "rain": AggregationType.TOTAL,
    "rain_height": AggregationType.TOTAL,
    "current": AggregationType.POWER,
    "power": AggregationType.POWER,
}


def aggregation_for(descriptor: ResourceDescriptor) -> AggregationType:
    found = _SENSOR_AGGREGATION.get(descriptor.sensor.lower())
    if found is not None:
        return found
    if descriptor.kind is SensorKind.POWER:
        return AggregationType.POWER
    return AggregationType.AVERAGE


def power_factor(descriptor: ResourceDescriptor, default_voltage: float) -> float:
    """Multiplier turning a raw power-feed value into watts."""
    units = descriptor.units.strip().lower()
    if units == "w":
        return 1.0
    if units == "kw":
        return 1000.0
    # current in amperes
    return descriptor.nominal_voltage or default_voltage


def _bounded_mean(values: Sequence[float], lo: float, hi: float) -> float:
    mean = math.fsum(values) / len(values)
    return min(max(mean, lo), hi)


def summarize_events(
    resource_id: str,
    key: IntervalKey,
    values: Sequence[float],
    aggregation: AggregationType,
    factor: float = 1.0,
) -> IntervalSummary:
    """Summary of the raw events of one open interval."""
    if not values:
        raise NoSamples(f"no samples for {resource_id} at {key.start}")
    if aggregation is AggregationType.POWER:
        scaled = [v * factor for v in values]
        lo, hi = min(scaled), max(scaled)
        avg = _bounded_mean(scaled, lo, hi)
        return IntervalSummary(
            resource_id, key, avg, lo, hi, len(values), energy_wh=avg * key.width_ms / 3_600_000
        )
    lo, hi = min(values), max(values)
    avg = _bounded_mean(values, lo, hi)
    total = math.fsum(values) if aggregation is AggregationType.TOTAL else None
    return IntervalSummary(resource_id, key, avg, lo, hi, len(values), total=total)


def aggregate_power(
    current_values: Sequence[tuple[float, int]],
    interval: IntervalKey,
    nominal_voltage: float = 230.0,
) -> tuple[float, float]:
    """Average power (W) and energy (Wh) of an interval from current samples (A, UTC ms)."""
    if not current_values:
        raise NoSamples("no current samples")
    for _, ts in current_values:
        if not interval.start <= ts < interval.end:
            raise ValueError(f"sample at {ts} outside interval starting {interval.start}")
    avg_power_w = nominal_voltage * math.fsum(a for a, _ in current_values) / len(current_values)
    return avg_power_w, avg_power_w * interval.width_ms / 3_600_000


def roll_up(
    children: Sequence[IntervalSummary],
    g: Granularity,
    aggregation: AggregationType = AggregationType.AVERAGE,
) -> IntervalSummary:
    """Derive the granularity-``g`` summary from the summaries of its child intervals.

    The parent average is the unweighted mean of the children's averages; counts are
    summed so callers can still compute event-weighted means.
    """
    if not children:
        raise EmptyChildren(f"no children to roll up into {g.label}")
    ordered = sorted(children, key=lambda c: c.interval.start)
    parent = align(ordered[0].interval.start, g)
    for child in ordered:
        if child.interval.granularity >= g or align(child.interval.start, g) != parent:
            raise ValueError(f"child {child.interval} does not lie in parent {parent}")
    lo = min(c.min for c in ordered)
    hi = max(c.max for c in ordered)
    avg = _bounded_mean([c.avg for c in ordered], lo, hi)
    energy = total = None
    if aggregation is AggregationType.POWER:
        energy = math.fsum(c.energy_wh or 0.0 for c in ordered)
    elif aggregation is AggregationType.TOTAL:
        total = math.fsum(c.total or 0.0 for c in ordered)
    return IntervalSummary(
        resource_id=ordered[0].resource_id,
        interval=parent,
        avg=avg,
        min=lo,
        max=hi,
        count=sum(c.count for c in ordered),
        energy_wh=energy,
        total=total,
    )


@dataclass
class Slot:
    key: IntervalKey
    summary: IntervalSummary | None = None
    events: dict[int, float] = field(default_factory=dict)  # FIVE_MIN only
    children: dict[int, IntervalSummary] = field(default_factory=dict)


class AggregatorState:
    """The most recent ``capacity`` interval slots of one resource at one granularity."""

    def __init__(self, granularity: Granularity, capacity: int = 48) -> None:
        self.granularity = granularity
        self.capacity = capacity
        self._slots: dict[int, Slot] = {}
        self._starts: list[int] = []
        self.evicted = 0

    def __len__(self) -> int:
        return len(self._starts)

    @property
    def oldest(self) -> int | None:
        return self._starts[0] if self._starts else None

    def get(self, start: int) -> Slot | None:
        return self._slots.get(start)

    def rejects(self, key: IntervalKey) -> bool:
        """True when a full ring would evict ``key`` the moment it was admitted."""
        return len(self._starts) >= self.capacity and key.start < self._starts[0]

    def admit(self, key: IntervalKey) -> Slot:
        slot = self._slots.get(key.start)
        if slot is not None:
            return slot
        slot = Slot(key)
        self._slots[key.start] = slot
        bisect.insort(self._starts, key.start)
        while len(self._starts) > self.capacity:
            del self._slots[self._starts.pop(0)]
            self.evicted += 1
        return slot

    def keys(self) -> list[IntervalKey]:
        return [self._slots[s].key for s in self._starts]

    def summaries(self) -> list[IntervalSummary]:
        return [self._slots[s].summary for s in self._starts if self._slots[s].summary]


class ResourceState:
    def __init__(self, descriptor: ResourceDescriptor, capacity: int, voltage: float) -> None:
        self.descriptor = descriptor
        self.aggregation = aggregation_for(descriptor)
        self.factor = power_factor(descriptor, voltage)
        self.lock = Lock()
        self.levels = {g: AggregatorState(g, capacity) for g in Granularity}


@dataclass(frozen=True)
class EventLatencySample:
    aggregation_type: AggregationType
    latency_ms: float

    def __post_init__(self) -> None:
        if self.latency_ms < 0:
            raise ValueError("latency must be non-negative")


@dataclass(frozen=True)
class LatencyStats:
    count: int
    mean_ms: float
    median_ms: float
    p99_ms: float


class LatencyRecorder:
    """Per-aggregation-type latency reservoirs (uniform reservoir sampling, exact counts)."""

    def __init__(self, capacity: int = 100_000, seed: int = 0) -> None:
        self.capacity = capacity
        self._rng = random.Random(seed)
        self._lock = Lock()
        self._samples: dict[AggregationType, list[float]] = {}
        self._counts: dict[AggregationType, int] = {}

    def record(self, sample: EventLatencySample) -> None:
        with self._lock:
            kind = sample.aggregation_type
            seen = self._counts.get(kind, 0) + 1
            self._counts[kind] = seen
            reservoir = self._samples.setdefault(kind, [])
            if len(reservoir) < self.capacity:
                reservoir.append(sample.latency_ms)
            else:
                j = self._rng.randrange(seen)
                if j < self.capacity:
                    reservoir[j] = sample.latency_ms

    def report(self) -> dict[AggregationType, LatencyStats]:
        with self._lock:
            out = {}
            for kind in AggregationType:
                values = self._samples.get(kind)
                if not values:
                    continue
                arr = np.asarray(values, dtype=float)
                out[kind] = LatencyStats(
                    count=self._counts[kind],
                    mean_ms=float(arr.mean()),
                    median_ms=float(np.median(arr)),
                    p99_ms=float(np.percentile(arr, 99)),
                )
            return out


@dataclass
class EngineCounters:
    submitted: int = 0
    aggregated: int = 0
    duplicates: int = 0
    too_old: int = 0
    summaries_written: int = 0
    _lock: Lock = field(default_factory=Lock, repr=False, compare=False)

    def add(self, name: str, n: int = 1) -> None:
        with self._lock:
            setattr(self, name, getattr(self, name) + n)

    def as_fields(self) -> str:
        return (
            f"submitted={self.submitted} aggregated={self.aggregated} "
            f"duplicates={self.duplicates} too_old={self.too_old} "
            f"summaries_written={self.summaries_written}"
        )


class Engine:
    """Continuous computation engine: cascaded tumbling-window aggregation per resource."""

    def __init__(
        self,
        directory: Directory,
        store: SummaryStore | None = None,
        raw_log: RawLog | None = None,
        *,
        retention_slots: int = 48,
        nominal_voltage: float = 230.0,
        flush_every: int = 1,
        instrument: bool = False,
    ) -> None:
        self.directory = directory
        self.store = store
        self.raw_log = raw_log
        self.retention_slots = retention_slots
        self.nominal_voltage = nominal_voltage
        self.flush_every = max(1, flush_every)
        self.instrument = instrument
        self.latency = LatencyRecorder()
        self.counters = EngineCounters()
        self._states: dict[str, ResourceState] = {}
        self._states_lock = Lock()
        self._pending: dict[tuple[str, int, int], IntervalSummary] = {}
        self._pending_lock = Lock()
        self._since_flush = 0
        self._listeners: list[SummaryListener] = []
        self._raw_listeners: list[ReadingListener] = []
        self._closed = False

    @classmethod
    def from_settings(
        cls, directory: Directory, settings: Settings, store_dir: str | Path | None = None
    ) -> Engine:
        root = Path(store_dir or settings.store_dir)
        return cls(
            directory,
            SummaryStore.at(root),
            RawLog(root, registered=directory),
            retention_slots=settings.retention_slots,
            nominal_voltage=settings.nominal_voltage,
            flush_every=settings.flush_every,
            instrument=settings.instrument,
        )

    @property
    def closed(self) -> bool:
        return self._closed

    def add_listener(self, listener: SummaryListener) -> None:
        self._listeners.append(listener)

    def add_raw_listener(self, listener: ReadingListener) -> None:
        self._raw_listeners.append(listener)

    def _state_for(self, resource_id: str) -> ResourceState:
        state = self._states.get(resource_id)
        if state is not None:
            return state
        descriptor = self.directory.get(resource_id)
        with self._states_lock:
            state = self._states.get(resource_id)
            if state is None:
                state = ResourceState(descriptor, self.retention_slots, self.nominal_voltage)
                self._states[resource_id] = state
        return state

    def aggregation_of(self, resource_id: str) -> AggregationType:
        return self._state_for(resource_id).aggregation

    def submit(self, r: Reading) -> list[IntervalSummary]:
        """Fold one reading into its FIVE_MIN slot and cascade the change upwards.

        Returns the summaries whose value changed, finest first. Raises TooOld for readings
        older than the retained FIVE_MIN window; those are still kept in the raw log.
        """
        if self._closed:
            raise EngineUnavailable("engine is closed")
        started = time.perf_counter()
        state = self._state_for(r.resource_id)
        if self.raw_log is not None:
            self.raw_log.append_raw(r)
        try:
            with state.lock:
                self.counters.add("submitted")
                updated = self._apply(state, r)
                if updated:
                    self.counters.add("aggregated")
                    self._persist(updated)
                    for listener in self._listeners:
                        listener(updated)
                for raw_listener in self._raw_listeners:
                    raw_listener(r)
            return updated
        finally:
            if self.instrument:
                elapsed_ms = (time.perf_counter() - started) * 1000
                self.record_latency(EventLatencySample(state.aggregation, elapsed_ms))

    def _apply(self, state: ResourceState, r: Reading) -> list[IntervalSummary]:
        five = state.levels[Granularity.FIVE_MIN]
        key = align(r.timestamp, Granularity.FIVE_MIN)
        slot = five.get(key.start)
        if slot is None:
            if five.rejects(key):
                self.counters.add("too_old")
                logger.warning(
                    "too old resource_id=%s ts=%s oldest_slot=%s",
                    r.resource_id,
                    r.timestamp,
                    five.oldest,
                )
                raise TooOld(f"{r.resource_id} reading at {r.timestamp} precedes retained window")
            slot = five.admit(key)
        if r.timestamp in slot.events:
            self.counters.add("duplicates")
            return []
        slot.events[r.timestamp] = r.value
        ordered = [slot.events[ts] for ts in sorted(slot.events)]
        child = summarize_events(r.resource_id, key, ordered, state.aggregation, state.factor)
        slot.summary = child
        updated = [child]
        g = Granularity.HOUR
        while g is not None:
            level = state.levels[g]
            pkey = align(child.interval.start, g)
            pslot = level.get(pkey.start)
            if pslot is None:
                if level.rejects(pkey):
                    logger.warning(
                        "cascade stopped resource_id=%s granularity=%s start=%s",
                        r.resource_id,
                        g.label,
                        pkey.start,
                    )
                    break
                pslot = level.admit(pkey)
            pslot.children[child.interval.start] = child
            parent = roll_up(list(pslot.children.values()), g, state.aggregation)
            if parent == pslot.summary:
                break
            pslot.summary = parent
            updated.append(parent)
            child = parent
            g = g.parent
        return updated

    def _persist(self, updated: list[IntervalSummary]) -> None:
        if self.store is None:
            return
        if self.flush_every <= 1:
            self.counters.add("summaries_written", self.store.put_many(updated))
            return
        with self._pending_lock:
            for s in updated:
                self._pending[(s.resource_id, int(s.interval.granularity), s.start)] = s
            self._since_flush += 1
            due = self._since_flush >= self.flush_every
        if due:
            self.flush()

    def flush(self) -> None:
        with self._pending_lock:
            batch = list(self._pending.values())
            self._pending.clear()
            self._since_flush = 0
        if batch and self.store is not None:
            self.counters.add("summaries_written", self.store.put_many(batch))
        if self.raw_log is not None:
            self.raw_log.flush()

    def record_latency(self, sample: EventLatencySample) -> None:
        self.latency.record(sample)

    def retained(self, resource_id: str, g: Granularity) -> list[IntervalKey]:
        state = self._states.get(resource_id)
        return state.levels[g].keys() if state is not None else []

    def current(self, resource_id: str, g: Granularity) -> list[IntervalSummary]:
        state = self._states.get(resource_id)
        return state.levels[g].summaries() if state is not None else []

    def retained_slot_count(self) -> int:
        return sum(len(level) for s in self._states.values() for level in s.levels.values())

    def submit_many(self, readings: Iterable[Reading]) -> int:
        n = 0
        for r in readings:
            try:
                self.submit(r)
            except TooOld:
                pass
            n += 1
        return n

    def close(self) -> None:
        if self._closed:
            return
        self.flush()
        self._closed = True
        logger.info("engine closed %s", self.counters.as_fields())

from __future__ import annotations

import logging
import time
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..directory import Directory, UnknownResource
from ..domain import InvalidConfig, InvalidReading, Reading, SchoolSenseError, parse_instant
from ..utils import http_get_json, telemetry_span
from .base import Mapper, ReadingSink

logger = logging.getLogger(__name__)

VendorRecord = Mapping[str, Any]
DEFAULT_FIELDS = {"device": "device", "sensor": "sensor", "value": "value", "ts": "ts"}


class SourceUnavailable(SchoolSenseError):
    pass


@dataclass
class PollSource:
    """A vendor endpoint polled for records newer than ``cursor`` (UTC epoch ms)."""

    source_id: str
    poll_period: int = 300
    cursor: int = 0
    url: str | None = None
    records_key: str = "data"
    # vendor field name for each Reading field
    fields: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_FIELDS))
    min_interval_seconds: float = 0.0

    def __post_init__(self) -> None:
        if self.poll_period <= 0:
            raise InvalidConfig(f"poll_period must be positive for source {self.source_id}")


Fetch = Callable[[PollSource], Iterable[VendorRecord]]


def normalize_record(rec: VendorRecord, src: PollSource, directory: Directory) -> Reading:
    names = src.fields
    device = str(rec[names.get("device", "device")])
    sensor = str(rec[names.get("sensor", "sensor")])
    raw_ts = rec[names.get("ts", "ts")]
    ts = parse_instant(raw_ts if isinstance(raw_ts, (str, int)) else int(raw_ts))
    descriptor = directory.resolve(device, sensor)
    value = float(rec[names.get("value", "value")])
    return Reading(descriptor.resource_id, device, sensor, value, ts)


def poll_cycle(src: PollSource, fetch: Fetch, directory: Directory) -> list[Reading]:
    """Fetch, normalize and de-duplicate one round of vendor records.

    Returns readings newer than the cursor in timestamp order and advances the cursor to the
    newest one. A failed fetch raises SourceUnavailable and leaves the cursor untouched.
    """
    try:
        records = list(fetch(src))
    except Exception as exc:  # noqa: BLE001
        raise SourceUnavailable(f"source {src.source_id} fetch failed: {exc}") from exc
    out: list[Reading] = []
    for rec in records:
        try:
            reading = normalize_record(rec, src, directory)
        except (KeyError, TypeError, ValueError, InvalidReading, UnknownResource) as exc:
            logger.warning("poll record skipped source=%s error=%s", src.source_id, exc)
            continue
        if reading.timestamp <= src.cursor:
            continue
        out.append(reading)
    out.sort(key=lambda r: r.timestamp)
    if out:
        src.cursor = out[-1].timestamp
    return out


class HttpPollFetcher:
    """Fetches vendor records over HTTP, asking for everything after the source cursor."""

    def __init__(self, timeout_seconds: int = 30) -> None:
        self.timeout_seconds = timeout_seconds

    def __call__(self, src: PollSource) -> list[VendorRecord]:
        if not src.url:
            raise InvalidConfig(f"source {src.source_id} has no url")
        data = http_get_json(
            src.url,
            params={"since": src.cursor},
            timeout_seconds=self.timeout_seconds,
            source_name=src.source_id,
            min_interval_seconds=src.min_interval_seconds,
        )
        records = data.get(src.records_key) or []
        return [r for r in records if isinstance(r, dict)]


def load_sources(path: str | Path) -> list[PollSource]:
    try:
        with open(path, encoding="utf-8") as f:
            doc = yaml.safe_load(f) or {}
    except OSError as exc:
        raise InvalidConfig(f"cannot read poll sources {path}: {exc}") from None
    items = doc.get("sources") if isinstance(doc, dict) else None
    if not isinstance(items, list):
        raise InvalidConfig("poll source document must be a mapping with a 'sources' list")
    out = []
    for item in items:
        try:
            src = PollSource(
                source_id=str(item["source_id"]),
                poll_period=int(item.get("poll_period", 300)),
                cursor=int(item.get("cursor", 0)),
                url=item.get("url"),
                records_key=str(item.get("records_key", "data")),
                min_interval_seconds=float(item.get("min_interval_seconds", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidConfig(f"bad poll source entry {item!r}: {exc}") from None
        src.fields.update(item.get("fields") or {})
        out.append(src)
    return out


class PollingMapper(Mapper):
    source_name = "poll"

    def __init__(
        self,
        directory: Directory,
        sources: list[PollSource],
        fetch: Fetch | None = None,
        sink: ReadingSink | None = None,
        *,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        super().__init__(directory, sink)
        self.sources = sources
        self.fetch = fetch or HttpPollFetcher()
        self.clock = clock
        self.sleep = sleep
        self._next_due = {s.source_id: 0.0 for s in sources}

    def poll_source(self, src: PollSource) -> int:
        try:
            readings = poll_cycle(src, self.fetch, self.directory)
        except SourceUnavailable as exc:
            self.counters.errors += 1
            logger.warning(
                "poll failed source=%s errors=%d: %s", src.source_id, self.counters.errors, exc
            )
            return 0
        self.counters.received += len(readings)
        for reading in readings:
            self.emit(reading)
        return len(readings)

    def run_cycle(self) -> int:
        """Poll every source that is due; returns the number of readings forwarded."""
        now = self.clock()
        n = 0
        for src in self.sources:
            if now >= self._next_due[src.source_id]:
                n += self.poll_source(src)
                self._next_due[src.source_id] = now + src.poll_period
        return n

    def run(self, max_cycles: int | None = None) -> int:
        total = 0
        cycles = 0
        with telemetry_span("poll", self.counters):
            while max_cycles is None or cycles < max_cycles:
                total += self.run_cycle()
                cycles += 1
                if max_cycles is not None and cycles >= max_cycles:
                    break
                wait = min(self._next_due.values(), default=self.clock()) - self.clock()
                if wait > 0:
                    self.sleep(wait)
        return total

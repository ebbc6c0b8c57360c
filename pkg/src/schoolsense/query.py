from __future__ import annotations

import itertools
import logging
import time
from collections import deque
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path
from threading import Condition, Lock

import yaml

from .directory import Directory
from .domain import (
    DAY_MS,
    Granularity,
    IntervalSummary,
    InvalidConfig,
    Reading,
    ResourceDescriptor,
    SchoolSenseError,
)
from .summaries import SummaryStore

logger = logging.getLogger(__name__)

FIELDS = ("avg", "min", "max", "count", "energy")


class InvalidQuery(SchoolSenseError):
    pass


class RangeTooLarge(SchoolSenseError):
    pass


class UnknownSubscription(SchoolSenseError):
    pass


@dataclass(frozen=True)
class QueryRequest:
    resource_id: str
    granularity: Granularity
    t0: int
    t1: int
    fields: tuple[str, ...] = FIELDS

    def validate(self, max_span_days: int = 1830) -> None:
        if self.t0 >= self.t1:
            raise InvalidQuery(f"empty range [{self.t0}, {self.t1})")
        unknown = set(self.fields) - set(FIELDS)
        if unknown:
            raise InvalidQuery(f"unknown fields: {sorted(unknown)}")
        if self.t1 - self.t0 > max_span_days * DAY_MS:
            raise RangeTooLarge(f"range exceeds {max_span_days} days")


def summary_row(s: IntervalSummary, fields: Iterable[str] = FIELDS) -> dict[str, object]:
    row: dict[str, object] = {
        "resource_id": s.resource_id,
        "granularity": s.interval.granularity.label,
        "start": s.interval.start,
        "end": s.interval.end,
    }
    for name in fields:
        row[name] = s.energy_wh if name == "energy" else getattr(s, name)
    if s.total is not None:
        row["total"] = s.total
    return row


@dataclass(frozen=True)
class HistoricalResult:
    request: QueryRequest
    summaries: list[IntervalSummary]
    latency_ms: float

    def rows(self) -> list[dict[str, object]]:
        return [summary_row(s, self.request.fields) for s in self.summaries]


class QueryService:
    """Directory and Historical Data API over the summary store."""

    def __init__(
        self, directory: Directory, store: SummaryStore, max_span_days: int = 1830
    ) -> None:
        self.directory = directory
        self.store = store
        self.max_span_days = max_span_days

    def register_resource(self, descriptor: ResourceDescriptor) -> str:
        resource_id = self.directory.register(descriptor)
        logger.info("registered resource_id=%s site=%s", resource_id, descriptor.site_id)
        return resource_id

    def list_resources(self, site_id: str | None = None) -> list[ResourceDescriptor]:
        return self.directory.list_resources(site_id)

    def historical(self, q: QueryRequest) -> HistoricalResult:
        q.validate(self.max_span_days)
        self.directory.get(q.resource_id)
        started = time.perf_counter()
        summaries = self.store.range(q.resource_id, q.granularity, q.t0, q.t1)
        latency_ms = (time.perf_counter() - started) * 1000
        logger.info(
            "historical resource=%s granularity=%s from=%d to=%d records=%d latency_ms=%.3f",
            q.resource_id,
            q.granularity.label,
            q.t0,
            q.t1,
            len(summaries),
            latency_ms,
        )
        return HistoricalResult(q, summaries, latency_ms)


Update = IntervalSummary | Reading


class Subscription:
    """Bounded delivery queue; when full the oldest undelivered update is dropped."""

    def __init__(self, sub_id: str, resources: frozenset[str] | None, maxlen: int = 1000) -> None:
        self.sub_id = sub_id
        self.resources = resources
        self.maxlen = maxlen
        self.dropped = 0
        self.delivered = 0
        self._items: deque[Update] = deque()
        self._cond = Condition()

    def matches(self, resource_id: str) -> bool:
        return self.resources is None or resource_id in self.resources

    def offer(self, item: Update) -> None:
        with self._cond:
            if len(self._items) >= self.maxlen:
                self._items.popleft()
                self.dropped += 1
                if self.dropped == 1 or self.dropped % 1000 == 0:
                    logger.warning("subscriber drop sub=%s dropped=%d", self.sub_id, self.dropped)
            self._items.append(item)
            self._cond.notify_all()

    def poll(self, max_items: int | None = None, timeout: float = 0.0) -> list[Update]:
        with self._cond:
            if not self._items and timeout > 0:
                self._cond.wait_for(lambda: bool(self._items), timeout=timeout)
            n = len(self._items) if max_items is None else min(max_items, len(self._items))
            out = [self._items.popleft() for _ in range(n)]
            self.delivered += len(out)
            return out

    def __len__(self) -> int:
        return len(self._items)


class Dispatcher:
    """Fans engine updates out to subscriptions, preserving per-resource order."""

    def __init__(self, directory: Directory, queue_size: int = 1000) -> None:
        self.directory = directory
        self.queue_size = queue_size
        self._subs: dict[str, Subscription] = {}
        self._lock = Lock()
        self._ids = itertools.count(1)

    def subscribe(self, resource_ids: Iterable[str] | None = None) -> Subscription:
        wanted = None
        if resource_ids is not None:
            wanted = frozenset(resource_ids)
            for rid in wanted:
                self.directory.get(rid)
        with self._lock:
            sub = Subscription(f"sub-{next(self._ids)}", wanted, self.queue_size)
            self._subs[sub.sub_id] = sub
        scope = "*" if wanted is None else len(wanted)
        logger.info("subscribed sub=%s resources=%s", sub.sub_id, scope)
        return sub

    def get(self, sub_id: str) -> Subscription:
        try:
            return self._subs[sub_id]
        except KeyError:
            raise UnknownSubscription(f"unknown subscription {sub_id}") from None

    def unsubscribe(self, sub_id: str) -> None:
        with self._lock:
            if self._subs.pop(sub_id, None) is None:
                raise UnknownSubscription(f"unknown subscription {sub_id}")

    def publish(self, updated: list[IntervalSummary]) -> None:
        with self._lock:
            subs = list(self._subs.values())
        for summary in updated:
            for sub in subs:
                if sub.matches(summary.resource_id):
                    sub.offer(summary)

    def publish_raw(self, reading: Reading) -> None:
        with self._lock:
            subs = list(self._subs.values())
        for sub in subs:
            if sub.matches(reading.resource_id):
                sub.offer(reading)


@dataclass(frozen=True)
class ApiKey:
    key: str
    name: str = ""
    # None means every resource
    resources: frozenset[str] | None = field(default=None)


class KeyTable:
    """Static API-key allow-list."""

    def __init__(self, keys: Iterable[ApiKey]) -> None:
        self._keys = {k.key: k for k in keys}

    @classmethod
    def from_yaml(cls, path: str | Path) -> KeyTable:
        try:
            with open(path, encoding="utf-8") as f:
                doc = yaml.safe_load(f) or {}
        except OSError as exc:
            raise InvalidConfig(f"cannot read api keys {path}: {exc}") from None
        entries = doc.get("keys") if isinstance(doc, dict) else None
        if not isinstance(entries, list):
            raise InvalidConfig("api key document must be a mapping with a 'keys' list")
        keys = []
        for i, entry in enumerate(entries):
            if not isinstance(entry, dict) or "key" not in entry:
                raise InvalidConfig(f"api key entry {i} in {path} has no 'key'")
            allowed = entry.get("resources", "*")
            if allowed != "*" and not isinstance(allowed, list):
                raise InvalidConfig(f"api key entry {i} in {path}: resources must be '*' or a list")
            keys.append(
                ApiKey(
                    key=str(entry["key"]),
                    name=str(entry.get("name", "")),
                    resources=None if allowed == "*" else frozenset(map(str, allowed)),
                )
            )
        return cls(keys)

    def __len__(self) -> int:
        return len(self._keys)

    def authorize(self, api_key: str | None, resource_ids: Iterable[str] = ()) -> bool:
        entry = self._keys.get(api_key or "")
        if entry is None:
            return False
        if entry.resources is None:
            return True
        return all(rid in entry.resources for rid in resource_ids)


def authorize(keys: KeyTable, api_key: str | None, request: QueryRequest | Iterable[str]) -> bool:
    resource_ids = [request.resource_id] if isinstance(request, QueryRequest) else list(request)
    allowed = keys.authorize(api_key, resource_ids)
    if not allowed:
        logger.info("authorization denied resources=%s", resource_ids)
    return allowed

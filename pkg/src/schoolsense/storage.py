from __future__ import annotations

import json
import logging
from collections import defaultdict
from collections.abc import Container
from datetime import date, datetime, time, timezone
from pathlib import Path
from threading import Lock

from .directory import UnknownResource
from .domain import DAY_MS, Reading, SchoolSenseError, to_epoch_ms
from .utils import folder_name, resource_from_folder

logger = logging.getLogger(__name__)

QUARANTINE = "_quarantine"


class StorageFailure(SchoolSenseError):
    pass


def ensure_storage_dir(storage_dir: str | Path) -> Path:
    path = Path(storage_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _day_name(ts_ms: int) -> str:
    return datetime.fromtimestamp(ts_ms / 1000, tz=timezone.utc).date().isoformat()


def encode_record(r: Reading) -> str:
    return json.dumps(
        {
            "rid": r.resource_id,
            "device": r.device,
            "sensor": r.sensor,
            "value": r.value,
            "ts": r.timestamp,
        },
        separators=(",", ":"),
    )


class RawLog:
    """Append-only raw readings, one segment per resource per UTC day.

    Lines are buffered per segment and written on flush, on segment roll, when the buffer
    grows past ``buffer_lines`` and on close. Readers only see flushed lines; ``get_raw``
    flushes this writer's own buffers first.
    """

    def __init__(
        self,
        root: str | Path,
        registered: Container[str] | None = None,
        buffer_lines: int = 512,
    ) -> None:
        self.root = ensure_storage_dir(Path(root) / "raw")
        self.registered = registered
        self.buffer_lines = buffer_lines
        self._lock = Lock()
        self._pending: dict[Path, list[str]] = defaultdict(list)
        self._open_segment: dict[str, Path] = {}
        self.appended = 0
        self.quarantined = 0

    def _segment(self, folder: str, ts_ms: int) -> Path:
        return self.root / folder / f"{_day_name(ts_ms)}.log"

    def append_raw(self, r: Reading) -> None:
        known = self.registered is None or r.resource_id in self.registered
        folder = folder_name(r.resource_id) if known else QUARANTINE
        segment = self._segment(folder, r.timestamp)
        line = encode_record(r) + "\n"
        with self._lock:
            previous = self._open_segment.get(folder)
            if previous is not None and previous != segment:
                self._flush_segment(previous)
            self._open_segment[folder] = segment
            pending = self._pending[segment]
            pending.append(line)
            if known:
                self.appended += 1
            else:
                self.quarantined += 1
            if len(pending) >= self.buffer_lines:
                self._flush_segment(segment)

    def _flush_segment(self, segment: Path) -> None:
        lines = self._pending.pop(segment, None)
        if not lines:
            return
        try:
            segment.parent.mkdir(parents=True, exist_ok=True)
            with open(segment, "a", encoding="utf-8") as f:
                f.writelines(lines)
        except OSError as exc:
            raise StorageFailure(f"cannot append to {segment}: {exc}") from exc

    def flush(self) -> None:
        with self._lock:
            for segment in list(self._pending):
                self._flush_segment(segment)

    def close(self) -> None:
        self.flush()

    def _segments_in_range(self, folder: str, t0: int, t1: int) -> list[Path]:
        directory = self.root / folder
        if not directory.is_dir():
            return []
        first = date.fromisoformat(_day_name(t0))
        last = date.fromisoformat(_day_name(max(t0, t1 - 1)))
        out = []
        for path in sorted(directory.glob("*.log")):
            try:
                day = date.fromisoformat(path.stem)
            except ValueError:
                continue
            if first <= day <= last:
                out.append(path)
        return out

    def _read(self, folder: str, t0: int, t1: int) -> list[Reading]:
        fallback_id = resource_from_folder(folder)
        out: list[Reading] = []
        for path in self._segments_in_range(folder, t0, t1):
            with open(path, encoding="utf-8") as f:
                for line in f:
                    rec = json.loads(line)
                    ts = int(rec["ts"])
                    if t0 <= ts < t1:
                        out.append(
                            Reading(
                                resource_id=rec.get("rid", fallback_id),
                                device=rec["device"],
                                sensor=rec["sensor"],
                                value=float(rec["value"]),
                                timestamp=ts,
                            )
                        )
        # stable: equal timestamps keep append order
        out.sort(key=lambda r: r.timestamp)
        return out

    def get_raw(self, resource_id: str, t0: int, t1: int) -> list[Reading]:
        if t0 >= t1:
            raise ValueError(f"empty range [{t0}, {t1})")
        if self.registered is not None and resource_id not in self.registered:
            raise UnknownResource(f"unknown resource {resource_id}")
        self.flush()
        return [
            r for r in self._read(folder_name(resource_id), t0, t1) if r.resource_id == resource_id
        ]

    def get_quarantined(self, t0: int, t1: int) -> list[Reading]:
        self.flush()
        return [
            Reading(
                resource_id=f"{r.device}.{r.sensor}",
                device=r.device,
                sensor=r.sensor,
                value=r.value,
                timestamp=r.timestamp,
            )
            for r in self._read(QUARANTINE, t0, t1)
        ]

    def resources(self) -> list[str]:
        self.flush()
        return sorted(
            resource_from_folder(p.name)
            for p in self.root.iterdir()
            if p.is_dir() and p.name != QUARANTINE
        )

    def span(self, resource_id: str) -> tuple[int, int] | None:
        """UTC day bounds [first day start, last day end) of stored segments."""
        self.flush()
        directory = self.root / folder_name(resource_id)
        days = sorted(p.stem for p in directory.glob("*.log")) if directory.is_dir() else []
        if not days:
            return None
        first = to_epoch_ms(datetime.combine(date.fromisoformat(days[0]), time()))
        last = to_epoch_ms(datetime.combine(date.fromisoformat(days[-1]), time()))
        return first, last + DAY_MS

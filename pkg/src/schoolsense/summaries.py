from __future__ import annotations

import json
from collections.abc import Iterable, Iterator
from pathlib import Path

from sqlalchemy import func, select
from sqlalchemy.dialects.sqlite import insert as sqlite_insert

from .db import Base, create_session_factory, ensure_schema
from .domain import Granularity, IntervalKey, IntervalSummary, max_width_ms
from .models import SummaryRecord

_VALUE_COLUMNS = ("end", "avg", "min", "max", "count", "energy_wh", "total")


def _to_row(s: IntervalSummary) -> dict[str, object]:
    return {
        "resource_id": s.resource_id,
        "granularity": int(s.interval.granularity),
        "start": s.interval.start,
        "end": s.interval.end,
        "avg": s.avg,
        "min": s.min,
        "max": s.max,
        "count": s.count,
        "energy_wh": s.energy_wh,
        "total": s.total,
    }


def _from_record(rec: SummaryRecord) -> IntervalSummary:
    return IntervalSummary(
        resource_id=rec.resource_id,
        interval=IntervalKey(Granularity(rec.granularity), rec.start),
        avg=rec.avg,
        min=rec.min,
        max=rec.max,
        count=rec.count,
        energy_wh=rec.energy_wh,
        total=rec.total,
    )


class SummaryStore:
    """Keyed map (resource, granularity, interval start) -> summary; last write wins."""

    def __init__(self, database_url: str) -> None:
        self._session_factory = create_session_factory(database_url)
        with self._session_factory() as session:
            ensure_schema(Base, session.get_bind())

    @classmethod
    def at(cls, store_dir: str | Path) -> SummaryStore:
        path = Path(store_dir)
        path.mkdir(parents=True, exist_ok=True)
        return cls(f"sqlite:///{path / 'summaries.db'}")

    def put_many(self, summaries: Iterable[IntervalSummary]) -> int:
        rows = [_to_row(s) for s in summaries]
        if not rows:
            return 0
        stmt = sqlite_insert(SummaryRecord)
        stmt = stmt.on_conflict_do_update(
            index_elements=["resource_id", "granularity", "start"],
            set_={col: stmt.excluded[col] for col in _VALUE_COLUMNS},
        )
        with self._session_factory() as session:
            session.execute(stmt, rows)
            session.commit()
        return len(rows)

    def put(self, summary: IntervalSummary) -> None:
        self.put_many([summary])

    def get(self, resource_id: str, key: IntervalKey) -> IntervalSummary | None:
        with self._session_factory() as session:
            rec = session.get(SummaryRecord, (resource_id, int(key.granularity), key.start))
            return _from_record(rec) if rec is not None else None

    def range(
        self, resource_id: str, granularity: Granularity, t0: int, t1: int
    ) -> list[IntervalSummary]:
        """Summaries whose interval intersects [t0, t1), ordered by interval start."""
        stmt = (
            select(SummaryRecord)
            .where(
                SummaryRecord.resource_id == resource_id,
                SummaryRecord.granularity == int(granularity),
                # lower bound keeps the primary-key range scan tight
                SummaryRecord.start > t0 - max_width_ms(granularity),
                SummaryRecord.start < t1,
                SummaryRecord.end > t0,
            )
            .order_by(SummaryRecord.start)
        )
        with self._session_factory() as session:
            return [_from_record(rec) for rec in session.scalars(stmt)]

    def scan(self, resource_id: str | None = None) -> Iterator[IntervalSummary]:
        stmt = select(SummaryRecord).order_by(
            SummaryRecord.resource_id, SummaryRecord.granularity, SummaryRecord.start
        )
        if resource_id is not None:
            stmt = stmt.where(SummaryRecord.resource_id == resource_id)
        with self._session_factory() as session:
            for rec in session.scalars(stmt):
                yield _from_record(rec)

    def count(self) -> int:
        with self._session_factory() as session:
            return int(session.scalar(select(func.count()).select_from(SummaryRecord)) or 0)

    def export_jsonl(self, path: str | Path) -> int:
        """Write every summary as one JSON line in key order; used for byte comparison."""
        n = 0
        with open(path, "w", encoding="utf-8") as f:
            for s in self.scan():
                f.write(json.dumps(s.as_dict(), sort_keys=True) + "\n")
                n += 1
        return n

    def close(self) -> None:
        bind = self._session_factory.kw.get("bind")
        if bind is not None:
            bind.dispose()

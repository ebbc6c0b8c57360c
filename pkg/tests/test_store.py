from __future__ import annotations

import json

import pytest

from schoolsense.directory import Directory, UnknownResource
from schoolsense.domain import (
    DAY_MS,
    FIVE_MIN_MS,
    Granularity,
    IntervalKey,
    IntervalSummary,
    Reading,
    ResourceDescriptor,
    SensorKind,
)
from schoolsense.storage import RawLog
from schoolsense.summaries import SummaryStore
from schoolsense.utils import folder_name, resource_from_folder

T0 = 1_506_931_200_000  # 2017-10-02T08:00:00Z


def _summary(rid: str, g: Granularity, start: int, avg: float) -> IntervalSummary:
    return IntervalSummary(rid, IntervalKey(g, start), avg, avg, avg, 1)


def test_put_get_and_last_write_wins(tmp_path):
    store = SummaryStore.at(tmp_path)
    key = IntervalKey(Granularity.FIVE_MIN, T0)
    store.put(_summary("R1.temperature", Granularity.FIVE_MIN, T0, 20.0))
    store.put(_summary("R1.temperature", Granularity.FIVE_MIN, T0, 21.0))
    assert store.get("R1.temperature", key).avg == 21.0
    assert store.get("R2.temperature", key) is None
    assert store.count() == 1


def test_range_returns_intersecting_intervals_in_order(tmp_path):
    store = SummaryStore.at(tmp_path)
    store.put_many(
        _summary("R1.temperature", Granularity.FIVE_MIN, T0 + i * FIVE_MIN_MS, float(i))
        for i in (3, 0, 2, 1)
    )
    store.put(_summary("R1.temperature", Granularity.HOUR, T0, 1.5))
    got = store.range("R1.temperature", Granularity.FIVE_MIN, T0 + 60_000, T0 + 3 * FIVE_MIN_MS)
    assert [s.avg for s in got] == [0.0, 1.0, 2.0]
    assert store.range("R1.temperature", Granularity.HOUR, T0 + 1, T0 + 2)[0].avg == 1.5
    assert store.range("R2.temperature", Granularity.FIVE_MIN, T0, T0 + DAY_MS) == []


def test_summary_fields_survive_the_store(tmp_path):
    store = SummaryStore.at(tmp_path)
    s = IntervalSummary(
        "M1.current",
        IntervalKey(Granularity.HOUR, T0),
        2300.0,
        2000.0,
        2600.0,
        120,
        energy_wh=2300.0,
    )
    store.put(s)
    assert store.get("M1.current", s.interval) == s


def test_export_is_sorted_json_lines(tmp_path):
    store = SummaryStore.at(tmp_path)
    store.put(_summary("b.x", Granularity.HOUR, T0, 1.0))
    store.put(_summary("a.x", Granularity.DAY, T0 - 8 * 3_600_000, 2.0))
    store.put(_summary("a.x", Granularity.FIVE_MIN, T0, 3.0))
    out = tmp_path / "export.jsonl"
    assert store.export_jsonl(out) == 3
    rows = [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines()]
    assert [(r["resource_id"], r["avg"]) for r in rows] == [
        ("a.x", 3.0),
        ("a.x", 2.0),
        ("b.x", 1.0),
    ]


def test_raw_log_segments_by_day_and_quarantines_unknown(tmp_path, directory):
    log = RawLog(tmp_path, registered=directory)
    log.append_raw(Reading("R1.temperature", "R1", "temperature", 20.0, T0))
    log.append_raw(Reading("R1.temperature", "R1", "temperature", 21.0, T0 + DAY_MS))
    log.append_raw(Reading("R9.co2", "R9", "co2", 410.0, T0))
    log.flush()
    segments = sorted(p.name for p in (tmp_path / "raw" / "R1.temperature").iterdir())
    assert segments == ["2017-10-02.log", "2017-10-03.log"]
    assert [r.value for r in log.get_raw("R1.temperature", T0, T0 + 2 * DAY_MS)] == [20.0, 21.0]
    assert log.get_raw("R1.temperature", T0 + 1, T0 + DAY_MS) == []
    (q,) = log.get_quarantined(T0, T0 + 1)
    assert q.resource_id == "R9.co2"
    assert log.resources() == ["R1.temperature"]
    assert log.span("R1.temperature") == (T0 - 8 * 3_600_000, T0 - 8 * 3_600_000 + 2 * DAY_MS)
    assert (log.appended, log.quarantined) == (2, 1)


def test_raw_log_rejects_bad_queries(tmp_path, directory):
    log = RawLog(tmp_path, registered=directory)
    with pytest.raises(ValueError):
        log.get_raw("R1.temperature", T0, T0)
    with pytest.raises(UnknownResource):
        log.get_raw("R9.co2", T0, T0 + 1)
    assert log.span("R1.temperature") is None


def test_raw_log_readers_only_see_flushed_lines(tmp_path):
    writer = RawLog(tmp_path, buffer_lines=1000)
    writer.append_raw(Reading("R1.temperature", "R1", "temperature", 20.0, T0))
    reader = RawLog(tmp_path)
    assert reader.resources() == []
    writer.close()
    assert reader.resources() == ["R1.temperature"]


def test_raw_log_keeps_look_alike_ids_apart(tmp_path):
    directory = Directory()
    kind = SensorKind.ENVIRONMENTAL
    for device in ("a:b", "a_b", "_quarantine"):
        directory.register(ResourceDescriptor(f"{device}.temperature", device, "temperature", kind))
    log = RawLog(tmp_path, registered=directory)
    for value, device in enumerate(("a:b", "a_b", "_quarantine"), start=1):
        log.append_raw(Reading(f"{device}.temperature", device, "temperature", float(value), T0))
    got = log.get_raw("a:b.temperature", T0, T0 + 1)
    assert [(r.resource_id, r.device, r.value) for r in got] == [("a:b.temperature", "a:b", 1.0)]
    assert [r.value for r in log.get_raw("a_b.temperature", T0, T0 + 1)] == [2.0]
    assert log.resources() == ["_quarantine.temperature", "a:b.temperature", "a_b.temperature"]
    assert log.get_quarantined(T0, T0 + 1) == []
    assert log.span("a:b.temperature") is not None


def test_folder_names_round_trip():
    for rid in ("00:13:A2:00:41:5B.temperature", "site/a/R1.co2", "..", "_x", "a%2Fb", "R1.temp"):
        name = folder_name(rid)
        assert "/" not in name and name not in (".", "..") and not name.startswith("_")
        assert resource_from_folder(name) == rid
    assert folder_name("R1.temperature") == "R1.temperature"

from __future__ import annotations

import pytest

from schoolsense.directory import UnknownResource
from schoolsense.domain import (
    DAY_MS,
    FIVE_MIN_MS,
    Granularity,
    InvalidConfig,
    Reading,
    ResourceDescriptor,
    SensorKind,
)
from schoolsense.engine import Engine
from schoolsense.query import (
    ApiKey,
    Dispatcher,
    InvalidQuery,
    KeyTable,
    QueryRequest,
    QueryService,
    RangeTooLarge,
    UnknownSubscription,
    authorize,
)
from schoolsense.summaries import SummaryStore

T0 = 1_506_931_200_000


def _service(tmp_path, directory) -> QueryService:
    store = SummaryStore.at(tmp_path)
    engine = Engine(directory, store)
    for i in range(36):
        engine.submit(Reading("R1.temperature", "R1", "temperature", 20.0 + i % 3, T0 + i * 60_000))
    return QueryService(directory, store)


def test_historical_returns_selected_fields(tmp_path, directory):
    service = _service(tmp_path, directory)
    q = QueryRequest("R1.temperature", Granularity.FIVE_MIN, T0, T0 + 15 * 60_000, ("avg", "count"))
    result = service.historical(q)
    rows = result.rows()
    assert [r["start"] for r in rows] == [T0, T0 + FIVE_MIN_MS, T0 + 2 * FIVE_MIN_MS]
    assert set(rows[0]) == {"resource_id", "granularity", "start", "end", "avg", "count"}
    assert rows[0]["count"] == 5
    assert result.latency_ms >= 0


def test_historical_validation(tmp_path, directory):
    service = _service(tmp_path, directory)
    with pytest.raises(InvalidQuery):
        service.historical(QueryRequest("R1.temperature", Granularity.HOUR, T0, T0))
    with pytest.raises(InvalidQuery):
        service.historical(
            QueryRequest("R1.temperature", Granularity.HOUR, T0, T0 + 1, ("median",))
        )
    with pytest.raises(RangeTooLarge):
        service.historical(QueryRequest("R1.temperature", Granularity.DAY, T0, T0 + 1831 * DAY_MS))
    with pytest.raises(UnknownResource):
        service.historical(QueryRequest("R9.temperature", Granularity.DAY, T0, T0 + DAY_MS))


def test_power_rows_carry_energy_and_rain_rows_carry_total(tmp_path, directory):
    store = SummaryStore.at(tmp_path)
    engine = Engine(directory, store)
    engine.submit(Reading("M1.current", "M1", "current", 10.0, T0))
    engine.submit(Reading("WX.rain", "WX", "rain", 0.4, T0))
    service = QueryService(directory, store)
    (power,) = service.historical(
        QueryRequest("M1.current", Granularity.FIVE_MIN, T0, T0 + 1)
    ).rows()
    assert power["energy"] == pytest.approx(2300.0 / 12)
    (rain,) = service.historical(QueryRequest("WX.rain", Granularity.HOUR, T0, T0 + 1)).rows()
    assert rain["total"] == pytest.approx(0.4)
    assert rain["energy"] is None


def test_register_and_list_resources(directory):
    service = QueryService(directory, store=None)
    rid = service.register_resource(
        ResourceDescriptor("R3.noise", "R3", "noise", SensorKind.ENVIRONMENTAL, site_id="site-a")
    )
    assert rid == "R3.noise"
    assert "R3.noise" in [d.resource_id for d in service.list_resources("site-a")]


def test_dispatcher_filters_and_preserves_order(directory):
    dispatcher = Dispatcher(directory)
    only_r1 = dispatcher.subscribe(["R1.temperature"])
    everything = dispatcher.subscribe()
    engine = Engine(directory)
    engine.add_listener(dispatcher.publish)
    engine.add_raw_listener(dispatcher.publish_raw)
    engine.submit(Reading("R1.temperature", "R1", "temperature", 20.0, T0))
    engine.submit(Reading("R2.temperature", "R2", "temperature", 19.0, T0))
    engine.submit(Reading("R1.temperature", "R1", "temperature", 22.0, T0 + 1000))
    mine = only_r1.poll()
    assert {u.resource_id for u in mine} == {"R1.temperature"}
    raw = [u for u in mine if isinstance(u, Reading)]
    assert [r.value for r in raw] == [20.0, 22.0]
    assert len(everything) == len(mine) + len(Granularity) + 1
    with pytest.raises(UnknownResource):
        dispatcher.subscribe(["R9.temperature"])


def test_slow_subscriber_drops_oldest(directory):
    dispatcher = Dispatcher(directory, queue_size=3)
    sub = dispatcher.subscribe(["R1.temperature"])
    for i in range(5):
        dispatcher.publish_raw(Reading("R1.temperature", "R1", "temperature", float(i), T0 + i))
    assert sub.dropped == 2
    assert [r.value for r in sub.poll(max_items=2)] == [2.0, 3.0]
    assert [r.value for r in sub.poll()] == [4.0]
    assert sub.delivered == 3


def test_unsubscribe(directory):
    dispatcher = Dispatcher(directory)
    sub = dispatcher.subscribe()
    dispatcher.unsubscribe(sub.sub_id)
    with pytest.raises(UnknownSubscription):
        dispatcher.get(sub.sub_id)
    with pytest.raises(UnknownSubscription):
        dispatcher.unsubscribe(sub.sub_id)


def test_key_table_scopes_resources(tmp_path):
    path = tmp_path / "keys.yaml"
    path.write_text(
        "keys:\n"
        "  - key: admin-key\n"
        "    name: operations\n"
        "  - key: staff-key\n"
        "    resources: [R1.temperature]\n",
        encoding="utf-8",
    )
    keys = KeyTable.from_yaml(path)
    assert len(keys) == 2
    q = QueryRequest("R2.temperature", Granularity.DAY, T0, T0 + DAY_MS)
    assert authorize(keys, "admin-key", q)
    assert not authorize(keys, "staff-key", q)
    assert authorize(keys, "staff-key", ["R1.temperature"])
    assert not authorize(keys, None, [])
    assert not authorize(KeyTable([ApiKey("k")]), "other", [])


def test_key_table_rejects_bad_documents(tmp_path):
    path = tmp_path / "keys.yaml"
    path.write_text("keys: admin\n", encoding="utf-8")
    with pytest.raises(InvalidConfig):
        KeyTable.from_yaml(path)
    with pytest.raises(InvalidConfig):
        KeyTable.from_yaml(tmp_path / "missing.yaml")


@pytest.mark.parametrize(
    "doc",
    [
        "keys:\n  - name: no key here\n",
        "keys:\n  - just-a-string\n",
        "keys:\n  - key: k\n    resources: R1.temperature\n",
    ],
)
def test_key_table_rejects_malformed_entries(tmp_path, doc):
    path = tmp_path / "keys.yaml"
    path.write_text(doc, encoding="utf-8")
    with pytest.raises(InvalidConfig, match="entry 0"):
        KeyTable.from_yaml(path)

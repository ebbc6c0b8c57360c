from __future__ import annotations

from collections import Counter, defaultdict
from datetime import date, timedelta
from itertools import islice

import pytest

from schoolsense.analytics import Series, detect_outliers
from schoolsense.analytics.series import local_date
from schoolsense.directory import Directory
from schoolsense.domain import HOUR_MS, InvalidConfig
from schoolsense.fleetsim import (
    FleetConfig,
    SiteClimate,
    WindowOpening,
    build_fleet,
    build_topology,
    generate,
)
from schoolsense.mappers.bus import parse_bus_message

FAST = {"environmental": 300, "weather": 300, "atmospheric": 300, "power": 300}


def test_default_fleet_shape():
    cfg = FleetConfig()
    topology = build_topology(cfg)
    resources = list(topology.resources())
    assert len(topology.sites) == 18
    assert len(resources) == 850
    assert topology.sites[0].name == "School A"
    assert topology.sites[-1].site_id == "site-18"
    assert sum(1 / r.reporting_period for r in resources) == pytest.approx(850 / 30)
    assert len({r.resource_id for r in resources}) == 850


def test_same_seed_same_stream():
    cfg = FleetConfig(sites=2, sensors=30, reporting_periods=FAST, noise_std=0.2, seed=5)
    first = list(build_fleet(cfg).readings())
    assert first == list(build_fleet(cfg).readings())
    reseeded = FleetConfig(sites=2, sensors=30, reporting_periods=FAST, noise_std=0.2, seed=6)
    assert first != list(build_fleet(reseeded).readings())


def test_stream_is_ordered_and_counts_match_ground_truth():
    cfg = FleetConfig(
        sites=2, sensors=30, days=2, reporting_periods=FAST, random_loss_day_rate=0.2
    )
    fleet = build_fleet(cfg)
    readings = list(fleet.readings())
    assert [r.timestamp for r in readings] == sorted(r.timestamp for r in readings)
    assert all(cfg.start_ms <= r.timestamp < cfg.end_ms for r in readings)
    assert len(readings) == fleet.truth.expected_total
    assert Counter(r.resource_id for r in readings) == +Counter(fleet.truth.expected_counts)


def test_loss_days_and_intervals_are_silent():
    start = FleetConfig().start_ms
    cfg = FleetConfig(
        sites=1,
        sensors=12,
        days=3,
        reporting_periods=FAST,
        loss_days={"S01R01.humidity": [date(2017, 10, 3)]},
        loss_intervals=[("S01M1.current", start + 6 * HOUR_MS, start + 9 * HOUR_MS)],
    )
    fleet = build_fleet(cfg)
    seen = defaultdict(set)
    for r in fleet.readings():
        seen[r.resource_id].add(local_date(r.timestamp, cfg.timezone))
        if r.resource_id == "S01M1.current":
            assert not start + 6 * HOUR_MS <= r.timestamp < start + 9 * HOUR_MS
    assert seen["S01R01.humidity"] == {date(2017, 10, 2), date(2017, 10, 4)}
    assert fleet.truth.loss_calendar == {"S01R01.humidity": {date(2017, 10, 3)}}
    assert len(seen["S01R01.temperature"]) == 3


def test_injected_outliers_are_recovered_without_false_flags():
    cfg = FleetConfig(sites=1, sensors=16, days=3, reporting_periods=FAST, outlier_rate=0.02)
    fleet = build_fleet(cfg)
    by_resource = defaultdict(list)
    for r in fleet.readings():
        by_resource[r.resource_id].append(r)
    injected = recovered = 0
    for rid, readings in by_resource.items():
        if not rid.endswith((".temperature", ".humidity")):
            continue
        truth = fleet.truth.outliers.get(rid, set())
        _, flags = detect_outliers(Series.from_readings(readings), 24 * HOUR_MS)
        flagged = {f.timestamp for f in flags}
        assert flagged <= truth, rid
        injected += len(truth)
        recovered += len(flagged & truth)
    assert injected > 20
    assert recovered >= 0.95 * injected


def test_outliers_skip_warmup_and_rain():
    cfg = FleetConfig(sites=1, sensors=8, days=2, reporting_periods=FAST, outlier_rate=0.05)
    fleet = build_fleet(cfg)
    warmup_end = cfg.start_ms + 24 * HOUR_MS
    assert "S01WX.rain" not in fleet.truth.outliers
    assert all(ts >= warmup_end for stamps in fleet.truth.outliers.values() for ts in stamps)


def test_generate_yields_parseable_bus_messages():
    cfg = FleetConfig(sites=1, sensors=12, reporting_periods=FAST)
    topology, messages, truth = generate(cfg)
    directory = Directory.from_topology(topology)
    parsed = [parse_bus_message(m, 1, directory) for m in islice(messages, 50)]
    assert parsed[0].timestamp >= cfg.start_ms
    assert truth.expected_total == 12 * 288


@pytest.mark.parametrize(
    "overrides",
    [
        {"sites": 0},
        {"sites": 3, "sensors": 2},
        {"days": 0},
        {"timezone": "Mars/Olympus"},
        {"outlier_rate": 1.5},
        {"noise_std": -1.0},
        {"reporting_periods": {"power": 0}},
    ],
)
def test_invalid_configs(overrides):
    with pytest.raises(InvalidConfig):
        FleetConfig(**overrides).validate()


def test_config_from_yaml(tmp_path):
    path = tmp_path / "fleet.yaml"
    path.write_text(
        "sites: 2\n"
        "sensors: 24\n"
        "days: 2\n"
        "start: 2017-10-09\n"
        "reporting_periods: {power: 60}\n"
        "loss_days:\n"
        "  S01R01.temperature: [2017-10-10]\n"
        "loss_intervals:\n"
        "  - {resource_id: S01M1.current, start: 1507530000000, end: 1507533600000}\n"
        "outlier_rate: 0.01\n",
        encoding="utf-8",
    )
    cfg = FleetConfig.from_yaml(path)
    assert cfg.start == date(2017, 10, 9)
    assert cfg.last_day == cfg.start + timedelta(days=1)
    assert cfg.reporting_periods["power"] == 60
    assert cfg.reporting_periods["environmental"] == 30
    assert cfg.loss_days == {"S01R01.temperature": [date(2017, 10, 10)]}
    assert cfg.loss_intervals == [("S01M1.current", 1507530000000, 1507533600000)]
    path.write_text("- just a list\n", encoding="utf-8")
    with pytest.raises(InvalidConfig):
        FleetConfig.from_yaml(path)
    path.write_text("sites: many\n", encoding="utf-8")
    with pytest.raises(InvalidConfig):
        FleetConfig.from_yaml(path)


def test_site_timezone_override_keeps_conservation_and_local_loss_days():
    lost = date(2017, 10, 2)
    cfg = FleetConfig(
        sites=2,
        sensors=24,
        reporting_periods=FAST,
        climates={"site-02": SiteClimate(timezone="Europe/Lisbon")},
        loss_days={"S02R01.temperature": [lost]},
    )
    fleet = build_fleet(cfg)
    assert fleet.topology.site("site-01").timezone == "Europe/Athens"
    assert fleet.topology.site("site-02").timezone == "Europe/Lisbon"
    readings = list(fleet.readings())
    assert len(readings) == fleet.truth.expected_total
    lisbon_days = Counter(
        local_date(r.timestamp, "Europe/Lisbon")
        for r in readings
        if r.resource_id == "S02R01.temperature"
    )
    assert lisbon_days[lost] == 0
    assert lisbon_days[lost - timedelta(days=1)] > 0
    assert fleet.truth.loss_calendar["S02R01.temperature"] == {lost}


def test_site_climate_shapes_outdoor_signals():
    cfg = FleetConfig(
        sites=2,
        sensors=24,
        reporting_periods=FAST,
        climates={
            "site-01": SiteClimate(outdoor_mean_c=20.0, wind_mean=2.0),
            "site-02": SiteClimate(outdoor_mean_c=11.0, outdoor_swing_c=0.0),
        },
    )
    fleet = build_fleet(cfg)
    outdoor = defaultdict(list)
    for r in fleet.readings():
        if r.sensor in ("temperature", "wind_speed") and "WX" in r.device:
            outdoor[r.resource_id].append(r.value)
    assert sum(outdoor["S01WX.temperature"]) / 288 == pytest.approx(20.0, abs=0.1)
    assert set(outdoor["S02WX.temperature"]) == {11.0}
    assert min(outdoor["S01WX.wind_speed"]) >= 1.5


def test_weekend_ramp_and_window_opening_fixtures():
    saturday = date(2017, 10, 7)
    cfg = FleetConfig(start=saturday, sites=1, sensors=12, reporting_periods=FAST)
    cfg.weekend_ramps = {"S01R01.temperature": (20.0, 32.0)}
    signal = build_fleet(cfg).truth.signal
    start = cfg.start_ms
    assert signal("S01R01.temperature", start + 6 * HOUR_MS) == pytest.approx(20.0)
    assert signal("S01R01.temperature", start + 10 * HOUR_MS) == pytest.approx(26.0)
    assert signal("S01R01.temperature", start + 15 * HOUR_MS) == pytest.approx(32.0)
    opening = WindowOpening("x", 0, 2.0)
    assert [opening.offset(m * 60_000) for m in (-1, 5, 10, 29)] == [0.0, -1.0, -2.0, -2.0]
    assert opening.offset(30 * 60_000 + 90 * 60_000) == pytest.approx(-1.0)
    assert opening.offset(30 * 60_000 + 3 * HOUR_MS) == 0.0


def test_fixture_sections_from_yaml(tmp_path):
    path = tmp_path / "fleet.yaml"
    path.write_text(
        "sites: 2\n"
        "sensors: 24\n"
        "climates:\n"
        "  site-02: {timezone: Europe/Berlin, outdoor_mean_c: 11, wind_mean: 0.5}\n"
        "weekend_ramps:\n"
        "  S01R01.temperature: [20, 32]\n"
        "window_openings:\n"
        "  - {resource_id: S01R01.temperature, start: '2017-10-07T14:00:00Z', drop_c: 2.5}\n",
        encoding="utf-8",
    )
    cfg = FleetConfig.from_yaml(path)
    assert cfg.climates["site-02"] == SiteClimate("Europe/Berlin", 11.0, 6.0, 0.5)
    assert cfg.site_timezone("site-02") == "Europe/Berlin"
    assert cfg.site_timezone("site-01") == "Europe/Athens"
    assert cfg.weekend_ramps == {"S01R01.temperature": (20.0, 32.0)}
    (opening,) = cfg.window_openings
    assert (opening.start, opening.drop_c) == (1507384800000, 2.5)
    path.write_text("climates:\n  site-01: {timezone: Mars/Olympus}\n", encoding="utf-8")
    with pytest.raises(InvalidConfig):
        FleetConfig.from_yaml(path)

from __future__ import annotations

from datetime import date

import pytest

from schoolsense.analytics import NoData, availability_report
from schoolsense.cli import KIND_HEADERS, MATRIX_HEADERS, SITE_HEADERS
from schoolsense.directory import Directory
from schoolsense.fleetsim import FleetConfig, build_fleet
from schoolsense.storage import RawLog


def _stored_fleet(tmp_path, **overrides):
    cfg = FleetConfig(
        sites=2,
        sensors=24,
        days=4,
        reporting_periods={"environmental": 300, "weather": 600, "atmospheric": 600, "power": 300},
        **overrides,
    )
    fleet = build_fleet(cfg)
    directory = Directory.from_topology(fleet.topology)
    log = RawLog(tmp_path, registered=directory)
    for reading in fleet.readings():
        log.append_raw(reading)
    log.flush()
    return cfg, fleet, log


def test_loss_calendar_is_recovered_exactly(tmp_path):
    cfg, fleet, log = _stored_fleet(
        tmp_path,
        loss_days={"S01R01.temperature": [date(2017, 10, 3)]},
        random_loss_day_rate=0.1,
        seed=11,
    )
    report = availability_report(fleet.topology, log, cfg.start, cfg.last_day)
    assert report.loss_calendar() == fleet.truth.loss_calendar
    assert date(2017, 10, 3) in report.loss_calendar()["S01R01.temperature"]
    lost = sum(len(days) for days in fleet.truth.loss_calendar.values())
    total_outage = sum(s.outage_pct * s.sensors * cfg.days for s in report.sites) / 100
    assert total_outage == pytest.approx(lost)
    assert sum(s.measurements for s in report.sites) == fleet.truth.expected_total


def test_report_rows_match_published_headers(tmp_path):
    cfg, fleet, log = _stored_fleet(tmp_path)
    report = availability_report(fleet.topology, log, cfg.start, cfg.last_day)
    assert tuple(report.site_rows()[0]) == SITE_HEADERS
    assert tuple(report.kind_rows()[0]) == KIND_HEADERS
    assert tuple(report.matrix_rows()[0]) == MATRIX_HEADERS
    first = report.site_rows()[0]
    assert first["Site"] == "School A"
    assert first["Sensors"] == 12
    # room R1 and five site-level devices
    assert first["POS"] == 6
    assert first["Outages"] == 0.0
    assert {k.kind for k in report.kinds} == {"atmospheric", "environmental", "power", "weather"}
    assert len(report.matrix_rows()) == 24 * 4


def test_period_before_incorporation_has_no_data(tmp_path):
    cfg, fleet, log = _stored_fleet(tmp_path)
    with pytest.raises(NoData):
        availability_report(fleet.topology, log, cfg.start, date(2017, 9, 1))

from __future__ import annotations

from datetime import datetime, timezone

import pytest

from schoolsense.domain import (
    DAY_MS,
    FIVE_MIN_MS,
    HOUR_MS,
    Granularity,
    IntervalKey,
    InvalidReading,
    Reading,
    align,
    format_instant,
    interval_end,
    parse_instant,
    to_epoch_ms,
)


def _ms(*args: int) -> int:
    return to_epoch_ms(datetime(*args, tzinfo=timezone.utc))


def test_align_fixed_widths():
    ts = _ms(2017, 10, 2, 9, 47, 31)
    five = IntervalKey(Granularity.FIVE_MIN, _ms(2017, 10, 2, 9, 45))
    assert align(ts, Granularity.FIVE_MIN) == five
    assert align(ts, Granularity.HOUR).start == _ms(2017, 10, 2, 9)
    assert align(ts, Granularity.DAY).start == _ms(2017, 10, 2)
    assert align(ts, Granularity.FIVE_MIN).width_ms == FIVE_MIN_MS


def test_align_calendar_widths():
    ts = _ms(2016, 2, 15, 12)
    month = align(ts, Granularity.MONTH)
    assert month.start == _ms(2016, 2, 1)
    assert month.end == _ms(2016, 3, 1)
    assert month.width_ms == 29 * DAY_MS
    year = align(ts, Granularity.YEAR)
    assert year.start == _ms(2016, 1, 1)
    assert year.width_ms == 366 * DAY_MS
    assert interval_end(Granularity.MONTH, _ms(2017, 12, 1)) == _ms(2018, 1, 1)


def test_align_boundary_belongs_to_next_interval():
    ts = _ms(2017, 10, 2, 10)
    assert align(ts, Granularity.HOUR).start == ts
    assert align(ts - 1, Granularity.HOUR).start == ts - HOUR_MS


def test_align_rejects_timestamps_before_the_epoch():
    with pytest.raises(InvalidReading):
        align(-1, Granularity.HOUR)


@pytest.mark.parametrize("g", list(Granularity))
def test_align_is_idempotent_in_the_first_days_of_1970(g):
    for ts in (1, _ms(1970, 1, 1, 12), _ms(1970, 1, 20, 3)):
        key = align(ts, g)
        assert align(key.start, g) == key
    if g >= Granularity.DAY:
        assert align(_ms(1970, 1, 1, 12), g).start == 0


def test_granularity_labels_and_parents():
    assert Granularity.from_label("5min") is Granularity.FIVE_MIN
    assert Granularity.from_label("Day") is Granularity.DAY
    assert Granularity.from_label("five_min") is Granularity.FIVE_MIN
    assert Granularity.HOUR.parent is Granularity.DAY
    assert Granularity.YEAR.parent is None
    with pytest.raises(ValueError):
        Granularity.from_label("week")


def test_reading_validation():
    Reading("R1.temperature", "R1", "temperature", 21.5, 1)
    with pytest.raises(InvalidReading):
        Reading("R1.temperature", "R1", "temperature", float("nan"), 1)
    with pytest.raises(InvalidReading):
        Reading("R1.temperature", "R1", "temperature", 21.5, 0)


def test_parse_and_format_instants():
    assert parse_instant("2017-10-02") == _ms(2017, 10, 2)
    assert parse_instant("2017-10-02T08:00:00Z") == _ms(2017, 10, 2, 8)
    assert parse_instant("2017-10-02T11:00:00+03:00") == _ms(2017, 10, 2, 8)
    assert parse_instant("1506931200000") == 1506931200000
    assert format_instant(_ms(2017, 10, 2, 8)) == "2017-10-02T08:00:00Z"

from __future__ import annotations

import random

import numpy as np
import pytest

from schoolsense.analytics import EmptySeries, Series, detect_outliers
from schoolsense.analytics.quality import fences, outlier_report
from schoolsense.domain import FIVE_MIN_MS, HOUR_MS

T0 = 1_506_902_400_000  # 2017-10-02T00:00:00Z
DAY = 288


def _quartile(ordered: list[float], q: float) -> float:
    pos = q * (len(ordered) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(ordered) - 1)
    return ordered[lo] + (ordered[hi] - ordered[lo]) * (pos - lo)


def _brute_force(times: list[int], values: list[float], window_ms: int):
    flagged = {}
    for i, t in enumerate(times):
        if t < times[0] + window_ms:
            continue
        window = [v for tj, v in zip(times, values) if t - window_ms <= tj < t]
        if not window:
            continue
        ordered = sorted(window)
        q1, q3 = _quartile(ordered, 0.25), _quartile(ordered, 0.75)
        lower, upper = q1 - 3 * (q3 - q1), q3 + 3 * (q3 - q1)
        v = values[i]
        if lower <= v <= upper:
            continue
        inside = [w for w in window if lower <= w <= upper]
        if v < lower:
            flagged[i] = min(inside) if inside else lower
        else:
            flagged[i] = max(inside) if inside else upper
    return flagged


def test_detector_matches_sort_and_interpolate_oracle():
    rng = random.Random(7)
    n = DAY + 1000
    times = [T0 + i * FIVE_MIN_MS + rng.randrange(0, 60_000) for i in range(n)]
    values = []
    for _ in range(n):
        v = 20.0 + rng.gauss(0.0, 1.0)
        if rng.random() < 0.01:
            v += rng.choice([-1, 1]) * rng.uniform(5.0, 40.0)
        values.append(round(v, 3))
    clean, flags = detect_outliers(Series.from_pairs("R1.temperature", zip(times, values)))
    expected = _brute_force(times, values, 24 * HOUR_MS)
    assert expected
    assert {f.index: f.replacement for f in flags} == pytest.approx(expected)
    for f in flags:
        assert clean.values[f.index] == f.replacement
        assert f.original == values[f.index]
    untouched = [i for i in range(n) if i not in expected]
    assert np.array_equal(clean.values[untouched], np.asarray(values)[untouched])


def test_fences_use_interpolated_quartiles():
    assert fences(np.array([1.0, 2.0, 3.0, 4.0])) == pytest.approx((1.75 - 4.5, 3.25 + 4.5))


def test_zero_humidity_amid_fifty_percent_is_flagged():
    rng = random.Random(1)
    pairs = [(T0 + i * FIVE_MIN_MS, 50.0 + rng.uniform(-2.0, 2.0)) for i in range(2 * DAY)]
    pairs.append((T0 + 2 * DAY * FIVE_MIN_MS, 0.0))
    _, flags = detect_outliers(Series.from_pairs("R1.humidity", pairs))
    (flag,) = flags
    assert flag.fence == "lower"
    assert flag.original == 0.0
    assert 48.0 <= flag.replacement <= 52.0


def test_power_spike_far_above_spread_is_flagged():
    rng = random.Random(2)
    base = [2300.0 + rng.uniform(-50.0, 50.0) for _ in range(DAY + 1)]
    window = np.asarray(base[1:])
    q1, q3 = np.quantile(window, [0.25, 0.75])
    spike = float(q3 + 4 * (q3 - q1))
    pairs = [(T0 + i * FIVE_MIN_MS, v) for i, v in enumerate(base)]
    pairs.append((T0 + (DAY + 1) * FIVE_MIN_MS, spike))
    _, flags = detect_outliers(Series.from_pairs("M1.current", pairs))
    assert [f.fence for f in flags] == ["upper"]
    assert flags[0].replacement == pytest.approx(window.max())


def test_first_window_is_never_flagged():
    pairs = [(T0 + i * FIVE_MIN_MS, 20.0) for i in range(DAY)]
    pairs[10] = (pairs[10][0], 500.0)
    _, flags = detect_outliers(Series.from_pairs("R1.temperature", pairs))
    assert flags == []


def test_outlier_report_rows_and_empty_series():
    pairs = [(T0 + i * FIVE_MIN_MS, 20.0 + (i % 2) * 0.1) for i in range(DAY)]
    pairs.append((T0 + DAY * FIVE_MIN_MS, 90.0))
    (row,) = outlier_report(Series.from_pairs("R1.temperature", pairs))
    assert row["index"] == DAY
    assert row["original"] == 90.0
    assert row["replacement"] == pytest.approx(20.1)
    assert outlier_report(Series.from_pairs("R1.temperature", [])) == []
    with pytest.raises(EmptySeries):
        detect_outliers(Series.from_pairs("R1.temperature", []))
    with pytest.raises(ValueError):
        detect_outliers(Series.from_pairs("R1.temperature", pairs), window_ms=0)

from .comfort import (
    ComfortBand,
    DailyComfort,
    NoEvaluableHours,
    SiteComfort,
    comfort_band,
    daily_comfort,
    prevailing_mean,
    site_comfort,
)
from .performance import (
    NoWeekendData,
    PerformanceReport,
    ThermalEvent,
    activity_comparison,
    detect_events,
    temperature_histogram,
    weather_joined_rows,
    weekend_performance,
)
from .quality import (
    NoData,
    OutlierFlag,
    QualityReport,
    availability_report,
    detect_outliers,
    fill_gaps,
)
from .series import EmptySeries, Series

__all__ = [
    "ComfortBand",
    "DailyComfort",
    "NoEvaluableHours",
    "SiteComfort",
    "comfort_band",
    "daily_comfort",
    "prevailing_mean",
    "site_comfort",
    "NoWeekendData",
    "PerformanceReport",
    "ThermalEvent",
    "activity_comparison",
    "detect_events",
    "temperature_histogram",
    "weather_joined_rows",
    "weekend_performance",
    "NoData",
    "OutlierFlag",
    "QualityReport",
    "availability_report",
    "detect_outliers",
    "fill_gaps",
    "EmptySeries",
    "Series",
]

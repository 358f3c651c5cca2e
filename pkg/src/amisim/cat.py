"""Change-and-transmit reporting: decision rule, pattern/EU-view derivation,
efficiency, and aggregated-error statistics.

A meter under CAT sends a reading only when it moved by more than a
percentage threshold relative to the last reported reading; the utility
carries the last reported value forward through silent slots.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from amisim.data.traces import ConsumptionTrace, DayRecord, VALID_GRANULARITIES, resample
from amisim.errors import ConfigError


@dataclass(frozen=True)
class CatConfig:
    threshold_percent: float
    granularity_minutes: int

    def __post_init__(self):
        if not 0 < self.threshold_percent < 100:
            raise ConfigError(
                f"threshold_percent must be in (0, 100), got {self.threshold_percent}"
            )
        if self.granularity_minutes not in VALID_GRANULARITIES:
            raise ConfigError(
                f"granularity must be one of {VALID_GRANULARITIES}, "
                f"got {self.granularity_minutes}"
            )


@dataclass(frozen=True)
class TransmissionPattern:
    """Per-day transmit/no-transmit bits, one per slot."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        bits.setflags(write=False)
        if not np.all((bits == 0) | (bits == 1)):
            raise ConfigError("pattern bits must be 0/1")
        object.__setattr__(self, "bits", bits)

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class EuView:
    """Per-slot reading the utility effectively holds after suppression."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def cat_decide(current: float, last_reported: float, threshold_percent: float) -> bool:
    """True when the reading changed enough (strictly) to be worth sending.

    With a zero baseline the percentage change is undefined; any positive
    consumption then transmits.
    """
    if last_reported == 0.0:
        return current > 0.0
    return abs(current - last_reported) / last_reported * 100.0 > threshold_percent


def apply_cat(day: DayRecord, config: CatConfig, initial_last: float | None = None):
    """Run CAT over one day; returns (pattern, eu_view, final_last).

    initial_last is the last reported reading carried in from the previous
    day; None means this is the first-ever slot, which always transmits.
    final_last feeds the next day's call so state chains across days.
    """
    readings = day.readings
    bits = np.zeros(len(readings), dtype=np.uint8)
    values = np.empty(len(readings), dtype=np.float64)
    last = initial_last
    for t, current in enumerate(readings):
        current = float(current)
        if last is None or cat_decide(current, last, config.threshold_percent):
            bits[t] = 1
            last = current
        values[t] = last
    return TransmissionPattern(bits=bits), EuView(values=values), last


def patterns_for_traces(traces: list[ConsumptionTrace], config: CatConfig):
    """Chain apply_cat across each trace's days.

    Returns (patterns, eu_views): dicts keyed by (consumer_id, ISO date).
    Traces are resampled to the config granularity when needed.
    """
    patterns: dict = {}
    eu_views: dict = {}
    for trace in traces:
        working = resample(trace, config.granularity_minutes)
        last = None
        for day in working.days():
            pattern, view, last = apply_cat(day, config, last)
            key = (day.consumer_id, day.date.isoformat())
            patterns[key] = pattern
            eu_views[key] = view
    return patterns, eu_views


def efficiency(periodic_count: int, transmitted_count: int) -> float:
    """Share of readings saved versus always-transmit, in percent."""
    if periodic_count <= 0:
        raise ConfigError("periodic_count must be > 0")
    if not 0 <= transmitted_count <= periodic_count:
        raise ConfigError(
            f"transmitted_count {transmitted_count} outside [0, {periodic_count}]"
        )
    return (periodic_count - transmitted_count) / periodic_count * 100.0


def efficiency_table(
    traces: list[ConsumptionTrace],
    thresholds: list[float],
    rates: list[int],
) -> dict[tuple[int, float], float]:
    """Efficiency over the whole corpus for every (rate, threshold) pair.

    Expects 1-min traces so each requested rate can be derived by
    resampling. Keys of the result are (rate_minutes, threshold_percent).
    """
    for trace in traces:
        if trace.granularity_minutes != 1:
            raise ConfigError("efficiency_table expects 1-min traces")
    table: dict[tuple[int, float], float] = {}
    for rate in rates:
        resampled = [resample(t, rate) for t in traces]
        for threshold in thresholds:
            config = CatConfig(threshold_percent=threshold, granularity_minutes=rate)
            total = 0
            sent = 0
            for trace in resampled:
                last = None
                for day in trace.days():
                    pattern, _, last = apply_cat(day, config, last)
                    total += len(pattern.bits)
                    sent += pattern.count()
            table[(rate, threshold)] = efficiency(total, sent)
    return table


def aggregate_error_cdf(day_records, eu_views):
    """Empirical CDF of the per-slot aggregated reading error, in percent.

    day_records and eu_views are parallel dicts keyed by (consumer, date);
    slots are aligned by date across consumers. Error at a slot is
    (sum of true readings - sum of EU-view readings) / sum of true x 100.
    Slots whose true aggregate is zero are skipped and counted.

    Returns (cdf_points, skipped) where cdf_points is a list of
    (error_percent, cumulative_probability) sorted by error.
    """
    by_date: dict[str, list] = {}
    for key, day in day_records.items():
        by_date.setdefault(key[1], []).append((day, eu_views[key]))

    errors = []
    skipped = 0
    for date_iso in sorted(by_date):
        pairs = by_date[date_iso]
        truth = np.sum([np.asarray(d.readings) for d, _ in pairs], axis=0)
        held = np.sum([np.asarray(v.values) for _, v in pairs], axis=0)
        for t in range(len(truth)):
            if truth[t] == 0.0:
                skipped += 1
                continue
            errors.append((truth[t] - held[t]) / truth[t] * 100.0)

    errors.sort()
    n = len(errors)
    cdf = [(float(e), (i + 1) / n) for i, e in enumerate(errors)]
    return cdf, skipped


def write_efficiency_csv(path, table: dict[tuple[int, float], float]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "rate", "efficiency"])
        for (rate, threshold) in sorted(table):
            writer.writerow([threshold, rate, f"{table[(rate, threshold)]:.6f}"])


def write_cdf_csv(path, cdf_points):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["error_percent", "cdf"])
        for err, p in cdf_points:
            writer.writerow([f"{err:.9f}", f"{p:.9f}"])

"""Case-count time series: CSV loading, probability normalisation, smoothing.

Daily counts are turned into "chances of infection": the daily probability
density is new cases over population and the cumulative probability is its
running sum.
"""

from __future__ import annotations

import csv
import datetime as _dt
import enum
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import InputError, ParameterError, RowError, SchemaError

log = logging.getLogger(__name__)

DEFAULT_SMOOTHING_WINDOW = 7


class SeriesKind(str, enum.Enum):
    RAW_DAILY_CASES = "raw_daily_cases"
    CUMULATIVE_PROBABILITY = "cumulative_probability"
    DAILY_PROBABILITY_DENSITY = "daily_probability_density"


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """One value per calendar day starting at ``origin_date``."""

    origin_date: _dt.date
    values: np.ndarray
    population: int
    kind: SeriesKind = SeriesKind.RAW_DAILY_CASES
    label: str = ""

    def __post_init__(self):
        values = _frozen_array(self.values)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", SeriesKind(self.kind))
        if values.ndim != 1 or values.size < 1:
            raise InputError("time series needs at least one value")
        if not np.all(np.isfinite(values)):
            raise InputError("time series values must be finite")
        if int(self.population) <= 0:
            raise InputError("population must be a positive integer")
        object.__setattr__(self, "population", int(self.population))
        if self.kind is SeriesKind.CUMULATIVE_PROBABILITY:
            if np.any(np.diff(values) < 0):
                raise InputError("cumulative probability must be non-decreasing")
            if values[0] < 0 or values[-1] > 1:
                raise InputError("cumulative probability must lie in [0, 1]")
        elif self.kind is SeriesKind.DAILY_PROBABILITY_DENSITY:
            if np.any(values < 0):
                raise InputError("probability density must be non-negative")

    def __len__(self):
        return self.values.size

    @property
    def days(self) -> np.ndarray:
        return np.arange(self.values.size, dtype=float)

    def dates(self) -> list[_dt.date]:
        return [self.origin_date + _dt.timedelta(days=i) for i in range(len(self))]

    def with_values(self, values, kind=None) -> "TimeSeries":
        return TimeSeries(self.origin_date, values, self.population,
                          self.kind if kind is None else kind, self.label)


@dataclass(frozen=True)
class ColumnMap:
    date_column: str
    cases_column: str
    population_column: Optional[str] = None
    population_override: Optional[int] = None
    date_format: str = "auto"   # "auto", "iso", "dmy" or a strptime pattern

    def __post_init__(self):
        if (self.population_column is None) == (self.population_override is None):
            raise ParameterError(
                "exactly one of population_column / population_override is required")
        if self.population_override is not None and int(self.population_override) <= 0:
            raise ParameterError("population_override must be positive")


_DATE_PATTERNS = {"iso": ("%Y-%m-%d",), "dmy": ("%d/%m/%Y", "%d.%m.%Y", "%d-%m-%Y")}


def _date_parser(fmt: str, sample: str):
    if fmt == "auto":
        for key in ("iso", "dmy"):
            for pattern in _DATE_PATTERNS[key]:
                try:
                    _dt.datetime.strptime(sample.strip(), pattern)
                except ValueError:
                    continue
                return pattern
        return None
    patterns = _DATE_PATTERNS.get(fmt, (fmt,))
    return patterns[0]


def _sniff_delimiter(text: str) -> str:
    header = text.splitlines()[0]
    try:
        return csv.Sniffer().sniff(header, delimiters=",;\t").delimiter
    except csv.Error:
        counts = {d: header.count(d) for d in ",;\t"}
        return max(counts, key=counts.get)


def _parse_number(text: str, line: int, column: str) -> float:
    cleaned = text.strip().replace(" ", "")
    if cleaned == "":
        return 0.0
    try:
        value = float(cleaned)
    except ValueError:
        raise RowError(line, f"cannot parse {column!r} value {text!r}") from None
    if not math.isfinite(value):
        raise RowError(line, f"non-finite {column!r} value {text!r}")
    return value


def load_csv(path, colmap: ColumnMap, label: str = "") -> TimeSeries:
    """Read daily case counts from a delimited file with a header row.

    Days missing between the first and last reported date are zero-filled
    and rows reporting the same day are summed.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8-sig")
    if not text.strip():
        raise InputError(f"{path}: empty file")
    delimiter = _sniff_delimiter(text)
    reader = csv.reader(text.splitlines(), delimiter=delimiter)
    header = [h.strip() for h in next(reader)]
    wanted = [colmap.date_column, colmap.cases_column]
    if colmap.population_column is not None:
        wanted.append(colmap.population_column)
    for name in wanted:
        if name not in header:
            raise SchemaError(name, f"{path}: missing column {name!r}")
    i_date = header.index(colmap.date_column)
    i_cases = header.index(colmap.cases_column)
    i_pop = (header.index(colmap.population_column)
             if colmap.population_column is not None else None)

    totals: dict[_dt.date, float] = {}
    population = colmap.population_override
    pattern = None if colmap.date_format == "auto" else _date_parser(colmap.date_format, "")
    for line, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            raise RowError(line, f"expected {len(header)} fields, got {len(row)}")
        raw_date = row[i_date].strip()
        if pattern is None:
            pattern = _date_parser("auto", raw_date)
            if pattern is None:
                raise RowError(line, f"unrecognised date {raw_date!r}")
        try:
            day = _dt.datetime.strptime(raw_date, pattern).date()
        except ValueError:
            raise RowError(line, f"cannot parse date {raw_date!r}") from None
        totals[day] = totals.get(day, 0.0) + _parse_number(row[i_cases], line, colmap.cases_column)
        if i_pop is not None and population is None and row[i_pop].strip():
            population = int(_parse_number(row[i_pop], line, colmap.population_column))

    if not totals:
        raise InputError(f"{path}: no data rows")
    if population is None or population <= 0:
        raise InputError(f"{path}: no usable population value")
    first, last = min(totals), max(totals)
    n_days = (last - first).days + 1
    values = np.zeros(n_days)
    for day, count in totals.items():
        values[(day - first).days] = count
    return TimeSeries(first, values, population, SeriesKind.RAW_DAILY_CASES, label or path.stem)


def cleaning_report(ts: TimeSeries) -> list[dict]:
    """Days whose raw count is negative (reporting corrections), which
    :func:`to_probability` clamps to zero."""
    out = []
    for i in np.flatnonzero(ts.values < 0):
        out.append({"day_index": int(i),
                    "date": (ts.origin_date + _dt.timedelta(days=int(i))).isoformat(),
                    "value": float(ts.values[i])})
    return out


def to_probability(ts: TimeSeries) -> tuple[TimeSeries, TimeSeries]:
    """Return ``(cumulative, density)`` chances of infection for raw counts."""
    if ts.kind is not SeriesKind.RAW_DAILY_CASES:
        raise InputError(f"expected raw_daily_cases, got {ts.kind.value}")
    negatives = cleaning_report(ts)
    if negatives:
        log.warning("%s: clamped %d negative daily count(s) to 0 (first on %s)",
                    ts.label or "series", len(negatives), negatives[0]["date"])
    density = np.maximum(ts.values, 0.0) / ts.population
    cumulative = np.cumsum(density)
    if cumulative[-1] > 1.0:
        raise InputError("cumulative cases exceed population")
    return (ts.with_values(cumulative, SeriesKind.CUMULATIVE_PROBABILITY),
            ts.with_values(density, SeriesKind.DAILY_PROBABILITY_DENSITY))


def density_to_cumulative(density: TimeSeries) -> TimeSeries:
    return density.with_values(np.cumsum(density.values), SeriesKind.CUMULATIVE_PROBABILITY)


def cumulative_to_density(cumulative: TimeSeries) -> TimeSeries:
    # day 0 carries everything accumulated before the series starts
    return cumulative.with_values(np.diff(cumulative.values, prepend=0.0),
                                  SeriesKind.DAILY_PROBABILITY_DENSITY)


def moving_average(values, window: int) -> np.ndarray:
    """Centered moving average; the window is truncated at both edges."""
    values = np.asarray(values, dtype=float)
    if window < 1 or window % 2 == 0:
        raise ParameterError(f"smoothing window must be odd and positive, got {window}")
    n = values.size
    if window > n:
        raise ParameterError(f"smoothing window {window} longer than series ({n})")
    if window == 1:
        return values.copy()
    half = window // 2
    # direct window sums: no running-sum cancellation on long series
    sums = np.convolve(values, np.ones(window), mode="full")[half:half + n]
    idx = np.arange(n)
    counts = np.minimum(idx + half + 1, n) - np.maximum(idx - half, 0)
    return sums / counts


def smooth(ts: TimeSeries, window: int = DEFAULT_SMOOTHING_WINDOW) -> TimeSeries:
    return ts.with_values(moving_average(ts.values, window))


# -- canonical series file -------------------------------------------------

def format_series(ts: TimeSeries, header_lines: Iterable[str] = ()) -> str:
    lines = [f"# {h}" for h in header_lines]
    lines.append(f"# kind: {ts.kind.value}")
    lines.append(f"# population: {ts.population}")
    if ts.label:
        lines.append(f"# label: {ts.label}")
    lines.append("day_index\tdate\tvalue")
    for i, (day, value) in enumerate(zip(ts.dates(), ts.values)):
        lines.append(f"{i}\t{day.isoformat()}\t{float(value)!r}")
    return "\n".join(lines) + "\n"


def read_series(path) -> TimeSeries:
    """Parse a canonical series TSV written by :func:`format_series`."""
    path = Path(path)
    meta: dict[str, str] = {}
    rows = []
    header_seen = False
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
            continue
        if not header_seen:
            if line.split("\t")[:3] != ["day_index", "date", "value"]:
                raise SchemaError("day_index", f"{path}: expected header day_index/date/value")
            header_seen = True
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise RowError(line_no, "expected 3 tab-separated fields")
        try:
            rows.append((_dt.date.fromisoformat(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise RowError(line_no, str(exc)) from None
    if not rows:
        raise InputError(f"{path}: no data rows")
    if "kind" not in meta:
        raise SchemaError("kind", f"{path}: missing '# kind:' line")
    origin = rows[0][0]
    for i, (day, _) in enumerate(rows):
        if (day - origin).days != i:
            raise InputError(f"{path}: dates must be consecutive days")
    try:
        kind = SeriesKind(meta["kind"])
    except ValueError:
        raise InputError(f"{path}: unknown kind {meta['kind']!r}") from None
    population = int(meta.get("population", "1") or 1)
    return TimeSeries(origin, [v for _, v in rows], population, kind,
                      meta.get("label", path.stem))

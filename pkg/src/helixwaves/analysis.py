"""Wave-ratio statistics: peak-time ratios against amplitude ratios.

For waves ``i >= 2`` of one country the time ratio is ``T_i / T_1`` (peak
days) and the amplitude ratio ``A_i C_i / (A_1 C_1)``.  The soliton picture
predicts the two are equal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError
from .logistic import CompositeFit

FLAG_RELATIVE_DEVIATION = 0.5


@dataclass(frozen=True)
class RatioRow:
    country: str
    wave_index: int
    time_ratio: float
    amplitude_ratio: float

    def as_dict(self) -> dict:
        return {"country": self.country, "wave_index": self.wave_index,
                "time_ratio": self.time_ratio, "amplitude_ratio": self.amplitude_ratio}


@dataclass(frozen=True)
class CorrelationReport:
    rows: tuple[RatioRow, ...]
    pearson_r: float
    n_pairs: int

    def as_dict(self) -> dict:
        return {"rows": [r.as_dict() for r in self.rows], "pearson_r": self.pearson_r,
                "n_pairs": self.n_pairs}


def wave_ratios(fit: CompositeFit, country: str = "") -> list[RatioRow]:
    waves = fit.waves
    if len(waves) < 2:
        return []
    first = waves[0]
    a1 = first.A * first.C
    t1 = first.peak_time
    if a1 <= 0:
        raise InputError("first wave has non-positive A*C")
    if t1 <= 0:
        raise InputError(f"first wave peaks at day {t1:g}; time ratios need a positive peak day")
    return [RatioRow(country, i, w.peak_time / t1, w.A * w.C / a1)
            for i, w in enumerate(waves[1:], start=2)]


def pearson(pairs: Iterable[Sequence[float]]) -> float:
    """Sample Pearson correlation of ``(x, y)`` pairs."""
    arr = np.asarray(list(pairs), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
        raise InputError("pearson needs at least two (x, y) pairs")
    d = arr - arr.mean(axis=0)
    sx, sy = np.sqrt(np.sum(d * d, axis=0))
    if sx == 0 or sy == 0:
        raise InputError("correlation undefined: a coordinate has zero variance")
    return float(np.sum(d[:, 0] * d[:, 1]) / (sx * sy))


def correlation_report(rows: Sequence[RatioRow]) -> CorrelationReport:
    rows = tuple(rows)
    r = pearson([(row.time_ratio, row.amplitude_ratio) for row in rows])
    return CorrelationReport(rows, r, len(rows))


@dataclass(frozen=True)
class RowDeviation:
    row: RatioRow
    absolute: float
    relative: float
    flagged: bool


@dataclass(frozen=True)
class ConsistencyReport:
    deviations: tuple[RowDeviation, ...]
    mean_absolute: float
    max_absolute: float
    mean_relative: float
    max_relative: float

    @property
    def flagged(self) -> list[RatioRow]:
        return [d.row for d in self.deviations if d.flagged]

    def as_dict(self) -> dict:
        return {
            "rows": [dict(d.row.as_dict(), absolute_deviation=d.absolute,
                          relative_deviation=d.relative, flagged=d.flagged)
                     for d in self.deviations],
            "mean_absolute": self.mean_absolute, "max_absolute": self.max_absolute,
            "mean_relative": self.mean_relative, "max_relative": self.max_relative,
        }


def model_consistency(rows: Sequence[RatioRow],
                      flag_above: float = FLAG_RELATIVE_DEVIATION) -> ConsistencyReport:
    """Deviation of each amplitude ratio from its time ratio.

    The relative deviation is taken with respect to the time ratio; rows
    above ``flag_above`` are flagged.
    """
    if not rows:
        raise InputError("no ratio rows")
    devs = []
    for row in rows:
        a = abs(row.time_ratio - row.amplitude_ratio)
        rel = a / abs(row.time_ratio)
        devs.append(RowDeviation(row, a, rel, rel > flag_above))
    absd = [d.absolute for d in devs]
    reld = [d.relative for d in devs]
    return ConsistencyReport(tuple(devs), float(np.mean(absd)), float(max(absd)),
                             float(np.mean(reld)), float(max(reld)))


def table2_markdown(report: CorrelationReport) -> str:
    lines = ["| country | T_i/T_1 | (A_i*C_i)/(A_1*C_1) |", "|---|---:|---:|"]
    for r in report.rows:
        lines.append(f"| {r.country} | {r.time_ratio:.2f} | {r.amplitude_ratio:.2f} |")
    lines.append("")
    lines.append(f"Pearson r = {report.pearson_r:.3f} over {report.n_pairs} pairs")
    return "\n".join(lines) + "\n"


def table1_markdown(fits: dict[str, CompositeFit]) -> str:
    """Per-country parameter table; one column per country."""
    names = list(fits)
    depth = max((len(f.waves) for f in fits.values()), default=0)
    lines = ["| | " + " | ".join(names) + " |", "|---|" + "---:|" * len(names)]

    def cell(fit, i, attr):
        if i >= len(fit.waves):
            return "-"
        w = fit.waves[i]
        value = w.peak_time if attr == "T" else getattr(w, attr)
        return f"{value:.0f}" if attr == "T" else f"{value:.4g}"

    for i in range(depth):
        for attr in ("A", "B", "C", "T"):
            lines.append(f"| {attr}_{i + 1} | " +
                         " | ".join(cell(fits[n], i, attr) for n in names) + " |")
    return "\n".join(lines) + "\n"


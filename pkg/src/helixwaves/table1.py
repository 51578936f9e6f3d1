"""Reference per-country wave parameters and synthetic series regenerated from them.

``TABLE1[country]`` lists ``(A, B, C, T)`` per wave where ``T`` is the wave's
peak day counted from the first case.  ``TABLE2`` holds the reference
``(country, time ratio, amplitude ratio)`` rows and ``REFERENCE_PEARSON_R``
the reference correlation between them.
"""

from __future__ import annotations

import datetime as _dt
import math

import numpy as np

from .ingest import SeriesKind, TimeSeries
from .logistic import CompositeFit, LogisticWave

COUNTRIES = ("USA", "Canada", "Russia", "UK", "Belgium", "Finland", "Japan", "Israel")

TABLE1 = {
    "USA": [(5.054e-3, 3.296e3, 0.086, 86), (0.015, 28.948, 0.054, 176),
            (0.08, 22.432, 0.032, 316)],
    "Canada": [(2.89e-3, 82.91, 0.064, 69), (0.022, 138.206, 0.034, 302)],
    "Russia": [(6.443e-3, 84.426, 0.045, 98), (0.024, 41.625, 0.033, 268)],
    "UK": [(4.307e-3, 13.884, 0.067, 49), (0.024, 411.247, 0.062, 240),
           (0.038, 30.289, 0.086, 308)],
    "Belgium": [(5.08e-3, 82.824, 0.105, 35), (0.052, 0.06e5, 0.065, 228)],
    "Finland": [(1.297e-3, 3186.664, 0.076, 97), (7.336e-3, 313.688, 0.038, 320),
                (0.01, 24.599, 0.048, 417)],
    "Japan": [(1.339e-4, 5.973e4, 0.119, 58), (5.334e-4, 165.534, 0.074, 174),
              (3.012e-3, 89.729, 0.048, 313)],
    "Israel": [(1.921e-3, 443.886, 0.142, 38), (9.961e-3, 504.644, 0.086, 143),
               (0.027, 45.026, 0.099, 203), (0.061, 99.469, 0.059, 319)],
}

TABLE2 = [
    ("USA", 2.05, 1.86), ("USA", 3.66, 5.89),
    ("Canada", 4.37, 4.00),
    ("Russia", 2.73, 2.73),
    ("UK", 4.84, 5.00), ("UK", 6.22, 11.00),
    ("Belgium", 6.43, 6.34),
    ("Finland", 3.3, 2.83), ("Finland", 4.3, 4.87),
    ("Japan", 3.01, 2.48), ("Japan", 5.43, 9.07),
    ("Israel", 3.77, 3.14), ("Israel", 5.35, 9.80), ("Israel", 8.39, 13.20),
]

REFERENCE_PEARSON_R = 0.898

EXPECTED_WAVE_COUNTS = {c: len(w) for c, w in TABLE1.items()}

# 2019 population estimates; only used as normaliser metadata on regenerated series
POPULATION = {
    "USA": 329_064_917, "Canada": 37_411_038, "Russia": 145_872_260,
    "UK": 66_647_112, "Belgium": 11_455_519, "Finland": 5_517_919,
    "Japan": 126_860_299, "Israel": 8_519_373,
}

SYNTHETIC_ORIGIN = _dt.date(2020, 1, 1)


def _waves(country: str):
    try:
        return TABLE1[country]
    except KeyError:
        raise KeyError(f"unknown country {country!r}; choose from {', '.join(COUNTRIES)}") from None


def composite_from_table1(country: str) -> CompositeFit:
    """The country's waves placed so each peaks on its tabulated day T."""
    waves = tuple(LogisticWave(A, B, C, math.log(B) / C - T, 0.0)
                  for A, B, C, T in _waves(country))
    return CompositeFit(waves)


def series_length(country: str) -> int:
    """Last peak plus four e-folding times of the last wave, in days."""
    A, B, C, T = _waves(country)[-1]
    return int(T + 4.0 / C) + 1


def regenerate(country: str, noise: float = 0.0, seed: int = 0,
               days: int | None = None) -> tuple[TimeSeries, TimeSeries]:
    """Synthetic ``(cumulative, density)`` series from a country's row of the wave table.

    The cumulative curve is the composite evaluated on whole days; daily
    values are its increments (day 0 holds the level reached before the
    series starts).  ``noise`` is the relative standard deviation of
    multiplicative Gaussian noise applied to the daily values.
    """
    fit = composite_from_table1(country)
    n = series_length(country) if days is None else int(days)
    t = np.arange(n, dtype=float)
    cum = sum(w.cumulative(t) for w in fit.waves)
    daily = np.diff(cum, prepend=0.0)
    if noise:
        rng = np.random.default_rng(seed)
        daily = daily * np.clip(1.0 + noise * rng.standard_normal(n), 0.0, None)
    pop = POPULATION[country]
    density = TimeSeries(SYNTHETIC_ORIGIN, daily, pop, SeriesKind.DAILY_PROBABILITY_DENSITY, country)
    cumulative = density.with_values(np.cumsum(daily), SeriesKind.CUMULATIVE_PROBABILITY)
    return cumulative, density

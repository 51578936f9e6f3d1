"""Kermack-McKendrick SIR model and its single-logistic reduction.

    S' = -beta S I / N,   I' = beta S I / N - gamma I,   R' = gamma I

integrated in population fractions with fixed-step RK4.
"""

from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import FitError, ParameterError
from .ingest import SeriesKind, TimeSeries
from .logistic import LogisticWave, fit_segment
from .oscillator import rk4

REDUCTION_COVERAGE = 0.999


@dataclass(frozen=True)
class SirConfig:
    beta: float
    gamma_rec: float
    population: float
    initial_infected: float

    def __post_init__(self):
        for name in ("beta", "gamma_rec", "population", "initial_infected"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if self.initial_infected >= self.population:
            raise ParameterError("initial_infected must be below population")

    @property
    def r0(self) -> float:
        return self.beta / self.gamma_rec


@dataclass(frozen=True, eq=False)
class SirTrajectory:
    times: np.ndarray
    S: np.ndarray
    I: np.ndarray
    R: np.ndarray

    @property
    def cumulative_infected(self) -> np.ndarray:
        """Everyone who has left S, as a fraction of the population."""
        return 1.0 - self.S


def simulate(cfg: SirConfig, t_end: float, dt: float = 0.1) -> SirTrajectory:
    if not dt > 0 or t_end < dt:
        raise ParameterError("need dt > 0 and t_end >= dt")
    b, g = cfg.beta, cfg.gamma_rec
    i0 = cfg.initial_infected / cfg.population

    def rhs(x):
        inf = b * x[0] * x[1]
        rec = g * x[1]
        return np.array([-inf, inf - rec, rec])

    steps = int(round(t_end / dt))
    states = rk4(rhs, [1.0 - i0, i0, 0.0], dt, steps)
    return SirTrajectory(np.arange(steps + 1) * dt, states[:, 0], states[:, 1], states[:, 2])


def final_size(r0: float, s0: float = 1.0) -> float:
    """Susceptible fraction left at the end: root of ``s = s0 exp(-r0 (1 - s))`` below 1/r0."""
    lo, hi = 0.0, min(1.0 / r0, s0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid - s0 * math.exp(-r0 * (1.0 - mid)) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ReductionReport:
    applicable: bool
    r0: float
    wave: Optional[LogisticWave] = None
    rms: float = float("nan")
    final_size: float = float("nan")
    message: str = ""
    t_end: float = float("nan")

    @property
    def relative_rms(self) -> float:
        return self.rms / self.final_size if self.applicable else float("nan")

    def as_dict(self) -> dict:
        out = {"applicable": self.applicable, "r0": self.r0, "message": self.message}
        if self.applicable:
            out.update(wave=self.wave.as_dict(), rms=self.rms, final_size=self.final_size,
                       relative_rms=self.relative_rms, t_end=self.t_end)
        return out


def epidemic_window(cfg: SirConfig, coverage: float = REDUCTION_COVERAGE, dt: float = 0.1) -> float:
    """Whole days until ``coverage`` of the eventual final size has been infected.

    Comparing reductions over this window, rather than a fixed horizon, keeps
    a fast epidemic's long flat tail from diluting its misfit.
    """
    if cfg.beta <= cfg.gamma_rec:
        raise ParameterError("beta <= gamma: the outbreak has no final size to reach")
    i0 = cfg.initial_infected / cfg.population
    target = coverage * (1.0 - final_size(cfg.r0, 1.0 - i0))
    horizon = 4.0 * math.log(1.0 / i0) / (cfg.beta - cfg.gamma_rec)
    for _ in range(12):
        traj = simulate(cfg, horizon, dt)
        hit = np.flatnonzero(traj.cumulative_infected >= target)
        if hit.size:
            return float(math.ceil(traj.times[hit[0]]))
        horizon *= 2
    raise ParameterError("outbreak did not reach its final size; check the parameters")


def logistic_reduction_check(cfg: SirConfig, t_end: Optional[float] = None,
                             dt: float = 0.1) -> ReductionReport:
    """Fit one logistic wave to daily samples of the cumulative infections.

    ``t_end`` defaults to :func:`epidemic_window`.
    """
    if cfg.beta <= cfg.gamma_rec:
        return ReductionReport(False, cfg.r0, message="beta <= gamma: no outbreak to reduce")
    if t_end is None:
        t_end = epidemic_window(cfg, dt=dt)
    traj = simulate(cfg, t_end, dt)
    per_day = int(round(1.0 / dt))
    if not math.isclose(per_day * dt, 1.0):
        raise ParameterError("dt must divide one day")
    cum = traj.cumulative_infected[::per_day]
    series = TimeSeries(_dt.date(2020, 1, 1), cum, max(int(cfg.population), 1),
                        SeriesKind.CUMULATIVE_PROBABILITY, "SIR")
    try:
        wave = fit_segment(series, (0, cum.size))
    except FitError as exc:
        return ReductionReport(False, cfg.r0, message=f"logistic fit failed: {exc}")
    resid = wave.cumulative(np.arange(cum.size, dtype=float)) - cum
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return ReductionReport(True, cfg.r0, wave, rms, float(cum[-1]),
                           f"single-logistic fit to cumulative infections over {t_end:g} days",
                           float(t_end))


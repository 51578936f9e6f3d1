"""Cyclic-probability oscillators and their conserved functionals.

One coupled pair of probabilities ``(p1, p2)`` = ``(p_{j-1}, p_j)`` oscillating
about reference values ``(p10, p20)``.  With ``x = p1 - p10`` and
``y = p2 - p20``:

harmonic (cross-coupled) system::

    x' = -(gamma / p20) * y
    y' = +(gamma / p10) * x

conserves ``D* = x**2 / (2 p10) + y**2 / (2 p20)`` and oscillates with
angular frequency ``gamma / sqrt(p10 p20)``.

non-harmonic coupled system::

    x' = (gamma / p20) * y - gamma / (2 p20**2) * y**2
    y' = -(gamma / p10) * x

conserves ``D** = D* - y**3 / (6 p20**2)``.

The scalar non-harmonic equation ``y''/k = -y + alpha y**2 + C`` with
``k = gamma**2 / (p10 p20)`` is integrated as a first-order system in
``(y, y')``.  Its first integral, divided by ``p20``, is reported as the
conserved quantity; it equals D* when ``alpha = C = 0`` and D** when
``alpha = 1 / (2 p20)`` and ``C = 0``.

Each rate is driven by the partner's deviation.  A rate driven by its own
deviation only relaxes or grows and never oscillates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DivergenceError, ParameterError

DSTAR = "Dstar"
DSTARSTAR = "Dstarstar"


@dataclass(frozen=True)
class OscillatorConfig:
    gamma: float
    p_ref: tuple[float, float]
    alpha: float = 0.0
    C: float = 0.0
    k: float = field(init=False)

    def __post_init__(self):
        p10, p20 = (float(v) for v in self.p_ref)
        if not (0 < p10 < 1 and 0 < p20 < 1):
            raise ParameterError(f"reference probabilities must lie in (0, 1), got {self.p_ref}")
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        object.__setattr__(self, "p_ref", (p10, p20))
        object.__setattr__(self, "k", self.gamma ** 2 / (p10 * p20))

    @property
    def omega(self) -> float:
        return math.sqrt(self.k)

    @property
    def period(self) -> float:
        return 2 * math.pi * math.sqrt(self.p_ref[0] * self.p_ref[1]) / self.gamma


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray          # shape (n, 2): columns p_{j-1}, p_j
    conserved: np.ndarray
    quantity: str

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("states must be finite")


def rk4(rhs: Callable[[np.ndarray], np.ndarray], y0, dt: float, steps: int,
        check: Callable[[np.ndarray, int], None] | None = None) -> np.ndarray:
    """Classical fixed-step 4th-order Runge-Kutta for an autonomous system.

    Returns the ``(steps + 1, dim)`` array of states including ``y0``.
    """
    y = np.array(y0, dtype=float)
    out = np.empty((steps + 1, y.size))
    out[0] = y
    half = 0.5 * dt
    for n in range(1, steps + 1):
        k1 = rhs(y)
        k2 = rhs(y + half * k1)
        k3 = rhs(y + half * k2)
        k4 = rhs(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise DivergenceError(f"non-finite state at step {n} (t = {n * dt:g})",
                                  step=n, time=n * dt)
        if check is not None:
            check(y, n)
        out[n] = y
    return out


def _steps(t_end: float, dt: float) -> int:
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if t_end < dt:
        raise ParameterError(f"t_end ({t_end}) must be at least dt ({dt})")
    return int(round(t_end / dt))


def conserved_quantity(states, p_ref, order: str = DSTAR) -> np.ndarray:
    """Pointwise D* or D** for ``(p_{j-1}, p_j)`` states."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    p10, p20 = p_ref
    x = states[:, 0] - p10
    y = states[:, 1] - p20
    d = x ** 2 / (2 * p10) + y ** 2 / (2 * p20)
    if order == DSTARSTAR:
        d = d - y ** 3 / (6 * p20 ** 2)
    elif order != DSTAR:
        raise ParameterError(f"order must be {DSTAR!r} or {DSTARSTAR!r}")
    return d


def integrate_harmonic(cfg: OscillatorConfig, initial, t_end: float, dt: float) -> Trajectory:
    p10, p20 = cfg.p_ref
    g = cfg.gamma
    a, b = -g / p20, g / p10

    def rhs(s):
        return np.array([a * (s[1] - p20), b * (s[0] - p10)])

    n = _steps(t_end, dt)
    states = rk4(rhs, initial, dt, n)
    return Trajectory(np.arange(n + 1) * dt, states,
                      conserved_quantity(states, cfg.p_ref, DSTAR), DSTAR)


def integrate_coupled_nonharmonic(cfg: OscillatorConfig, initial, t_end: float,
                                  dt: float) -> Trajectory:
    """Coupled non-harmonic pair; records D** (``cfg.alpha``/``cfg.C`` unused)."""
    p10, p20 = cfg.p_ref
    g = cfg.gamma
    # y beyond the potential's barrier at 2*p20 runs away
    barrier = 2 * p20

    def rhs(s):
        y = s[1] - p20
        return np.array([g / p20 * y - g / (2 * p20 ** 2) * y * y, -g / p10 * (s[0] - p10)])

    def check(s, n):
        if s[1] - p20 > barrier:
            raise DivergenceError(f"escaped over the potential barrier at step {n}",
                                  step=n, time=n * dt)

    n = _steps(t_end, dt)
    states = rk4(rhs, initial, dt, n, check)
    return Trajectory(np.arange(n + 1) * dt, states,
                      conserved_quantity(states, cfg.p_ref, DSTARSTAR), DSTARSTAR)


def nonharmonic_invariant(y, v, cfg: OscillatorConfig):
    """First integral of ``y''/k = -y + alpha y^2 + C``, scaled by ``1/p20``."""
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    e = v ** 2 / (2 * cfg.k) + y ** 2 / 2 - cfg.alpha * y ** 3 / 3 - cfg.C * y
    return e / cfg.p_ref[1]


def integrate_nonharmonic(cfg: OscillatorConfig, initial, t_end: float, dt: float) -> Trajectory:
    """Integrate the scalar non-harmonic equation from ``initial = (p, dp/dt)``.

    ``states`` holds ``(p_{j-1}, p_j)`` with the partner reconstructed from
    the harmonic coupling ``dp_j/dt = (gamma / p10) (p_{j-1} - p10)``.
    """
    p10, p20 = cfg.p_ref
    k, alpha, c = cfg.k, cfg.alpha, cfg.C
    limit = 1.0 / abs(alpha) if alpha else math.inf

    def rhs(s):
        y = s[0]
        return np.array([s[1], k * (-y + alpha * y * y + c)])

    def check(s, n):
        if abs(s[0]) > limit:
            raise DivergenceError(
                f"|p - p0| exceeded 1/alpha = {limit:g} at step {n}; "
                "the quadratic term dominates and the orbit is unbounded",
                step=n, time=n * dt)

    p0, v0 = initial
    n = _steps(t_end, dt)
    yv = rk4(rhs, [p0 - p20, v0], dt, n, check)
    partner = p10 + (p10 / cfg.gamma) * yv[:, 1]
    states = np.column_stack([partner, yv[:, 0] + p20])
    return Trajectory(np.arange(n + 1) * dt, states,
                      nonharmonic_invariant(yv[:, 0], yv[:, 1], cfg), "invariant")


def estimate_period(traj: Trajectory, column: int = 0, center: float | None = None) -> float:
    """Mean spacing of upward crossings of ``center`` (default: the mean)."""
    x = traj.states[:, column]
    c = x.mean() if center is None else center
    s = x - c
    idx = np.flatnonzero((s[:-1] < 0) & (s[1:] >= 0))
    if idx.size < 2:
        raise ParameterError("fewer than two upward crossings; run longer")
    t = traj.times
    cross = t[idx] - s[idx] * (t[idx + 1] - t[idx]) / (s[idx + 1] - s[idx])
    return float(np.mean(np.diff(cross)))

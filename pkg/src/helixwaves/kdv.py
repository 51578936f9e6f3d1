"""Modified KdV equation: analytic solitons, spectral evolution, soliton trains.

Conventions
-----------
The user-facing field ``U`` uses the soliton normalisation

    U = n(n+1) kappa^2 sech^2[kappa (X - 4 kappa^2 T + (C1/2) T^2)] - (C1/6) T

in which an isolated soliton has amplitude ``2 kappa^2`` and velocity
``4 kappa^2`` (twice its amplitude).  ``U`` obeys

    U_T + 6 U U_X + delta U_XXX + C1/6 = 0

which is the rescaling ``P = 6 U`` of the redundancy-density equation

    P_T + P P_X + delta P_XXX + C1 = 0.

``C1`` is always the sink of the ``P`` equation, so a soliton's crest
decelerates at rate ``C1`` and returns to its starting point after
``T = 8 kappa^2 / C1``.  ``KdVState.paper_field`` gives ``P``.  The
dispersion coefficient only changes the width: ``kappa -> kappa/sqrt(delta)``
inside the sech^2 argument (``X -> sqrt(delta) X``, ``T -> sqrt(delta) T``).

Evolution is pseudo-spectral on a periodic grid with classical RK4 in time.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .errors import BlowUpError, ParameterError, UnresolvedTrainError
from .logistic import LogisticWave

log = logging.getLogger(__name__)

# RK4 is stable on the imaginary axis up to |lambda dt| = 2*sqrt(2).
RK4_IMAG_LIMIT = 2.0 * math.sqrt(2.0)
STABILITY_SAFETY = 0.8
# dt <= STABILITY_ALPHA * dx**3 / delta for the dispersive term alone
STABILITY_ALPHA = STABILITY_SAFETY * RK4_IMAG_LIMIT / math.pi ** 3

PEAK_THRESHOLD = 0.1        # in units of kappa^2
SEPARATION_WIDTHS = 5.0


def sech2(x):
    ax = np.abs(np.asarray(x, dtype=float))
    e = np.exp(-2.0 * ax)
    return 4.0 * e / (1.0 + e) ** 2


@dataclass(frozen=True)
class KdVConfig:
    delta: float = 1.0
    c1: float = 0.0
    domain_length: float = 100.0
    grid_points: int = 1024
    dt: Optional[float] = None      # None: choose from the stability bound

    def __post_init__(self):
        n = int(self.grid_points)
        if n < 64 or n & (n - 1):
            raise ParameterError(f"grid_points must be a power of two >= 64, got {self.grid_points}")
        object.__setattr__(self, "grid_points", n)
        if not self.delta > 0:
            raise ParameterError("delta must be positive")
        if self.c1 < 0:
            raise ParameterError("c1 must be non-negative")
        if not self.domain_length > 0:
            raise ParameterError("domain_length must be positive")
        if self.dt is not None:
            if not self.dt > 0:
                raise ParameterError("dt must be positive")
            if self.dt > self.dispersive_dt_limit:
                raise ParameterError(
                    f"dt = {self.dt:g} violates the dispersive stability bound "
                    f"{self.dispersive_dt_limit:g} (alpha_stab dx^3 / delta)")

    @property
    def dx(self) -> float:
        return self.domain_length / self.grid_points

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.grid_points) * self.dx

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * np.fft.rfftfreq(self.grid_points, d=self.dx)

    @property
    def k_max(self) -> float:
        return math.pi / self.dx

    @property
    def dispersive_dt_limit(self) -> float:
        return STABILITY_ALPHA * self.dx ** 3 / self.delta

    def stable_dt(self, amplitude: float) -> float:
        """Largest RK4 step for fields bounded by ``amplitude`` in magnitude."""
        k = self.k_max
        rate = self.delta * k ** 3 + 6.0 * abs(amplitude) * k
        return STABILITY_SAFETY * RK4_IMAG_LIMIT / rate

    def periodic_offset(self, x0: float) -> np.ndarray:
        """Grid positions relative to ``x0`` wrapped into ``[-L/2, L/2)``."""
        L = self.domain_length
        return (self.grid - x0 + L / 2) % L - L / 2


@dataclass(frozen=True, eq=False)
class KdVState:
    time: float
    field: np.ndarray

    def __post_init__(self):
        f = np.array(self.field, dtype=float)
        if not np.all(np.isfinite(f)):
            raise BlowUpError(f"non-finite field at T = {self.time:g}", time=self.time)
        f.setflags(write=False)
        object.__setattr__(self, "field", f)

    @property
    def paper_field(self) -> np.ndarray:
        return 6.0 * self.field


@dataclass(frozen=True)
class SolitonSpec:
    kappa: float
    n: int = 1
    c1: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ParameterError("kappa must be positive")
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError("n must be a positive integer")
        if self.c1 < 0:
            raise ParameterError("c1 must be non-negative")

    @property
    def peak_amplitude(self) -> float:
        return self.n * (self.n + 1) * self.kappa ** 2


# -- scaling maps -----------------------------------------------------------

def paper_to_field(p):
    """``P`` of the redundancy-density equation -> soliton-normalised ``U``."""
    return np.asarray(p) / 6.0


def field_to_paper(u):
    return 6.0 * np.asarray(u)


def to_canonical(x, t, delta: float):
    """Coordinates for ``delta`` dispersion -> unit-dispersion coordinates."""
    s = math.sqrt(delta)
    return np.asarray(x) / s, np.asarray(t) / s


def from_canonical(x, t, delta: float):
    s = math.sqrt(delta)
    return np.asarray(x) * s, np.asarray(t) * s


# -- analytic solutions -------------------------------------------------------

def peak_position(spec: SolitonSpec, T):
    """Crest position ``4 kappa^2 T - (C1/2) T^2`` relative to the start."""
    T = np.asarray(T, dtype=float)
    return 4 * spec.kappa ** 2 * T - 0.5 * spec.c1 * T ** 2


def return_time(spec: SolitonSpec) -> float:
    """Time at which a decelerating soliton's crest is back at the origin."""
    if spec.c1 <= 0:
        return math.inf
    return 8 * spec.kappa ** 2 / spec.c1


def analytic_profile(spec: SolitonSpec, T: float, grid, delta: float = 1.0) -> np.ndarray:
    """Evaluate the sech^2 soliton formula at positions ``grid`` and time ``T``."""
    X = np.asarray(grid, dtype=float)
    k = spec.kappa
    arg = (k / math.sqrt(delta)) * (X - peak_position(spec, T))
    return spec.peak_amplitude * sech2(arg) - spec.c1 * T / 6.0


# -- spectral solver ----------------------------------------------------------

def _rhs_factory(cfg: KdVConfig):
    n = cfg.grid_points
    k = cfg.wavenumbers
    lin = 1j * cfg.delta * k ** 3       # -delta U_xxx
    adv = -3j * k                       # -6 U U_x = -3 (U^2)_x
    sink = cfg.c1 / 6.0 * n             # rfft of a constant c is c*n in mode 0
    irfft, rfft = np.fft.irfft, np.fft.rfft

    def rhs(uh):
        u = irfft(uh, n=n)
        out = adv * rfft(u * u) + lin * uh
        out[0] -= sink
        return out

    return rhs


def _plan_steps(cfg: KdVConfig, initial: KdVState, t_end: float, chunks: int) -> tuple[int, float]:
    """Steps per chunk and the step size so the run lands exactly on ``t_end``."""
    amp = float(np.max(np.abs(initial.field))) + cfg.c1 / 6.0 * t_end
    limit = cfg.stable_dt(amp)
    if cfg.dt is not None:
        if cfg.dt > limit:
            raise ParameterError(
                f"dt = {cfg.dt:g} exceeds the stability bound {limit:g} for field amplitude {amp:g}")
        limit = cfg.dt
    per_chunk = max(1, math.ceil(t_end / (chunks * limit)))
    return per_chunk, t_end / (chunks * per_chunk)


def evolve_snapshots(cfg: KdVConfig, initial: KdVState, t_end: float,
                     count: int = 1) -> Iterator[KdVState]:
    """Advance ``initial`` by ``t_end`` and yield ``count`` equally spaced states.

    The last state yielded is the one at ``initial.time + t_end``.
    """
    if initial.field.shape != (cfg.grid_points,):
        raise ParameterError("initial field does not match the configured grid")
    if t_end <= 0:
        yield initial
        return
    count = max(1, int(count))
    per_chunk, dt = _plan_steps(cfg, initial, t_end, count)
    rhs = _rhs_factory(cfg)
    uh = np.fft.rfft(initial.field)
    half = 0.5 * dt
    n = cfg.grid_points
    for chunk in range(1, count + 1):
        for _ in range(per_chunk):
            k1 = rhs(uh)
            k2 = rhs(uh + half * k1)
            k3 = rhs(uh + half * k2)
            k4 = rhs(uh + dt * k3)
            uh = uh + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = initial.time + chunk * per_chunk * dt
        if not np.all(np.isfinite(uh)):
            raise BlowUpError(f"field blew up before T = {t:g}", time=t)
        yield KdVState(t, np.fft.irfft(uh, n=n))


def evolve(cfg: KdVConfig, initial: KdVState, t_end: float) -> KdVState:
    state = initial
    for state in evolve_snapshots(cfg, initial, t_end, 1):
        pass
    return state


def mass(state: KdVState, cfg: KdVConfig) -> float:
    return float(np.sum(state.field) * cfg.dx)


def momentum(state: KdVState, cfg: KdVConfig) -> float:
    return float(np.sum(state.field ** 2) * cfg.dx)


# -- peaks and soliton trains ------------------------------------------------

def find_peaks(field, length: float, threshold: float, upsample: int = 8) -> list[tuple[float, float]]:
    """Local maxima above ``threshold`` as ``(amplitude, position)`` pairs.

    The periodic field is trigonometrically interpolated onto an ``upsample``
    times finer grid and each maximum refined by a parabola through three points.
    """
    field = np.asarray(field, dtype=float)
    n = field.size
    m = n * upsample
    fine = np.fft.irfft(np.fft.rfft(field), n=m) * (m / n)
    h = length / m
    left, right = np.roll(fine, 1), np.roll(fine, -1)
    idx = np.flatnonzero((fine > left) & (fine >= right) & (fine > threshold))
    peaks = []
    for j in idx:
        a, b, c = left[j], fine[j], right[j]
        denom = a - 2 * b + c
        d = 0.5 * (a - c) / denom if denom != 0 else 0.0
        peaks.append((float(b - 0.25 * (a - c) * d), float((j + d) * h % length)))
    return peaks


@dataclass(frozen=True)
class Soliton:
    amplitude: float
    velocity: float
    position: float


@dataclass(frozen=True)
class TrainReport:
    n: int
    kappa: float
    t_end: float
    solitons: tuple[Soliton, ...]
    predicted_amplitudes: tuple[float, ...]
    predicted_velocities: tuple[float, ...]
    dispersive_residue: float

    @property
    def amplitude_errors(self) -> tuple[float, ...]:
        return tuple(abs(s.amplitude - a) / a
                     for s, a in zip(self.solitons, self.predicted_amplitudes))

    @property
    def velocity_errors(self) -> tuple[float, ...]:
        return tuple(abs(s.velocity - v) / v
                     for s, v in zip(self.solitons, self.predicted_velocities))

    def as_dict(self) -> dict:
        return {
            "n": self.n, "kappa": self.kappa, "t_end": self.t_end,
            "amplitudes": [s.amplitude for s in self.solitons],
            "velocities": [s.velocity for s in self.solitons],
            "positions": [s.position for s in self.solitons],
            "predicted_amplitudes": list(self.predicted_amplitudes),
            "predicted_velocities": list(self.predicted_velocities),
            "amplitude_relative_errors": list(self.amplitude_errors),
            "velocity_relative_errors": list(self.velocity_errors),
            "dispersive_residue": self.dispersive_residue,
        }


def predicted_train(n: int, kappa: float) -> tuple[list[float], list[float]]:
    """Amplitudes ``2 m^2 kappa^2`` and velocities ``4 m^2 kappa^2``, largest first."""
    ms = range(n, 0, -1)
    return [2 * m * m * kappa ** 2 for m in ms], [4 * m * m * kappa ** 2 for m in ms]


def default_train_time(n: int, kappa: float) -> float:
    # the two slowest solitons separate at 12 kappa^2; 18 widths of margin
    return 1.5 / kappa ** 3


def train_initial_state(cfg: KdVConfig, n: int, kappa: float, x0: float) -> KdVState:
    spec = SolitonSpec(kappa, n, 0.0)
    return KdVState(0.0, analytic_profile(spec, 0.0, cfg.periodic_offset(x0), cfg.delta))


def soliton_train(cfg: KdVConfig, n: int, kappa: float, t_end: Optional[float] = None,
                  x0: Optional[float] = None, samples: int = 30) -> TrainReport:
    """Evolve ``n(n+1) kappa^2 sech^2(kappa X)`` and measure the emerging solitons.

    Amplitudes come from the final state; velocities from a linear fit of
    crest positions over the final third of the run.
    """
    if cfg.c1 != 0:
        raise ParameterError("soliton trains are measured without the sink term (c1 = 0)")
    if cfg.delta != 1.0:
        raise ParameterError("soliton trains are measured at unit dispersion (delta = 1)")
    n = int(n)
    if n < 1:
        raise ParameterError("n must be a positive integer")
    L = cfg.domain_length
    t_end = default_train_time(n, kappa) if t_end is None else float(t_end)
    x0 = 0.15 * L if x0 is None else float(x0)
    amps, vels = predicted_train(n, kappa)
    if n > 1 and (vels[0] - vels[-1]) * t_end > L - 20.0 / kappa:
        raise ParameterError(
            f"domain length {L:g} too short: the fastest soliton would lap the slowest "
            f"within t_end = {t_end:g}")
    if cfg.dx * n * kappa > 0.5:
        log.warning("grid spacing %.3g is coarse for the narrowest soliton (width %.3g)",
                    cfg.dx, 1 / (n * kappa))

    initial = train_initial_state(cfg, n, kappa, x0)
    threshold = PEAK_THRESHOLD * kappa ** 2
    track: list[tuple[float, list]] = []
    final = initial
    for state in evolve_snapshots(cfg, initial, t_end, samples):
        final = state
        if state.time >= (2.0 / 3.0) * t_end - 1e-12:
            track.append((state.time, sorted(find_peaks(state.field, L, threshold), reverse=True)))

    peaks = sorted(find_peaks(final.field, L, threshold), reverse=True)
    _check_resolved(peaks, n, kappa, L, t_end)
    peaks = peaks[:n]

    positions = np.empty((len(track), n))
    times = np.array([t for t, _ in track])
    for i, (_, snap) in enumerate(track):
        if len(snap) < n:
            raise UnresolvedTrainError(
                f"only {len(snap)} of {n} solitons visible at T = {times[i]:g}; increase t_end")
        positions[i] = [p for _, p in snap[:n]]
    positions = np.unwrap(positions, axis=0, period=L)
    velocities = [float(np.polyfit(times, positions[:, j], 1)[0]) for j in range(n)]

    residue = _dispersive_residue(final.field, [p for _, p in peaks], kappa, L)
    solitons = tuple(Soliton(a, v, p) for (a, p), v in zip(peaks, velocities))
    return TrainReport(n, float(kappa), t_end, solitons, tuple(amps), tuple(vels), residue)


def _check_resolved(peaks, n, kappa, L, t_end):
    if len(peaks) < n:
        raise UnresolvedTrainError(
            f"found {len(peaks)} of {n} solitons at T = {t_end:g}; try a longer t_end")
    pos = sorted(p for _, p in peaks[:n])
    if n > 1:
        gaps = np.diff(pos + [pos[0] + L])
        if gaps.min() < SEPARATION_WIDTHS / kappa:
            raise UnresolvedTrainError(
                f"solitons closer than {SEPARATION_WIDTHS:g} widths at T = {t_end:g}; "
                "try a longer t_end")


def _dispersive_residue(field, positions, kappa, L) -> float:
    """Largest |U| outside +-5 widths of every detected soliton."""
    x = np.arange(field.size) * (L / field.size)
    mask = np.ones(field.size, dtype=bool)
    for p in positions:
        d = np.abs((x - p + L / 2) % L - L / 2)
        mask &= d > SEPARATION_WIDTHS / kappa
    return float(np.max(np.abs(field[mask]))) if mask.any() else 0.0


def measure_return_time(cfg: KdVConfig, kappa: float, x0: Optional[float] = None,
                        t_max: Optional[float] = None, samples: int = 800) -> float:
    """Evolve one soliton under the sink and time its crest's return to ``x0``.

    The crossing is located by linear interpolation between sampled states.
    """
    if cfg.c1 <= 0:
        raise ParameterError("return to origin needs c1 > 0")
    L = cfg.domain_length
    spec = SolitonSpec(kappa, 1, cfg.c1)
    excursion = 8 * kappa ** 4 / cfg.c1
    if excursion + 20.0 / kappa > L:
        raise ParameterError(
            f"domain length {L:g} too short for a crest excursion of {excursion:g}")
    x0 = 0.25 * L if x0 is None else float(x0)
    t_max = 1.25 * return_time(spec) if t_max is None else float(t_max)
    initial = KdVState(0.0, analytic_profile(SolitonSpec(kappa, 1, 0.0), 0.0,
                                             cfg.periodic_offset(x0), cfg.delta))
    times, offsets = [0.0], [0.0]
    for state in evolve_snapshots(cfg, initial, t_max, samples):
        amp, pos = max(find_peaks(state.field, L, -np.inf))
        times.append(state.time)
        offsets.append((pos - x0 + L / 2) % L - L / 2)
    times = np.array(times)
    offsets = np.array(offsets)
    top = int(np.argmax(offsets))
    after = np.flatnonzero(offsets[top:] < 0)
    if top == 0 or after.size == 0:
        raise UnresolvedTrainError("crest did not return within t_max; increase t_max")
    j = top + int(after[0])
    t0, t1, y0, y1 = times[j - 1], times[j], offsets[j - 1], offsets[j]
    return float(t0 - y0 * (t1 - t0) / (y1 - y0))


# -- cumulative of the single soliton ------------------------------------------

@dataclass(frozen=True)
class SigmoidMap:
    """Cumulative of an n = 1 soliton as a logistic curve.

    ``wave`` is ``2 kappa / (1 + exp(-2 kappa t))`` = ``kappa (tanh(kappa t) + 1)``,
    which for ``kappa = 1`` is ``2 e^{2t} / (1 + e^{2t})``.  The soliton
    density is recovered as ``density_scale * d(wave)/dt``: the curve is the
    integral of the half-amplitude density ``kappa^2 sech^2(kappa t)``.
    """

    kappa: float
    wave: LogisticWave
    density_scale: float = 2.0

    def __call__(self, t):
        return self.wave.cumulative(t)

    def density(self, t):
        return self.density_scale * self.wave.daily(t)


def soliton_to_sigmoid(spec: SolitonSpec):
    """Logistic form of the single soliton's cumulative.

    Multi-soliton impulses (n > 1) cannot be integrated into one curve; a list
    of per-soliton maps for the asymptotic train (kappa_m = m kappa) is
    returned instead.
    """
    if spec.c1 != 0:
        raise ParameterError("the cumulative is defined for the pure soliton (c1 = 0)")
    if spec.n != 1:
        return [soliton_to_sigmoid(SolitonSpec(m * spec.kappa, 1, 0.0))
                for m in range(spec.n, 0, -1)]
    k = spec.kappa
    return SigmoidMap(k, LogisticWave(A=2 * k, B=1.0, C=2 * k))

"""Multi-wave logistic decomposition of epidemic curves.

A wave is ``F(t) = A / (1 + B exp(-C (t + dt))) + d``; a composite curve is
the sum of its waves.  The daily curve is the exact time derivative

    f(t) = sum_i (A_i C_i / 4) sech^2((C_i (t + dt_i) - ln B_i) / 2)

so each wave peaks at ``t = ln(B_i)/C_i - dt_i`` with height ``A_i C_i / 4``.

Fitting: the smoothed daily series is cut into waves at deep enough valleys,
each segment's cumulative rise is fitted by damped Gauss-Newton
(Levenberg-Marquardt) in log-parameters, then all waves are refined jointly
against the whole cumulative series.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ConvergenceError, FitError, InputError, NumericalError
from .ingest import DEFAULT_SMOOTHING_WINDOW, SeriesKind, TimeSeries, moving_average

log = logging.getLogger(__name__)

DEFAULT_VALLEY_RATIO = 0.95
DEFAULT_MIN_LEN = 21
DEFAULT_MIN_PEAK_FRACTION = 0.01
MIN_SEGMENT_POINTS = 5


def _logistic_fraction(z):
    """``1 / (1 + exp(z))`` without overflow."""
    return 0.5 * (1.0 - np.tanh(0.5 * np.asarray(z, dtype=float)))


def _logistic_slope(z):
    """``g (1 - g)`` for ``g = 1 / (1 + exp(z))``, without cancellation in the tails."""
    e = np.exp(-np.abs(np.asarray(z, dtype=float)))
    return e / (1.0 + e) ** 2


@dataclass(frozen=True)
class LogisticWave:
    A: float
    B: float
    C: float
    dt_shift: float = 0.0
    d_shift: float = 0.0

    def __post_init__(self):
        for name in ("A", "B", "C"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise InputError(f"logistic parameter {name} must be positive, got {v}")

    def _z(self, t):
        return math.log(self.B) - self.C * (np.asarray(t, dtype=float) + self.dt_shift)

    def cumulative(self, t):
        return self.A * _logistic_fraction(self._z(t)) + self.d_shift

    def daily(self, t):
        return self.A * self.C * _logistic_slope(self._z(t))

    @property
    def peak_time(self) -> float:
        return math.log(self.B) / self.C - self.dt_shift

    @property
    def peak_density(self) -> float:
        return self.A * self.C / 4.0

    def as_dict(self) -> dict:
        return {"A": self.A, "B": self.B, "C": self.C, "dt": self.dt_shift, "d": self.d_shift}


@dataclass(frozen=True)
class Convergence:
    iterations: int = 0
    damping: float = 0.0
    converged: bool = True
    fallback: bool = False
    message: str = ""
    cost_history: tuple[float, ...] = ()

    def as_dict(self) -> dict:
        return {"iterations": self.iterations, "damping": self.damping,
                "converged": self.converged, "fallback": self.fallback,
                "message": self.message}


@dataclass(frozen=True)
class CompositeFit:
    waves: tuple[LogisticWave, ...]
    residual_rms: float = float("nan")
    segment_bounds: tuple[tuple[int, int], ...] = ()
    convergence: Convergence = field(default_factory=Convergence)

    def __post_init__(self):
        object.__setattr__(self, "waves", tuple(self.waves))
        object.__setattr__(self, "segment_bounds",
                           tuple((int(a), int(b)) for a, b in self.segment_bounds))

    @property
    def peak_times(self) -> list[float]:
        return [w.peak_time for w in self.waves]

    def as_dict(self) -> dict:
        return {
            "waves": [w.as_dict() for w in self.waves],
            "peak_times": self.peak_times,
            "residual_rms": None if math.isnan(self.residual_rms) else self.residual_rms,
            "segments": [list(b) for b in self.segment_bounds],
            "convergence": self.convergence.as_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CompositeFit":
        waves = [LogisticWave(w["A"], w["B"], w["C"], w.get("dt", 0.0), w.get("d", 0.0))
                 for w in data["waves"]]
        conv = data.get("convergence", {})
        rms = data.get("residual_rms")
        return cls(tuple(waves), float("nan") if rms is None else float(rms),
                   tuple(tuple(b) for b in data.get("segments", ())),
                   Convergence(conv.get("iterations", 0), conv.get("damping", 0.0),
                               conv.get("converged", True), conv.get("fallback", False),
                               conv.get("message", "")))


def eval_cumulative(fit: CompositeFit, t):
    t = np.asarray(t, dtype=float)
    return sum((w.cumulative(t) for w in fit.waves), np.zeros_like(t))


def eval_daily(fit: CompositeFit, t):
    t = np.asarray(t, dtype=float)
    return sum((w.daily(t) for w in fit.waves), np.zeros_like(t))


# -- segmentation -------------------------------------------------------------

def _local_maxima(y: np.ndarray) -> list[int]:
    n = y.size
    out = []
    for i in range(n):
        left = y[i - 1] if i > 0 else -np.inf
        right = y[i + 1] if i < n - 1 else -np.inf
        if y[i] > left and y[i] >= right:
            out.append(i)
    return out


def segment_waves(density, smoothed_window: int = DEFAULT_SMOOTHING_WINDOW,
                  valley_ratio: float = DEFAULT_VALLEY_RATIO,
                  min_len: int = DEFAULT_MIN_LEN, n_segments: Optional[int] = None,
                  min_peak_fraction: float = DEFAULT_MIN_PEAK_FRACTION) -> list[tuple[int, int]]:
    """Split a daily series into waves; returns half-open ``(start, end)`` bounds.

    Peaks of the smoothed series are merged pairwise, shallowest valley
    first, while ``valley / min(adjacent peaks) >= valley_ratio`` (or while
    more than ``n_segments`` peaks remain).  Each surviving valley minimum is a
    cut; segments shorter than ``min_len`` are merged into a neighbour.
    """
    values = density.values if isinstance(density, TimeSeries) else np.asarray(density, float)
    n = values.size
    if n == 0:
        raise InputError("empty density series")
    window = min(smoothed_window, n if n % 2 else n - 1)
    y = moving_average(values, max(window, 1))
    if y.max() <= 0:
        return [(0, n)]
    peaks = [p for p in _local_maxima(y) if y[p] >= min_peak_fraction * y.max()]

    def valleys(pk):
        return [a + int(np.argmin(y[a:b + 1])) for a, b in zip(pk[:-1], pk[1:])]

    while len(peaks) > 1:
        vs = valleys(peaks)
        ratios = [y[v] / min(y[a], y[b]) for v, a, b in zip(vs, peaks[:-1], peaks[1:])]
        j = int(np.argmax(ratios))
        too_many = n_segments is not None and len(peaks) > n_segments
        if ratios[j] < valley_ratio and not too_many:
            break
        peaks.pop(j if y[peaks[j]] < y[peaks[j + 1]] else j + 1)

    cuts = [0] + valleys(peaks) + [n]
    while len(cuts) > 2:
        lengths = np.diff(cuts)
        j = int(np.argmin(lengths))
        if lengths[j] >= min_len:
            break
        if j == 0:
            cuts.pop(1)
        elif j == len(lengths) - 1:
            cuts.pop(-2)
        else:
            cuts.pop(j if lengths[j - 1] <= lengths[j + 1] else j + 1)
    return list(zip(cuts[:-1], cuts[1:]))


# -- least squares ----------------------------------------------------------------

def _model(theta: np.ndarray, t: np.ndarray, origins: Sequence[float], offset: bool):
    """Sum of logistics in ``(log A, log B, log C)`` per wave (+ a common offset)."""
    k = len(origins)
    F = np.full(t.size, theta[-1] if offset else 0.0)
    J = np.empty((t.size, 3 * k + (1 if offset else 0)))
    for i, s in enumerate(origins):
        la, lb, lc = theta[3 * i:3 * i + 3]
        A, C = math.exp(la), math.exp(lc)
        tau = t - s
        z = lb - C * tau
        g = _logistic_fraction(z)
        gg = A * _logistic_slope(z)
        F += A * g
        J[:, 3 * i] = A * g
        J[:, 3 * i + 1] = -gg
        J[:, 3 * i + 2] = gg * C * tau
    if offset:
        J[:, -1] = 1.0
    return F, J


@dataclass
class _LMResult:
    theta: np.ndarray
    cost: float
    iterations: int
    damping: float
    converged: bool
    history: list


def levenberg_marquardt(theta0, t, y, origins, offset=False, max_iter=200,
                        xtol=1e-8, ftol=1e-15, lam0=1e-3) -> _LMResult:
    """Damped Gauss-Newton with Marquardt diagonal scaling.

    A step is accepted only if it does not increase the residual sum of
    squares, so the cost history is non-increasing.
    """
    theta = np.array(theta0, dtype=float)
    F, J = _model(theta, t, origins, offset)
    r = F - y
    cost = float(r @ r)
    lam = lam0
    history = [cost]
    for it in range(1, max_iter + 1):
        H = J.T @ J
        g = J.T @ r
        diag = np.diag(H).copy()
        diag[diag <= 0] = 1.0
        while True:
            try:
                step = np.linalg.solve(H + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                trial = theta + step
                F2, J2 = _model(trial, t, origins, offset)
                r2 = F2 - y
                cost2 = float(r2 @ r2)
                if np.isfinite(cost2) and cost2 <= cost:
                    break
            lam *= 10.0
            if lam > 1e16:
                # no descent direction left: stationary to working precision
                return _LMResult(theta, cost, it, lam, True, history)
        rel_step = float(np.max(np.abs(step) / (np.abs(theta) + xtol)))
        small_gain = cost - cost2 <= ftol * max(cost, 1e-300)
        theta, F, J, r = trial, F2, J2, r2
        cost = cost2
        history.append(cost)
        lam = max(lam / 10.0, 1e-15)
        if rel_step < xtol or small_gain or cost == 0.0:
            return _LMResult(theta, cost, it, lam, True, history)
    return _LMResult(theta, cost, max_iter, lam, False, history)


def _cumulative_values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        if series.kind is SeriesKind.DAILY_PROBABILITY_DENSITY:
            return np.cumsum(series.values)
        return np.asarray(series.values, dtype=float)
    return np.asarray(series, dtype=float)


def _initial_guess(t: np.ndarray, y: np.ndarray, base: float, s: int):
    """Closed-form start from logistic geometry for one segment."""
    rise = y - base
    A = float(rise[-1])
    daily = np.diff(y, prepend=base)
    if A <= 0 or not np.any(daily > 0):
        raise FitError("flat segment: no cumulative rise to fit")
    smooth = moving_average(daily, min(DEFAULT_SMOOTHING_WINDOW, daily.size - (daily.size + 1) % 2))
    peak = int(np.argmax(smooth))
    C = max(4.0 * float(smooth[peak]) / A, 1e-6)
    tau_peak = max(float(t[peak] - s), 0.0)
    B = math.exp(min(C * tau_peak, 700.0))
    return A, B, C


def fit_segment(cumulative, bounds, max_iter: int = 200) -> LogisticWave:
    """Fit one logistic to a segment of a cumulative series.

    The segment's values minus the level just before it (the baseline) are
    fitted by ``A / (1 + B exp(-C (t - start)))``.  The returned wave has
    ``dt_shift = -start`` and ``d_shift = baseline``.
    """
    y_all = _cumulative_values(cumulative)
    start, end = int(bounds[0]), int(bounds[1])
    if end - start < MIN_SEGMENT_POINTS:
        raise FitError(f"segment {start}:{end} shorter than {MIN_SEGMENT_POINTS} points")
    t = np.arange(start, end, dtype=float)
    y = y_all[start:end]
    base = float(y_all[start - 1]) if start > 0 else 0.0
    A, B, C = _initial_guess(t, y, base, start)
    theta0 = np.log([A, B, C])
    res = levenberg_marquardt(theta0, t, y - base, [start], offset=False, max_iter=max_iter)
    if not res.converged:
        raise ConvergenceError(
            f"segment {start}:{end} did not converge in {max_iter} iterations",
            params=np.exp(res.theta), residual=math.sqrt(res.cost / t.size),
            iterations=res.iterations)
    A, B, C = np.exp(res.theta)
    return LogisticWave(float(A), float(B), float(C), -float(start), base)


@dataclass(frozen=True)
class FitConfig:
    window: int = DEFAULT_SMOOTHING_WINDOW
    valley_ratio: float = DEFAULT_VALLEY_RATIO
    min_len: int = DEFAULT_MIN_LEN
    segments: Optional[int] = None
    max_iter: int = 200
    joint_max_iter: int = 500


def _composite_rms(fit: CompositeFit, y: np.ndarray) -> float:
    r = eval_cumulative(fit, np.arange(y.size, dtype=float)) - y
    return float(np.sqrt(np.mean(r * r)))


def fit_composite(cumulative, density=None, cfg: FitConfig = FitConfig()) -> CompositeFit:
    """Segment, fit each wave, then refine all waves jointly.

    ``density`` drives segmentation; when omitted it is the first difference
    of ``cumulative``.  Only one overall vertical offset is identifiable in a
    sum of waves, so it is carried by the first wave's ``d_shift``; likewise
    each wave's horizontal shift is pinned to its segment start and its
    position is absorbed in ``B``.
    """
    y = _cumulative_values(cumulative)
    if y.size < MIN_SEGMENT_POINTS:
        raise FitError("series too short to fit")
    if density is None:
        dens = np.diff(y, prepend=0.0)
    else:
        dens = density.values if isinstance(density, TimeSeries) else np.asarray(density, float)
        if dens.size != y.size:
            raise InputError("cumulative and density series are not aligned")
    bounds = segment_waves(dens, cfg.window, cfg.valley_ratio, cfg.min_len, cfg.segments)
    waves = [fit_segment(y, b, cfg.max_iter) for b in bounds]
    if len(waves) == 1:
        fit = CompositeFit(tuple(waves), float("nan"), tuple(bounds),
                           Convergence(message="single segment"))
        return replace(fit, residual_rms=_composite_rms(fit, y))

    # stitched model: a plain sum of the per-segment logistics
    first_base = waves[0].d_shift
    stitched = [replace(w, d_shift=first_base if i == 0 else 0.0) for i, w in enumerate(waves)]
    t = np.arange(y.size, dtype=float)
    origins = [float(b[0]) for b in bounds]
    theta0 = np.concatenate([np.log([w.A, w.B, w.C]) for w in stitched] + [[first_base]])
    try:
        res = levenberg_marquardt(theta0, t, y, origins, offset=True, max_iter=cfg.joint_max_iter)
    except (FloatingPointError, np.linalg.LinAlgError) as exc:   # pragma: no cover
        res = None
        reason = str(exc)
    else:
        reason = "" if res.converged else f"no convergence in {cfg.joint_max_iter} iterations"

    if res is not None and res.converged:
        offset = float(res.theta[-1])
        if not 0.0 <= offset <= float(y.max()):
            offset = min(max(offset, 0.0), float(y.max()))
            res = levenberg_marquardt(res.theta[:-1], t, y - offset,
                                      origins, offset=False, max_iter=cfg.joint_max_iter)
            res.theta = np.append(res.theta, offset)
        new_waves = []
        for i, s in enumerate(origins):
            A, B, C = np.exp(res.theta[3 * i:3 * i + 3])
            new_waves.append(LogisticWave(float(A), float(B), float(C), -s,
                                          float(res.theta[-1]) if i == 0 else 0.0))
        fit = CompositeFit(tuple(new_waves), float("nan"), tuple(bounds),
                           Convergence(res.iterations, res.damping, True, False, "joint refinement",
                                       tuple(res.history)))
        if _composite_rms(fit, y) <= _composite_rms(CompositeFit(tuple(stitched)), y):
            return _ordered(replace(fit, residual_rms=_composite_rms(fit, y)))
        reason = "joint refinement increased the residual"

    log.warning("joint refinement failed (%s); using stitched per-segment fit", reason)
    fit = CompositeFit(tuple(stitched), float("nan"), tuple(bounds),
                       Convergence(0, 0.0, False, True, f"fallback: {reason}"))
    return _ordered(replace(fit, residual_rms=_composite_rms(fit, y)))


def _ordered(fit: CompositeFit) -> CompositeFit:
    order = sorted(range(len(fit.waves)), key=lambda i: fit.waves[i].peak_time)
    if order == list(range(len(fit.waves))):
        return fit
    waves = [fit.waves[i] for i in order]
    offset = sum(w.d_shift for w in waves)
    waves = [replace(w, d_shift=offset if j == 0 else 0.0) for j, w in enumerate(waves)]
    bounds = [fit.segment_bounds[i] for i in order] if fit.segment_bounds else []
    return replace(fit, waves=tuple(waves), segment_bounds=tuple(bounds))


def fit_single(cumulative) -> CompositeFit:
    """One logistic wave over the whole series, as a ``CompositeFit``."""
    y = _cumulative_values(cumulative)
    wave = fit_segment(y, (0, y.size))
    fit = CompositeFit((wave,), float("nan"), ((0, y.size),))
    return replace(fit, residual_rms=_composite_rms(fit, y))

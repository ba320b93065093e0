"""Time-stepped QFI upper bound from the achievable (|b|, |a|) curve.

Each step of length ``dt`` takes the tightest single-step update over all
curve points. For ``a > 0`` the update solves ``F' = F + 4 a dt + 4 b dt sqrt(F')``
(the larger root); for ``a = 0`` the exact flow ``(sqrt(F) + 2 b dt)**2`` is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .scaling import ABCurve, ScalingClass, ScalingConstants


def _step_coefficients(a: np.ndarray, b: np.ndarray, dt: float):
    """``(K, c, C)`` with the one-step update ``F + K + c sqrt(F + C)`` per curve point.

    For ``a > 0`` this is the larger root of ``F' = F + 4 a dt + 4 b dt sqrt(F')``;
    for ``a = 0`` it is ``(sqrt(F) + 2 b dt)**2``, the exact flow of ``dF/dt = 4 b sqrt(F)``.
    """
    exact = a == 0
    K = np.where(exact, 4 * b * b * dt * dt, 4 * a * dt + 8 * b * b * dt * dt)
    C = np.where(exact, 0.0, 4 * a * dt + 4 * b * b * dt * dt)
    return K, 4 * b * dt, C


def step_update(F: float, a: np.ndarray, b: np.ndarray, dt: float) -> np.ndarray:
    """One-step upper bound for each curve point ``(a, b)``."""
    K, c, C = _step_coefficients(np.asarray(a, float), np.asarray(b, float), dt)
    return F + K + c * np.sqrt(np.maximum(F + C, 0.0))


@dataclass
class IntegratorConfig:
    """Step schedule.

    With ``dt`` set, a uniform step is used. Otherwise times are split into
    decades ``[t_min 10**(k-1), t_min 10**k]`` (plus ``[0, t_min]``), each
    marched with ``steps_per_decade`` equal steps.
    """

    t_max: float = 1e4
    t_min: float = 1e-4
    steps_per_decade: int = 10_000
    dt: Optional[float] = None

    def __post_init__(self):
        if not (self.t_max > 0 and math.isfinite(self.t_max)):
            raise ValueError(f"t_max must be positive and finite, got {self.t_max}")
        if self.dt is not None and not (self.dt > 0 and self.dt <= self.t_max):
            raise ValueError(f"dt must be in (0, t_max], got {self.dt}")
        if self.steps_per_decade < 1 or self.t_min <= 0:
            raise ValueError("steps_per_decade and t_min must be positive")

    def segments(self) -> list[tuple[float, float, int]]:
        """``(t_start, dt, n_steps)`` runs; the last run may end on a shorter step."""
        if self.dt is not None:
            edges = [0.0, self.t_max]
            n_for = lambda lo, hi: int(math.ceil((hi - lo) / self.dt - 1e-9))
        else:
            edges = [0.0, min(self.t_min, self.t_max)]
            while edges[-1] < self.t_max * (1 - 1e-12):
                edges.append(min(edges[-1] * 10, self.t_max))
            n_for = None
        out = []
        for k, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
            if n_for is not None:
                out.append((lo, self.dt, n_for(lo, hi)))
                continue
            # nominal decade width sets the step even when the decade is truncated
            width = self.t_min if k == 0 else 9 * lo
            dt = width / self.steps_per_decade
            out.append((lo, dt, int(math.ceil((hi - lo) / dt - 1e-9))))
        return out

    def times(self) -> np.ndarray:
        parts = [np.array([0.0])]
        for t0, dt, n in self.segments():
            parts.append(t0 + dt * np.arange(1, n + 1))
        t = np.concatenate(parts)
        t[-1] = min(t[-1], self.t_max)
        return t


@dataclass
class BoundTrace:
    t: np.ndarray
    F: np.ndarray
    n_curve_points: int

    def at(self, t: float) -> float:
        """Bound at time ``t`` (linear interpolation between steps)."""
        return float(np.interp(t, self.t, self.F))

    def to_csv(self, stride: int = 1) -> str:
        idx = np.arange(0, len(self.t), stride)
        if idx[-1] != len(self.t) - 1:
            idx = np.append(idx, len(self.t) - 1)
        lines = ["t,F"] + [f"{t!r},{F!r}" for t, F in zip(self.t[idx].tolist(), self.F[idx].tolist())]
        return "\n".join(lines) + "\n"


def integrate_bound(curve: ABCurve, cfg: Optional[IntegratorConfig] = None) -> BoundTrace:
    """March ``F`` from ``F(0) = 0`` using only the valid certified curve points."""
    cfg = cfg or IntegratorConfig()
    b, a = curve.pairs()
    if len(a) == 0:
        raise ValueError("curve has no valid points")
    a = np.maximum(a, 0.0)
    t = cfg.times()
    F = np.zeros_like(t)
    i = 0
    for t0, dt, n in cfg.segments():
        K, c, C = _step_coefficients(a, b, dt)
        f = F[i]
        for _ in range(n):
            if i + 1 == len(t) - 1 and t[-1] - t[i] < dt:
                # final step shortened to land on t_max
                K, c, C = _step_coefficients(a, b, t[-1] - t[i])
            f = f + np.min(K + c * np.sqrt(f + C))
            i += 1
            F[i] = f
    return BoundTrace(t, F, len(a))


# ---------------------------------------------------------------------------
# closed forms and asymptotics

def analytic_generic_bound(a: float, b: float, t) -> np.ndarray:
    """``4 (b t + sqrt(a t))**2``, valid for any achievable pair."""
    t = np.asarray(t, dtype=float)
    return 4 * (b * t + np.sqrt(a * t)) ** 2


def ql_crossover_time(a_plus: float, b_plus: float) -> float:
    return 2 * a_plus / b_plus**2 * math.log(2)


def analytic_ql_bound(a_plus: float, b_plus: float, t) -> np.ndarray:
    """Piecewise bound for quadratic-linear models, switching at ``t_c``.

    ``16 a+^2/b+^2 (1 - 2**(-t/t_c))**2`` up to ``t_c``, then ``4 a+ (t - t_c) + 4 (a+/b+)**2``.
    """
    if not (a_plus > 0 and b_plus > 0):
        raise ValueError("a_plus and b_plus must be positive")
    t = np.asarray(t, dtype=float)
    tc = ql_crossover_time(a_plus, b_plus)
    early = 16 * a_plus**2 / b_plus**2 * (1 - 2.0 ** (-t / tc)) ** 2
    late = 4 * a_plus * (t - tc) + 4 * (a_plus / b_plus) ** 2
    return np.where(t <= tc, early, late)


@dataclass
class Asymptote:
    coef: float
    power: int

    def __call__(self, t):
        return self.coef * np.asarray(t, dtype=float) ** self.power


def asymptotes(c: ScalingConstants, cls: ScalingClass) -> tuple[Optional[Asymptote], Optional[Asymptote]]:
    """Leading short- and long-time behaviour of the bound."""
    short = long = None
    if cls is ScalingClass.UNINFORMATIVE:
        return None, None
    if cls.short_time_power == 2:
        short = Asymptote(4 * c.b_plus**2, 2)
    else:
        short = Asymptote(4 * c.a_minus, 1)
    if cls.long_time_power == 2:
        long = Asymptote(4 * c.b_minus**2, 2)
    else:
        long = Asymptote(4 * c.a_plus, 1)
    return short, long


def slope_fit(trace: BoundTrace, t_lo: float, t_hi: float, n_samples: int = 60) -> float:
    """Least-squares slope of ``log F`` against ``log t`` on ``[t_lo, t_hi]``.

    Samples are picked log-uniformly so each part of the window counts equally.
    """
    mask = (trace.t >= t_lo) & (trace.t <= t_hi) & (trace.F > 0)
    t, F = trace.t[mask], trace.F[mask]
    if len(t) < 5:
        raise ValueError(f"need at least 5 samples in [{t_lo}, {t_hi}], have {len(t)}")
    targets = np.geomspace(t[0], t[-1], n_samples)
    idx = np.unique(np.clip(np.searchsorted(t, targets), 0, len(t) - 1))
    if len(idx) < 5:
        idx = np.arange(len(t))
    slope, _ = np.polyfit(np.log(t[idx]), np.log(F[idx]), 1)
    return float(slope)


def log_sample(trace: BoundTrace, per_decade: int) -> BoundTrace:
    """Subsample at roughly ``per_decade`` log-spaced times (``t = 0`` and the end kept)."""
    if per_decade < 1:
        raise ValueError("per_decade must be positive")
    t = trace.t
    pos = t[t > 0]
    if len(pos) == 0:
        return trace
    n = max(2, int(math.ceil(math.log10(pos[-1] / pos[0]) * per_decade)) + 1)
    idx = np.searchsorted(t, np.geomspace(pos[0], pos[-1], n)).clip(0, len(t) - 1)
    idx = np.unique(np.concatenate([[0], idx, [len(t) - 1]]))
    return BoundTrace(t[idx], trace.F[idx], trace.n_curve_points)

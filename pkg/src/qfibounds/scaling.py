"""Scaling constants, the achievable (|b|, |a|) curve, classification and transition times."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .algebra import ControlMatrix
from .model import MarkovianModel
from .sdp.lmi import (
    EXACT_ZERO_CAP,
    ControlPoint,
    min_a,
    min_a_given_b,
    min_b,
    min_b_given_a,
)
from .sdp.solver import SDPInfeasible, SDPStatus, SolverConfig

EPS_ZERO = 1e-6


def equality_cap(value: float) -> float:
    """Cap standing in for ``|.| = value`` at the end of the achievable curve."""
    return value * (1 + 1e-6) + 1e-9


class ScalingClass(str, enum.Enum):
    QUADRATIC_LINEAR = "quadratic-linear"
    QUADRATIC_QUADRATIC = "quadratic-quadratic"
    LINEAR_LINEAR = "linear-linear"
    LINEAR_QUADRATIC = "linear-quadratic"
    UNINFORMATIVE = "uninformative"

    @property
    def short_time_power(self) -> Optional[int]:
        return {"quadratic": 2, "linear": 1}.get(self.value.split("-")[0])

    @property
    def long_time_power(self) -> Optional[int]:
        parts = self.value.split("-")
        return {"quadratic": 2, "linear": 1}.get(parts[-1]) if len(parts) == 2 else None


@dataclass
class ScalingConstants:
    a_minus: float
    b_minus: float
    a_plus: float
    b_plus: float
    eps_zero: float = EPS_ZERO
    # certified control points realising (a-, b+), (a+, b-) and the two minima
    points: dict = field(default_factory=dict, repr=False)
    raw: dict = field(default_factory=dict, repr=False)
    failures: list = field(default_factory=list, repr=False)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.a_minus, self.b_minus, self.a_plus, self.b_plus)

    def as_dict(self) -> dict:
        return {"a_minus": self.a_minus, "b_minus": self.b_minus, "a_plus": self.a_plus, "b_plus": self.b_plus}


class ScalingError(RuntimeError):
    """A solver step failed; ``partial`` holds whatever was computed."""

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


def _snap(x: float, eps: float) -> float:
    return 0.0 if x < eps else x


def _capped(fn, m, cap, cfg, hint):
    try:
        return fn(m, cap, cfg, hint)
    except SDPInfeasible:
        # the exact-zero equality can be inconsistent when the minimum is tiny but nonzero
        if cap > EXACT_ZERO_CAP:
            raise
        return fn(m, 10 * EXACT_ZERO_CAP, cfg, hint)


def compute_constants(m: MarkovianModel, cfg: Optional[SolverConfig] = None, eps_zero: float = EPS_ZERO) -> ScalingConstants:
    """Four SDP solves: a-, b-, then a+ (|b| pinned at b-) and b+ (|a| pinned at a-).

    Values below ``eps_zero`` are reported as exactly zero.
    """
    points: dict[str, ControlPoint] = {}
    failures = []
    try:
        points["a_minus"] = pa = min_a(m, cfg)
        points["b_minus"] = pb = min_b(m, cfg)
        points["a_plus"] = min_a_given_b_pinned(m, pb, cfg)
        points["b_plus"] = min_b_given_a_pinned(m, pa, cfg)
    except SDPInfeasible as exc:
        raise ScalingError(f"solver failure: {exc}", partial=points) from exc
    for name, p in points.items():
        if p.status is not SDPStatus.OPTIMAL:
            failures.append(f"{name}: {p.status.value}")

    raw = {
        "a_minus": points["a_minus"].a,
        "b_minus": points["b_minus"].b,
        "a_plus": points["a_plus"].a,
        "b_plus": points["b_plus"].b,
    }
    snapped = {k: _snap(v, eps_zero) for k, v in raw.items()}
    # keep the ordering invariants exact after snapping and rounding
    snapped["a_plus"] = max(snapped["a_plus"], snapped["a_minus"])
    snapped["b_plus"] = max(snapped["b_plus"], snapped["b_minus"])
    return ScalingConstants(**snapped, eps_zero=eps_zero, points=points, raw=raw, failures=failures)


def min_a_given_b_pinned(m, pb: ControlPoint, cfg=None) -> ControlPoint:
    return _capped(min_a_given_b, m, equality_cap(pb.b), cfg, pb.h)


def min_b_given_a_pinned(m, pa: ControlPoint, cfg=None) -> ControlPoint:
    return _capped(min_b_given_a, m, equality_cap(pa.a), cfg, pa.h)


def classify(c: ScalingConstants, eps_zero: Optional[float] = None) -> ScalingClass:
    eps = c.eps_zero if eps_zero is None else eps_zero
    a0 = c.a_minus < eps
    b0 = c.b_minus < eps
    if a0 and b0 and c.a_plus < eps and c.b_plus < eps:
        return ScalingClass.UNINFORMATIVE
    if a0 and b0:
        return ScalingClass.QUADRATIC_LINEAR
    if a0:
        return ScalingClass.QUADRATIC_QUADRATIC
    if b0:
        return ScalingClass.LINEAR_LINEAR
    return ScalingClass.LINEAR_QUADRATIC


@dataclass
class TransitionTimes:
    tau_minus: Optional[float]
    tau_plus: Optional[float]
    merged: bool = False  # quadratic-linear: a single transition time
    notes: list = field(default_factory=list)

    @property
    def tau(self) -> Optional[float]:
        return self.tau_minus if self.merged else None

    def as_dict(self) -> dict:
        if self.merged:
            return {"tau": self.tau_minus, "notes": list(self.notes)}
        return {"tau_minus": self.tau_minus, "tau_plus": self.tau_plus, "notes": list(self.notes)}


def _ratio(num, den, eps, label, notes):
    if den < eps or num < eps:
        notes.append(f"{label}: degenerate")
        return None
    return num / den


def transition_times(c: ScalingConstants, cls: Optional[ScalingClass] = None) -> TransitionTimes:
    """Times where linear and quadratic contributions become comparable."""
    cls = cls or classify(c)
    eps = c.eps_zero
    notes: list[str] = []
    am, bm, ap, bp = c.a_minus, c.b_minus, c.a_plus, c.b_plus
    if cls is ScalingClass.QUADRATIC_LINEAR:
        tau = _ratio(ap, bp**2, eps, "tau", notes)
        return TransitionTimes(tau, tau, merged=True, notes=notes)
    if cls is ScalingClass.QUADRATIC_QUADRATIC:
        return TransitionTimes(_ratio(ap, bp**2, eps, "tau_minus", notes), _ratio(ap, bm**2, eps, "tau_plus", notes), notes=notes)
    if cls is ScalingClass.LINEAR_LINEAR:
        return TransitionTimes(_ratio(am, bp**2, eps, "tau_minus", notes), _ratio(ap, bp**2, eps, "tau_plus", notes), notes=notes)
    if cls is ScalingClass.LINEAR_QUADRATIC:
        return TransitionTimes(_ratio(am, bp**2, eps, "tau_minus", notes), _ratio(ap, bm**2, eps, "tau_plus", notes), notes=notes)
    return TransitionTimes(None, None, notes=["uninformative model: no transition"])


# ---------------------------------------------------------------------------


@dataclass
class ABCurve:
    """Certified achievable pairs on a uniform grid of caps ``b_grid``.

    ``b[i]``, ``a[i]`` are the norms actually reached by ``h[i]`` (so every
    pair is achievable); failed grid points have ``nan`` entries.
    """

    b_grid: np.ndarray
    b: np.ndarray
    a: np.ndarray
    h: list
    status: list

    def __len__(self):
        return len(self.b)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.a) & np.isfinite(self.b)

    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Valid ``(b, a)`` arrays."""
        ok = self.valid
        return self.b[ok], self.a[ok]

    def to_csv(self) -> str:
        lines = ["b,a"]
        lines += [f"{b!r},{a!r}" for b, a in zip(self.b.tolist(), self.a.tolist())]
        return "\n".join(lines) + "\n"


def ab_curve(
    m: MarkovianModel,
    n_points: int = 100,
    constants: Optional[ScalingConstants] = None,
    cfg: Optional[SolverConfig] = None,
) -> ABCurve:
    """Tabulate ``a(b) = min |a(h)|`` subject to ``|b(h)| <= b`` for ``b`` in ``[b-, b+]``."""
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    c = constants or compute_constants(m, cfg)
    p_first = c.points["a_plus"]   # (b-, a+)
    p_last = c.points["b_plus"]    # (b+, a-)
    b_lo, b_hi = p_first.b, p_last.b

    if b_hi - b_lo <= 1e-9 * max(1.0, b_hi):
        # degenerate: both ends coincide
        best = min((p_first, p_last), key=lambda p: (p.a, p.b))
        return ABCurve(np.array([best.b]), np.array([best.b]), np.array([best.a]), [best.h], [best.status.value])

    grid = np.linspace(b_lo, b_hi, n_points)
    bs, as_, hs, st = [p_first.b], [p_first.a], [p_first.h], [p_first.status.value]
    for cap in grid[1:-1]:
        lam = (b_hi - cap) / (b_hi - b_lo)
        hint = _mix(p_first.h, p_last.h, lam)
        try:
            p = min_a_given_b(m, cap, cfg, hint)
            bs.append(p.b)
            as_.append(p.a)
            hs.append(p.h)
            st.append(p.status.value)
        except SDPInfeasible as exc:
            bs.append(math.nan)
            as_.append(math.nan)
            hs.append(None)
            st.append(f"failed: {exc}")
    bs.append(p_last.b)
    as_.append(p_last.a)
    hs.append(p_last.h)
    st.append(p_last.status.value)
    return ABCurve(grid, np.array(bs), np.array(as_), hs, st)


def _mix(h1: ControlMatrix, h2: ControlMatrix, lam: float) -> ControlMatrix:
    return ControlMatrix(
        lam * h1.h00 + (1 - lam) * h2.h00,
        lam * h1.hvec + (1 - lam) * h2.hvec,
        lam * h1.hmat + (1 - lam) * h2.hmat,
    )

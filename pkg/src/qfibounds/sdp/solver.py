"""Small dense SDP solver: log-barrier path following with damped Newton steps.

Problems have the form::

    minimise    c @ x
    subject to  F0_j + sum_i x_i F_ij  >= 0   (PSD, for every block j)
                A_eq @ x == b_eq

with real symmetric blocks. Every centred iterate yields a dual-feasible point
built from the Newton step, so the returned optimum is bracketed by a certified
lower bound.
"""

from __future__ import annotations

import csv
import enum
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

ENV_PREFIX = "QFIBOUNDS_"


class SDPStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"


class SDPError(RuntimeError):
    pass


class SDPInfeasible(SDPError):
    pass


@dataclass(frozen=True)
class LMIBlock:
    """``F0 + sum_i x_i F[i] >= 0``."""

    F0: np.ndarray
    F: np.ndarray  # shape (k, m, m)

    def __post_init__(self):
        F0 = np.asarray(self.F0, dtype=float)
        F = np.asarray(self.F, dtype=float)
        if F.ndim == 2:
            F = F.reshape(0, *F0.shape)
        if F0.ndim != 2 or F0.shape[0] != F0.shape[1] or F.shape[1:] != F0.shape:
            raise ValueError(f"inconsistent LMI block shapes {F0.shape}, {F.shape}")
        for a in (F0, *F):
            if np.max(np.abs(a - a.T), initial=0.0) > 1e-12:
                raise ValueError("LMI coefficient matrices must be symmetric")
        object.__setattr__(self, "F0", F0)
        object.__setattr__(self, "F", F)

    @property
    def size(self) -> int:
        return self.F0.shape[0]

    @property
    def n_vars(self) -> int:
        return self.F.shape[0]

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.F0 + np.tensordot(x, self.F, axes=1)


@dataclass(frozen=True)
class SDPProblem:
    c: np.ndarray
    blocks: tuple[LMIBlock, ...]
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "blocks", tuple(self.blocks))
        for b in self.blocks:
            if b.n_vars != c.shape[0]:
                raise ValueError(f"block has {b.n_vars} variables, objective has {c.shape[0]}")
        if self.A_eq is not None:
            A = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
            bb = np.asarray(self.b_eq, dtype=float).reshape(-1)
            if A.shape != (bb.shape[0], c.shape[0]):
                raise ValueError("equality constraint shapes are inconsistent")
            object.__setattr__(self, "A_eq", A)
            object.__setattr__(self, "b_eq", bb)

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    def min_eig(self, x: np.ndarray) -> float:
        return min((float(np.linalg.eigvalsh(b.value(x))[0]) for b in self.blocks if b.size), default=np.inf)


@dataclass
class SolverConfig:
    gap_tol: float = 1e-9
    feas_tol: float = 1e-9
    max_iter: int = 200
    t0: Optional[float] = None
    mu: float = 10.0
    alpha: float = 0.25
    beta: float = 0.5
    newton_tol: float = 1e-10
    phase_one_radius: float = 1e4
    trace_path: Optional[str] = None

    def __post_init__(self):
        if self.gap_tol <= 0 or self.feas_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1 or self.mu <= 1 or not (0 < self.alpha < 0.5) or not (0 < self.beta < 1):
            raise ValueError("invalid solver parameters")

    @classmethod
    def from_env(cls, **overrides) -> "SolverConfig":
        """Defaults overridden by ``QFIBOUNDS_GAP_TOL``, ``QFIBOUNDS_FEAS_TOL``, ``QFIBOUNDS_MAX_ITER``."""
        kw = {}
        for name, conv in (("gap_tol", float), ("feas_tol", float), ("max_iter", int)):
            raw = os.environ.get(ENV_PREFIX + name.upper())
            if raw is not None:
                kw[name] = conv(raw)
        kw.update(overrides)
        return cls(**kw)


@dataclass
class SDPSolution:
    value: float
    x: np.ndarray
    status: SDPStatus
    gap: float
    feas_margin: float
    dual_value: float
    iterations: int
    history: list = field(default_factory=list, repr=False)

    @property
    def ok(self) -> bool:
        return self.status is SDPStatus.OPTIMAL


def real_embedding(Z: np.ndarray) -> np.ndarray:
    """Real symmetric ``[[X, -Y], [Y, X]]`` of a Hermitian ``Z = X + iY``."""
    Z = np.asarray(Z, dtype=complex)
    if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
        raise ValueError("expected a square matrix")
    if np.max(np.abs(Z - Z.conj().T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(Z), initial=0.0)):
        raise ValueError("real_embedding needs a Hermitian matrix")
    X, Y = Z.real, Z.imag
    out = np.block([[X, -Y], [Y, X]])
    return (out + out.T) / 2


# ---------------------------------------------------------------------------


class _Reduced:
    """The problem restricted to ``x = x_p + T z`` (equalities eliminated, dead directions removed)."""

    def __init__(self, p: SDPProblem):
        k = p.n_vars
        x_p = np.zeros(k)
        N = np.eye(k)
        if p.A_eq is not None and p.A_eq.shape[0]:
            x_p, *_ = np.linalg.lstsq(p.A_eq, p.b_eq, rcond=None)
            resid = np.linalg.norm(p.A_eq @ x_p - p.b_eq)
            if resid > 1e-9 * max(1.0, np.linalg.norm(p.b_eq)):
                raise SDPInfeasible(f"equality constraints are inconsistent (residual {resid:.3g})")
            N = scipy.linalg.null_space(p.A_eq, rcond=1e-12)

        F0 = [b.F0 + np.tensordot(x_p, b.F, axes=1) for b in p.blocks]
        Fn = [np.tensordot(N.T, b.F, axes=1) for b in p.blocks]
        # drop directions along which no block changes
        if N.shape[1] and Fn:
            Phi = np.hstack([f.reshape(f.shape[0], -1) for f in Fn])
            U, s, _ = np.linalg.svd(Phi, full_matrices=True)
            keep = int(np.sum(s > 1e-12 * s[0])) if s.size and s[0] > 0 else 0
            W = U[:, :keep]
        else:
            W = np.zeros((N.shape[1], 0))
        T = N @ W
        c_red = T.T @ p.c
        c_full_red = N.T @ p.c
        if np.linalg.norm(c_full_red - W @ (W.T @ c_full_red)) > 1e-10 * max(1.0, np.linalg.norm(p.c)):
            raise SDPError("objective is unbounded along a direction no constraint sees")

        self.problem = p
        self.x_p = x_p
        self.T = T
        self.c = c_red
        self.c0 = float(p.c @ x_p)
        self.F0 = F0
        self.F = [np.tensordot(W.T, f, axes=1) for f in Fn]
        self.m_total = sum(b.size for b in p.blocks)

    def to_x(self, z):
        return self.x_p + self.T @ z

    def to_z(self, x):
        return self.T.T @ (np.asarray(x, dtype=float) - self.x_p)

    def blocks_at(self, z):
        return [F0 + np.tensordot(z, F, axes=1) for F0, F in zip(self.F0, self.F)]


def _chol(S):
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return None


def _strictly_feasible(blocks):
    return all(b.shape[0] == 0 or _chol(b) is not None for b in blocks)


class _Barrier:
    """Centring machinery for ``t c @ z - sum_j log det F_j(z)``."""

    def __init__(self, c, F0, F, cfg: SolverConfig):
        self.c, self.F0, self.F, self.cfg = c, F0, F, cfg
        self.m = sum(f.shape[0] for f in F0)

    def blocks(self, z):
        return [F0 + np.tensordot(z, F, axes=1) for F0, F in zip(self.F0, self.F)]

    def psi(self, z, t):
        val = t * (self.c @ z)
        for S in self.blocks(z):
            if S.shape[0] == 0:
                continue
            C = _chol(S)
            if C is None:
                return np.inf
            val -= 2 * np.sum(np.log(np.diag(C)))
        return val

    def derivs(self, z, t):
        """Gradient, Hessian and the whitened coefficients ``C^-1 F_i C^-T`` per block."""
        k = z.shape[0]
        g = t * self.c.copy()
        H = np.zeros((k, k))
        Gs = []
        for S, F in zip(self.blocks(z), self.F):
            if S.shape[0] == 0:
                Gs.append(None)
                continue
            C = np.linalg.cholesky(S)
            Ci = scipy.linalg.solve_triangular(C, np.eye(S.shape[0]), lower=True)
            G = np.einsum("ab,kbc,dc->kad", Ci, F, Ci)
            Gs.append(G)
            g -= np.einsum("kaa->k", G)
            Gf = G.reshape(k, -1)
            H += Gf @ Gf.T
        return g, H, Gs

    def newton(self, z, t):
        g, H, Gs = self.derivs(z, t)
        dz = _solve_psd(H, -g)
        lam2 = float(-g @ dz)
        return dz, max(lam2, 0.0), Gs

    def centre(self, z, t, budget):
        """Damped Newton until the decrement is small; returns (z, steps, dz, lam2, Gs)."""
        steps = 0
        best = np.inf
        stalled = 0
        while True:
            dz, lam2, Gs = self.newton(z, t)
            if lam2 / 2 <= self.cfg.newton_tol or steps >= budget:
                return z, steps, dz, lam2, Gs
            # rounding floor reached: the decrement stops shrinking near the centre
            stalled = stalled + 1 if lam2 > 0.5 * best else 0
            best = min(best, lam2)
            if stalled >= 3 and lam2 < 0.25:
                return z, steps, dz, lam2, Gs
            s = 1.0
            if np.sqrt(lam2) < 0.25:
                # quadratic-convergence region: full step, only guard positivity
                while not _strictly_feasible(self.blocks(z + s * dz)) and s >= 1e-14:
                    s *= self.cfg.beta
            else:
                f0 = self.psi(z, t)
                while self.psi(z + s * dz, t) > f0 - self.cfg.alpha * s * lam2 and s >= 1e-14:
                    s *= self.cfg.beta
            if s < 1e-14:
                # no progress possible in floating point
                return z, steps, dz, lam2, Gs
            z = z + s * dz
            steps += 1

    def certificate(self, z, t, dz, lam2, Gs):
        """Duality gap of the dual point built from the Newton step, or None."""
        if lam2 >= 1.0:
            return None
        gap = 0.0
        for G in Gs:
            if G is None:
                continue
            D = np.tensordot(dz, G, axes=1)
            w = np.linalg.eigvalsh(np.eye(G.shape[1]) - D)
            if w[0] < -1e-12:
                return None
            gap += float(np.sum(w))
        return gap / t


def _solve_psd(H, rhs):
    try:
        C = np.linalg.cholesky(H)
        y = scipy.linalg.solve_triangular(C, rhs, lower=True)
        return scipy.linalg.solve_triangular(C.T, y, lower=False)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(H)
        inv = np.where(w > 1e-14 * max(w[-1], 1e-300), 1.0 / np.where(w > 0, w, 1), 0.0)
        return V @ (inv * (V.T @ rhs))


def _initial_t(bar: _Barrier, z):
    # t minimising the Newton decrement of the barrier problem at z
    if not np.any(bar.c):
        return 1.0
    g, H, _ = bar.derivs(z, 0.0)
    Hc = _solve_psd(H, bar.c)
    denom = float(bar.c @ Hc)
    t = -float(g @ Hc) / denom if denom > 0 else 1.0
    return float(np.clip(t, 1e-3, 1e3)) if np.isfinite(t) and t > 0 else 1.0


def _phase_one(red: _Reduced, z0, cfg: SolverConfig):
    """Find ``z`` with every block positive definite.

    Minimises ``s`` subject to ``F_j(z) + s I >= 0``, ``s >= -1`` and
    ``|z - z0| <= radius`` (keeps the auxiliary problem bounded).
    """
    k = z0.shape[0]
    R = cfg.phase_one_radius * max(1.0, float(np.linalg.norm(z0)))
    F0 = list(red.F0) + [np.array([[1.0]])]
    F = []
    for f, F0j in zip(red.F, red.F0):
        eye = np.eye(F0j.shape[0])[None]
        F.append(np.concatenate([f, eye], axis=0))
    F.append(np.concatenate([np.zeros((k, 1, 1)), np.ones((1, 1, 1))], axis=0))
    # ball [[R, (z - z0)^T], [z - z0, R I]] >= 0
    ball0 = R * np.eye(k + 1)
    ball0[0, 1:] = ball0[1:, 0] = -z0
    ballF = np.zeros((k + 1, k + 1, k + 1))
    for i in range(k):
        ballF[i, 0, i + 1] = ballF[i, i + 1, 0] = 1.0
    F0.append(ball0)
    F.append(ballF)
    c = np.zeros(k + 1)
    c[-1] = 1.0
    bar = _Barrier(c, F0, F, cfg)
    lam_min = min((np.linalg.eigvalsh(S)[0] for S in red.blocks_at(z0) if S.shape[0]), default=1.0)
    s0 = max(0.0, -lam_min) + 1.0
    w = np.concatenate([z0, [s0]])
    t = 1.0
    it = 0
    while it < cfg.max_iter:
        w, steps, dz, lam2, Gs = bar.centre(w, t, cfg.max_iter - it)
        it += steps
        gap = bar.certificate(w, t, dz, lam2, Gs)
        s = w[-1]
        z = w[:-1]
        if s < 0 and _strictly_feasible(red.blocks_at(z)):
            if gap is not None and gap <= abs(s) / 2:
                return z, it
        if gap is not None and s - gap > 0:
            raise SDPInfeasible(f"no strictly feasible point (phase-one bound {s - gap:.3g} > 0)")
        if gap is not None and gap < cfg.feas_tol:
            raise SDPInfeasible(f"feasible set has empty interior (phase-one optimum {s:.3g})")
        t *= cfg.mu
    raise SDPInfeasible("phase one did not find a strictly feasible point within the iteration budget")


def solve_sdp(problem: SDPProblem, config: Optional[SolverConfig] = None, x0: Optional[Sequence[float]] = None) -> SDPSolution:
    """Solve ``problem``; ``x0`` is an optional starting guess (used if strictly feasible).

    Raises ``SDPInfeasible`` when no strictly feasible point exists.
    """
    cfg = config or SolverConfig()
    red = _Reduced(problem)
    k = red.T.shape[1]
    z = red.to_z(x0) if x0 is not None else np.zeros(k)
    it = 0
    if not _strictly_feasible(red.blocks_at(z)):
        z, it = _phase_one(red, z, cfg)

    bar = _Barrier(red.c, red.F0, red.F, cfg)
    history = []
    if k == 0:
        x = red.to_x(z)
        return SDPSolution(red.c0, x, SDPStatus.OPTIMAL, 0.0, problem.min_eig(x), red.c0, it, history)

    t = cfg.t0 if cfg.t0 is not None else _initial_t(bar, z)
    best = None  # (gap, z)
    status = SDPStatus.MAX_ITER
    while True:
        z, steps, dz, lam2, Gs = bar.centre(z, t, max(cfg.max_iter - it, 0))
        it += steps
        gap = bar.certificate(z, t, dz, lam2, Gs)
        primal = red.c0 + float(red.c @ z)
        if gap is not None:
            if best is None or gap <= best[0]:
                best = (gap, z.copy())
            history.append((it, gap, _min_eig(bar.blocks(z)), primal, t))
            if gap <= cfg.gap_tol:
                status = SDPStatus.OPTIMAL
                break
        if it >= cfg.max_iter or steps == 0 and gap is not None and t > 1e20:
            break
        t *= cfg.mu

    if best is None:
        best = (np.inf, z)
    gap, z = best
    x = red.to_x(z)
    value = float(problem.c @ x)
    margin = problem.min_eig(x)
    if status is SDPStatus.OPTIMAL and margin < -cfg.feas_tol:
        status = SDPStatus.MAX_ITER
    sol = SDPSolution(value, x, status, float(gap), margin, value - float(gap), it, history)
    if cfg.trace_path:
        dump_history(sol, cfg.trace_path)
    return sol


def _min_eig(blocks):
    return min((float(np.linalg.eigvalsh(S)[0]) for S in blocks if S.shape[0]), default=np.inf)


def dump_history(sol: SDPSolution, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "gap", "feasibility_margin", "primal", "t"])
        for row in sol.history:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])

"""Schur-complement LMIs for the operator norms of the a and b operators.

Decision variables are the ``(n+1)**2`` real parameters of the control matrix
``h`` (see ``ControlMatrix.to_vector``), optionally followed by one scalar
bound (``a`` or ``b``).

* ``[[a 1, M^dag], [M, 1]] >= 0``  iff  ``a >= |a(h)|`` with ``a(h) = M^dag M``;
* ``b 1 - b(h) >= 0`` and ``b 1 + b(h) >= 0``  iff  ``b >= |b(h)|`` (``b(h)`` is Hermitian).

Complex Hermitian blocks are realised over the reals by ``real_embedding``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..algebra import (
    ControlMatrix,
    build_a_op,
    build_b_op,
    build_M,
    extended_products,
    g_operator,
    hermitian_basis,
    op_norm,
)
from ..model import MarkovianModel
from .solver import (
    LMIBlock,
    SDPInfeasible,
    SDPProblem,
    SDPSolution,
    SDPStatus,
    SolverConfig,
    real_embedding,
    solve_sdp,
)

# caps at or below this are treated as the exact constraint a(h) = 0 / b(h) = 0
EXACT_ZERO_CAP = 1e-8


def n_control_params(m: MarkovianModel) -> int:
    return (m.n_jumps + 1) ** 2


def _M_coefficients(m: MarkovianModel):
    """Constant part and per-parameter coefficients of the stacked M(h)."""
    d, n = m.dim, m.n_jumps
    eye = np.eye(d)
    L = np.array(m.L).reshape(n, d, d)
    M0 = (1j * np.array(m.Ldot).reshape(n, d, d)).reshape(n * d, d)
    coeffs = []
    for E in hermitian_basis(n + 1):
        blk = np.einsum("kl,lij->kij", E[1:, 1:], L) + E[1:, 0][:, None, None] * eye
        coeffs.append(blk.reshape(n * d, d))
    return M0, coeffs


def _b_coefficients(m: MarkovianModel):
    P = extended_products(m)
    coeffs = [np.einsum("ij,ijac->ac", E, P) for E in hermitian_basis(m.n_jumps + 1)]
    return g_operator(m), coeffs


def _embed_linear(Z: np.ndarray) -> np.ndarray:
    Z = (Z + Z.conj().T) / 2
    return real_embedding(Z)


def assemble_A_lmi(m: MarkovianModel, with_variable_a: bool = True, a_cap: Optional[float] = None) -> LMIBlock:
    """Real-embedded ``[[a 1, M^dag], [M, 1]]``; ``a`` is the last variable or the fixed ``a_cap``."""
    if not with_variable_a and a_cap is None:
        raise ValueError("a_cap is required when a is not a decision variable")
    d, n = m.dim, m.n_jumps
    size = d + n * d
    M0, coeffs = _M_coefficients(m)

    def hermitian_block(top_left, M, bottom_right):
        Z = np.zeros((size, size), complex)
        Z[:d, :d] = top_left * np.eye(d)
        Z[d:, :d] = M
        Z[:d, d:] = M.conj().T
        Z[d:, d:] = bottom_right * np.eye(n * d)
        return Z

    F0 = _embed_linear(hermitian_block(0.0 if with_variable_a else a_cap, M0, 1.0))
    F = [_embed_linear(hermitian_block(0.0, C, 0.0)) for C in coeffs]
    if with_variable_a:
        F.append(_embed_linear(hermitian_block(1.0, np.zeros((n * d, d)), 0.0)))
    return LMIBlock(F0, np.array(F).reshape(len(F), 2 * size, 2 * size))


def assemble_B_lmi(m: MarkovianModel, with_variable_b: bool = True, b_cap: Optional[float] = None) -> tuple[LMIBlock, LMIBlock]:
    """Real-embedded pair ``b 1 - b(h) >= 0``, ``b 1 + b(h) >= 0``."""
    if not with_variable_b and b_cap is None:
        raise ValueError("b_cap is required when b is not a decision variable")
    d = m.dim
    G, coeffs = _b_coefficients(m)
    eye = np.eye(d)
    out = []
    for sign in (-1.0, 1.0):
        F0 = _embed_linear((0.0 if with_variable_b else b_cap) * eye + sign * G)
        F = [_embed_linear(sign * C) for C in coeffs]
        if with_variable_b:
            F.append(_embed_linear(eye))
        out.append(LMIBlock(F0, np.array(F).reshape(len(F), 2 * d, 2 * d)))
    return out[0], out[1]


def _zero_a_equalities(m: MarkovianModel, k: int):
    """Rows of ``M(h) = 0`` (real and imaginary parts) over the first ``k`` variables."""
    M0, coeffs = _M_coefficients(m)
    A = np.array([c.reshape(-1) for c in coeffs]).T
    A = np.vstack([A.real, A.imag])
    b = -np.concatenate([M0.reshape(-1).real, M0.reshape(-1).imag])
    return np.hstack([A, np.zeros((A.shape[0], k - A.shape[1]))]), b


def _zero_b_equalities(m: MarkovianModel, k: int):
    G, coeffs = _b_coefficients(m)
    A = np.array([c.reshape(-1) for c in coeffs]).T
    A = np.vstack([A.real, A.imag])
    b = -np.concatenate([G.reshape(-1).real, G.reshape(-1).imag])
    return np.hstack([A, np.zeros((A.shape[0], k - A.shape[1]))]), b


def _pad(block: LMIBlock, k: int) -> LMIBlock:
    """Same block over ``k`` variables (missing trailing coefficients are zero)."""
    extra = np.zeros((k - block.n_vars, block.size, block.size))
    return LMIBlock(block.F0, np.concatenate([block.F, extra], axis=0))


@dataclass
class ControlPoint:
    """A certified achievable pair of norms and the control matrix realising it.

    ``a`` and ``b`` are recomputed from ``h``; ``lower_bound`` is the dual
    bound on the optimised quantity.
    """

    a: float
    b: float
    h: ControlMatrix
    lower_bound: float
    solution: Optional[SDPSolution]

    @property
    def status(self) -> SDPStatus:
        return self.solution.status if self.solution is not None else SDPStatus.OPTIMAL


def norms(m: MarkovianModel, h: ControlMatrix) -> tuple[float, float]:
    """``(|a(h)|, |b(h)|)``."""
    return op_norm(build_a_op(m, h)), op_norm(build_b_op(m, h))


def _point(m, x, sol, which):
    n = m.n_jumps
    xh = x[: n_control_params(m)]
    h = ControlMatrix.from_vector(xh, n)
    a, b = norms(m, h)
    # drop solver noise in h when that is no worse (norms are recomputed, so this stays certified)
    clean = np.where(np.abs(xh) <= 1e-12 * max(1.0, float(np.max(np.abs(xh), initial=0.0))), 0.0, xh)
    if np.any(clean != xh):
        hc = ControlMatrix.from_vector(clean, n)
        ac, bc = norms(m, hc)
        if ac <= a and bc <= b:
            h, a, b = hc, ac, bc
    lower = sol.dual_value if sol is not None else (a if which == "a" else b)
    return ControlPoint(a=a, b=b, h=h, lower_bound=max(lower, 0.0), solution=sol)


def _start(m: MarkovianModel, hint: Optional[ControlMatrix], which: str):
    h = hint if hint is not None else ControlMatrix.zeros(m.n_jumps)
    val = op_norm(build_M(m, h)) ** 2 if which == "a" else op_norm(build_b_op(m, h))
    return np.concatenate([h.to_vector(), [val + 1.0]])


def _solve(m, problem, x0, cfg, which):
    sol = solve_sdp(problem, cfg, x0=x0)
    return _point(m, sol.x, sol, which)


def min_a(m: MarkovianModel, cfg: Optional[SolverConfig] = None, hint: Optional[ControlMatrix] = None) -> ControlPoint:
    """Unconstrained minimum of ``|a(h)|`` (the short-time constant)."""
    k = n_control_params(m) + 1
    c = np.zeros(k)
    c[-1] = 1.0
    p = SDPProblem(c, [assemble_A_lmi(m)])
    return _solve(m, p, _start(m, hint, "a"), cfg, "a")


def min_b(m: MarkovianModel, cfg: Optional[SolverConfig] = None, hint: Optional[ControlMatrix] = None) -> ControlPoint:
    """Unconstrained minimum of ``|b(h)|`` (the asymptotic constant)."""
    k = n_control_params(m) + 1
    c = np.zeros(k)
    c[-1] = 1.0
    p = SDPProblem(c, list(assemble_B_lmi(m)))
    return _solve(m, p, _start(m, hint, "b"), cfg, "b")


def min_a_given_b(
    m: MarkovianModel,
    b_cap: float,
    cfg: Optional[SolverConfig] = None,
    hint: Optional[ControlMatrix] = None,
) -> ControlPoint:
    """Minimal ``|a(h)|`` subject to ``|b(h)| <= b_cap``.

    A cap at or below ``EXACT_ZERO_CAP`` is imposed as the linear constraint
    ``b(h) = 0`` (the inequality would leave no interior). Raises
    ``SDPInfeasible`` when the cap is below the unconstrained minimum of ``|b|``.
    """
    if not math.isfinite(b_cap):
        return min_a(m, cfg, hint)
    k = n_control_params(m) + 1
    c = np.zeros(k)
    c[-1] = 1.0
    A = assemble_A_lmi(m)
    if b_cap <= EXACT_ZERO_CAP:
        if b_cap < 0:
            raise SDPInfeasible(f"negative cap {b_cap}")
        A_eq, b_eq = _zero_b_equalities(m, k)
        p = SDPProblem(c, [A], A_eq, b_eq)
    else:
        p = SDPProblem(c, [A, *(_pad(b, k) for b in assemble_B_lmi(m, False, b_cap))])
    return _solve(m, p, _start(m, hint, "a"), cfg, "a")


def min_b_given_a(
    m: MarkovianModel,
    a_cap: float,
    cfg: Optional[SolverConfig] = None,
    hint: Optional[ControlMatrix] = None,
) -> ControlPoint:
    """Minimal ``|b(h)|`` subject to ``|a(h)| <= a_cap`` (``a_cap`` may be ``inf``)."""
    if not math.isfinite(a_cap):
        return min_b(m, cfg, hint)
    k = n_control_params(m) + 1
    c = np.zeros(k)
    c[-1] = 1.0
    B1, B2 = assemble_B_lmi(m)
    if a_cap <= EXACT_ZERO_CAP:
        if a_cap < 0:
            raise SDPInfeasible(f"negative cap {a_cap}")
        A_eq, b_eq = _zero_a_equalities(m, k)
        p = SDPProblem(c, [B1, B2], A_eq, b_eq)
    else:
        p = SDPProblem(c, [_pad(assemble_A_lmi(m, False, a_cap), k), B1, B2])
    return _solve(m, p, _start(m, hint, "b"), cfg, "b")

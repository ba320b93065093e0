"""Operators entering the QFI growth bound, algebraic scaling tests and gauge maps.

Notation: ``h`` is the ``(n+1) x (n+1)`` Hermitian control matrix with blocks
``h00`` (real), ``hvec`` (the lower-left column) and ``hmat`` (``n x n``).
The extended jump vector is ``[1, L_1, ..., L_n]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import MarkovianModel

SPAN_RANK_RTOL = 1e-10
MEMBERSHIP_TOL = 1e-8


@dataclass(frozen=True)
class ControlMatrix:
    h00: float
    hvec: np.ndarray
    hmat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "h00", float(np.real(self.h00)))
        object.__setattr__(self, "hvec", np.asarray(self.hvec, dtype=complex).reshape(-1))
        n = self.hvec.shape[0]
        object.__setattr__(self, "hmat", np.asarray(self.hmat, dtype=complex).reshape(n, n))
        if np.max(np.abs(self.hmat - self.hmat.conj().T), initial=0.0) > 1e-12:
            raise ValueError("hmat must be Hermitian")

    @property
    def n(self) -> int:
        return self.hvec.shape[0]

    @classmethod
    def zeros(cls, n: int) -> "ControlMatrix":
        return cls(0.0, np.zeros(n, complex), np.zeros((n, n), complex))

    @classmethod
    def from_full(cls, h: np.ndarray) -> "ControlMatrix":
        h = np.asarray(h, dtype=complex)
        return cls(h[0, 0].real, h[1:, 0], (h[1:, 1:] + h[1:, 1:].conj().T) / 2)

    def full(self) -> np.ndarray:
        n = self.n
        h = np.zeros((n + 1, n + 1), dtype=complex)
        h[0, 0] = self.h00
        h[1:, 0] = self.hvec
        h[0, 1:] = self.hvec.conj()
        h[1:, 1:] = self.hmat
        return h

    # Real encoding: n+1 diagonal entries, then (re, im) of each strictly
    # lower entry h[i, j], i > j, in row-major order. Bijective with Hermitian h.
    def to_vector(self) -> np.ndarray:
        h = self.full()
        n1 = self.n + 1
        out = [h[i, i].real for i in range(n1)]
        for i in range(n1):
            for j in range(i):
                out += [h[i, j].real, h[i, j].imag]
        return np.array(out)

    @classmethod
    def from_vector(cls, x: np.ndarray, n: int) -> "ControlMatrix":
        return cls.from_full(hermitian_from_vector(x, n + 1))


def hermitian_basis(size: int) -> list[np.ndarray]:
    """Hermitian matrices ``E_i`` with ``h = sum_i x_i E_i`` for the real encoding."""
    basis = []
    for i in range(size):
        e = np.zeros((size, size), complex)
        e[i, i] = 1
        basis.append(e)
    for i in range(size):
        for j in range(i):
            re = np.zeros((size, size), complex)
            re[i, j] = re[j, i] = 1
            im = np.zeros((size, size), complex)
            im[i, j], im[j, i] = 1j, -1j
            basis += [re, im]
    return basis


def hermitian_from_vector(x: np.ndarray, size: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (size * size,):
        raise ValueError(f"expected {size * size} real parameters, got {x.shape}")
    return np.einsum("i,ijk->jk", x, np.array(hermitian_basis(size)))


def _check(m: MarkovianModel, h: ControlMatrix):
    if h.n != m.n_jumps:
        raise ValueError(f"control matrix is for n={h.n} jump operators, model has n={m.n_jumps}")


def build_M(m: MarkovianModel, h: ControlMatrix) -> np.ndarray:
    """Vertical stack of the blocks ``i Ldot_k + sum_l hmat_kl L_l + hvec_k 1``, shape (n d, d)."""
    _check(m, h)
    d, n = m.dim, m.n_jumps
    if n == 0:
        return np.zeros((0, d), complex)
    L = np.array(m.L)
    blocks = 1j * np.array(m.Ldot) + np.einsum("kl,lij->kij", h.hmat, L) + h.hvec[:, None, None] * np.eye(d)
    return blocks.reshape(n * d, d)


def build_a_op(m: MarkovianModel, h: ControlMatrix) -> np.ndarray:
    M = build_M(m, h)
    return M.conj().T @ M


def g_operator(m: MarkovianModel) -> np.ndarray:
    """``Hdot - (i/2) sum_k (Ldot_k^dag L_k - L_k^dag Ldot_k)``."""
    G = np.array(m.Hdot, dtype=complex)
    for Lk, Lkd in zip(m.L, m.Ldot):
        G = G - 0.5j * (Lkd.conj().T @ Lk - Lk.conj().T @ Lkd)
    return (G + G.conj().T) / 2


def extended_products(m: MarkovianModel) -> np.ndarray:
    """Array P with ``P[i, j] = Lext_i^dag Lext_j`` where ``Lext = [1, L_1, ..., L_n]``."""
    ext = np.array([np.eye(m.dim, dtype=complex), *m.L])
    return np.einsum("iba,jbc->ijac", ext.conj(), ext)


def build_b_op(m: MarkovianModel, h: ControlMatrix) -> np.ndarray:
    _check(m, h)
    B = g_operator(m) + np.einsum("ij,ijac->ac", h.full(), extended_products(m))
    if np.max(np.abs(B - B.conj().T)) > 1e-10 * max(1.0, np.max(np.abs(B))):
        raise ArithmeticError("b operator is not Hermitian; inconsistent input")
    return (B + B.conj().T) / 2


def op_norm(a: np.ndarray) -> float:
    """Operator norm (largest singular value)."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


# ---------------------------------------------------------------------------
# algebraic conditions


@dataclass(frozen=True)
class SpanBasis:
    generators: tuple[np.ndarray, ...]
    basis: np.ndarray  # orthonormal columns, shape (d*d, rank)

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


def span_basis(generators, rtol: float = SPAN_RANK_RTOL) -> SpanBasis:
    gens = tuple(np.asarray(g, dtype=complex) for g in generators)
    V = np.array([g.reshape(-1) for g in gens]).T
    U, s, _ = np.linalg.svd(V, full_matrices=False)
    rank = int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
    return SpanBasis(gens, U[:, :rank])


def lindblad_span(m: MarkovianModel) -> SpanBasis:
    """Orthonormal basis of span{1, L_k, L_k^dag, L_k^dag L_l}."""
    gens = [np.eye(m.dim, dtype=complex)]
    gens += list(m.L)
    gens += [a.conj().T for a in m.L]
    gens += [a.conj().T @ b for a in m.L for b in m.L]
    return span_basis(gens)


def span_membership(G: np.ndarray, S: SpanBasis, tol: float = MEMBERSHIP_TOL) -> tuple[bool, float]:
    g = np.asarray(G, dtype=complex).reshape(-1)
    Q = S.basis
    residual = float(np.linalg.norm(g - Q @ (Q.conj().T @ g)))
    return residual <= tol * float(np.linalg.norm(g)), residual


def short_time_condition(m: MarkovianModel, tol: float = MEMBERSHIP_TOL) -> tuple[bool, float]:
    """Whether ``Ldot = -i (hmat L + hvec 1)`` is solvable with Hermitian ``hmat``.

    Solves the least-squares problem over the real parameters of ``hmat`` and
    ``hvec``; the returned residual is the Frobenius norm of the misfit. The
    test is relative to the size of ``Ldot``.
    """
    n, d = m.n_jumps, m.dim
    if n == 0:
        return True, 0.0
    target = np.array(m.Ldot).reshape(-1)
    # columns: action of each real parameter on the stacked vector i(hmat L + hvec 1)
    cols = []
    L = np.array(m.L)
    for E in hermitian_basis(n):
        cols.append((1j * np.einsum("kl,lij->kij", E, L)).reshape(-1))
    for k in range(n):
        for c in (1.0, 1j):
            blk = np.zeros((n, d, d), complex)
            blk[k] = 1j * c * np.eye(d)
            cols.append(blk.reshape(-1))
    A = np.array(cols).T
    # Ldot + A p = 0 in the real sense
    Ar = np.vstack([A.real, A.imag])
    br = -np.concatenate([target.real, target.imag])
    p, *_ = np.linalg.lstsq(Ar, br, rcond=None)
    residual = float(np.linalg.norm(Ar @ p - br))
    return residual <= tol * float(np.linalg.norm(target)), residual


# ---------------------------------------------------------------------------
# gauge freedom


@dataclass(frozen=True)
class GaugeParams:
    """Parameter-independent gauge ``L -> u (L + v 1)`` with the matching Hamiltonian shift."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.u, dtype=complex))
        v = np.asarray(self.v, dtype=complex).reshape(-1)
        if u.shape != (v.shape[0], v.shape[0]):
            raise ValueError(f"u has shape {u.shape} but v has length {v.shape[0]}")
        if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])), initial=0.0) > 1e-8:
            raise ValueError("u is not unitary")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def random(cls, rng: np.random.Generator, n: int, scale: float = 1.0) -> "GaugeParams":
        z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        q, r = np.linalg.qr(z)
        u = q * (np.diag(r) / np.abs(np.diag(r)))
        v = scale * (rng.normal(size=n) + 1j * rng.normal(size=n))
        return cls(u, v)


def _hamiltonian_shift(v: np.ndarray, ops) -> np.ndarray:
    # (1/2i) (v^dag L - L^dag v)
    S = sum(np.conj(vk) * A - vk * A.conj().T for vk, A in zip(v, ops))
    return S / 2j


def gauge_transform(m: MarkovianModel, g: GaugeParams) -> MarkovianModel:
    """Apply a parameter-independent gauge to the whole model family.

    Values: ``L' = u (L + v 1)``, ``H' = H + (1/2i)(v^dag L - L^dag v)``; since
    ``u`` and ``v`` do not depend on the parameter the derivatives follow as
    ``Ldot' = u Ldot`` and ``Hdot' = Hdot + (1/2i)(v^dag Ldot - Ldot^dag v)``.
    The generator and all scaling constants are unchanged.
    """
    n, d = m.n_jumps, m.dim
    if g.v.shape[0] != n:
        raise ValueError(f"gauge is for n={g.v.shape[0]} jump operators, model has n={n}")
    if n == 0:
        return m
    L = np.array(m.L) + g.v[:, None, None] * np.eye(d)
    Lp = np.einsum("kl,lij->kij", g.u, L)
    Ldp = np.einsum("kl,lij->kij", g.u, np.array(m.Ldot))
    H = m.H + _hamiltonian_shift(g.v, m.L)
    Hdot = m.Hdot + _hamiltonian_shift(g.v, m.Ldot)
    return m.replace(H=(H + H.conj().T) / 2, Hdot=(Hdot + Hdot.conj().T) / 2, L=tuple(Lp), Ldot=tuple(Ldp))


class NotInSpan(ValueError):
    """Some ``Ldot_k`` is not a combination of the identity and the jump operators."""

    def __init__(self, residual: float):
        super().__init__(f"Ldot is not in span{{1, L_k}} (residual {residual:.3g})")
        self.residual = residual


@dataclass(frozen=True)
class CanonicalDecomposition:
    """``Ldot = h1 L - i h2 L - i hvec 1`` with ``h1``, ``h2`` Hermitian."""

    h1: np.ndarray
    h2: np.ndarray
    hvec: np.ndarray
    residual: float


def canonical_decomposition(m: MarkovianModel, tol: float = MEMBERSHIP_TOL) -> CanonicalDecomposition:
    """Decompose ``Ldot`` over ``{L_l, 1}``; raises ``NotInSpan`` otherwise.

    When the generators are linearly dependent the minimum-norm least-squares
    coefficients are used.
    """
    n, d = m.n_jumps, m.dim
    if n == 0:
        z = np.zeros((0, 0), complex)
        return CanonicalDecomposition(z, z, np.zeros(0, complex), 0.0)
    V = np.array([*(a.reshape(-1) for a in m.L), np.eye(d).reshape(-1)]).T
    T = np.array([a.reshape(-1) for a in m.Ldot]).T
    coef, *_ = np.linalg.lstsq(V, T, rcond=None)
    residual = float(np.linalg.norm(V @ coef - T))
    if residual > tol * max(float(np.linalg.norm(T)), 1e-300) and residual > 0:
        raise NotInSpan(residual)
    K = coef[:n].T  # Ldot_k = sum_l K_kl L_l + c_k 1
    c = coef[n]
    h1 = (K + K.conj().T) / 2
    h2 = 0.5j * (K - K.conj().T)
    return CanonicalDecomposition(h1=h1, h2=h2, hvec=1j * c, residual=residual)


def canonicalize(m: MarkovianModel, tol: float = MEMBERSHIP_TOL) -> MarkovianModel:
    """Gauge-equivalent model with ``Ldot' = h1 L`` and the identity part moved into ``Hdot``."""
    dec = canonical_decomposition(m, tol)
    if m.n_jumps == 0:
        return m
    L = np.array(m.L)
    Ldp = np.einsum("kl,lij->kij", dec.h1, L)
    shift = sum(np.conj(hk) * A + hk * A.conj().T for hk, A in zip(dec.hvec, m.L))
    Hdot = m.Hdot - 0.5 * shift
    return m.replace(Hdot=(Hdot + Hdot.conj().T) / 2, Ldot=tuple(Ldp))

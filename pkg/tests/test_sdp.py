import math

import numpy as np
import pytest

from qfibounds.algebra import ControlMatrix, build_a_op, build_b_op, op_norm
from qfibounds.model import BUILTIN_IDS, SIGMA_Y, builtin_model, random_model
from qfibounds.sdp.lmi import (
    assemble_A_lmi,
    assemble_B_lmi,
    min_a,
    min_a_given_b,
    min_b,
    min_b_given_a,
    n_control_params,
    norms,
)
from qfibounds.sdp.solver import (
    LMIBlock,
    SDPInfeasible,
    SDPProblem,
    SDPStatus,
    SolverConfig,
    dump_history,
    real_embedding,
    solve_sdp,
)


def lmi_value(block, h: ControlMatrix, scalar=None):
    x = h.to_vector()
    if scalar is not None:
        x = np.append(x, scalar)
    return block.value(x)


def is_psd(S, tol=1e-12):
    return np.min(np.linalg.eigvalsh(S)) >= -tol


# --- real embedding -------------------------------------------------------

def test_embedding_examples():
    assert np.allclose(real_embedding(np.eye(1, dtype=complex)), np.eye(2))
    assert np.allclose(np.sort(np.linalg.eigvalsh(real_embedding(SIGMA_Y))), [-1, -1, 1, 1])
    with pytest.raises(ValueError):
        real_embedding(np.array([[0, 1], [0, 0]], dtype=complex))


def test_embedding_spectrum_doubles(rng):
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    Z = A @ A.conj().T
    ev = np.linalg.eigvalsh(Z)
    evr = np.linalg.eigvalsh(real_embedding(Z))
    assert np.allclose(np.sort(np.repeat(ev, 2)), evr)
    assert evr.min() >= -1e-12


# --- LMI assembly ---------------------------------------------------------

def test_A_block_size():
    blk = assemble_A_lmi(builtin_model("PD"))
    assert blk.size == 8
    assert blk.n_vars == n_control_params(builtin_model("PD")) + 1 == 5


def test_A_block_examples():
    h0 = ControlMatrix.zeros(1)
    assert is_psd(lmi_value(assemble_A_lmi(builtin_model("PD")), h0, 0.0))
    A = assemble_A_lmi(builtin_model("PDDS"))
    assert is_psd(lmi_value(A, h0, 0.2))
    assert not is_psd(lmi_value(A, h0, 0.2 - 1e-6))


def test_B_block_examples():
    pd = builtin_model("PD")
    B1, B2 = assemble_B_lmi(pd)
    h0 = ControlMatrix.zeros(1)
    feas = lambda h, b: is_psd(lmi_value(B1, h, b)) and is_psd(lmi_value(B2, h, b))
    assert feas(h0, 1.0) and not feas(h0, 1 - 1e-6)
    hm = ControlMatrix(-1.0, np.zeros(1), np.zeros((1, 1)))
    assert feas(hm, 2.0) and not feas(hm, 2 - 1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_blocks_feasible_at_operator_norms(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng, 3, 2)
    h = ControlMatrix.from_vector(rng.uniform(-1, 1, 9), 2)
    a, b = norms(m, h)
    A = lmi_value(assemble_A_lmi(m), h, a + 1e-9)
    assert np.min(np.linalg.eigvalsh(A)) >= -1e-9
    assert np.min(np.linalg.eigvalsh(lmi_value(assemble_A_lmi(m), h, 0.99 * a))) < 0
    for B in assemble_B_lmi(m):
        assert np.min(np.linalg.eigvalsh(lmi_value(B, h, b + 1e-12))) >= -1e-10


def test_fixed_cap_blocks_match_variable_blocks(rng):
    m = random_model(rng, 2, 1)
    h = ControlMatrix.from_vector(rng.normal(size=4), 1)
    assert np.allclose(lmi_value(assemble_A_lmi(m, False, 0.7), h), lmi_value(assemble_A_lmi(m), h, 0.7))
    for Bf, Bv in zip(assemble_B_lmi(m, False, 0.3), assemble_B_lmi(m)):
        assert np.allclose(lmi_value(Bf, h), lmi_value(Bv, h, 0.3))


# --- generic solver -------------------------------------------------------

def test_solver_trivial():
    blk = LMIBlock(-np.diag([1.0, -1.0]), np.eye(2)[None])
    sol = solve_sdp(SDPProblem(np.array([1.0]), [blk]))
    assert sol.status is SDPStatus.OPTIMAL
    assert sol.value == pytest.approx(1.0, abs=1e-8)
    assert sol.dual_value <= sol.value + 1e-12
    assert sol.value - sol.dual_value <= 1e-8


def test_solver_lp_with_equality():
    # min x1 + 2 x2, x >= 0, x1 + x2 = 1  -> 1 at (1, 0)
    blocks = [LMIBlock(np.zeros((1, 1)), np.array([[[1.0]], [[0.0]]])), LMIBlock(np.zeros((1, 1)), np.array([[[0.0]], [[1.0]]]))]
    sol = solve_sdp(SDPProblem(np.array([1.0, 2.0]), blocks, np.array([[1.0, 1.0]]), np.array([1.0])))
    assert sol.ok
    assert sol.value == pytest.approx(1.0, abs=1e-7)
    assert np.allclose(sol.x, [1, 0], atol=1e-6)


def test_solver_max_eigenvalue(rng):
    # min t s.t. t I - S >= 0  ->  lambda_max(S)
    A = rng.normal(size=(5, 5))
    S = (A + A.T) / 2
    sol = solve_sdp(SDPProblem(np.array([1.0]), [LMIBlock(-S, np.eye(5)[None])]))
    assert sol.value == pytest.approx(np.linalg.eigvalsh(S).max(), abs=1e-7)


def test_solver_infeasible():
    # x <= -1 and x >= 1
    blocks = [LMIBlock(-np.eye(1), np.array([[[1.0]]])), LMIBlock(-np.eye(1), np.array([[[-1.0]]]))]
    with pytest.raises(SDPInfeasible):
        solve_sdp(SDPProblem(np.array([1.0]), blocks))


def test_solver_max_iter_status():
    blk = LMIBlock(-np.diag([1.0, -1.0]), np.eye(2)[None])
    sol = solve_sdp(SDPProblem(np.array([1.0]), [blk]), SolverConfig(max_iter=3), x0=[2.0])
    assert sol.status is SDPStatus.MAX_ITER
    assert sol.dual_value <= 1.0 + 1e-12 <= sol.value + 1e-12


def test_config_from_env(monkeypatch):
    monkeypatch.setenv("QFIBOUNDS_GAP_TOL", "1e-7")
    monkeypatch.setenv("QFIBOUNDS_MAX_ITER", "50")
    cfg = SolverConfig.from_env()
    assert cfg.gap_tol == 1e-7 and cfg.max_iter == 50
    with pytest.raises(ValueError):
        SolverConfig(gap_tol=0)


def test_history_dump(tmp_path):
    blk = LMIBlock(-np.diag([1.0, -1.0]), np.eye(2)[None])
    sol = solve_sdp(SDPProblem(np.array([1.0]), [blk]))
    dump_history(sol, tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0].startswith("iteration,gap,feasibility_margin")
    assert len(lines) == len(sol.history) + 1


# --- control problems -----------------------------------------------------

def test_min_a_pd_and_min_b_rd():
    assert min_a(builtin_model("PD")).a <= 1e-9
    p = min_b(builtin_model("RD"))
    assert p.b == pytest.approx(math.sin(math.pi / 15), abs=1e-7)
    assert abs(p.b - 0.21) <= 0.005


def test_min_a_given_b_examples():
    assert min_a_given_b(builtin_model("PD"), 0.0).a == pytest.approx(1.25, abs=1e-6)
    assert min_a_given_b(builtin_model("PD"), 1.0).a <= 1e-7
    assert min_a_given_b(builtin_model("PDDS"), 0.0).a == pytest.approx(1.45, abs=1e-6)


def test_min_b_given_a_examples():
    assert min_b_given_a(builtin_model("PD"), 0.0).b == pytest.approx(1.0, abs=1e-6)
    # the optimum is sqrt-sensitive to the cap, hence the looser tolerance
    assert min_b_given_a(builtin_model("PDDD"), 0.2 * (1 + 1e-6) + 1e-9).b == pytest.approx(1.02, abs=0.01)
    assert min_b_given_a(builtin_model("RD"), math.inf).b == pytest.approx(math.sin(math.pi / 15), abs=1e-7)


def test_caps_below_minimum_infeasible():
    with pytest.raises(SDPInfeasible):
        min_a_given_b(builtin_model("RD"), 0.1)
    with pytest.raises(SDPInfeasible):
        min_b_given_a(builtin_model("PDDS"), 0.1)
    with pytest.raises(SDPInfeasible):
        min_a_given_b(builtin_model("PD"), -1.0)


@pytest.mark.parametrize("mid", ["PD", "RD", "PDDS", "PDDD"])
def test_certificates_reproduce_norms(mid):
    m = builtin_model(mid)
    solves = [(min_a(m), "a"), (min_b(m), "b"), (min_a_given_b(m, 0.5), "a"), (min_b_given_a(m, 0.6), "b")]
    for p, which in solves:
        assert p.status is SDPStatus.OPTIMAL
        assert norms(m, p.h) == (p.a, p.b)
        # the optimised scalar matches the norm rebuilt from the decoded h
        achieved = p.a if which == "a" else p.b
        assert abs(p.solution.value - achieved) <= 1e-7
        assert p.lower_bound <= achieved + 1e-9
        assert achieved - p.lower_bound <= 1e-7


@pytest.mark.parametrize("mid", ["PD", "RD", "PDDS", "PDDD"])
def test_monotone_in_cap(mid):
    m = builtin_model(mid)
    b_lo = min_b(m).b
    caps = np.linspace(b_lo + 1e-3, 1.2, 6)
    a_vals = [min_a_given_b(m, c).a for c in caps]
    assert all(x >= y - 1e-7 for x, y in zip(a_vals, a_vals[1:]))
    a_lo = min_a(m).a
    caps = np.linspace(a_lo + 1e-3, 1.5, 6)
    b_vals = [min_b_given_a(m, c).b for c in caps]
    assert all(x >= y - 1e-7 for x, y in zip(b_vals, b_vals[1:]))


@pytest.mark.parametrize("mid", BUILTIN_IDS)
def test_brute_force_never_beats_sdp(mid):
    rng = np.random.default_rng(99)
    m = builtin_model(mid)
    n = m.n_jumps
    samples = [ControlMatrix.from_vector(rng.uniform(-2, 2, (n + 1) ** 2), n) for _ in range(200)]
    best_a = min(op_norm(build_a_op(m, h)) for h in samples)
    best_b = min(op_norm(build_b_op(m, h)) for h in samples)
    assert min_a(m).a <= best_a + 1e-6
    assert min_b(m).b <= best_b + 1e-6


def test_against_cvxpy_oracle():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(5)
    for _ in range(4):
        m = random_model(rng, 2, 2)
        d, n = m.dim, m.n_jumps
        hf = cp.Variable((n + 1, n + 1), hermitian=True)
        M = 1j * np.vstack(m.Ldot)
        M = M + cp.vstack([sum(hf[k + 1, l + 1] * m.L[l] for l in range(n)) + hf[k + 1, 0] * np.eye(d) for k in range(n)])
        prob = cp.Problem(cp.Minimize(cp.sigma_max(M)))
        prob.solve(solver=cp.CLARABEL)
        assert min_a(m).a == pytest.approx(prob.value**2, rel=1e-5, abs=1e-7)

        ext = [np.eye(d)] + list(m.L)
        from qfibounds.algebra import g_operator

        B = g_operator(m) + sum(hf[i, j] * (ext[i].conj().T @ ext[j]) for i in range(n + 1) for j in range(n + 1))
        B = (B + B.H) / 2
        prob = cp.Problem(cp.Minimize(cp.sigma_max(B)))
        prob.solve(solver=cp.CLARABEL)
        assert min_b(m).b == pytest.approx(prob.value, rel=1e-5, abs=1e-7)

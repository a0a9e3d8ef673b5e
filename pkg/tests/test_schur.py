import numpy as np
import pytest

from sddvs.coeffspace import Constant, draw_samples
from sddvs.errors import NoInterface
from sddvs.experiments import default_config, offline_build
from sddvs.fem import solve_global
from sddvs.schur import (assemble_global, build_contribution, build_interface_rom, build_X,
                         evaluate_interface_rom, solve_interface_direct)
from sddvs.problems import ex1, ex2
from sddvs.vscore import VsConfig, evaluate_solution
from tests.oracles.reference import schur_dense


@pytest.fixture(scope="module")
def off2():
    return offline_build(default_config("ex2"))


@pytest.fixture(scope="module")
def off1():
    return offline_build(default_config("ex1"))


def test_ex2_term_counts(off2):
    assert (off2.system.m_S, off2.system.m_F) == (2, 1)
    assert off2.system.n_gamma == 82


def test_ex2_block_structure(off2):
    """Deterministic part couples within each interface, the xi part across both."""
    S = off2.system.S
    g = off2.problem.partition
    ones = [t for t in S.terms if isinstance(t.coeff, Constant) and t.coeff.value == 1.0]
    rand = [t for t in S.terms if t not in ones]
    assert len(ones) == 1 and len(rand) == 1
    gy = off2.problem.mesh.nodes[off2.problem.interface_nodes(), 1]
    lo, hi = np.flatnonzero(gy == 30.0), np.flatnonzero(gy == 70.0)
    assert np.all(ones[0].data[np.ix_(lo, hi)] == 0)
    assert np.any(rand[0].data[np.ix_(lo, hi)] != 0)


def test_ex1_counts_before_merge(off1):
    s = off1.system.summary()
    assert s["m_S_before_merge"] == s["m_S_bound"] == 12
    assert s["m_F_before_merge"] == s["m_F_bound"] == 11
    assert s["m_S"] <= 12 and s["m_F"] <= 11


def test_schur_matches_dense_oracle(off2):
    prob = off2.problem
    for xi in draw_samples(prob.space, 3, 11).samples:
        A = prob.op.assemble(xi).toarray()
        b = prob.rhs.assemble(xi)
        S, F, u = schur_dense(A, b, prob.partition.gamma)
        np.testing.assert_allclose(off2.system.S.assemble(xi), S, rtol=1e-9, atol=1e-9 * np.abs(S).max())
        np.testing.assert_allclose(off2.system.F.assemble(xi), F, atol=1e-9 * np.abs(F).max())
        np.testing.assert_allclose(solve_interface_direct(off2.system, xi), u, rtol=1e-9)


def test_separated_X_against_dense_oracle():
    prob = ex1()
    train = draw_samples(prob.space, 20, 0)
    b = prob.blocks[0]
    X = build_X(b, VsConfig(1e-12, 8, train))
    for xi in draw_samples(prob.space, 5, 3).samples:
        dense = np.linalg.solve(b.op("II").assemble(xi).toarray(), b.op("IG").assemble(xi).toarray())
        np.testing.assert_allclose(X.evaluate(xi), dense, rtol=1e-6, atol=1e-9 * np.abs(dense).max())


def test_single_term_columns_need_one_term(off2):
    for c in off2.system.contributions:
        assert all(n == 1 for n in c.X.column_counts().values())


def test_symmetric_for_pure_diffusion(off2):
    S = off2.system.S.assemble(np.array([2.2]))
    np.testing.assert_allclose(S, S.T, atol=1e-9 * np.abs(S).max())


def test_rom_interpolates_training_snapshots(off2):
    rom = off2.rom
    for xi in rom.sol.snapshots:
        d = solve_interface_direct(off2.system, xi)
        assert np.linalg.norm(evaluate_interface_rom(rom, xi) - d) <= 1e-9 * np.linalg.norm(d)


def test_scalar_interface_closed_form(off1):
    xi = np.array([0.3])
    S = off1.system.S.assemble(xi)[0, 0]
    F = off1.system.F.assemble(xi)[0]
    assert off1.rom.M == 1
    assert evaluate_interface_rom(off1.rom, xi)[0] == pytest.approx(F / S, rel=1e-12)
    assert solve_interface_direct(off1.system, xi)[0] == pytest.approx(F / S, rel=1e-12)


def test_rom_error_decreases_with_M(off2):
    prob = off2.problem
    test = draw_samples(prob.space, 50, 4).samples
    ref = np.array([solve_global(prob.op, prob.rhs, x)[prob.interface_nodes()] for x in test])
    errs = []
    for m in range(1, off2.rom.M + 1):
        u = evaluate_solution(off2.rom.sol.truncate(m), test)
        errs.append(np.mean(np.linalg.norm(u - ref, axis=1) / np.linalg.norm(ref, axis=1)))
    assert all(b <= a * 1.01 for a, b in zip(errs, errs[1:]))


def test_no_interface_rejected():
    with pytest.raises(NoInterface):
        assemble_global([], type("P", (), {"n_gamma": 0})())

import numpy as np
import pytest

from sddvs.coeffspace import draw_samples
from sddvs.errors import NotSingleTerm
from sddvs.experiments import default_config, offline_build
from sddvs.fem import solve_global
from sddvs.linalg import factorization_count
from sddvs.recovery import (build_separated_recovery, evaluate_recovery, recover_full,
                            recover_interior)
from tests.oracles.reference import schur_dense


@pytest.fixture(scope="module")
def off2():
    return offline_build(default_config("ex2"))


def test_exact_interface_gives_exact_interiors(off2):
    prob = off2.problem
    g = prob.interface_nodes()
    for xi in draw_samples(prob.space, 5, 8).samples:
        ref = solve_global(prob.op, prob.rhs, xi)
        full = recover_full(list(prob.blocks), ref[g], xi)
        assert np.max(np.abs(full.values - ref)) <= 1e-10 * np.max(np.abs(ref))
        np.testing.assert_array_equal(full.interface, ref[g])


def test_ex1_stitched_field_at_fixed_xi():
    off = offline_build(default_config("ex1"))
    prob = off.problem
    xi = np.array([0.7])
    ref = solve_global(prob.op, prob.rhs, xi)
    A, b = prob.op.assemble(xi).toarray(), prob.rhs.assemble(xi)
    _, _, u_gamma = schur_dense(A, b, prob.partition.gamma)
    full = recover_full(list(prob.blocks), u_gamma, xi).values
    assert np.max(np.abs(full - ref)) <= 1e-10
    with pytest.raises(NotSingleTerm):
        build_separated_recovery(list(prob.blocks), off.rom)


def test_fast_path_equals_per_sample_solve(off2):
    prob = off2.problem
    xs = draw_samples(prob.space, 20, 9).samples
    fast = evaluate_recovery(off2.recovery, off2.rom, xs).values
    u_gamma = fast[:, prob.interface_nodes()]
    slow = recover_full(list(prob.blocks), u_gamma, xs).values
    np.testing.assert_allclose(fast, slow, rtol=1e-10, atol=1e-10 * np.abs(slow).max())


def test_fast_path_does_not_factorize(off2):
    xs = draw_samples(off2.problem.space, 30, 1).samples
    before = factorization_count()
    evaluate_recovery(off2.recovery, off2.rom, xs)
    evaluate_recovery(off2.recovery, off2.rom, xs[0])
    assert factorization_count() == before


def test_zero_term_model_is_source_response(off2):
    prob = off2.problem
    rom0 = off2.rom.truncate(0)
    rec0 = build_separated_recovery(list(prob.blocks), rom0)
    xi = np.array([2.0])
    out = evaluate_recovery(rec0, rom0, xi).values
    zero_gamma = np.zeros(prob.partition.n_gamma)
    slow = recover_full(list(prob.blocks), zero_gamma, xi).values
    np.testing.assert_allclose(out, slow, atol=1e-10 * max(1.0, np.abs(slow).max()))


def test_dirichlet_entries_exact(off2):
    prob = off2.problem
    out = evaluate_recovery(off2.recovery, off2.rom, np.array([3.0])).values
    assert out[0] == 20.0 and out[-1] == 15.0


def test_interior_zero_data():
    off = offline_build(default_config("ex2"))
    b = off.problem.blocks[1]   # middle strip: no source, no Dirichlet lift
    assert b.m_b == 0
    assert np.all(recover_interior(b, np.zeros(b.n_G), np.array([2.0])) == 0)

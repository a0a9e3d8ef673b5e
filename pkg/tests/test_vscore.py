import io
import json

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from sddvs.affine import AffineOperator, AffineVector, Term
from sddvs.coeffspace import ONE, Constant, ParameterSpace, Uniform, draw_samples, product
from sddvs.errors import ConfigError
from sddvs.vscore import (VsConfig, evaluate_solution, interpolation_defect, jsonl_logger,
                          residual_norm, residual_vector, solve_vs)

S1 = ParameterSpace.iid(Uniform(1.0, 2.0), 1)
S2 = ParameterSpace.iid(Uniform(1.0, 2.0), 2)


def _scalar_system():
    x = S1.coord(0)
    return (AffineOperator([Term(x, np.array([[2.0]]))]),
            AffineVector([Term(x, np.array([1.0]))]))


def _diag_system():
    op = AffineOperator([Term(S2.coord(0), sp.csr_matrix(np.diag([1.0, 0.0]))),
                         Term(S2.coord(1), sp.csr_matrix(np.diag([0.0, 1.0])))])
    return op, AffineVector([Term(ONE, np.ones(2))])


def _random_system(seed, n=6, m=3):
    rng = np.random.default_rng(seed)
    space = ParameterSpace.iid(Uniform(0.0, 1.0), m)
    mats = []
    for _ in range(m):
        B = rng.standard_normal((n, n))
        mats.append(B @ B.T / n)
    op = AffineOperator([Term(ONE, np.eye(n) * n)] +
                        [Term(space.coord(j), mats[j]) for j in range(m)])
    rhs = AffineVector([Term(ONE, rng.standard_normal(n)),
                        Term(product(space.coord(0), space.coord(1)), rng.standard_normal(n))])
    return space, op, rhs


def test_scalar_system_by_hand():
    op, rhs = _scalar_system()
    sol = solve_vs(op, rhs, VsConfig(1e-10, 5, draw_samples(S1, 10, 0), normalize=False))
    assert sol.n_terms == 1
    np.testing.assert_allclose(sol.vectors, [[0.5]])
    assert isinstance(sol.zetas[0], Constant) and sol.zetas[0].value == pytest.approx(1.0)
    assert evaluate_solution(sol, np.array([1.37])) == pytest.approx([0.5])


def test_diag_system_against_direct_solves():
    op, rhs = _diag_system()
    sol = solve_vs(op, rhs, VsConfig(1e-14, 6, draw_samples(S2, 30, 1)))
    test = draw_samples(S2, 200, 7).samples
    exact = 1.0 / test
    err = np.linalg.norm(evaluate_solution(sol, test) - exact, axis=1) / np.linalg.norm(exact, axis=1)
    assert sol.n_terms == 6
    assert err.mean() <= 1e-3


def test_empty_solution_is_zero():
    op, rhs = _diag_system()
    sol = solve_vs(op, rhs, VsConfig(1e-3, 3, draw_samples(S2, 5, 0))).truncate(0)
    assert np.all(evaluate_solution(sol, np.array([1.5, 1.5])) == 0.0)
    assert residual_norm(op, rhs, sol, np.array([1.5, 1.5])) == pytest.approx(np.sqrt(2.0))


@given(st.integers(0, 10_000), st.integers(1, 6))
@settings(max_examples=25, deadline=None)
def test_snapshots_are_interpolated(seed, n_terms):
    space, op, rhs = _random_system(seed)
    sol = solve_vs(op, rhs, VsConfig(1e-14, n_terms, draw_samples(space, 12, seed)))
    assert interpolation_defect(sol) <= 1e-9
    assert len(set(sol.indices)) == sol.n_terms <= n_terms


@given(st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_cached_residual_matches_naive(seed):
    space, op, rhs = _random_system(seed)
    sol = solve_vs(op, rhs, VsConfig(1e-14, 4, draw_samples(space, 10, seed)))
    xi = draw_samples(space, 1, seed + 1).samples[0]
    naive = rhs.assemble(xi) - op.assemble(xi) @ evaluate_solution(sol, xi)
    fast = residual_vector(op, rhs, sol, xi)
    assert np.linalg.norm(fast - naive) <= 1e-12 * max(np.linalg.norm(naive), 1e-300) + 1e-14
    assert residual_norm(op, rhs, sol, xi) == pytest.approx(np.linalg.norm(naive), rel=1e-10,
                                                            abs=1e-14)


def test_history_matches_recomputation():
    space, op, rhs = _random_system(3)
    train = draw_samples(space, 15, 3)
    sol = solve_vs(op, rhs, VsConfig(1e-14, 6, train))
    for k, idx in enumerate(sol.indices):
        r = residual_norm(op, rhs, sol.truncate(k), train.samples[idx])
        assert r == pytest.approx(sol.residual_history[k], rel=1e-10)


def test_single_term_converges_in_one_step():
    space = ParameterSpace.iid(Uniform(1.0, 3.0), 1)
    x = space.coord(0)
    A = sp.csr_matrix(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    op = AffineOperator([Term(x, A)])
    rhs = AffineVector([Term(product(x, x), np.array([1.0, 0.5]))])
    sol = solve_vs(op, rhs, VsConfig(1e-12, 5, draw_samples(space, 10, 0)))
    assert sol.n_terms == 1 and sol.stop_reason == "tolerance"


def test_first_snapshot_follows_seeded_shuffle():
    space, op, rhs = _random_system(0)
    train = draw_samples(space, 10, 0)
    first = int(np.random.default_rng(5).permutation(10)[0])
    assert solve_vs(op, rhs, VsConfig(1e-14, 1, train, seed=5)).indices == (first,)


def test_exhausted_training_set():
    space, op, rhs = _random_system(1)
    sol = solve_vs(op, rhs, VsConfig(1e-16, 4, draw_samples(space, 4, 0)))
    assert sol.n_terms == 4


def test_config_validation():
    train = draw_samples(S1, 3, 0)
    with pytest.raises(ConfigError):
        VsConfig(0.0, 1, train)
    with pytest.raises(ConfigError):
        VsConfig(1e-6, 4, train)


def test_jsonl_log():
    buf = io.StringIO()
    space, op, rhs = _random_system(2)
    sol = solve_vs(op, rhs, VsConfig(1e-14, 3, draw_samples(space, 6, 0)),
                   on_step=jsonl_logger(buf))
    lines = [json.loads(l) for l in buf.getvalue().splitlines()]
    assert [l["step"] for l in lines] == [1, 2, 3]
    assert [l["sample"] for l in lines] == list(sol.indices)

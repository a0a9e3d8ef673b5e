import numpy as np
import pytest

from sddvs.errors import IndexOutOfRange
from sddvs.partition import extract_blocks
from sddvs.problems import ex1, ex2


@pytest.fixture(scope="module")
def p2():
    return ex2()


def test_ex2_interface_size(p2):
    part = p2.partition
    assert part.n_gamma == 82
    assert [g.size for g in part.gamma_local] == [41, 82, 41]


def test_dofs_are_partitioned(p2):
    part = p2.partition
    every = np.concatenate(list(part.interiors) + [part.gamma])
    assert np.array_equal(np.sort(every), np.arange(part.n_free))


def test_restrictions_select_local_interface(p2):
    part = p2.partition
    for R, pos in zip(part.restrictions, part.gamma_local):
        v = np.arange(part.n_gamma, dtype=float)
        np.testing.assert_array_equal(R @ v, pos)


def test_blocks_reassemble_to_global(p2):
    xi = np.array([2.5])
    A = p2.op.assemble(xi).toarray()
    part = p2.partition
    S = np.zeros_like(A)
    for b in p2.blocks:
        I, G = b.interior, part.gamma[b.gamma_idx]
        S[np.ix_(I, I)] += b.op("II").assemble(xi).toarray()
        S[np.ix_(I, G)] += b.op("IG").assemble(xi).toarray()
        S[np.ix_(G, I)] += b.op("GI").assemble(xi).toarray()
        S[np.ix_(G, G)] += b.op("GG").assemble(xi).toarray()
    np.testing.assert_allclose(S, A, rtol=1e-13, atol=1e-9)


def test_term_counts_ex1():
    p = ex1()
    assert [(b.m_a, b.m_b) for b in p.blocks] == [(2, 1), (1, 1)]


def test_bad_subdomain_index(p2):
    with pytest.raises(IndexOutOfRange):
        extract_blocks(p2.op, p2.rhs, p2.partition, 3)

"""Sparse/dense linear-algebra kernels.

Sparse matrices are :class:`scipy.sparse.csr_matrix`; factorizations wrap
SuperLU (sparse) or LAPACK ``getrf`` (dense) behind one handle.
"""
import warnings

import numpy as np
import scipy.io
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ShapeMismatch, SingularMatrix

__all__ = [
    "SparseMatrix",
    "csr_from_triplets",
    "identity",
    "spmv",
    "Factorization",
    "factorize",
    "solve",
    "factorization_count",
    "two_norm",
    "inf_norm",
    "frobenius",
    "write_matrix_market",
]

SparseMatrix = sp.csr_matrix

PIVOT_GUARD = 1e-14

_factorizations = 0


def factorization_count():
    """Number of factorizations performed so far in this process."""
    return _factorizations


def csr_from_triplets(rows, cols, vals, shape):
    """Compress a coordinate buffer, summing duplicates and dropping zeros."""
    A = sp.coo_matrix((np.asarray(vals, dtype=float), (np.asarray(rows), np.asarray(cols))),
                      shape=shape).tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def identity(n):
    return sp.identity(n, format="csr", dtype=float)


def spmv(A, x):
    x = np.asarray(x, dtype=float)
    if A.shape[1] != x.shape[0]:
        raise ShapeMismatch(f"matrix has {A.shape[1]} columns, vector has {x.shape[0]} entries")
    return np.asarray(A @ x).ravel() if x.ndim == 1 else np.asarray(A @ x)


class Factorization:
    """Reusable LU factorization of a square sparse or dense matrix."""

    def __init__(self, A):
        global _factorizations
        if A.shape[0] != A.shape[1]:
            raise ShapeMismatch(f"cannot factorize a {A.shape[0]}x{A.shape[1]} matrix")
        self.shape = A.shape
        self.sparse = sp.issparse(A)
        if self.shape[0] == 0:
            self._lu = None
            return
        scale = abs(A).max() if self.sparse else np.max(np.abs(A))
        if scale == 0:
            raise SingularMatrix("zero matrix", pivot=0)
        _factorizations += 1
        if self.sparse:
            try:
                self._lu = spla.splu(sp.csc_matrix(A))
            except RuntimeError as exc:
                raise SingularMatrix(str(exc)) from exc
            pivots = np.abs(self._lu.U.diagonal())
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                self._lu = sla.lu_factor(np.asarray(A, dtype=float), check_finite=False)
            pivots = np.abs(np.diag(self._lu[0]))
        small = np.flatnonzero(pivots < PIVOT_GUARD * scale)
        if small.size:
            raise SingularMatrix(f"pivot {small[0]} below {PIVOT_GUARD:g} x largest entry",
                                 pivot=int(small[0]))

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.shape[0]:
            raise ShapeMismatch(f"right-hand side has {b.shape[0]} rows, expected {self.shape[0]}")
        if self._lu is None:
            return b.copy()
        if self.sparse:
            return self._lu.solve(b)
        return sla.lu_solve(self._lu, b, check_finite=False)


def factorize(A):
    return Factorization(A)


def solve(f, b):
    return f.solve(b)


def two_norm(v):
    return float(np.linalg.norm(np.asarray(v, dtype=float).ravel()))


def inf_norm(v):
    v = np.asarray(v, dtype=float).ravel()
    return float(np.max(np.abs(v))) if v.size else 0.0


def frobenius(A):
    if sp.issparse(A):
        return float(sp.linalg.norm(A, "fro"))
    return float(np.linalg.norm(A, "fro"))


def write_matrix_market(path, A):
    """Debug export in coordinate 'real general' format (1-based)."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), field="real", symmetry="general")

"""Affine-parametric operators and vectors: ``sum_k p_k(xi) * A_k``."""
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
import scipy.sparse as sp

from .coeffspace import ONE, CoeffExpr, _Program, evaluate_many, scaled
from .errors import ShapeMismatch

__all__ = ["Term", "AffineOperator", "AffineVector", "merge_terms"]


@dataclass(frozen=True)
class Term:
    coeff: CoeffExpr
    data: Any
    group: Optional[int] = None


class _Affine:
    def __init__(self, terms, dofs=None):
        self.terms = tuple(terms)
        self.dofs = dofs
        self._program = None
        self._stack = None
        self._check()

    def _check(self):
        shapes = {np.shape(t.data) for t in self.terms}
        if len(shapes) > 1:
            raise ShapeMismatch(f"affine terms have inconsistent shapes {sorted(shapes)}")

    def __len__(self):
        return len(self.terms)

    @property
    def coeffs(self):
        return [t.coeff for t in self.terms]

    @property
    def data(self):
        return [t.data for t in self.terms]

    @property
    def space(self):
        for t in self.terms:
            if t.coeff.space is not None:
                return t.coeff.space
        return None

    def coeff_values(self, xi, cache=None):
        """Coefficients at ``xi``: ``(m,)`` or ``(m, n_samples)`` for a batch."""
        if cache is not None:
            return evaluate_many(self.coeffs, xi, cache)
        if self._program is None:
            self._program = _Program(self.coeffs)
        return evaluate_many(self.coeffs, xi, program=self._program)

    def stacked(self):
        """Dense 2-D/3-D stack of the term data (built once)."""
        if self._stack is None:
            self._stack = np.stack([t.data.toarray() if sp.issparse(t.data) else np.asarray(t.data)
                                    for t in self.terms])
        return self._stack


class AffineOperator(_Affine):
    """Square (or rectangular) parametric matrix ``sum_k p_k(xi) A_k``."""

    @property
    def shape(self):
        return self.terms[0].data.shape if self.terms else (0, 0)

    @property
    def is_sparse(self):
        return any(sp.issparse(t.data) for t in self.terms)

    def assemble(self, xi, values=None):
        if values is None:
            values = self.coeff_values(xi)
        if not self.is_sparse:
            return np.tensordot(values, self.stacked(), axes=1)
        out = None
        for v, t in zip(values, self.terms):
            out = v * t.data if out is None else out + v * t.data
        return out.tocsr()

    def apply_terms(self, x):
        """``[A_k @ x for k]`` as an array of shape ``(m, n)``."""
        if not self.is_sparse:
            return self.stacked() @ x
        return np.array([t.data @ x for t in self.terms])


class AffineVector(_Affine):
    """Parametric vector ``sum_k q_k(xi) F_k``.

    ``size`` is only needed when there are no terms.
    """

    def __init__(self, terms, dofs=None, size=None):
        super().__init__(terms, dofs)
        self._size = size if size is not None else (
            np.shape(self.terms[0].data)[0] if self.terms else 0)

    @property
    def size(self):
        return self._size

    def assemble(self, xi, values=None):
        if values is None:
            values = self.coeff_values(xi)
        return values.T @ self.matrix()

    def matrix(self):
        """Term vectors stacked as rows, shape ``(m, n)``."""
        if not self.terms:
            return np.zeros((0, self._size))
        return self.stacked()


def merge_terms(terms, absorb_constants=True, drop_zero=True):
    """Merge terms whose coefficients are structurally identical.

    With ``absorb_constants`` a constant factor of each coefficient is
    folded into the data first (``(3 * p, A)`` becomes ``(p, 3 A)``), so
    every deterministic term ends up under :data:`ONE`.  Returns
    ``(merged_terms, n_merged, n_dropped)``.
    """
    buckets = {}
    order = []
    n_in = 0
    for t in terms:
        n_in += 1
        coeff, data = t.coeff, t.data
        if absorb_constants:
            scale, base = scaled(coeff)
            if scale != 1.0:
                data = data * scale
            coeff = ONE if base is None else base
        k = coeff.key()
        if k in buckets:
            c0, d0, g0 = buckets[k]
            buckets[k] = (c0, d0 + data, g0 if g0 == t.group else None)
        else:
            buckets[k] = (coeff, data, t.group)
            order.append(k)
    merged = []
    dropped = 0
    for k in order:
        coeff, data, group = buckets[k]
        if drop_zero:
            nz = data.count_nonzero() if sp.issparse(data) else np.count_nonzero(data)
            if nz == 0:
                dropped += 1
                continue
        if sp.issparse(data):
            data = data.tocsr()
        merged.append(Term(coeff, data, group))
    return merged, n_in - len(order), dropped

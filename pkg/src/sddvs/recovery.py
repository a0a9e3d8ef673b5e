"""Interior recovery from interface values and full-field stitching.

The generic path solves ``A_II(xi) u_I = f_I(xi) - A_IG(xi) u_G`` per
sample.  When a subdomain operator has a single affine term,
``A_II(xi) = p(xi) A`` and ``A_IG(xi) = p(xi) B``, so

    u_I = sum_j (q_j / p)(xi) A^-1 f_j - sum_k zeta_k(xi) A^-1 B c_k

and everything except the scalar weights can be precomputed.
"""
from dataclasses import dataclass

import numpy as np

from .coeffspace import evaluate_many, quotient
from .errors import NotSingleTerm, ShapeMismatch
from .linalg import Factorization

__all__ = [
    "FullFieldSolution",
    "SeparatedRecovery",
    "recover_interior",
    "stitch",
    "recover_full",
    "build_separated_recovery",
    "evaluate_recovery",
]


@dataclass(frozen=True, eq=False)
class FullFieldSolution:
    values: np.ndarray     # nodal values, (n_nodes,) or (n_samples, n_nodes)
    xi: np.ndarray
    partition: object

    def subdomain(self, i):
        """Nodal values on the free dofs of subdomain ``i`` (interior then interface)."""
        part = self.partition
        free = np.concatenate([part.interiors[i], part.gamma[part.gamma_local[i]]])
        return self.values[..., part.free[free]]

    @property
    def interface(self):
        return self.values[..., self.partition.free[self.partition.gamma]]


def recover_interior(blocks, u_gamma_local, xi):
    xi = np.asarray(xi, dtype=float)
    u = np.asarray(u_gamma_local, dtype=float)
    if xi.ndim == 2:
        return np.array([recover_interior(blocks, ug, x) for ug, x in zip(u, xi)])
    if u.shape != (blocks.n_G,):
        raise ShapeMismatch(f"expected {blocks.n_G} interface values, got {u.shape}")
    if blocks.n_I == 0:
        return np.zeros(0)
    A = blocks.op("II").assemble(xi)
    b = blocks.rhs("I").assemble(xi) - blocks.op("IG").assemble(xi) @ u
    return Factorization(A).solve(b)


def stitch(part, dofs, u_gamma, interiors, xi):
    """Global nodal vector(s) from interface and interior values."""
    xi = np.asarray(xi, dtype=float)
    u_gamma = np.asarray(u_gamma, dtype=float)
    u_free = np.zeros(u_gamma.shape[:-1] + (part.n_free,))
    u_free[..., part.gamma] = u_gamma
    for ix, uI in zip(part.interiors, interiors):
        u_free[..., ix] = uI
    values = dofs.scatter(u_free, xi) if dofs is not None else u_free
    return FullFieldSolution(values, xi, part)


def recover_full(blocks_list, u_gamma, xi):
    """Per-sample interior solves on every subdomain, then stitching."""
    part = blocks_list[0].partition
    u_gamma = np.asarray(u_gamma, dtype=float)
    interiors = [recover_interior(b, u_gamma[..., b.gamma_idx], xi) for b in blocks_list]
    return stitch(part, blocks_list[0].dofs, u_gamma, interiors, xi)


@dataclass(frozen=True, eq=False)
class _LocalRecovery:
    index: int
    weights: tuple          # q_j / p
    f_hat: np.ndarray       # (m_b, n_I)
    c_hat: np.ndarray       # (M, n_I)


@dataclass(frozen=True, eq=False)
class SeparatedRecovery:
    locals: tuple
    partition: object
    dofs: object
    M: int


def build_separated_recovery(blocks, rom):
    """Precompute the fast path for one subdomain or a list of them."""
    blocks_list = list(blocks) if isinstance(blocks, (list, tuple)) else [blocks]
    C = rom.sol.vectors
    out = []
    for b in blocks_list:
        if b.m_a != 1:
            raise NotSingleTerm(f"subdomain {b.index} operator has {b.m_a} affine terms")
        fac = Factorization(b.A_II[0])
        p = b.coeffs[0]
        weights = tuple(quotient(q, p) for q in b.rhs_coeffs)
        f_hat = (np.array([fac.solve(f) for f in b.f_I]).reshape(len(b.f_I), b.n_I))
        local = C[:, b.gamma_idx]
        c_hat = np.array([fac.solve(b.A_IG[0] @ c) for c in local]).reshape(len(local), b.n_I)
        out.append(_LocalRecovery(b.index, weights, f_hat, c_hat))
    return SeparatedRecovery(tuple(out), blocks_list[0].partition, blocks_list[0].dofs, C.shape[0])


def evaluate_recovery(rec, rom, xi):
    """Interface from the reduced model plus separated interiors; no factorization."""
    xi = np.asarray(xi, dtype=float)
    m = min(rom.M, rec.M)
    z = rom.sol.zeta_values(xi)[:m]
    C = rom.sol.vectors[:m]
    u_gamma = z.T @ C if xi.ndim == 2 else z @ C
    interiors = []
    for loc in rec.locals:
        if loc.weights:
            w = evaluate_many(loc.weights, xi)
            uI = w.T @ loc.f_hat if xi.ndim == 2 else w @ loc.f_hat
        else:
            uI = np.zeros(xi.shape[:-1] + (loc.f_hat.shape[1],))
        ch = loc.c_hat[:m]
        uI = uI - (z.T @ ch if xi.ndim == 2 else z @ ch)
        interiors.append(uI)
    part = rec.partition
    if len(rec.locals) != part.n_subdomains:
        raise NotSingleTerm("separated recovery does not cover every subdomain")
    return stitch(part, rec.dofs, u_gamma, interiors, xi)

"""Separated assembly of the interface Schur system and its reduced model.

Per subdomain ``i`` the local Schur complement and condensed load are

    S_i = A_GG - A_GI A_II^-1 A_IG,     F_i = f_G - A_GI A_II^-1 f_I.

``A_II^-1 A_IG`` is approximated column by column with the greedy
separation of :mod:`sddvs.vscore` (the right-hand side of column ``k`` has
the same coefficients as ``A_II``), ``A_II^-1 f_I`` by one more build.
Expanding the products gives affine representations of ``S_i`` and
``F_i`` whose terms are lifted to the global interface and merged.
"""
from dataclasses import dataclass, field

import numpy as np

from .affine import AffineOperator, AffineVector, Term, merge_terms
from .coeffspace import product
from .errors import NoInterface, SddvsError
from .linalg import Factorization
from .vscore import SnapshotSolver, evaluate_solution, solve_vs

__all__ = [
    "SeparatedMatrix",
    "SchurContribution",
    "SchurAffine",
    "InterfaceROM",
    "build_X",
    "assemble_Si",
    "assemble_Fi",
    "build_contribution",
    "assemble_global",
    "build_interface_rom",
    "solve_interface_direct",
    "evaluate_interface_rom",
]


def _annotate(exc, **where):
    for k, v in where.items():
        setattr(exc, k, v)
    exc.args = (f"{exc.args[0] if exc.args else exc} "
                + " ".join(f"[{k}={v}]" for k, v in where.items()),)
    return exc


@dataclass(frozen=True, eq=False)
class SeparatedMatrix:
    """Column-wise separated approximation of ``A_II^-1 A_IG``."""

    shape: tuple
    columns: dict          # column index -> SeparatedSolution

    @property
    def terms(self):
        """``[(coeff, column, vector), ...]`` in column order."""
        out = []
        for k in sorted(self.columns):
            sol = self.columns[k]
            out.extend((z, k, c) for z, c in zip(sol.zetas, sol.vectors))
        return out

    @property
    def n_terms(self):
        return sum(sol.n_terms for sol in self.columns.values())

    def column_counts(self):
        return {k: self.columns[k].n_terms for k in sorted(self.columns)}

    def evaluate(self, xi):
        X = np.zeros(self.shape)
        for k, sol in self.columns.items():
            X[:, k] = evaluate_solution(sol, xi)
        return X


def build_X(blocks, cfg, solver=None, on_step=None):
    if blocks.n_G == 0:
        raise NoInterface(f"subdomain {blocks.index} has no interface dofs")
    op = blocks.op("II")
    solver = solver or SnapshotSolver(op)
    columns = {}
    for k in range(blocks.n_G):
        alphas = [np.asarray(B[:, [k]].toarray()).ravel() for B in blocks.A_IG]
        if not any(np.any(a) for a in alphas):
            continue
        rhs = AffineVector([Term(c, a) for c, a in zip(blocks.coeffs, alphas)])
        try:
            columns[k] = solve_vs(op, rhs, cfg, solver=solver, on_step=on_step)
        except SddvsError as exc:
            raise _annotate(exc, subdomain=blocks.index, column=k)
    return SeparatedMatrix((blocks.n_I, blocks.n_G), columns)


@dataclass(frozen=True, eq=False)
class SchurContribution:
    index: int
    S_terms: tuple          # local Terms, dense (n_Gi, n_Gi)
    F_terms: tuple          # local Terms, length n_Gi
    gamma_idx: np.ndarray
    m_a: int
    m_b: int
    N_S: int
    N_F: int
    X: SeparatedMatrix = None
    y: object = None        # SeparatedSolution of A_II y = f_I


def assemble_Si(blocks, X):
    terms = [Term(c, B.toarray(), blocks.index) for c, B in zip(blocks.coeffs, blocks.A_GG)]
    for coeff_j, GI in zip(blocks.coeffs, blocks.A_GI):
        for beta, k, x in X.terms:
            M = np.zeros((blocks.n_G, blocks.n_G))
            M[:, k] = -(GI @ x)
            terms.append(Term(product(coeff_j, beta), M, blocks.index))
    return terms


def assemble_Fi(blocks, cfg, solver=None, on_step=None):
    """Condensed load terms and the separated ``A_II^-1 f_I``."""
    op = blocks.op("II")
    rhs = blocks.rhs("I")
    terms = [Term(q, np.array(fG), blocks.index) for q, fG in zip(blocks.rhs_coeffs, blocks.f_G)]
    if rhs.terms and blocks.n_I:
        try:
            y = solve_vs(op, rhs, cfg, solver=solver or SnapshotSolver(op), on_step=on_step)
        except SddvsError as exc:
            raise _annotate(exc, subdomain=blocks.index, column="F")
    else:
        y = None
    if y is not None:
        for coeff_j, GI in zip(blocks.coeffs, blocks.A_GI):
            for zeta, v in zip(y.zetas, y.vectors):
                terms.append(Term(product(coeff_j, zeta), -np.asarray(GI @ v).ravel(), blocks.index))
    return terms, y


def build_contribution(blocks, cfg_S, cfg_F=None, on_step=None):
    """Both separated builds of one subdomain, sharing snapshot factorizations."""
    solver = SnapshotSolver(blocks.op("II"))
    X = build_X(blocks, cfg_S, solver=solver, on_step=on_step)
    S_terms = assemble_Si(blocks, X)
    F_terms, y = assemble_Fi(blocks, cfg_F or cfg_S, solver=solver, on_step=on_step)
    return SchurContribution(blocks.index, tuple(S_terms), tuple(F_terms), blocks.gamma_idx,
                             blocks.m_a, blocks.m_b, X.n_terms,
                             0 if y is None else y.n_terms, X, y)


@dataclass(frozen=True, eq=False)
class SchurAffine:
    S: AffineOperator
    F: AffineVector
    n_gamma: int
    raw_m_S: int
    raw_m_F: int
    bound_m_S: int
    bound_m_F: int
    contributions: tuple = field(default=(), repr=False)

    @property
    def m_S(self):
        return len(self.S)

    @property
    def m_F(self):
        return len(self.F)

    def summary(self):
        return {
            "n_gamma": self.n_gamma,
            "m_S": self.m_S,
            "m_F": self.m_F,
            "m_S_before_merge": self.raw_m_S,
            "m_F_before_merge": self.raw_m_F,
            "m_S_bound": self.bound_m_S,
            "m_F_bound": self.bound_m_F,
            "N_S": [c.N_S for c in self.contributions],
            "N_F": [c.N_F for c in self.contributions],
        }


def assemble_global(contribs, part):
    n = part.n_gamma
    if n == 0:
        raise NoInterface("the partition has no interface dofs")
    S_terms, F_terms = [], []
    for c in contribs:
        g = np.asarray(c.gamma_idx)
        for t in c.S_terms:
            M = np.zeros((n, n))
            M[np.ix_(g, g)] = t.data
            S_terms.append(Term(t.coeff, M, c.index))
        for t in c.F_terms:
            v = np.zeros(n)
            v[g] = t.data
            F_terms.append(Term(t.coeff, v, c.index))
    S, _, _ = merge_terms(S_terms)
    F, _, _ = merge_terms(F_terms)
    bound_S = sum(c.m_a * (c.N_S + 1) for c in contribs)
    bound_F = sum(c.m_b + c.m_a * c.N_F for c in contribs)
    return SchurAffine(AffineOperator(S), AffineVector(F, size=n), n, len(S_terms),
                       len(F_terms), bound_S, bound_F, tuple(contribs))


@dataclass(frozen=True, eq=False)
class InterfaceROM:
    sol: object
    system: SchurAffine

    @property
    def M(self):
        return self.sol.n_terms

    def truncate(self, m):
        return InterfaceROM(self.sol.truncate(m), self.system)


def build_interface_rom(sys, cfg, on_step=None):
    return InterfaceROM(solve_vs(sys.S, sys.F, cfg, on_step=on_step), sys)


def solve_interface_direct(sys, xi):
    """Assemble ``S(xi)``, ``F(xi)`` and solve densely; batches loop."""
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 2:
        return np.array([solve_interface_direct(sys, x) for x in xi])
    return Factorization(sys.S.assemble(xi)).solve(sys.F.assemble(xi))


def evaluate_interface_rom(rom, xi):
    return evaluate_solution(rom.sol, xi)

"""Greedy variable separation for affine parametric linear systems.

Given ``A(xi) = sum_j p_j(xi) A_j`` and ``F(xi) = sum_j q_j(xi) F_j`` the
solution is approximated by ``u_N(xi) = sum_k zeta_k(xi) c_k``.  Each
greedy step solves one snapshot system at the training sample with the
largest residual and defines ``zeta_k`` as an explicit rational function of
the affine coefficients and of the earlier ``zeta_i``:

    zeta_k = (sum_j q_j F_kj - sum_{i<k} sum_j p_j zeta_i A_kij)
             / sum_j p_j A_kkj

with ``A_kij = c_k^T A_j c_i`` and ``F_kj = c_k^T F_j``.  By construction
``u_k`` interpolates the exact solution at every selected sample.
"""
import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .coeffspace import (Constant, _Program, evaluate_many, linear_combination, product,
                         quotient)
from .errors import ConfigError, DegenerateDenominator, ShapeMismatch, SingularMatrix, \
    SingularSnapshot
from .linalg import Factorization

__all__ = [
    "VsConfig",
    "SeparatedSolution",
    "SnapshotSolver",
    "solve_vs",
    "evaluate_solution",
    "residual_vector",
    "residual_norm",
    "interpolation_defect",
    "jsonl_logger",
]


@dataclass(frozen=True)
class VsConfig:
    """Greedy build settings.

    ``tol`` is relative to ``max ||F(xi)||`` over the training set unless
    ``relative`` is false.  With ``normalize`` the stored vectors ``c_k``
    have unit norm (the products ``zeta_k c_k`` are unaffected).
    """

    tol: float
    max_terms: int
    training: object
    seed: int = 0
    relative: bool = True
    normalize: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigError("tolerance must be > 0")
        if self.max_terms < 1:
            raise ConfigError("max_terms must be a positive integer")
        if self.max_terms > len(self.training):
            raise ConfigError(f"max_terms={self.max_terms} exceeds the training set size "
                              f"{len(self.training)}")

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True, eq=False)
class SeparatedSolution:
    zetas: tuple
    vectors: np.ndarray            # (N, n), row k is c_k
    snapshots: np.ndarray          # (N, dims)
    indices: tuple                 # training-set rows of the snapshots
    A_tables: tuple                # step k: (k+1, m_a) array of c_k^T A_j c_i
    F_tables: tuple                # step k: (m_b,) array of c_k^T F_j
    residual_history: np.ndarray   # ||r_k(xi_k)|| at selection
    final_residual: float          # max residual over the training set after the build
    stop_reason: str
    size: int
    tol_abs: float = 0.0
    _ac: tuple = field(default=(), repr=False)   # A_j c_k, shape (m_a, n) per term
    _op: object = field(default=None, repr=False)
    _rhs: object = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_terms(self):
        return len(self.zetas)

    def __len__(self):
        return len(self.zetas)

    @property
    def terms(self):
        return list(zip(self.zetas, self.vectors))

    def program(self):
        prog = self._cache.get("program")
        if prog is None:
            prog = self._cache["program"] = _Program(list(self.zetas))
        return prog

    def zeta_values(self, xi):
        """``(N,)`` or ``(N, n_samples)`` values of the stochastic functions."""
        xi = np.asarray(xi, dtype=float)
        if not self.zetas:
            return np.zeros((0,) + xi.shape[:-1])
        return evaluate_many(self.zetas, xi, program=self.program())

    def truncate(self, m):
        """The solution after its first ``m`` greedy steps."""
        m = max(0, min(int(m), self.n_terms))
        return SeparatedSolution(self.zetas[:m], self.vectors[:m], self.snapshots[:m],
                                 self.indices[:m], self.A_tables[:m], self.F_tables[:m],
                                 self.residual_history[:m], float("nan"), f"truncated:{m}",
                                 self.size, self.tol_abs, self._ac[:m], self._op, self._rhs)

    def summary(self):
        return {
            "terms": self.n_terms,
            "stop_reason": self.stop_reason,
            "final_residual": self.final_residual,
            "residual_history": [float(r) for r in self.residual_history],
        }


class SnapshotSolver:
    """Solves ``A(xi) x = b`` from coefficient values, caching factorizations.

    A single-term operator ``p A_0`` is factored once; otherwise one
    factorization is kept per distinct coefficient tuple.
    """

    def __init__(self, op):
        self.op = op
        self._single = None
        self._by_values = {}

    def _factor(self, A):
        try:
            return Factorization(A)
        except SingularMatrix as exc:
            raise SingularSnapshot(str(exc), pivot=exc.pivot) from exc

    def solve(self, pvals, b):
        pvals = np.asarray(pvals, dtype=float)
        if len(self.op) == 1:
            if self._single is None:
                self._single = self._factor(self.op.terms[0].data)
            p = float(pvals[0])
            if p == 0.0:
                raise SingularSnapshot("operator coefficient vanishes at the snapshot", pivot=0)
            return self._single.solve(b) / p
        key = tuple(float(v) for v in pvals)
        fac = self._by_values.get(key)
        if fac is None:
            fac = self._by_values[key] = self._factor(self.op.assemble(None, values=pvals))
        return fac.solve(b)


def _ac_for(op, sol):
    if sol._op is op and len(sol._ac) == sol.n_terms:
        return sol._ac
    return tuple(op.apply_terms(c) for c in sol.vectors)


def residual_vector(op, rhs, sol, xi):
    """``F(xi) - A(xi) u_N(xi)`` at one sample via the cached ``A_j c_i``."""
    xi = np.asarray(xi, dtype=float)
    r = rhs.assemble(xi)
    if sol.n_terms == 0:
        return np.array(r, dtype=float)
    p = op.coeff_values(xi)
    z = sol.zeta_values(xi)
    for zi, ac in zip(z, _ac_for(op, sol)):
        r = r - zi * (p @ ac)
    return r


def residual_norm(op, rhs, sol, xi):
    return float(np.linalg.norm(residual_vector(op, rhs, sol, xi)))


def interpolation_defect(sol, op=None, rhs=None):
    """Largest ``||r(xi_k)|| / ||F(xi_k)||`` over the selected snapshots."""
    op = sol._op if op is None else op
    rhs = sol._rhs if rhs is None else rhs
    worst = 0.0
    for xi in sol.snapshots:
        f = float(np.linalg.norm(rhs.assemble(xi)))
        r = residual_norm(op, rhs, sol, xi)
        worst = max(worst, r / f if f > 0 else r)
    return worst


def evaluate_solution(sol, xi):
    """``sum_k zeta_k(xi) c_k``; a batch of samples gives shape ``(s, n)``."""
    xi = np.asarray(xi, dtype=float)
    if sol.n_terms == 0:
        return np.zeros(xi.shape[:-1] + (sol.size,))
    z = sol.zeta_values(xi)
    return z.T @ sol.vectors if xi.ndim == 2 else z @ sol.vectors


def jsonl_logger(stream):
    """``on_step`` callback that writes one JSON object per greedy step."""
    def log(rec):
        stream.write(json.dumps(rec, sort_keys=True) + "\n")
    return log


def _zeta_expr(Fk, Ak, k, p, q, pz):
    """Build the quotient defining ``zeta_k`` from the step-``k`` tables."""
    weights, children = [], []
    for j, w in enumerate(Fk):
        if w != 0.0:
            weights.append(w)
            children.append(q[j])
    for i in range(k):
        for j in range(len(p)):
            w = Ak[i, j]
            if w != 0.0:
                weights.append(-w)
                children.append(pz(j, i))
    num = linear_combination(weights, children) if children else Constant(0.0)
    dw = [(w, p[j]) for j, w in enumerate(Ak[k]) if w != 0.0]
    if not dw:
        raise DegenerateDenominator("snapshot vector is A-orthogonal to itself", step=k)
    den = linear_combination([w for w, _ in dw], [c for _, c in dw])
    return quotient(num, den)


def solve_vs(op, rhs, cfg, *, solver=None, on_step=None):
    """Run the greedy build on the training set of ``cfg``.

    Stops when the residual at the selected sample drops below the
    tolerance, when the training set is exhausted, or after
    ``cfg.max_terms`` terms.
    """
    n = rhs.size
    if op.shape != (n, n):
        raise ShapeMismatch(f"operator {op.shape} does not match right-hand side of size {n}")
    samples = np.asarray(cfg.training.samples, dtype=float)
    s = samples.shape[0]
    solver = solver or SnapshotSolver(op)
    p, q = list(op.coeffs), list(rhs.coeffs)
    ma = len(p)

    cache = {}
    P = evaluate_many(p, samples, cache).reshape(ma, s)
    Q = evaluate_many(q, samples, cache).reshape(len(q), s)
    Fmat = rhs.matrix()
    R = Fmat.T @ Q                                  # residuals over the training set
    rnorm = np.linalg.norm(R, axis=0)
    fmax = float(rnorm.max()) if s else 0.0
    tol_abs = cfg.tol * fmax if cfg.relative else cfg.tol

    zetas, vecs, acs, idx, Atab, Ftab, hist = [], [], [], [], [], [], []
    pz_nodes = {}

    def pz(j, i):
        node = pz_nodes.get((j, i))
        if node is None:
            node = pz_nodes[(j, i)] = product(p[j], zetas[i])
        return node

    remaining = np.ones(s, dtype=bool)
    first = int(np.random.default_rng(cfg.seed).permutation(s)[0])
    reason = "max_terms"
    t0 = time.perf_counter()
    for k in range(cfg.max_terms):
        if not remaining.any():
            reason = "exhausted"
            break
        if k == 0 and rnorm[first] >= tol_abs and rnorm[first] > 0:
            pick = first
        else:
            masked = np.where(remaining, rnorm, -np.inf)
            pick = int(np.argmax(masked))       # lowest index on ties
        if rnorm[pick] < tol_abs or rnorm[pick] == 0.0:
            reason = "tolerance"
            break
        xi = samples[pick]
        partial = _partial(zetas, vecs, acs, idx, Atab, Ftab, hist, n, tol_abs, op)
        r = residual_vector(op, rhs, partial, xi)
        hist.append(float(np.linalg.norm(r)))
        c = solver.solve(P[:, pick], r)
        if cfg.normalize:
            nc = np.linalg.norm(c)
            if nc == 0:
                raise SingularSnapshot("snapshot solve returned the zero vector", pivot=None)
            c = c / nc
        ac = op.apply_terms(c).reshape(ma, n)
        Ak = np.array([[c @ acj for acj in a] for a in acs] + [[c @ acj for acj in ac]])
        Ak = Ak.reshape(k + 1, ma)
        Fk = Fmat @ c
        try:
            zk = _zeta_expr(Fk, Ak, k, p, q, pz)
            zetas.append(zk)
            zrow = evaluate_many([zk], samples, cache).reshape(s)
        except DegenerateDenominator as exc:
            exc.step = k
            raise
        vecs.append(c)
        acs.append(ac)
        idx.append(pick)
        Atab.append(Ak)
        Ftab.append(Fk)
        remaining[pick] = False
        R -= ac.T @ (P * zrow)
        rnorm = np.linalg.norm(R, axis=0)
        if on_step is not None:
            on_step({"step": k + 1, "sample": pick, "residual": hist[-1],
                     "elapsed": time.perf_counter() - t0})
    else:
        reason = "max_terms"

    final = float(rnorm.max()) if s else 0.0
    if reason == "max_terms" and final < tol_abs:
        reason = "tolerance"
    return SeparatedSolution(tuple(zetas), _stack(vecs, n), samples[idx].reshape(len(idx), samples.shape[1]),
                             tuple(idx), tuple(Atab), tuple(Ftab), np.array(hist), final, reason,
                             n, tol_abs, tuple(acs), op, rhs)


def _stack(vecs, n):
    return np.array(vecs).reshape(len(vecs), n)


def _partial(zetas, vecs, acs, idx, Atab, Ftab, hist, n, tol_abs, op):
    return SeparatedSolution(tuple(zetas), _stack(vecs, n), np.zeros((len(idx), 0)), tuple(idx),
                             tuple(Atab), tuple(Ftab), np.array(hist), float("nan"), "building",
                             n, tol_abs, tuple(acs), op)

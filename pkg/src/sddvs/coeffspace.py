"""Parameter spaces, samplers and stochastic coefficient expressions.

A :class:`CoeffExpr` is a node of an immutable expression DAG over the
parameter vector ``xi``.  Evaluation accepts either a single parameter
vector of shape ``(dims,)`` or a batch of shape ``(n_samples, dims)``; in
the latter case every node value is an array over the batch.

Builders (:func:`product`, :func:`quotient`, :func:`linear_combination`,
:func:`add`) fold constants and cancel common scaled factors, so that
deterministic pieces collapse to :class:`Constant` nodes.  The node
constructors themselves never simplify.
"""
from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateDenominator, SpaceMismatch

__all__ = [
    "Uniform",
    "TruncatedNormal",
    "distribution_from_dict",
    "ParameterSpace",
    "SampleSet",
    "draw_samples",
    "CoeffExpr",
    "Constant",
    "Coordinate",
    "AffineInCoord",
    "Sum",
    "Product",
    "Quotient",
    "LinearCombination",
    "Named",
    "ONE",
    "evaluate",
    "evaluate_many",
    "add",
    "product",
    "quotient",
    "linear_combination",
    "scaled",
]

QUOTIENT_GUARD = 1e-14


# Distributions ================================================================
@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"Uniform needs lo < hi, got [{self.lo}, {self.hi}]")

    def sample(self, rng, n):
        return rng.uniform(self.lo, self.hi, n)

    def to_dict(self):
        return {"kind": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class TruncatedNormal:
    mean: float
    stddev: float
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"TruncatedNormal needs lo < hi, got [{self.lo}, {self.hi}]")
        if not self.stddev > 0:
            raise ValueError("TruncatedNormal needs stddev > 0")

    def sample(self, rng, n):
        # rejection from the untruncated normal
        out = np.empty(n)
        filled = 0
        while filled < n:
            draw = rng.normal(self.mean, self.stddev, n - filled)
            keep = draw[(draw >= self.lo) & (draw <= self.hi)]
            out[filled:filled + keep.size] = keep
            filled += keep.size
        return out

    def to_dict(self):
        return {"kind": "truncated_normal", "mean": self.mean,
                "stddev": self.stddev, "lo": self.lo, "hi": self.hi}


def distribution_from_dict(spec):
    """Build a distribution from its config form, e.g.
    ``{"kind": "uniform", "lo": 1, "hi": 4}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "uniform":
        return Uniform(float(spec.pop("lo")), float(spec.pop("hi")), **spec)
    if kind == "truncated_normal":
        return TruncatedNormal(float(spec.pop("mean")), float(spec.pop("stddev")),
                               float(spec.pop("lo")), float(spec.pop("hi")), **spec)
    raise ValueError(f"unknown distribution kind {kind!r}")


@dataclass(frozen=True, eq=False)
class ParameterSpace:
    """Product space of independent bounded marginals."""

    marginals: tuple
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        if not self.marginals:
            raise ValueError("a parameter space needs at least one coordinate")

    @classmethod
    def iid(cls, dist, dims, description=""):
        return cls((dist,) * dims, description)

    @property
    def dims(self):
        return len(self.marginals)

    def coord(self, index):
        return Coordinate(index, self)

    def contains(self, xi):
        xi = np.atleast_2d(xi)
        lo = np.array([m.lo for m in self.marginals])
        hi = np.array([m.hi for m in self.marginals])
        return bool(np.all((xi >= lo) & (xi <= hi)))


@dataclass(frozen=True, eq=False)
class SampleSet:
    samples: np.ndarray
    seed: int
    space: ParameterSpace

    def __len__(self):
        return self.samples.shape[0]

    def __getitem__(self, i):
        return self.samples[i]

    def __iter__(self):
        return iter(self.samples)


def draw_samples(space, count, seed):
    """Draw ``count`` i.i.d. parameter vectors from ``space``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    cols = [m.sample(rng, count) for m in space.marginals]
    samples = np.column_stack(cols)
    samples.setflags(write=False)
    return SampleSet(samples, seed, space)


# Expression nodes =============================================================
_ids = itertools.count()


def _join_spaces(children):
    space = None
    for child in children:
        if child.space is None:
            continue
        if space is None:
            space = child.space
        elif child.space is not space:
            raise SpaceMismatch("operands belong to different parameter spaces")
    return space


class CoeffExpr:
    """Base node of the coefficient expression DAG."""

    __slots__ = ("id", "space", "children", "_key", "_program", "__weakref__")
    kind = "expr"
    commutative = False

    def __init__(self, children=(), space=None):
        self.id = next(_ids)
        self.children = tuple(children)
        joined = _join_spaces(self.children)
        if space is not None and joined is not None and space is not joined:
            raise SpaceMismatch("operands belong to different parameter spaces")
        self.space = space if space is not None else joined
        self._key = None
        self._program = None

    # subclasses -------------------------------------------------------------
    def _signature(self):
        return self.kind

    def _apply(self, vals, xi):
        raise NotImplementedError

    # public -----------------------------------------------------------------
    def __call__(self, xi):
        return evaluate(self, xi)

    def key(self):
        """Structural hash of the DAG below this node (commutative-sorted)."""
        if self._key is None:
            for node in _toposort([self]):
                if node._key is None:
                    parts = [c._key for c in node.children]
                    if node.commutative:
                        parts.sort()
                    h = hashlib.sha1(node._signature().encode())
                    for p in parts:
                        h.update(b"|")
                        h.update(p.encode())
                    node._key = h.hexdigest()
        return self._key

    def _eval_tree(self, xi):
        # plain recursion, no memo
        return self._apply([c._eval_tree(xi) for c in self.children], xi)

    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __mul__(self, other):
        return product(self, _lift(other))

    def __rmul__(self, other):
        return product(_lift(other), self)

    def __truediv__(self, other):
        return quotient(self, _lift(other))

    def __rtruediv__(self, other):
        return quotient(_lift(other), self)

    def __neg__(self):
        return linear_combination([-1.0], [self])

    def __repr__(self):
        return f"<{type(self).__name__} #{self.id}>"


def _lift(x):
    return x if isinstance(x, CoeffExpr) else Constant(float(x))


class Constant(CoeffExpr):
    __slots__ = ("value",)
    kind = "const"

    def __init__(self, value):
        super().__init__()
        self.value = float(value)

    def _signature(self):
        return f"const:{self.value!r}"

    def _apply(self, vals, xi):
        return self.value

    def __repr__(self):
        return f"Constant({self.value!r})"


class Coordinate(CoeffExpr):
    __slots__ = ("index",)
    kind = "coord"

    def __init__(self, index, space=None):
        index = int(index)
        if index < 0 or (space is not None and index >= space.dims):
            raise IndexError(f"coordinate {index} outside the parameter space")
        super().__init__(space=space)
        self.index = index

    def _signature(self):
        return f"coord:{self.index}"

    def _apply(self, vals, xi):
        return xi[..., self.index]

    def __repr__(self):
        return f"Coordinate({self.index})"


class AffineInCoord(CoeffExpr):
    """``slope * xi[index] + intercept``."""

    __slots__ = ("index", "slope", "intercept")
    kind = "affine"

    def __init__(self, index, slope, intercept, space=None):
        index = int(index)
        if index < 0 or (space is not None and index >= space.dims):
            raise IndexError(f"coordinate {index} outside the parameter space")
        super().__init__(space=space)
        self.index = index
        self.slope = float(slope)
        self.intercept = float(intercept)

    def _signature(self):
        return f"affine:{self.index}:{self.slope!r}:{self.intercept!r}"

    def _apply(self, vals, xi):
        return self.slope * xi[..., self.index] + self.intercept


class Sum(CoeffExpr):
    __slots__ = ()
    kind = "sum"
    commutative = True

    def _apply(self, vals, xi):
        acc = vals[0]
        for v in vals[1:]:
            acc = acc + v
        return acc


class Product(CoeffExpr):
    __slots__ = ()
    kind = "prod"
    commutative = True

    def _apply(self, vals, xi):
        acc = vals[0]
        for v in vals[1:]:
            acc = acc * v
        return acc


class Quotient(CoeffExpr):
    __slots__ = ()
    kind = "quot"

    def __init__(self, numerator, denominator):
        super().__init__((numerator, denominator))

    def _apply(self, vals, xi):
        num, den = vals
        bad = np.abs(den) < QUOTIENT_GUARD * np.maximum(1.0, np.abs(num))
        if np.any(bad):
            sample = int(np.flatnonzero(np.atleast_1d(bad))[0]) if np.ndim(bad) else None
            raise DegenerateDenominator(
                f"degenerate denominator in quotient node #{self.id}",
                node_id=self.id, sample=sample)
        return num / den


class LinearCombination(CoeffExpr):
    __slots__ = ("weights",)
    kind = "lincomb"

    def __init__(self, weights, children):
        weights = np.asarray(weights, dtype=float).ravel()
        children = tuple(children)
        if weights.size != len(children) or not children:
            raise ValueError("need one weight per child and at least one child")
        super().__init__(children)
        self.weights = weights

    def _signature(self):
        # weights travel with their children, so this node is not commutative
        return "lincomb:" + ",".join(repr(float(w)) for w in self.weights)

    def _apply(self, vals, xi):
        w = self.weights
        acc = w[0] * vals[0]
        for i in range(1, len(vals)):
            acc = acc + w[i] * vals[i]
        return acc


class Named(CoeffExpr):
    """Opaque callback ``fn(xi)``; ``name`` identifies it for hashing."""

    __slots__ = ("name", "fn")
    kind = "named"

    def __init__(self, name, fn, space=None):
        super().__init__(space=space)
        self.name = str(name)
        self.fn = fn

    def _signature(self):
        return f"named:{self.name}"

    def _apply(self, vals, xi):
        return self.fn(xi)


ONE = Constant(1.0)


# Evaluation ===================================================================
def _toposort(roots):
    """Children-first order of every node reachable from ``roots``."""
    order = []
    seen = set()
    for root in roots:
        if root.id in seen:
            continue
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if node.id in seen:
                continue
            seen.add(node.id)
            stack.append((node, True))
            for child in reversed(node.children):
                if child.id not in seen:
                    stack.append((child, False))
    return order


class _Program:
    """Flattened evaluation schedule for a fixed set of roots."""

    __slots__ = ("nodes", "child_slots", "root_slots")

    def __init__(self, roots):
        self.nodes = _toposort(roots)
        slot = {node.id: i for i, node in enumerate(self.nodes)}
        self.child_slots = [tuple(slot[c.id] for c in node.children) for node in self.nodes]
        self.root_slots = [slot[r.id] for r in roots]

    def run(self, xi, cache=None):
        vals = [None] * len(self.nodes)
        for i, node in enumerate(self.nodes):
            if cache is not None and node.id in cache:
                vals[i] = cache[node.id]
                continue
            vals[i] = node._apply([vals[j] for j in self.child_slots[i]], xi)
            if cache is not None:
                cache[node.id] = vals[i]
        return [vals[i] for i in self.root_slots]


def _check_xi(xi, space):
    xi = np.asarray(xi, dtype=float)
    if space is not None and xi.shape[-1] != space.dims:
        raise ValueError(f"parameter vector has {xi.shape[-1]} entries, space has {space.dims}")
    return xi


def _finish(val, xi):
    if xi.ndim == 2:
        return np.broadcast_to(np.asarray(val, dtype=float), (xi.shape[0],)).copy()
    return float(val)


def evaluate(expr, xi, *, memo=True, cache=None):
    """Evaluate ``expr`` at one parameter vector or a batch of them.

    With ``memo=True`` shared subexpressions are computed once.  ``cache``
    may hold values of already-evaluated nodes (keyed by node id) for the
    same ``xi``; it is updated in place.
    """
    xi = _check_xi(xi, expr.space)
    if not memo:
        return _finish(expr._eval_tree(xi), xi)
    if cache is None:
        if expr._program is None:
            expr._program = _Program([expr])
        prog = expr._program
    else:
        prog = _Program([expr])
    return _finish(prog.run(xi, cache)[0], xi)


def evaluate_many(exprs, xi, cache=None, program=None):
    """Evaluate several expressions sharing one memo.

    Returns an array of shape ``(len(exprs),)`` for a single ``xi`` or
    ``(len(exprs), n_samples)`` for a batch.
    """
    exprs = list(exprs)
    xi = np.asarray(xi, dtype=float)
    if not exprs:
        return np.zeros((0,) + xi.shape[:-1])
    if program is None:
        program = _Program(exprs)
    vals = program.run(xi, cache)
    return np.array([_finish(v, xi) for v in vals])


# Builders =====================================================================
def scaled(expr):
    """Split ``expr`` into ``(scale, base)`` with ``expr == scale * base``.

    ``base`` is ``None`` for constants.
    """
    if isinstance(expr, Constant):
        return expr.value, None
    if isinstance(expr, LinearCombination) and len(expr.children) == 1:
        s, base = scaled(expr.children[0])
        return float(expr.weights[0]) * s, base
    if isinstance(expr, Product):
        consts = [c for c in expr.children if isinstance(c, Constant)]
        others = [c for c in expr.children if not isinstance(c, Constant)]
        if len(others) == 1:
            s, base = scaled(others[0])
            return s * float(np.prod([c.value for c in consts])), base
    return 1.0, expr


def add(*exprs):
    exprs = [_lift(e) for e in exprs]
    if all(isinstance(e, Constant) for e in exprs):
        return Constant(sum(e.value for e in exprs))
    return Sum(exprs)


def product(a, b):
    """Product node with constant folding."""
    a, b = _lift(a), _lift(b)
    _join_spaces((a, b))
    if isinstance(a, Constant) and isinstance(b, Constant):
        return Constant(a.value * b.value)
    if isinstance(a, Constant) and a.value == 1.0:
        return b
    if isinstance(b, Constant) and b.value == 1.0:
        return a
    return Product((a, b))


def quotient(a, b):
    """Quotient node; cancels a common scaled factor of ``a`` and ``b``."""
    a, b = _lift(a), _lift(b)
    _join_spaces((a, b))
    if isinstance(b, Constant) and b.value == 1.0:
        return a
    sa, base_a = scaled(a)
    sb, base_b = scaled(b)
    same = base_a is base_b or (
        base_a is not None and base_b is not None and base_a.key() == base_b.key())
    if same:
        if abs(sb) < QUOTIENT_GUARD * max(1.0, abs(sa)):
            raise DegenerateDenominator("constant denominator is zero")
        return Constant(sa / sb)
    return Quotient(a, b)


def linear_combination(weights, exprs):
    """``sum_i weights[i] * exprs[i]`` with constant folding."""
    exprs = [_lift(e) for e in exprs]
    weights = np.asarray(weights, dtype=float).ravel()
    _join_spaces(exprs)
    if all(isinstance(e, Constant) for e in exprs):
        acc = 0.0
        for w, e in zip(weights, exprs):
            acc = acc + w * e.value
        return Constant(acc)
    return LinearCombination(weights, exprs)

"""Linear finite elements producing affine-parametric systems.

Meshes are uniform intervals (1D) or structured triangulations (2D, every
cell split along its lower-left/upper-right diagonal).  Coefficients are
given piecewise as sums of ``spatial factor * CoeffExpr`` products, and
:func:`assemble_affine` emits one operator term per (piece, factor,
subdomain group).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .affine import AffineOperator, AffineVector, Term
from .coeffspace import ONE, CoeffExpr, evaluate, evaluate_many, product
from .errors import (BadMeshSpec, BoundaryConflict, NonProductCoefficient,
                     RegionGap, RegionOverlap)
from .linalg import csr_from_triplets, factorize

__all__ = [
    "Mesh",
    "interval_mesh",
    "structured_tri_mesh",
    "build_mesh",
    "label_elements",
    "Piece",
    "CoefficientField",
    "DirichletCondition",
    "NeumannCondition",
    "BoundarySpec",
    "DofMap",
    "assemble_affine",
    "solve_global",
    "write_nodal_csv",
]


# Meshes =======================================================================
@dataclass(frozen=True, eq=False)
class Mesh:
    kind: str
    nodes: np.ndarray
    elements: np.ndarray
    facets: np.ndarray          # boundary facets: node ids, (nf, dim)
    facet_elements: np.ndarray  # owning element of every boundary facet
    shape: tuple

    @property
    def dim(self):
        return self.nodes.shape[1]

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @property
    def centroids(self):
        return self.nodes[self.elements].mean(axis=1)

    @property
    def measures(self):
        p = self.nodes[self.elements]
        if self.dim == 1:
            return p[:, 1, 0] - p[:, 0, 0]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    @property
    def boundary_nodes(self):
        return np.unique(self.facets)


def interval_mesh(a, b, n_elems):
    if n_elems < 2 or not a < b:
        raise BadMeshSpec(f"interval mesh needs a < b and n_elems >= 2, got ({a}, {b}, {n_elems})")
    x = np.linspace(a, b, n_elems + 1)
    elements = np.column_stack([np.arange(n_elems), np.arange(1, n_elems + 1)])
    facets = np.array([[0], [n_elems]])
    return Mesh("interval", x[:, None], elements, facets,
                np.array([0, n_elems - 1]), (n_elems,))


def structured_tri_mesh(x_range, y_range, nx, ny):
    (x0, x1), (y0, y1) = x_range, y_range
    if nx < 2 or ny < 2 or not (x0 < x1 and y0 < y1):
        raise BadMeshSpec(f"triangle mesh needs nx, ny >= 2 and nonempty ranges, got {nx}x{ny}")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    n00 = j * (nx + 1) + i
    n10, n01, n11 = n00 + 1, n00 + nx + 1, n00 + nx + 2
    lower = np.column_stack([n00, n10, n11])
    upper = np.column_stack([n00, n11, n01])
    elements = np.empty((2 * nx * ny, 3), dtype=int)
    elements[0::2] = lower
    elements[1::2] = upper
    facets, owners = _boundary_edges(elements)
    return Mesh("tri", nodes, elements, facets, owners, (nx, ny))


def _boundary_edges(elements):
    edges = np.concatenate([elements[:, [0, 1]], elements[:, [1, 2]], elements[:, [2, 0]]])
    owners = np.tile(np.arange(elements.shape[0]), 3)
    key = np.sort(edges, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    once = counts[inv.ravel()] == 1
    order = np.lexsort((key[once][:, 1], key[once][:, 0]))
    return key[once][order], owners[once][order]


def build_mesh(spec):
    """Mesh from its config form.

    ``{"kind": "interval", "a": 0, "b": 1, "n_elems": 4}`` or
    ``{"kind": "tri", "x_range": [0, 1], "y_range": [0, 1], "nx": 2, "ny": 2}``.
    """
    try:
        kind = spec["kind"]
        if kind == "interval":
            return interval_mesh(float(spec["a"]), float(spec["b"]), int(spec["n_elems"]))
        if kind == "tri":
            return structured_tri_mesh(tuple(spec["x_range"]), tuple(spec["y_range"]),
                                       int(spec["nx"]), int(spec["ny"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, BadMeshSpec):
            raise
        raise BadMeshSpec(f"bad mesh spec {spec!r}: {exc}") from exc
    raise BadMeshSpec(f"unknown mesh kind {spec.get('kind')!r}")


def label_elements(mesh, regions):
    """Assign each element to exactly one region (by centroid)."""
    c = mesh.centroids
    hits = np.array([np.asarray(r(c), dtype=bool) for r in regions])
    counts = hits.sum(axis=0)
    if np.any(counts > 1):
        raise RegionOverlap(f"element {int(np.flatnonzero(counts > 1)[0])} lies in several regions")
    if np.any(counts == 0):
        raise RegionGap(f"element {int(np.flatnonzero(counts == 0)[0])} lies in no region")
    return hits.argmax(axis=0)


# Coefficient fields ===========================================================
@dataclass(frozen=True)
class Piece:
    """Coefficient on one region: ``sum_t spatial_t(x) * coeff_t(xi)``.

    ``region`` maps an ``(n, dim)`` array of element centroids to a boolean
    mask; ``None`` means everywhere.  A spatial factor is a number, a
    callable of an ``(n, dim)`` coordinate array, or an array of nodal
    values (linear interpolation).
    """

    region: Optional[Callable]
    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        for t in terms:
            if not (isinstance(t, tuple) and len(t) == 2 and isinstance(t[1], CoeffExpr)):
                raise NonProductCoefficient(
                    "each piece term must be a (spatial factor, CoeffExpr) pair")
            g = t[0]
            if not (callable(g) or np.isscalar(g) or isinstance(g, (np.ndarray, tuple, list))):
                raise NonProductCoefficient(f"unsupported spatial factor {g!r}")
        object.__setattr__(self, "terms", terms)


@dataclass(frozen=True)
class CoefficientField:
    pieces: tuple

    def __init__(self, *pieces):
        object.__setattr__(self, "pieces", tuple(pieces))


@dataclass(frozen=True)
class DirichletCondition:
    """Nodal constraint ``u = coeff(xi) * value(x)`` on selected nodes.

    ``nodes`` is an index array or a predicate on node coordinates.
    """

    nodes: object
    value: object = 0.0
    coeff: CoeffExpr = ONE


@dataclass(frozen=True)
class NeumannCondition:
    """Boundary flux ``coeff(xi) * flux(x)`` on facets picked by a predicate
    on facet midpoints."""

    facets: Callable
    flux: object = 0.0
    coeff: CoeffExpr = ONE


@dataclass(frozen=True)
class BoundarySpec:
    dirichlet: tuple = ()
    neumann: tuple = ()


@dataclass(frozen=True, eq=False)
class DofMap:
    """Free/constrained node bookkeeping of an assembled system."""

    n_nodes: int
    free: np.ndarray
    dirichlet_nodes: np.ndarray
    dirichlet: tuple   # (node ids, values, CoeffExpr) per condition
    mesh: Mesh

    @property
    def n_free(self):
        return self.free.size

    def dirichlet_values(self, xi):
        """Full nodal vector(s) carrying only the boundary values."""
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape[:-1] + (self.n_nodes,))
        for nodes, values, coeff in self.dirichlet:
            out[..., nodes] += np.multiply.outer(np.atleast_1d(evaluate(coeff, xi)), values).reshape(
                out[..., nodes].shape)
        return out

    def scatter(self, u_free, xi):
        out = self.dirichlet_values(xi)
        out[..., self.free] = u_free
        return out


def _spatial_at(g, mesh, points, bary=None):
    """Evaluate a spatial factor at physical points.

    ``bary`` (n_el, nq, nv) gives nodal interpolation weights when ``g`` is
    an array of nodal values; ``points`` is (n_el, nq, dim).
    """
    shp = points.shape[:-1]
    if callable(g):
        flat = points.reshape(-1, points.shape[-1])
        vals = np.asarray(g(flat), dtype=float)
        return vals.reshape(shp + vals.shape[1:])
    arr = np.asarray(g, dtype=float)
    if bary is not None and arr.ndim == 1 and arr.shape[0] == mesh.n_nodes:
        return np.einsum("eqv,ev->eq", bary, arr[mesh.elements])
    return np.broadcast_to(arr, shp + arr.shape).copy()


def _gradients(mesh):
    p = mesh.nodes[mesh.elements]
    if mesh.dim == 1:
        h = p[:, 1, 0] - p[:, 0, 0]
        return np.stack([-1.0 / h, 1.0 / h], axis=1)[:, :, None]
    x, y = p[..., 0], p[..., 1]
    area2 = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    return np.stack([b, c], axis=2) / area2[:, None, None]


def _quadrature(mesh):
    """Reference points as barycentric weights and weights per unit measure."""
    if mesh.dim == 1:
        t = 0.5 + 0.5 * np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
        w = np.array([5.0, 8.0, 5.0]) / 18.0
        bary = np.column_stack([1 - t, t])
    else:
        bary = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
        w = np.full(3, 1.0 / 3.0)
    return bary, w


def _element_matrices(mesh, g_diff, velocity):
    """Stiffness ``g * grad phi_i . grad phi_j`` plus optional convection."""
    G = _gradients(mesh)
    meas = mesh.measures
    K = np.einsum("eid,ejd->eij", G, G) * (meas * g_diff)[:, None, None]
    if velocity is not None:
        # (d . grad phi_j) * int phi_i, with int phi_i = meas / n_vertices
        nv = mesh.elements.shape[1]
        dg = np.einsum("ed,ejd->ej", velocity, G)
        K = K + (meas / nv)[:, None, None] * dg[:, None, :]
    return K


def _scatter_matrix(mesh, mask, local):
    el = mesh.elements[mask]
    nv = el.shape[1]
    rows = np.repeat(el, nv, axis=1).ravel()
    cols = np.tile(el, (1, nv)).ravel()
    return csr_from_triplets(rows, cols, local[mask].ravel(), (mesh.n_nodes, mesh.n_nodes))


def _load_vector(mesh, mask, g):
    bary, w = _quadrature(mesh)
    el = mesh.elements[mask]
    p = mesh.nodes[el]                                   # (ne, nv, dim)
    pts = np.einsum("qv,evd->eqd", bary, p)
    arr = None if callable(g) else np.asarray(g, dtype=float)
    if arr is not None and arr.ndim == 1 and arr.shape[0] == mesh.n_nodes:
        vals = np.einsum("qv,ev->eq", bary, arr[el])
    else:
        vals = _spatial_at(g, mesh, pts)                 # (ne, nq)
    meas = mesh.measures[mask]
    local = np.einsum("eq,q,qv->ev", vals, w, bary) * meas[:, None]
    return np.bincount(el.ravel(), local.ravel(), minlength=mesh.n_nodes)


def _neumann_vector(mesh, facet_mask, flux):
    fac = mesh.facets[facet_mask]
    if mesh.dim == 1:
        vals = _spatial_at(flux, mesh, mesh.nodes[fac][:, None, :])[:, 0]
        return np.bincount(fac.ravel(), vals, minlength=mesh.n_nodes)
    t = 0.5 + 0.5 * np.array([-1.0, 1.0]) / np.sqrt(3.0)
    bary = np.column_stack([1 - t, t])
    p = mesh.nodes[fac]
    pts = np.einsum("qv,evd->eqd", bary, p)
    length = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    vals = _spatial_at(flux, mesh, pts)
    local = np.einsum("eq,qv->ev", vals, bary) * (0.5 * length)[:, None]
    return np.bincount(fac.ravel(), local.ravel(), minlength=mesh.n_nodes)


def _region_mask(region, pts):
    if region is None:
        return np.ones(pts.shape[0], dtype=bool)
    return np.asarray(region(pts), dtype=bool)


def _dirichlet(mesh, bc):
    taken = np.zeros(mesh.n_nodes, dtype=bool)
    entries = []
    for cond in bc.dirichlet:
        if callable(cond.nodes):
            nodes = np.flatnonzero(np.asarray(cond.nodes(mesh.nodes), dtype=bool))
        else:
            nodes = np.unique(np.asarray(cond.nodes, dtype=int))
        if np.any(taken[nodes]):
            raise BoundaryConflict("a node is constrained by more than one Dirichlet entry")
        taken[nodes] = True
        arr = None if callable(cond.value) else np.asarray(cond.value, dtype=float)
        if arr is not None and arr.ndim == 1 and arr.size == nodes.size:
            vals = arr          # one value per node, in increasing node order
        else:
            vals = _spatial_at(cond.value, mesh, mesh.nodes[nodes][:, None, :])
        entries.append((nodes, np.asarray(vals, dtype=float).reshape(-1), cond.coeff))
    return taken, tuple(entries)


def assemble_affine(mesh, diffusion, velocity, source, bc, groups=None):
    """Assemble the affine operator/vector pair over the free nodes.

    Parameters
    ----------
    mesh : Mesh
    diffusion : CoefficientField
        Scalar diffusivity pieces.
    velocity : CoefficientField or None
        Convection velocity pieces; spatial factors return ``(n, dim)``
        arrays or a constant vector.
    source : CoefficientField
    bc : BoundarySpec
        Dirichlet rows/columns are eliminated and their lifting moved to
        the right-hand side; Neumann fluxes are added to it.
    groups : array of int, optional
        Subdomain label of every element.  Each term is split per group
        and tagged, which is what subdomain block extraction needs.

    Returns
    -------
    (AffineOperator, AffineVector)
    """
    if groups is None:
        groups = np.zeros(mesh.n_elements, dtype=int)
        tags = [None]
    else:
        groups = np.asarray(groups, dtype=int)
        tags = list(np.unique(groups))
    centroids = mesh.centroids
    constrained, dirichlet = _dirichlet(mesh, bc)
    free = np.flatnonzero(~constrained)
    dofs = DofMap(mesh.n_nodes, free, np.flatnonzero(constrained), dirichlet, mesh)

    full_terms = []   # (coeff, full n_nodes x n_nodes matrix, tag)

    def emit(pieces, build):
        for pc in pieces:
            in_region = _region_mask(pc.region, centroids)
            for g, coeff in pc.terms:
                local = build(g)
                for tag in tags:
                    mask = in_region if tag is None else in_region & (groups == tag)
                    if not mask.any():
                        continue
                    A = _scatter_matrix(mesh, mask, local)
                    if A.nnz:
                        full_terms.append((coeff, A, tag))

    def diff_local(g):
        vals = _spatial_at(g, mesh, centroids[:, None, :],
                           np.full((mesh.n_elements, 1, mesh.elements.shape[1]),
                                   1.0 / mesh.elements.shape[1]))[:, 0]
        return _element_matrices(mesh, vals, None)

    def conv_local(d):
        vals = _spatial_at(d, mesh, centroids[:, None, :])[:, 0]
        vals = np.broadcast_to(vals, (mesh.n_elements, mesh.dim))
        return _element_matrices(mesh, np.zeros(mesh.n_elements), vals)

    emit(diffusion.pieces, diff_local)
    if velocity is not None:
        emit(velocity.pieces, conv_local)

    op_terms = []
    vec_terms = []
    for coeff, A, tag in full_terms:
        Aff = A[free][:, free].tocsr()
        if Aff.nnz:
            op_terms.append(Term(coeff, Aff, tag))
        for nodes, values, dcoeff in dirichlet:
            if not np.any(values):
                continue
            lift = -np.asarray(A[free][:, nodes] @ values).ravel()
            if np.any(lift):
                vec_terms.append(Term(product(coeff, dcoeff), lift, tag))

    for pc in source.pieces:
        in_region = _region_mask(pc.region, centroids)
        for g, coeff in pc.terms:
            for tag in tags:
                mask = in_region if tag is None else in_region & (groups == tag)
                if not mask.any():
                    continue
                b = _load_vector(mesh, mask, g)[free]
                if np.any(b):
                    vec_terms.append(Term(coeff, b, tag))

    for cond in bc.neumann:
        mids = mesh.nodes[mesh.facets].mean(axis=1)
        fmask = np.asarray(cond.facets(mids), dtype=bool)
        for tag in tags:
            mask = fmask if tag is None else fmask & (groups[mesh.facet_elements] == tag)
            if not mask.any():
                continue
            b = _neumann_vector(mesh, mask, cond.flux)[free]
            if np.any(b):
                vec_terms.append(Term(cond.coeff, b, tag))

    return AffineOperator(op_terms, dofs), AffineVector(vec_terms, dofs, size=free.size)


def solve_global(op, rhs, xi):
    """Monolithic reference solve; returns the full nodal vector."""
    xi = np.asarray(xi, dtype=float)
    A = op.assemble(xi)
    b = rhs.assemble(xi)
    u = factorize(A).solve(b)
    if op.dofs is None:
        return u
    return op.dofs.scatter(u, xi)


def write_nodal_csv(path, mesh, values, header=True):
    """Rows ``x[,y],value``."""
    cols = ["x", "y"][: mesh.dim] + ["value"]
    data = np.column_stack([mesh.nodes, np.asarray(values, dtype=float)])
    with open(path, "w") as fh:
        if header:
            fh.write(",".join(cols) + "\n")
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")

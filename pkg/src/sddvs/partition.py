"""Non-overlapping partitions and per-subdomain affine blocks.

Indices held by a :class:`Partition` refer to the free-dof numbering of the
assembled system (Dirichlet nodes are excluded everywhere).
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .affine import AffineOperator, AffineVector, Term, merge_terms
from .errors import IndexOutOfRange
from .fem import label_elements
from .linalg import csr_from_triplets

__all__ = ["Partition", "SubdomainBlocks", "partition_mesh", "extract_blocks"]


@dataclass(frozen=True, eq=False)
class Partition:
    labels: np.ndarray          # subdomain of every element
    interiors: tuple            # free-dof indices per subdomain
    gamma: np.ndarray           # free-dof indices of the global interface
    gamma_local: tuple          # positions into ``gamma`` per subdomain
    restrictions: tuple         # R_i, shape (|Gamma_i|, n_gamma)
    free: np.ndarray            # node id of every free dof
    n_nodes: int

    @property
    def n_subdomains(self):
        return len(self.interiors)

    @property
    def n_gamma(self):
        return self.gamma.size

    @property
    def n_free(self):
        return self.free.size

    def summary(self):
        return {
            "n_subdomains": self.n_subdomains,
            "n_gamma": int(self.n_gamma),
            "interior_dofs": [int(ix.size) for ix in self.interiors],
            "local_interface_dofs": [int(g.size) for g in self.gamma_local],
        }


def partition_mesh(mesh, regions, dofs=None):
    """Classify free dofs into subdomain interiors and the interface.

    A free node is an interface dof when its incident elements belong to
    two or more regions.  Elements are assigned to regions by centroid.
    """
    labels = label_elements(mesh, regions)
    ns = len(regions)
    touched = np.zeros((ns, mesh.n_nodes), dtype=bool)
    for s in range(ns):
        touched[s, np.unique(mesh.elements[labels == s])] = True
    count = touched.sum(axis=0)

    free_nodes = np.arange(mesh.n_nodes) if dofs is None else np.asarray(dofs.free)
    node_to_free = np.full(mesh.n_nodes, -1)
    node_to_free[free_nodes] = np.arange(free_nodes.size)
    is_free = node_to_free >= 0

    gamma_nodes = np.flatnonzero(is_free & (count >= 2))
    gamma = node_to_free[gamma_nodes]
    interiors = []
    gamma_local = []
    restrictions = []
    for s in range(ns):
        inner = np.flatnonzero(is_free & touched[s] & (count == 1))
        interiors.append(node_to_free[inner])
        pos = np.flatnonzero(touched[s, gamma_nodes])
        gamma_local.append(pos)
        restrictions.append(csr_from_triplets(np.arange(pos.size), pos, np.ones(pos.size),
                                              (pos.size, gamma_nodes.size)))
    return Partition(labels, tuple(interiors), gamma, tuple(gamma_local), tuple(restrictions),
                     free_nodes, mesh.n_nodes)


@dataclass(frozen=True, eq=False)
class SubdomainBlocks:
    """Affine blocks of one subdomain, all sharing one coefficient list."""

    index: int
    interior: np.ndarray        # free-dof indices
    gamma_idx: np.ndarray       # positions into the global interface
    coeffs: tuple
    A_II: tuple
    A_IG: tuple
    A_GI: tuple
    A_GG: tuple
    rhs_coeffs: tuple
    f_I: tuple
    f_G: tuple
    partition: Partition
    dofs: object = None

    @property
    def m_a(self):
        return len(self.coeffs)

    @property
    def m_b(self):
        return len(self.rhs_coeffs)

    @property
    def n_I(self):
        return self.interior.size

    @property
    def n_G(self):
        return self.gamma_idx.size

    def op(self, which="II"):
        blocks = {"II": self.A_II, "IG": self.A_IG, "GI": self.A_GI, "GG": self.A_GG}[which]
        return AffineOperator([Term(c, b, self.index) for c, b in zip(self.coeffs, blocks)])

    def rhs(self, which="I"):
        vecs = self.f_I if which == "I" else self.f_G
        size = self.n_I if which == "I" else self.n_G
        return AffineVector([Term(c, v, self.index) for c, v in zip(self.rhs_coeffs, vecs)],
                            size=size)


def _nnz(M):
    return M.count_nonzero() if sp.issparse(M) else np.count_nonzero(M)


def extract_blocks(op, rhs, part, i):
    """Restrict the terms assembled on subdomain ``i`` to its four blocks.

    Only terms tagged with group ``i`` contribute (their elements lie in
    subdomain ``i``); structurally identical coefficients are merged and
    terms with all-zero blocks are dropped.
    """
    if not 0 <= i < part.n_subdomains:
        raise IndexOutOfRange(f"subdomain {i} out of range")
    if any(t.group is None for t in op.terms):
        raise ValueError("operator terms must be tagged by subdomain (assemble with groups=)")
    I = part.interiors[i]
    G = part.gamma[part.gamma_local[i]]
    n = part.n_free
    if op.shape != (n, n) or rhs.size != n:
        raise IndexOutOfRange("operator does not match the partition's dof numbering")

    own, _, _ = merge_terms([t for t in op.terms if t.group == i],
                            absorb_constants=False, drop_zero=True)
    coeffs, II, IG, GI, GG = [], [], [], [], []
    for t in own:
        A = t.data.tocsr()
        rows_I = A[I]
        rows_G = A[G]
        blocks = (rows_I[:, I].tocsr(), rows_I[:, G].tocsr(), rows_G[:, I].tocsr(), rows_G[:, G].tocsr())
        if sum(_nnz(b) for b in blocks) == 0:
            continue
        coeffs.append(t.coeff)
        for store, b in zip((II, IG, GI, GG), blocks):
            store.append(b)

    vec, _, _ = merge_terms([t for t in rhs.terms if t.group == i],
                            absorb_constants=False, drop_zero=True)
    rc, fI, fG = [], [], []
    for t in vec:
        a, b = t.data[I], t.data[G]
        if not (np.any(a) or np.any(b)):
            continue
        rc.append(t.coeff)
        fI.append(np.array(a))
        fG.append(np.array(b))
    return SubdomainBlocks(i, I, part.gamma_local[i], tuple(coeffs), tuple(II), tuple(IG),
                           tuple(GI), tuple(GG), tuple(rc), tuple(fI), tuple(fG), part, op.dofs)

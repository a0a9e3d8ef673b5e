"""Truncated Karhunen-Loeve expansion of a squared-exponential random field.

The covariance is discretized by nodal collocation with diagonal
(lumped-mass) quadrature weights ``W``; the symmetric problem
``W^1/2 C W^1/2 v = gamma v`` is solved densely and the modes are mapped
back with ``b = W^-1/2 v`` so that they are ``W``-orthonormal.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .coeffspace import ONE, Coordinate
from .errors import EigSolveFailure, NegativeEigenvalueUsed

__all__ = [
    "CovarianceSpec",
    "KLExpansion",
    "covariance_matrix",
    "lumped_mass_weights",
    "build_kl",
    "evaluate_field",
    "as_affine_source",
    "write_spectrum_csv",
]

NEG_TOL = 1e-12


@dataclass(frozen=True)
class CovarianceSpec:
    sigma: float
    lx: float
    ly: float = 1.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("correlation lengths must be > 0")


@dataclass(frozen=True, eq=False)
class KLExpansion:
    mean: float
    eigenvalues: np.ndarray   # (n_modes,), nonincreasing
    modes: np.ndarray         # (n_modes, n_nodes)
    nodes: np.ndarray
    weights: np.ndarray
    offset: int
    total_variance: float     # trace(W^1/2 C W^1/2)

    @property
    def n_modes(self):
        return self.eigenvalues.size

    def captured_fraction(self, m=None):
        if self.total_variance == 0:
            return 1.0
        lam = np.clip(self.eigenvalues[:m], 0.0, None)
        return float(lam.sum() / self.total_variance)


def covariance_matrix(nodes, cov):
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim == 1:
        nodes = nodes[:, None]
    dx = nodes[:, None, 0] - nodes[None, :, 0]
    arg = dx ** 2 / (2 * cov.lx ** 2)
    if nodes.shape[1] > 1:
        dy = nodes[:, None, 1] - nodes[None, :, 1]
        arg = arg + dy ** 2 / (2 * cov.ly ** 2)
    return cov.sigma ** 2 * np.exp(-arg)


def lumped_mass_weights(mesh, element_mask=None):
    """Row sums of the linear-element mass matrix (one weight per node)."""
    el = mesh.elements if element_mask is None else mesh.elements[element_mask]
    meas = mesh.measures if element_mask is None else mesh.measures[element_mask]
    nv = el.shape[1]
    return np.bincount(el.ravel(), np.repeat(meas / nv, nv), minlength=mesh.n_nodes)


def build_kl(nodes, quad_weights, cov, n_modes, offset=0, mean=1.0):
    """Keep the ``n_modes`` dominant covariance eigenpairs on ``nodes``."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim == 1:
        nodes = nodes[:, None]
    w = np.asarray(quad_weights, dtype=float)
    n = nodes.shape[0]
    if not 1 <= n_modes <= n:
        raise ValueError(f"n_modes must lie in [1, {n}]")
    if np.any(w <= 0):
        raise ValueError("quadrature weights must be positive")
    C = covariance_matrix(nodes, cov)
    sw = np.sqrt(w)
    K = sw[:, None] * C * sw[None, :]
    try:
        lam, V = sla.eigh(K, subset_by_index=[n - n_modes, n - 1])
    except (sla.LinAlgError, ValueError) as exc:
        raise EigSolveFailure(str(exc)) from exc
    order = np.argsort(lam)[::-1]
    lam, V = lam[order], V[:, order]
    modes = (V / sw[:, None]).T
    # fix the sign so that every mode has a nonnegative weighted mean
    signs = np.where(modes @ w < 0, -1.0, 1.0)
    modes = modes * signs[:, None]
    return KLExpansion(float(mean), lam, modes, nodes, w, int(offset), float(np.trace(K)))


def _sqrt_eigs(kl):
    lam = kl.eigenvalues
    scale = max(abs(lam[0]), 0.0) if lam.size else 0.0
    if np.any(lam < -NEG_TOL * max(scale, 1e-300)):
        raise NegativeEigenvalueUsed(f"retained eigenvalue {lam.min():.3e} is negative")
    return np.sqrt(np.clip(lam, 0.0, None))


def evaluate_field(kl, xi):
    """Nodal values ``mean + sum_i sqrt(gamma_i) b_i xi[offset + i]``."""
    xi = np.asarray(xi, dtype=float)
    block = xi[..., kl.offset:kl.offset + kl.n_modes]
    if block.shape[-1] != kl.n_modes:
        raise ValueError("parameter vector too short for this expansion")
    return kl.mean + (block * _sqrt_eigs(kl)) @ kl.modes


def as_affine_source(kl, space=None, drop_zero=True):
    """``[(ONE, mean field), (xi[offset+i], sqrt(gamma_i) b_i), ...]``.

    Modes with zero eigenvalue carry no variance and are skipped when
    ``drop_zero`` is set.
    """
    root = _sqrt_eigs(kl)
    terms = [(ONE, np.full(kl.modes.shape[1], kl.mean))]
    for i in range(kl.n_modes):
        if drop_zero and root[i] == 0:
            continue
        terms.append((Coordinate(kl.offset + i, space), root[i] * kl.modes[i]))
    return terms


def write_spectrum_csv(path, kl):
    with open(path, "w") as fh:
        fh.write("index,eigenvalue\n")
        for i, lam in enumerate(kl.eigenvalues, start=1):
            fh.write(f"{i},{float(lam)!r}\n")

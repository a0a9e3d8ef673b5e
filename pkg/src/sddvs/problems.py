"""The three benchmark problems, assembled and partitioned.

* ``ex1``: 1-D diffusion on [0, 1] split at x = 0.5, one truncated-normal
  parameter entering both the diffusivity and the source.
* ``ex2``: 2-D diffusion on [0, 100]^2 in three horizontal strips, one
  uniform parameter scaling the middle strip, point Dirichlet data at two
  corners.
* ``ex3``: 2-D convection-diffusion on the unit square split at x = 0.5,
  with a 34-dimensional parameter (two 16-mode KL sources and a random
  diffusivity).
"""
from dataclasses import dataclass

import numpy as np

from .coeffspace import ONE, ParameterSpace, TruncatedNormal, Uniform, product
from .fem import (BoundarySpec, CoefficientField, DirichletCondition, Piece, assemble_affine,
                  interval_mesh, label_elements, structured_tri_mesh)
from .partition import extract_blocks, partition_mesh
from .randomfield import CovarianceSpec, as_affine_source, build_kl, lumped_mass_weights

__all__ = ["Problem", "build_problem", "ex1", "ex2", "ex3", "DEFAULT_MESH", "FULL_MESH"]

DEFAULT_MESH = {"ex1": 200, "ex2": 40, "ex3": 20}
FULL_MESH = {"ex1": 1000, "ex2": 100, "ex3": 60}


@dataclass(frozen=True, eq=False)
class Problem:
    name: str
    mesh: object
    space: ParameterSpace
    regions: tuple
    op: object
    rhs: object
    partition: object
    blocks: tuple
    monitor: int            # position in the interface of the monitored dof
    extras: dict

    @property
    def dofs(self):
        return self.op.dofs

    def interface_nodes(self):
        return self.partition.free[self.partition.gamma]


def _finish(name, mesh, space, regions, diffusion, velocity, source, bc, monitor_xy, extras=None):
    labels = label_elements(mesh, regions)
    op, rhs = assemble_affine(mesh, diffusion, velocity, source, bc, groups=labels)
    part = partition_mesh(mesh, regions, op.dofs)
    blocks = tuple(extract_blocks(op, rhs, part, i) for i in range(len(regions)))
    gnodes = mesh.nodes[part.free[part.gamma]]
    monitor = int(np.argmin(np.linalg.norm(gnodes - np.asarray(monitor_xy), axis=1)))
    return Problem(name, mesh, space, tuple(regions), op, rhs, part, blocks, monitor, extras or {})


def ex1(n=DEFAULT_MESH["ex1"]):
    space = ParameterSpace.iid(TruncatedNormal(0.0, 1.0, -3.0, 3.0), 1, "ex1")
    xi = space.coord(0)
    mesh = interval_mesh(0.0, 1.0, n)
    left = lambda p: p[:, 0] <= 0.5
    right = lambda p: p[:, 0] > 0.5
    diffusion = CoefficientField(
        Piece(left, ((lambda p: p[:, 0], xi), (4.0, ONE))),
        Piece(right, ((lambda p: p[:, 0] + 1.0, ONE),)))
    source = CoefficientField(
        Piece(left, ((lambda p: np.cos(2 * np.pi * p[:, 0]), ONE),)),
        Piece(right, ((lambda p: p[:, 0], product(xi, xi)),)))
    bc = BoundarySpec(dirichlet=(DirichletCondition(mesh.boundary_nodes, 0.0),))
    return _finish("ex1", mesh, space, (left, right), diffusion, None, source, bc, (0.5,))


def ex2(n=DEFAULT_MESH["ex2"], mu=0.02):
    space = ParameterSpace.iid(Uniform(1.0, 4.0), 1, "ex2")
    xi = space.coord(0)
    mesh = structured_tri_mesh((0.0, 100.0), (0.0, 100.0), n, n)
    strips = (lambda p: p[:, 1] <= 30.0,
              lambda p: (p[:, 1] > 30.0) & (p[:, 1] <= 70.0),
              lambda p: p[:, 1] > 70.0)
    diffusion = CoefficientField(
        Piece(strips[0], ((80.0 / mu, ONE),)),
        Piece(strips[1], ((1.0 / mu, xi),)),
        Piece(strips[2], ((20.0 / mu, ONE),)))
    corner0 = np.flatnonzero(np.all(mesh.nodes == 0.0, axis=1))
    corner1 = np.flatnonzero(np.all(mesh.nodes == 100.0, axis=1))
    bc = BoundarySpec(dirichlet=(DirichletCondition(corner0, 20.0),
                                 DirichletCondition(corner1, 15.0)))
    return _finish("ex2", mesh, space, strips, diffusion, None, CoefficientField(), bc,
                   (50.0, 30.0))


EX3_KL = ({"lx": 0.5, "offset": 0}, {"lx": 0.05, "offset": 16})


def ex3(n=DEFAULT_MESH["ex3"], n_modes=16, sigma=0.1, ly=0.5):
    space = ParameterSpace.iid(Uniform(-1.0, 1.0), 34, "ex3")
    mesh = structured_tri_mesh((0.0, 1.0), (0.0, 1.0), n, n)
    halves = (lambda p: p[:, 0] <= 0.5, lambda p: p[:, 0] > 0.5)
    labels = label_elements(mesh, halves)
    pieces = []
    kls = []
    for i, spec in enumerate(EX3_KL):
        w = lumped_mass_weights(mesh, labels == i)
        nodes = np.flatnonzero(w > 0)
        kl = build_kl(mesh.nodes[nodes], w[nodes], CovarianceSpec(sigma, spec["lx"], ly),
                      n_modes, offset=spec["offset"], mean=1.0)
        kls.append(kl)
        terms = []
        for coeff, vals in as_affine_source(kl, space):
            full = np.zeros(mesh.n_nodes)
            full[nodes] = vals
            terms.append((full, coeff))
        pieces.append(Piece(halves[i], tuple(terms)))
    diffusion = CoefficientField(Piece(None, ((1.0, space.coord(32)),
                                              (lambda p: p[:, 1], space.coord(33)),
                                              (3.0, ONE))))
    velocity = CoefficientField(Piece(None, (((1.0, 1.0), ONE),)))
    bc = BoundarySpec(dirichlet=(DirichletCondition(mesh.boundary_nodes, 0.0),))
    return _finish("ex3", mesh, space, halves, diffusion, velocity, CoefficientField(*pieces), bc,
                   (0.5, 0.5), {"kl": tuple(kls)})


def build_problem(name, n=None):
    builders = {"ex1": ex1, "ex2": ex2, "ex3": ex3}
    if name not in builders:
        raise KeyError(f"unknown example {name!r}")
    return builders[name](DEFAULT_MESH[name] if n is None else n)

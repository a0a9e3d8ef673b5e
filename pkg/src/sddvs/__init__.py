"""Stochastic domain decomposition by greedy variable separation.

Affine parametric finite element systems are split into non-overlapping
subdomains; the interface Schur complement and condensed load are built
as separated (low-rank affine) expansions, the interface problem is
reduced with the same greedy separation, and interiors are recovered per
sample or, for single-term subdomain operators, in closed form.
"""
from .affine import AffineOperator, AffineVector, Term, merge_terms
from .coeffspace import (ONE, Constant, Coordinate, ParameterSpace, SampleSet, TruncatedNormal,
                         Uniform, draw_samples, evaluate, product, quotient)
from .errors import *  # noqa: F401,F403
from .experiments import ExperimentConfig, default_config, emit_sweep, run_experiment
from .fem import assemble_affine, interval_mesh, solve_global, structured_tri_mesh
from .metrics import l1_density_distance, pointwise_density, relative_mean_error
from .partition import extract_blocks, partition_mesh
from .problems import build_problem
from .randomfield import CovarianceSpec, build_kl
from .recovery import (build_separated_recovery, evaluate_recovery, recover_full,
                       recover_interior)
from .schur import (assemble_global, build_contribution, build_interface_rom, build_X,
                    evaluate_interface_rom, solve_interface_direct)
from .vscore import VsConfig, evaluate_solution, residual_norm, solve_vs

__version__ = "0.1.0"

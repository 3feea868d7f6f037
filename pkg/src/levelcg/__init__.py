"""Level-set coarse-graining of stochastically perturbed Hamiltonian systems.

Simulates the fast-slow double-well SDE, projects trajectories onto the
level-set graph, constructs the limiting biased diffusion on the graph
(Monte Carlo and Fokker-Planck), and checks convergence and the duality
inequality chain numerically.
"""

from .errors import LevelcgError
from .hamiltonian import DOUBLE_WELL, HARMONIC, PhasePoint, Potential, critical_points
from .levelset import (ABOVE, LEFT, RIGHT, GraphPoint, GridSpec, LevelGraph,
                       action, build_coefficients, build_graph, period, project)
from .sde import EnsemblePath, SdeConfig, integrate_path, simulate_ensemble
from .measures import BinSpec, GraphMeasure, GraphMeasurePath, pushforward, w1_tree
from .graphdyn import (GraphSdeConfig, gluing_weights, simulate_graph_ensemble,
                       solve_graph_fp)
from .duality import (FamilySpec, GraphTestFunction, apply_generator_composed,
                      inequality_chain_report, j_full, j_hat_eps, j_hat_zero,
                      make_test_family)
from .config import RunConfig, load_config

__version__ = "0.1.0"

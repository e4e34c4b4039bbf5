"""Distributed GAN training over communication graphs, where agents trade
generated samples instead of data or parameters, plus the analytical
machinery to solve for the induced equilibrium distributions."""

from .config import ARCHITECTURES, ExperimentConfig, parse_config, render_config
from .equilibrium import (
    DistVector,
    game_value,
    jsd,
    lambda_matrix,
    mixture,
    optimal_discriminator,
    point_mass,
    solve_equilibrium_direct,
    solve_equilibrium_jacobi,
)
from .errors import ConfigError, ConvergenceError, TrainingError
from .metrics import coverage, discriminator_balance, empirical_jsd, histogram
from .topology import (
    CommGraph,
    MixingWeights,
    edgeless_graph,
    proportional_weights,
    reachable_set,
    ring_graph,
    string_graph,
    uniform_weights,
)
from .training import TrainingReport, comm_cost, run_experiment

__version__ = "0.1.0"

__all__ = [
    "ARCHITECTURES",
    "CommGraph",
    "ConfigError",
    "ConvergenceError",
    "DistVector",
    "ExperimentConfig",
    "MixingWeights",
    "TrainingError",
    "TrainingReport",
    "comm_cost",
    "coverage",
    "discriminator_balance",
    "edgeless_graph",
    "empirical_jsd",
    "game_value",
    "histogram",
    "jsd",
    "lambda_matrix",
    "mixture",
    "optimal_discriminator",
    "parse_config",
    "point_mass",
    "proportional_weights",
    "reachable_set",
    "render_config",
    "ring_graph",
    "run_experiment",
    "solve_equilibrium_direct",
    "solve_equilibrium_jacobi",
    "string_graph",
    "uniform_weights",
    "__version__",
]

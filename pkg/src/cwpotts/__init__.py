"""Curie-Weiss Potts model with external field: exact finite-n laws, phase
structure, limit theorems and the random-cluster coupling."""

from .core import (
    CountVector,
    CriticalPoint,
    ModelParams,
    critical_field,
    critical_point_from_z,
    free_energy,
    free_energy_z,
    phase_boundaries,
    x_from_z,
)
from .exact import (
    CountLattice,
    ExactDistribution,
    ball_probability,
    brute_force_log_Z,
    exact_distribution,
    fluctuation_statistics,
    ks_distance,
)
from .limits import (
    StructuredMatrix,
    coexistence_probabilities,
    covariance_matrix,
    quadratic_form,
    quartic_law,
    structured_inverse,
    tricritical_V_covariance,
)
from .phase import MinimizerSet, Regime, find_global_minimizers, refine_local_minimizer
from .rcgraph import giant_component_probability, zrc_asymptotic, zrc_exact

__version__ = "0.1.0"

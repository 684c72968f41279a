"""Exact pseudo-mode reference dynamics for two qubits in a Lorentzian
environment, six perturbative master-equation propagators, and the error
bound / positivity machinery to rank them."""

from .bath import BathParams, bcf, cg_coeff, half_fourier, redfield_coeff, spectral_density
from .engine import Superoperator, Trajectory
from .masters import (GeneratorSpec, Method, cgme_generator, expz_map, propagate,
                      prwa_generator, qome_generator, rfe_generator)
from .pseudomode import (PseudoModeConfig, build_pseudomode, converge_truncation,
                         determine_tmax, reference_trajectory, steady_state)
from .analysis import (ErrorRecord, assess_point, error_bound, fit_scaling,
                       min_eigenvalue_track, observables, partial_deviation,
                       relative_error, tau_averaged_reference)
from .system import (SystemModel, SystemParams, build_model, cluster_frequencies,
                     interaction_picture_L, jump_decomposition)

__version__ = "0.1.0"

__all__ = [
    "BathParams", "SystemParams", "SystemModel", "PseudoModeConfig",
    "GeneratorSpec", "Method", "Superoperator", "Trajectory", "ErrorRecord",
    "spectral_density", "bcf", "half_fourier", "redfield_coeff", "cg_coeff",
    "build_model", "jump_decomposition", "interaction_picture_L",
    "cluster_frequencies", "build_pseudomode", "steady_state",
    "converge_truncation", "determine_tmax", "reference_trajectory",
    "rfe_generator", "qome_generator", "prwa_generator", "cgme_generator",
    "expz_map", "propagate", "partial_deviation", "error_bound",
    "relative_error", "min_eigenvalue_track", "tau_averaged_reference",
    "observables", "fit_scaling", "assess_point",
]

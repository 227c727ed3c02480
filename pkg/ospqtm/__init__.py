"""
ospqtm - thermodynamics of the integrable osp(1|2) spin chain
Quantum transfer matrix eigenvalues, Bethe ansatz roots, fusion hierarchy
and the nonlinear integral equations for the free energy and the
correlation length.
"""

__version__ = "1.0.0"

from .spectral import (OspQtmError, ParameterError, PoleProximityError, ModelParams,
                       BetheState, vacuum_state, phi, q_eval, box_eval, t1_eval)
from .bae import (BetheConvergenceError, SingularJacobianError, bae_residual, solve_newton,
                  solve_for_rank, continue_in_beta, classify_strings, symmetry_residuals)
from .fusion import (FusionIndex, Tableau, WindingError, enumerate_tableaux, t0_eval, dvf_eval,
                     y_eval, verify_functional_relation, find_zeros, real_axis_zeros)
from .qtm import (QtmSizeError, EigenSolverError, r_check_eval, build_qtm, top_eigenvalues,
                  hamiltonian, hamiltonian_free_energy)
from .tba import (TbaConfig, TbaSolution, TbaConvergenceError, BranchTrackingError,
                  solve_tba, solve_excited, free_energy, correlation_length)
from .config import ConfigError, RunConfig, load_config, build_config

__all__ = [
    # Errors
    'OspQtmError',
    'ParameterError',
    'PoleProximityError',
    'BetheConvergenceError',
    'SingularJacobianError',
    'WindingError',
    'QtmSizeError',
    'EigenSolverError',
    'TbaConvergenceError',
    'BranchTrackingError',
    'ConfigError',
    # Spectral core
    'ModelParams',
    'BetheState',
    'vacuum_state',
    'phi',
    'q_eval',
    'box_eval',
    't1_eval',
    # Bethe equations
    'bae_residual',
    'solve_newton',
    'solve_for_rank',
    'continue_in_beta',
    'classify_strings',
    'symmetry_residuals',
    # Fusion
    'FusionIndex',
    'Tableau',
    'enumerate_tableaux',
    't0_eval',
    'dvf_eval',
    'y_eval',
    'verify_functional_relation',
    'find_zeros',
    'real_axis_zeros',
    # Exact QTM
    'r_check_eval',
    'build_qtm',
    'top_eigenvalues',
    'hamiltonian',
    'hamiltonian_free_energy',
    # NLIE
    'TbaConfig',
    'TbaSolution',
    'solve_tba',
    'solve_excited',
    'free_energy',
    'correlation_length',
    # Configuration
    'RunConfig',
    'load_config',
    'build_config',
]

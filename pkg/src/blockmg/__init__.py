"""Symbol-based multigrid for block-Toeplitz and block-circulant linear
systems, with numerical verification of the two-grid and V-cycle
convergence conditions and degree-r Lagrangian FEM generators."""

from .errors import (ArgumentError, BlockmgError, ConfigurationError,
                     ConstructionError, DimensionError, NumericalError,
                     SingularMatrixError, SymbolZeroError, TrackingError)
from .symbol import (EigenCurves, MatrixTrigPolynomial, SymbolZero,
                     coarse_symbol, corner_set, corner_sum,
                     eigenvalue_functions, find_zero, max_coeff_difference,
                     read_symbol, symbol_sup_norm, tensor_symbol, theta_grid,
                     tracked_eigenpair, write_symbol)
from .structured import (BlockStructuredMatrix, GridTransfer,
                         assemble_circulant, assemble_toeplitz,
                         assemble_transfer, circulant_eigenvalues,
                         coarse_projection_norm, cutting_matrix,
                         cutting_operator, fourier_matrix, galerkin,
                         has_full_column_rank, read_coo,
                         toeplitz_coarse_defect, transfer_from_matrix,
                         write_coo)
from .mgsolve import (MultigridHierarchy, SmootherSpec, SolveResult,
                      richardson_omega_default, smooth, solve, tgm_step,
                      vcycle_step, write_residuals)
from .conditions import (CheckResult, ConditionReport, build_s,
                         check_condition_i, check_condition_ii,
                         check_condition_iii, check_fhat_properties,
                         check_vcycle_bound, full_report)
from .femgen import (FemProblem1D, KnotGrid, assemble_mass,
                     assemble_stiffness, build_fem_hierarchy,
                     build_fem_transfer, build_geometric_symbol,
                     build_linear_interp_symbol, lagrange_eval, mass_symbol,
                     stiffness_symbol)
from .multilevel import (TensorProblem, assemble_2d_problem,
                         build_2d_hierarchy, check_multilevel_conditions,
                         tensor_cutting, tensor_sum_symbol, tensor_transfer)

__version__ = "0.1.0"

"""Minimum relative-entropy projections on finite spaces, classical and Tsallis.

Computes the constrained minimizer of the Kullback-Leibler divergence and
of its nonextensive (Tsallis) generalization under three constraint
semantics, and numerically certifies the triangle ("Pythagorean")
equalities those minimizers satisfy.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateFeatureError,
    DegenerateSolutionError,
    EmptyFeasibleSetError,
    InfeasibleTargetError,
    PreconditionError,
    QDomainError,
    RelentError,
    SpaceMismatchError,
)
from .geometry import (
    GeometryReport,
    MatchingScan,
    bisect_scalar,
    check_thermodynamic_identities,
    line_family,
    matching_residuals_q,
    scan_expectation_matching_classical,
    triangle_residual,
    verify_classical_pythagoras,
    verify_nonextensive_pythagoras_normalized,
    verify_nonextensive_pythagoras_q,
)
from .measures import (
    ConstraintKind,
    Density,
    FeatureSet,
    FiniteSpace,
    MomentSpec,
    constraint_moments,
    has_support_violation,
    normalized_q_expectation,
    product_density,
    q_expectation,
    shannon_entropy,
    shannon_relative_entropy,
    tsallis_entropy,
    tsallis_relative_entropy,
)
from .projection import (
    SolveResult,
    brute_force_primal,
    partition_classical,
    partition_normalized,
    partition_q,
    solve,
    solve_classical,
    solve_tsallis_normalized,
    solve_tsallis_q,
)
from .qalgebra import (
    CLASSICAL_EPS,
    QIndex,
    q_exp,
    q_exp_by_limit,
    q_log,
    q_power_n,
    q_product,
    q_product_q_exp,
)

__all__ = [
    "__version__",
    "CLASSICAL_EPS",
    "ConfigError",
    "ConstraintKind",
    "ConvergenceError",
    "DegenerateFeatureError",
    "DegenerateSolutionError",
    "Density",
    "EmptyFeasibleSetError",
    "FeatureSet",
    "FiniteSpace",
    "GeometryReport",
    "InfeasibleTargetError",
    "MatchingScan",
    "MomentSpec",
    "PreconditionError",
    "QDomainError",
    "QIndex",
    "RelentError",
    "SolveResult",
    "SpaceMismatchError",
    "bisect_scalar",
    "brute_force_primal",
    "check_thermodynamic_identities",
    "constraint_moments",
    "has_support_violation",
    "line_family",
    "matching_residuals_q",
    "normalized_q_expectation",
    "partition_classical",
    "partition_normalized",
    "partition_q",
    "product_density",
    "q_exp",
    "q_exp_by_limit",
    "q_expectation",
    "q_log",
    "q_power_n",
    "q_product",
    "q_product_q_exp",
    "scan_expectation_matching_classical",
    "shannon_entropy",
    "shannon_relative_entropy",
    "solve",
    "solve_classical",
    "solve_tsallis_normalized",
    "solve_tsallis_q",
    "triangle_residual",
    "tsallis_entropy",
    "tsallis_relative_entropy",
    "verify_classical_pythagoras",
    "verify_nonextensive_pythagoras_normalized",
    "verify_nonextensive_pythagoras_q",
]

"""Exponentials of perturbed matrices ``D + eps B`` by splitting and squaring.

``D`` is structured (diagonal, block-oscillator or sparse) so that its
exponential and its commutators with dense matrices are cheap; only dense
products are counted as cost.
"""
from .errors import (
    DimensionMismatchError,
    IllConditionedFitError,
    NoFeasibleScalingError,
    SingularMatrixError,
    SplitExpmError,
    UnknownSchemeError,
    UnknownToleranceError,
    UnsupportedStructureError,
)
from .matrixcore import (
    BlockDiagonal2x2,
    BlockOscillator,
    CostTally,
    DiagonalOperator,
    GeneralSparse,
    PerturbedMatrix,
    commutator_powers,
    exp_structured,
    inverse_multiply,
    matmul,
    nested_commutator,
    one_norm,
)
from .padetaylor import (
    THETA_TABLE,
    expm_standard,
    pade,
    pade_coefficients,
    pade_r2,
    pade_r4,
    pade_r10,
    pade_r26,
    plan_standard,
    taylor_t16,
    theta_lookup,
)
from .splitcat import catalog, consistency_check, get_scheme, run_scheme, scheme_cost
from .errmodel import (
    CommutatorNorms,
    SelectionPlan,
    commutator_norm_table,
    epsilon_threshold,
    error_polynomial,
    choose_squarings,
    run_plan,
    select_method,
)
from .bench import (
    BUILTINS,
    ExperimentConfig,
    ResultRecord,
    empirical_order,
    gen_dissipation,
    gen_example2x2,
    gen_perturbation,
    gen_rotation,
    reference_expm,
    relative_error,
    run_experiment,
)

__version__ = "0.1.0"

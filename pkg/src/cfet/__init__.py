"""Commutator-free exponential time-propagation toolkit.

Symbolic machinery (free Lie algebra, collected exponent series, order
conditions), a registry of 2nd- to 8th-order propagation schemes,
matrix-exponential backends, a trajectory driver, benchmark models, and
a CSV-emitting command line.
"""

from .liealg import (
    BasisMismatchError,
    DegreeOverflowError,
    HallBasis,
    LieAlgebraError,
    LieElement,
    bracket,
    filter_relevant,
    rewrite_to_hall,
    tree_str,
)
from .magnus import (
    bch_compose,
    chi_error_term,
    magnus_expand,
    order_residuals,
    solve_4th_family,
    solve_6th_family,
    zrec_expand,
)
from .quad import QuadratureRule, StageWeights, gauss_rule, legendre_eval, stage_weights
from .schemes import (
    CfetScheme,
    Generator,
    SchemeError,
    StageOperator,
    dump_scheme,
    load_scheme,
    scheme_lookup,
    scheme_names,
    stage_exponents,
    step,
    step_counted,
    step_matrix,
)
from .expm import (
    BoundInapplicableError,
    ChebyshevBackend,
    DenseBackend,
    ExpmError,
    KrylovBackend,
    KrylovDiagnostics,
    SpectrumError,
    SU2Backend,
    TaylorBackend,
    chebyshev_expv,
    dense_expm,
    krylov_error_bound,
    krylov_expv,
    su2_exp,
)
from .stepper import (
    ErrorEstimate,
    StepPlan,
    StepperError,
    TrajectoryRecord,
    crossover_threshold,
    effective_error_constant,
    empirical_effective_constant,
    estimate_error_constant,
    frobenius_error,
    interaction_picture,
    propagate,
)
from . import models

__version__ = "0.1.0"

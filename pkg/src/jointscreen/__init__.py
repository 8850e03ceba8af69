"""Joint safe-screening tests for the nonnegative LASSO.

Safe screening certifies zeros of the solution from any feasible
primal/dual pair; the joint variants screen a whole region of atoms
with a single inner product.  See README.md for usage.
"""

from .core import (
    DimensionMismatchError,
    Dictionary,
    LambdaMaxUndefinedError,
    Observation,
    PrimalPoint,
    Problem,
    ZeroColumnError,
    dual_objective,
    lambda_max,
    lambda_max_abs,
    max_correlation,
    primal_objective,
    unit_normalize,
)
from .regions import (
    DegenerateDomeError,
    DomeRegion,
    SphereRegion,
    UnitVectorSet,
    concave_aux_g,
    dome_region_max,
    min_enclosing_dome,
    min_enclosing_sphere,
    sphere_region_max,
)
from .screening import (
    CenterNormError,
    DomeGateError,
    GroupIndex,
    GroupIndexSet,
    ScreenMask,
    build_group_index,
    delta_threshold,
    eps_threshold,
    joint_dome_test,
    joint_screen_all,
    joint_sphere_test,
    screen_by_dome_index,
    screen_by_sphere_index,
    standard_screen,
)
from .solver import (
    ConvergenceError,
    DivergenceError,
    DualPoint,
    InfeasibleDualError,
    NegativeGapError,
    SafeSphere,
    SolveResult,
    SolverState,
    dual_feasible_point,
    duality_gap,
    fista_step,
    gap_safe_sphere,
    initial_state,
    solve,
)
from .oracle import (
    OracleConfig,
    exhaustive_standard_screen,
    reference_solve,
    region_max_bruteforce,
)
from .harness import (
    DetectionGrid,
    ExperimentConfig,
    ExperimentResult,
    emit_csv,
    emit_heatmap,
    generate_clustered_dictionary,
    generate_observation,
    lambda_grid,
    load_detection_csv,
    run_experiment,
)

__version__ = "0.1.0"

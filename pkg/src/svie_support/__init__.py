"""Path-dependent stochastic Volterra equations: Euler solvers, Wong-Zakai
approximations along delayed interpolations, the deterministic support flow
and Girsanov reweighting, with a Monte Carlo harness and CLI."""

from .coeffs import (
    CoefficientSet,
    GeneralCoefficients,
    KernelSeparableCoefficients,
    builtin_examples,
    correction_rho,
    custom_setup,
    get_coefficients,
    girsanov_setup,
    remainder_R,
    support_setup,
)
from .engine import BLOWUP_THRESHOLD, BlowUpError
from .experiments import (
    ConvergenceReport,
    SupportReport,
    kc_constant,
    run_convergence_study,
    run_support_diagnostic,
    w_hat_constant,
)
from .funcalc import (
    EvaluationError,
    Functional,
    horizontal_derivative,
    second_vertical_derivative,
    vertical_derivative,
)
from .girsanov import (
    ShiftedDriver,
    density_terminal,
    reweighted_probability,
    shift_and_weight,
    solve_shifted_driver,
)
from .paths import DriverPath, GridPath, d_infty, hoelder_norm, sobolev_norm, stop_path, sup_norm
from .stats import MCEstimate, RateFit, fit_rate
from .timegrid import (
    GridError,
    Partition,
    PartitionSequence,
    TimeGrid,
    gamma,
    interpolate_Ln,
    make_dyadic_sequence,
    neighbors,
    slope_Ln,
)
from .volterra_det import (
    DRIVER_CAP,
    FlowResult,
    LatticeTooLarge,
    driver_lattice,
    flow_map,
    solve_support_vie,
    solve_support_vie_mild,
)
from .volterra_sde import (
    BrownianPath,
    CoupledSolutionPair,
    couple,
    sample_brownian,
    solve_general_vie,
    solve_sequence_vie,
    solve_svie,
    solve_svie_semimartingale,
)

__version__ = "0.1.0"

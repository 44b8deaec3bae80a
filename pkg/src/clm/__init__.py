"""Coupled local minimizers: an ensemble of gradient flows synchronized
through an augmented Lagrangian, with LP-scheduled coupling and a
target-law learning rate."""

from .baselines import (
    LocalMinResult,
    finite_diff_grad,
    multistart_descent,
    quasi_newton,
    steepest_descent,
)
from .core import (
    CLMError,
    ConfigurationError,
    EnsembleState,
    NumericalFailure,
    Problem,
    ScheduleParams,
    augmented_lagrangian,
    average_cost,
    clm_rhs,
    sync_residual,
)
from .integrate import (
    CLMConfig,
    IntegrationError,
    RunFailure,
    RunTrace,
    best_member,
    integrate_window,
    run_clm,
)
from .schedule import (
    ScheduleConfig,
    gamma_coefficients,
    renumber,
    schedule_eta,
    schedule_gamma,
)

__version__ = "0.1.0"

"""Averaging toolkit for the weakly forced small-oscillation double pendulum.

Workflow: parse a forcing pair (:mod:`pendavg.expr`), build a
:class:`~pendavg.model.PerturbationSpec` for one resonant mode, evaluate the
mean bifurcation pair and hunt its simple zeros (:mod:`pendavg.averaging`),
then confirm each predicted orbit by period-map shooting on the full forced
system (:mod:`pendavg.continuation`).  The ``pendavg`` CLI wires these into
reproducible CSV/JSON pipelines.
"""

from .constants import OMEGA1, OMEGA2, T1, T2
from .expr import EvalEnv, ExprDomainError, ExprSyntaxError, evaluate, format_expr, parse
from .model import (
    Mode,
    PerturbationSpec,
    PeriodicityError,
    PhysicalParams,
    Resonance,
    fundamental_matrix,
    inverse_modal_transform,
    modal_transform,
    reduce,
    unperturbed_orbit,
    vector_field_original,
)
from .averaging import (
    AveragedSystem,
    AveragedValues,
    AveragingError,
    AveragingProblem,
    QuadratureError,
    ZeroResult,
    antipodal_pairing,
    averaged_function,
    averaged_pair,
    find_zeros,
    mode1_averaged,
    mode2_averaged,
    pendulum_problem,
)
from .continuation import (
    IntegrationError,
    IntegratorConfig,
    PeriodicOrbit,
    ShootingError,
    integrate,
    predicted_initial_state,
    shoot_periodic,
    verify_zero,
)

__version__ = "0.1.0"

__all__ = [
    "OMEGA1",
    "OMEGA2",
    "T1",
    "T2",
    "EvalEnv",
    "ExprDomainError",
    "ExprSyntaxError",
    "evaluate",
    "format_expr",
    "parse",
    "Mode",
    "PerturbationSpec",
    "PeriodicityError",
    "PhysicalParams",
    "Resonance",
    "fundamental_matrix",
    "inverse_modal_transform",
    "modal_transform",
    "reduce",
    "unperturbed_orbit",
    "vector_field_original",
    "AveragedSystem",
    "AveragedValues",
    "AveragingError",
    "AveragingProblem",
    "QuadratureError",
    "ZeroResult",
    "antipodal_pairing",
    "averaged_function",
    "averaged_pair",
    "find_zeros",
    "mode1_averaged",
    "mode2_averaged",
    "pendulum_problem",
    "IntegrationError",
    "IntegratorConfig",
    "PeriodicOrbit",
    "ShootingError",
    "integrate",
    "predicted_initial_state",
    "shoot_periodic",
    "verify_zero",
]

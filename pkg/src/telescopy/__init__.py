"""Weak-measurement distillation and Fisher-information workbench for multi-telescope interferometry."""

__version__ = "0.1.0"

from .distillation import (  # noqa: E402
    DistillationYield,
    OptimizationReport,
    TauSchedule,
    Variant,
    ansatz_schedule,
    closed_form_m3,
    optimize_gamma,
    optimize_local_objective,
    yields,
)
from .fisher import (  # noqa: E402
    FisherMatrix,
    ParameterVector,
    fisher_closed_form,
    fisher_numeric,
    scheme_ratio,
)
from .povm import MeasurementSettings, Scheme, born_distribution, build_povm  # noqa: E402
from .state import CoherenceSet, StellarState, build_stellar_state  # noqa: E402

__all__ = [
    "CoherenceSet",
    "DistillationYield",
    "FisherMatrix",
    "MeasurementSettings",
    "OptimizationReport",
    "ParameterVector",
    "Scheme",
    "StellarState",
    "TauSchedule",
    "Variant",
    "ansatz_schedule",
    "born_distribution",
    "build_povm",
    "build_stellar_state",
    "closed_form_m3",
    "fisher_closed_form",
    "fisher_numeric",
    "optimize_gamma",
    "optimize_local_objective",
    "scheme_ratio",
    "yields",
]

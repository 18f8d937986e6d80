"""Separable-effects survival estimation toolkit.

Isolates the component effects of a composite exposure whose parts are
always observed together (an extreme positivity violation), via a
mediator-standardized plug-in estimator with Bayesian-bootstrap
inference, bias-parameter sensitivity analysis, a synthetic-data
experiment harness, and cohort pseudo-exposure preprocessing.
"""

from .bootstrap import BootstrapResult, bootstrap_effects, draw_weights
from .cox import (
    CoxFit,
    DesignSpec,
    StepFunction,
    breslow_baseline,
    cumhaz_at,
    fit_weighted_cox,
)
from .data_model import (
    Dataset,
    MediatorSchema,
    SubjectRecord,
    ValidationReport,
    load_dataset,
    load_schema,
    validate_dataset,
    write_dataset,
)
from .estimator import (
    CounterfactualRisk,
    CurveSet,
    EffectEstimates,
    effect_ratios,
    estimate_psi,
    estimate_psi01_extended,
    frontdoor_psi01_empirical,
    survival_curves,
)
from .glm import LogisticFit, fit_weighted_logistic, predict_prob
from .mediators import (
    MediatorJointModel,
    enumerate_joint,
    fit_mediator_model,
    joint_prob,
)
from .pseudo_exposure import (
    EligibilityTable,
    MonthAssignment,
    assign_pseudo_months,
)
from .sensitivity import (
    CrossingPoints,
    SensitivityCurve,
    adjusted_effect,
    crossing_points,
    sensitivity_curve,
)
from .simulation import (
    DgpConfig,
    SimulatedData,
    TrueEffects,
    generate_dataset,
    oracle_truths,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapResult", "bootstrap_effects", "draw_weights",
    "CoxFit", "DesignSpec", "StepFunction", "breslow_baseline", "cumhaz_at",
    "fit_weighted_cox",
    "Dataset", "MediatorSchema", "SubjectRecord", "ValidationReport",
    "load_dataset", "load_schema", "validate_dataset", "write_dataset",
    "CounterfactualRisk", "CurveSet", "EffectEstimates", "effect_ratios",
    "estimate_psi", "estimate_psi01_extended", "frontdoor_psi01_empirical",
    "survival_curves",
    "LogisticFit", "fit_weighted_logistic", "predict_prob",
    "MediatorJointModel", "enumerate_joint", "fit_mediator_model", "joint_prob",
    "EligibilityTable", "MonthAssignment", "assign_pseudo_months",
    "CrossingPoints", "SensitivityCurve", "adjusted_effect", "crossing_points",
    "sensitivity_curve",
    "DgpConfig", "SimulatedData", "TrueEffects", "generate_dataset",
    "oracle_truths", "run_experiment",
]

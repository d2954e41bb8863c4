"""Multi-stage (r,s)-regular design group testing."""

from rsgt.analytic import (
    PopulationModel,
    DurationWeights,
    binary_entropy,
    counting_bound,
    etm,
    expected_duration,
    expected_tests,
    group_negative_prob,
    rate,
    suspected_prob,
)
from rsgt.design import (
    INDIVIDUAL,
    DesignPlan,
    IndividualTesting,
    PresetId,
    StagePlan,
    instantiate_preset,
    parse_plan,
    validate_plan,
)
from rsgt.optimizer import OptimizationResult, OptimizationSpec, feasibility_threshold, optimize
from rsgt.simulator import (
    PopulationState,
    TrialOutcome,
    generate_population,
    replicate,
    run_trial,
    run_trial_with_assignment,
)

__version__ = "0.1.0"

__all__ = [
    "INDIVIDUAL",
    "DesignPlan",
    "DurationWeights",
    "IndividualTesting",
    "OptimizationResult",
    "OptimizationSpec",
    "PopulationModel",
    "PopulationState",
    "PresetId",
    "StagePlan",
    "TrialOutcome",
    "binary_entropy",
    "counting_bound",
    "etm",
    "expected_duration",
    "expected_tests",
    "feasibility_threshold",
    "generate_population",
    "group_negative_prob",
    "instantiate_preset",
    "optimize",
    "parse_plan",
    "rate",
    "replicate",
    "run_trial",
    "run_trial_with_assignment",
    "suspected_prob",
    "validate_plan",
]

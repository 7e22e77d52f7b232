"""Bounds and minimax-regret dose choice from limited dose-trial evidence."""

__version__ = "0.1.0"

from .decision import (
    Allocation,
    AllocationDecision,
    ClinicalDecision,
    allocation_mmr,
    allocation_mmr_grid,
    allocation_mmr_t2,
    allocation_worst_case_regret,
    clinical_mmr,
    pairwise_worst_case,
)
from .identification import (
    ConstraintSystem,
    Interval,
    Restrictions,
    bound_linear,
    bound_net_welfare,
    bound_outcome_prob,
    build_constraints,
    check_consistency,
    independence_bounds,
)
from .model import (
    CELLS,
    CostSpec,
    DoseGrid,
    OutcomeDistribution,
    ThresholdDistribution,
    TrialEvidence,
    WelfareSpec,
    expected_welfare,
    net_welfare_coefficients,
    outcome_of,
    push_forward,
)
from .trial import SubjectRecord, TrialDesign, as_if_decide, ingest, simulate_regret

__all__ = [
    "Allocation",
    "AllocationDecision",
    "ClinicalDecision",
    "allocation_mmr",
    "allocation_mmr_grid",
    "allocation_mmr_t2",
    "allocation_worst_case_regret",
    "clinical_mmr",
    "pairwise_worst_case",
    "ConstraintSystem",
    "Interval",
    "Restrictions",
    "bound_linear",
    "bound_net_welfare",
    "bound_outcome_prob",
    "build_constraints",
    "check_consistency",
    "independence_bounds",
    "CELLS",
    "CostSpec",
    "DoseGrid",
    "OutcomeDistribution",
    "ThresholdDistribution",
    "TrialEvidence",
    "WelfareSpec",
    "expected_welfare",
    "net_welfare_coefficients",
    "outcome_of",
    "push_forward",
    "SubjectRecord",
    "TrialDesign",
    "as_if_decide",
    "ingest",
    "simulate_regret",
]

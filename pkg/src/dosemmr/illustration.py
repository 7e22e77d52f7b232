"""Worked example with T = 2 and trial arms at doses 0 and 2.

The true threshold distribution puts no mass on ``t_e = 0`` and 1/12 on every
other cell.  Golden numbers are the published values; tolerances are the
acceptance tolerances of this package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decision import allocation_mmr_grid, allocation_mmr_t2, clinical_mmr
from .identification import Restrictions, bound_net_welfare, bound_outcome_prob, build_constraints
from .model import (
    CELLS,
    CostSpec,
    DoseGrid,
    ThresholdDistribution,
    TrialEvidence,
    WelfareSpec,
    expected_welfare,
    push_forward,
)

T = 2
GRID = DoseGrid(T)
WELFARE = (1.0, 0.25, 0.75, 0.0)
ARM_DOSES = (0, 2)


def true_q() -> ThresholdDistribution:
    m = np.zeros((T + 2, T + 2))
    m[:, 1:] = 1.0 / 12.0
    return ThresholdDistribution(m)


def evidence() -> TrialEvidence:
    q = true_q()
    return TrialEvidence([(t, push_forward(q, t)) for t in ARM_DOSES])


# name, cost vector
COST_SCENARIOS = (
    ("g=0", (0.0, 0.0, 0.0)),
    ("g=0.05t", (0.0, 0.05, 0.10)),
    ("g=0.1t", (0.0, 0.1, 0.2)),
    ("g=0.15t", (0.0, 0.15, 0.3)),
    ("g=(0,0,0.3)", (0.0, 0.0, 0.3)),
)

# p[d(t), e(t)] in cell order, as published
GOLDEN_OUTCOMES = {
    0: (0.25, 0.75, 0.0, 0.0),
    1: (0.333, 0.333, 0.167, 0.167),
    2: (0.25, 0.083, 0.5, 0.166),
}
GOLDEN_WELFARE = {0: 0.4375, 1: 0.542, 2: 0.6458}
GOLDEN_T1_BOUNDS = ((0.0, 0.75), (0.083, 0.75), (0.0, 0.5), (0.0, 0.67))
GOLDEN_OMEGA1 = (0.2708, 0.8125)
GOLDEN_DECISIONS = {
    # clinical dose, clinical MMR, allocation, allocation MMR
    "g=0": (2, 0.167, (0.0, 0.308, 0.692), 0.116),
    "g=0.05t": (2, 0.217, (0.0, 0.4, 0.6), 0.13),
    "g=0.1t": (2, 0.267, (0.0, 0.49, 0.51), 0.136),
    "g=0.15t": (0, 0.225, (0.59, 0.41, 0.0), 0.132),
    "g=(0,0,0.3)": (1, 0.167, (0.308, 0.692, 0.0), 0.115),
}

TOL_OUTCOME = 0.001
TOL_WELFARE = 0.001
TOL_CELL_BOUND = 0.005
TOL_OMEGA = 0.001
TOL_CLINICAL = 0.001
TOL_ALLOCATION = 0.002


@dataclass(frozen=True)
class Check:
    name: str
    expected: float
    actual: float
    tolerance: float
    uses_welfare: bool

    @property
    def passed(self) -> bool:
        return bool(abs(self.actual - self.expected) <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "expected": self.expected,
            "actual": self.actual,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def run_illustration(welfare=WELFARE, grid_resolution: int | None = None) -> list[Check]:
    """Recompute every published number; ``welfare`` may be overridden for testing."""
    w = WelfareSpec(welfare)
    q = true_q()
    checks = []
    for t, expected in GOLDEN_OUTCOMES.items():
        p = push_forward(q, t)
        for cell, exp, act in zip(CELLS, expected, p.p):
            checks.append(Check(f"p[d({t}),e({t})]={cell}", exp, float(act), TOL_OUTCOME, False))
    for t, exp in GOLDEN_WELFARE.items():
        act = expected_welfare(push_forward(q, t), w)
        checks.append(Check(f"E w at t={t}", exp, act, TOL_WELFARE, True))

    cs = build_constraints(evidence(), Restrictions(), GRID)
    for cell, (lo, hi) in zip(CELLS, GOLDEN_T1_BOUNDS):
        iv = bound_outcome_prob(cs, 1, cell)
        checks.append(Check(f"t=1 cell {cell} lower", lo, iv.lo, TOL_CELL_BOUND, False))
        checks.append(Check(f"t=1 cell {cell} upper", hi, iv.hi, TOL_CELL_BOUND, False))
    om1 = bound_net_welfare(cs, 1, w, CostSpec.zero(T))
    checks.append(Check("omega_1 lower", GOLDEN_OMEGA1[0], om1.lo, TOL_OMEGA, True))
    checks.append(Check("omega_1 upper", GOLDEN_OMEGA1[1], om1.hi, TOL_OMEGA, True))

    for name, cost in COST_SCENARIOS:
        g = CostSpec(cost)
        dose, value, alloc, alloc_value = GOLDEN_DECISIONS[name]
        clin = clinical_mmr(cs, w, g)
        checks.append(Check(f"{name} clinical dose", dose, clin.chosen_dose, 0.0, True))
        checks.append(Check(f"{name} clinical MMR", value, clin.mmr_value, TOL_CLINICAL, True))
        omega = [bound_net_welfare(cs, t, w, g) for t in range(T + 1)]
        dec = allocation_mmr_t2(omega[0].lo, omega[2].lo, omega[1], cs, w, g)
        if grid_resolution:
            dec = allocation_mmr_grid(cs, w, g, grid_resolution)
        for t, (exp, act) in enumerate(zip(alloc, dec.allocation.delta)):
            checks.append(Check(f"{name} allocation[{t}]", exp, float(act), TOL_ALLOCATION, True))
        checks.append(Check(f"{name} allocation MMR", alloc_value, dec.mmr_value, TOL_ALLOCATION, True))
    return checks

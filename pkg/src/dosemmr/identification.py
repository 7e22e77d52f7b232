"""Identification region of the threshold distribution and sharp bounds over it.

The region is the polytope of non-negative ``(T+2) x (T+2)`` mass functions
whose quadrant sums reproduce every observed trial arm, optionally cut down
by restriction rows.  Any linear functional of ``q`` is bounded by two LPs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np

from . import linprog
from .model import (
    CELLS,
    CostSpec,
    DoseGrid,
    ModelError,
    ThresholdDistribution,
    TrialEvidence,
    WelfareSpec,
    cell_index,
    net_welfare_coefficients,
    quadrant_masks,
)

FACTOR_TOL = 1e-6


class IdentificationError(ValueError):
    pass


class UnsupportedRestriction(IdentificationError):
    pass


class InconsistentEvidence(IdentificationError):
    """The evidence and restrictions admit no threshold distribution."""

    def __init__(self, message, certificate=None, violations=()):
        super().__init__(message)
        self.certificate = certificate
        self.violations = tuple(violations)


class RestrictionRefuted(IdentificationError):
    def __init__(self, arm_dose, deviation):
        super().__init__(
            f"independence refuted: arm at dose {arm_dose} deviates from the product "
            f"of its marginals by {deviation:.3g}"
        )
        self.arm_dose = arm_dose
        self.deviation = deviation


@dataclass(frozen=True)
class Restrictions:
    no_ae_at_zero: bool = False
    concurrent_thresholds: bool = False
    independence: bool = False

    NAMES = ("no_ae_at_zero", "concurrent_thresholds", "independence")

    def __post_init__(self):
        if self.independence and self.concurrent_thresholds:
            raise UnsupportedRestriction(
                "independence and concurrent thresholds cannot be combined"
            )

    @classmethod
    def from_names(cls, names) -> "Restrictions":
        names = list(names)
        unknown = set(names) - set(cls.NAMES)
        if unknown:
            raise UnsupportedRestriction(f"unknown restriction(s): {sorted(unknown)}")
        return cls(**{n: True for n in names})

    @property
    def names(self) -> list[str]:
        return [n for n in self.NAMES if getattr(self, n)]


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi + 1e-9:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x, tol=1e-9) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def shift(self, delta) -> "Interval":
        return Interval(self.lo + delta, self.hi + delta)

    def as_tuple(self) -> tuple[float, float]:
        return (self.lo, self.hi)


@dataclass(frozen=True)
class ConstraintSystem:
    """Equality rows over the flattened mass ``q[h * (T+2) + i]``."""

    T: int
    matrix: np.ndarray
    rhs: np.ndarray
    provenance: tuple[str, ...]
    evidence: TrialEvidence
    restrictions: Restrictions = field(default_factory=Restrictions)

    @property
    def n_vars(self) -> int:
        return (self.T + 2) ** 2

    def column(self, h: int, i: int) -> int:
        return h * (self.T + 2) + i

    @cached_property
    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.matrix))

    @cached_property
    def feasibility(self):
        return linprog.check_feasible(self.matrix, self.rhs)

    @property
    def feasible(self) -> bool:
        return isinstance(self.feasibility, linprog.Feasible)

    def contains(self, q: ThresholdDistribution, tol: float = 1e-8) -> bool:
        x = q.mass.ravel()
        return bool(np.abs(self.matrix @ x - self.rhs).max() <= tol)

    def require_feasible(self) -> None:
        if not self.feasible:
            raise InconsistentEvidence(
                "trial evidence and restrictions admit no threshold distribution",
                certificate=self.feasibility.certificate,
                violations=necessary_condition_violations(self.evidence),
            )


def build_constraints(
    evidence: TrialEvidence,
    restrictions: Restrictions | None = None,
    grid: DoseGrid | None = None,
) -> ConstraintSystem:
    """Equality system whose non-negative solutions form the identification region."""
    restrictions = restrictions or Restrictions()
    if grid is None:
        raise ModelError("a DoseGrid is required")
    if restrictions.independence:
        raise UnsupportedRestriction(
            "independence is bilinear in q; use independence_bounds instead"
        )
    evidence.validate(grid)
    T = grid.T
    n = (T + 2) ** 2
    rows, rhs, tags = [np.ones(n)], [1.0], ["total-probability"]
    for k, arm in enumerate(evidence.arms):
        masks = quadrant_masks(T, arm.dose).reshape(4, n).astype(float)
        for c, cell in enumerate(CELLS):
            rows.append(masks[c])
            rhs.append(float(arm.outcomes.p[c]))
            tags.append(f"arm {k} (dose {arm.dose}) cell {cell}")
    r_rows, r_tags = restriction_rows(T, restrictions)
    rows.extend(r_rows)
    rhs.extend([0.0] * len(r_rows))
    tags.extend(r_tags)
    matrix = np.vstack(rows)
    matrix.setflags(write=False)
    rhs_arr = np.array(rhs)
    rhs_arr.setflags(write=False)
    return ConstraintSystem(T, matrix, rhs_arr, tuple(tags), evidence, restrictions)


def restriction_rows(T: int, restrictions: Restrictions) -> tuple[list[np.ndarray], list[str]]:
    """Rows ``q(h, i) = 0`` imposed by the linear restrictions."""
    n = (T + 2) ** 2
    cells = []
    if restrictions.no_ae_at_zero:
        cells += [(h, 0, f"no_ae_at_zero q({h},0)") for h in range(T + 2)]
    if restrictions.concurrent_thresholds:
        cells += [
            (h, i, f"concurrent_thresholds q({h},{i})")
            for h in range(T + 2)
            for i in range(T + 2)
            if h != i
        ]
    rows, tags = [], []
    for h, i, tag in cells:
        r = np.zeros(n)
        r[h * (T + 2) + i] = 1.0
        rows.append(r)
        tags.append(tag)
    return rows, tags


def necessary_condition_violations(evidence: TrialEvidence, tol: float = 1e-9) -> list[str]:
    """Cheap monotonicity checks across arms sorted by dose."""
    out = []
    checks = (
        ("P[d=1] nonincreasing", lambda p: p[1] + p[3], -1),
        ("P[e=1] nondecreasing", lambda p: p[2] + p[3], 1),
        ("P[(0,1)] nondecreasing", lambda p: p[2], 1),
        ("P[(1,0)] nonincreasing", lambda p: p[1], -1),
    )
    for a, b in zip(evidence.arms, evidence.arms[1:]):
        for label, f, direction in checks:
            va, vb = f(a.outcomes.p), f(b.outcomes.p)
            if direction * (vb - va) < -tol:
                out.append(
                    f"{label}: {va:.6g} at dose {a.dose} vs {vb:.6g} at dose {b.dose}"
                )
    return out


@dataclass(frozen=True)
class Consistent:
    witness: ThresholdDistribution


@dataclass(frozen=True)
class Inconsistent:
    certificate: np.ndarray | None
    violated_necessary_conditions: tuple[str, ...]


ConsistencyVerdict = Union[Consistent, Inconsistent]


def check_consistency(
    evidence: TrialEvidence,
    restrictions: Restrictions | None = None,
    grid: DoseGrid | None = None,
) -> ConsistencyVerdict:
    violations = necessary_condition_violations(evidence)
    cs = build_constraints(evidence, restrictions, grid)
    verdict = cs.feasibility
    if isinstance(verdict, linprog.Infeasible):
        return Inconsistent(verdict.certificate, tuple(violations))
    T = cs.T
    witness = verdict.point.reshape(T + 2, T + 2)
    return Consistent(ThresholdDistribution(witness / witness.sum()))


def bound_linear(cs: ConstraintSystem, coefficients) -> Interval:
    """Sharp ``[min, max]`` of ``sum(coefficients * q)`` over the region."""
    cs.require_feasible()
    c = np.asarray(coefficients, dtype=float).ravel()
    if c.size != cs.n_vars:
        raise ModelError(f"coefficients need {cs.n_vars} entries, got {c.size}")
    hi = linprog.maximize(c, cs.matrix, cs.rhs)
    lo = linprog.minimize(c, cs.matrix, cs.rhs)
    for out in (hi, lo):
        if not out.optimal:
            raise linprog.NumericalFailure(f"bounded LP reported {out.status.value}")
    return Interval(lo.value, max(hi.value, lo.value))


def bound_outcome_prob(cs: ConstraintSystem, t: int, cell) -> Interval:
    DoseGrid(cs.T).check_dose(t)
    mask = quadrant_masks(cs.T, t)[cell_index(cell)]
    return bound_linear(cs, mask.astype(float))


def bound_net_welfare(cs: ConstraintSystem, t: int, w: WelfareSpec, g: CostSpec) -> Interval:
    if g.T != cs.T:
        raise ModelError(f"cost has {g.T + 1} doses, system has {cs.T + 1}")
    coef, offset = net_welfare_coefficients(t, w, g)
    return bound_linear(cs, coef).shift(offset)


# --------------------------------------------------------------------------
# Independent thresholds
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IndependenceBounds:
    disease: Interval
    adverse: Interval
    welfare: Interval


def check_factorization(evidence: TrialEvidence, tol: float = FACTOR_TOL) -> None:
    worst = (None, 0.0)
    for arm in evidence.arms:
        p = arm.outcomes.p
        pd, pe = arm.outcomes.disease, arm.outcomes.adverse
        product = np.array([(1 - pd) * (1 - pe), pd * (1 - pe), (1 - pd) * pe, pd * pe])
        dev = float(np.abs(p - product).max())
        if dev > worst[1]:
            worst = (arm.dose, dev)
    if worst[1] > tol:
        raise RestrictionRefuted(*worst)


def _factorized_welfare(pd, pe, w):
    return (
        w[0] * (1 - pd) * (1 - pe)
        + w[1] * pd * (1 - pe)
        + w[2] * (1 - pd) * pe
        + w[3] * pd * pe
    )


def independence_bounds(
    evidence: TrialEvidence, grid: DoseGrid, t: int, w: WelfareSpec, g: CostSpec
) -> IndependenceBounds:
    """Bounds at dose ``t`` when disease and AE thresholds are independent.

    Marginal bounds come from monotonicity between the neighbouring arms.
    Welfare is bilinear in the two marginals, so its extremes sit at the
    corners of the marginal rectangle.
    """
    evidence.validate(grid)
    grid.check_dose(t)
    check_factorization(evidence)
    arm = evidence.arm_at(t)
    if arm is not None:
        pd_iv = Interval(arm.outcomes.disease, arm.outcomes.disease)
        pe_iv = Interval(arm.outcomes.adverse, arm.outcomes.adverse)
    else:
        below = [a for a in evidence.arms if a.dose < t]
        above = [a for a in evidence.arms if a.dose > t]
        # P[d=1] falls with dose, P[e=1] rises
        d_hi = below[-1].outcomes.disease if below else 1.0
        d_lo = above[0].outcomes.disease if above else 0.0
        e_lo = below[-1].outcomes.adverse if below else 0.0
        e_hi = above[0].outcomes.adverse if above else 1.0
        pd_iv = Interval(d_lo, d_hi)
        pe_iv = Interval(e_lo, e_hi)
    corners = [
        _factorized_welfare(pd, pe, w.w)
        for pd in (pd_iv.lo, pd_iv.hi)
        for pe in (pe_iv.lo, pe_iv.hi)
    ]
    welfare = Interval(min(corners) - g[t], max(corners) - g[t])
    return IndependenceBounds(pd_iv, pe_iv, welfare)

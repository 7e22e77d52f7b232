"""Minimax-regret dose choice for a single patient and for a population.

Worst-case regret of choosing ``c`` against alternative ``d`` is one LP over
the identification region.  A planner's allocation ``delta`` is scored by
``max_d max_q [omega_d(q) - delta @ omega(q)]``: for a fixed state the best
response is always a pure dose, so the outer max only needs the ``T + 1``
vertices of the simplex.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, linprog
from .identification import ConstraintSystem, Interval, bound_net_welfare
from .model import CostSpec, ModelError, WelfareSpec, net_welfare_coefficients

log = logging.getLogger(__name__)

REGRET_TOL = 1e-9
# Grid values closer than this count as ties.
TIE_TOL = 1e-12
DEFAULT_BUDGET = 2_000_000


class DecisionError(ValueError):
    pass


class GridBudgetExceeded(DecisionError):
    def __init__(self, count, budget, resolution):
        super().__init__(
            f"allocation grid with M={resolution} has {count} points, over the budget of "
            f"{budget}; use a smaller M or coarse-to-fine refinement"
        )
        self.count = count
        self.budget = budget


@dataclass(frozen=True)
class Allocation:
    delta: np.ndarray

    def __init__(self, delta):
        arr = np.array(delta, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise ModelError(f"allocation needs at least two doses, got {delta!r}")
        if arr.min() < -1e-12 or abs(arr.sum() - 1.0) > 1e-9:
            raise ModelError(f"allocation must lie in the unit simplex, got {arr}")
        arr = np.clip(arr, 0.0, None)
        arr.setflags(write=False)
        object.__setattr__(self, "delta", arr)

    @classmethod
    def pure(cls, T: int, dose: int) -> "Allocation":
        d = np.zeros(T + 1)
        d[dose] = 1.0
        return cls(d)

    def __len__(self):
        return self.delta.size


@dataclass(frozen=True)
class ClinicalDecision:
    chosen_dose: int
    mmr_value: float
    per_dose_max_regret: np.ndarray
    per_pair_worst_case: np.ndarray
    raw_per_dose: np.ndarray = field(repr=False)
    lp_solves: int = 0


@dataclass(frozen=True)
class AllocationDecision:
    allocation: Allocation
    mmr_value: float
    grid_step: float
    method: str
    raw_value: float = 0.0
    lp_solves: int = 0
    grid_points: int = 0


def _objective_pair(cs, c, d, w, g):
    """Coefficients and constant of ``omega_d - omega_c`` over the flattened q."""
    cd, od = net_welfare_coefficients(d, w, g)
    cc, oc = net_welfare_coefficients(c, w, g)
    return (cd - cc).ravel(), od - oc


def _maximize_over_region(cs: ConstraintSystem, coef) -> linprog.LpOutcome:
    out = linprog.maximize(coef, cs.matrix, cs.rhs)
    if not out.optimal:
        raise linprog.NumericalFailure(f"regret LP reported {out.status.value}")
    return out


def _check_inputs(cs, w, g):
    cs.require_feasible()
    if g.T != cs.T:
        raise ModelError(f"cost has {g.T + 1} doses, system has {cs.T + 1}")


def pairwise_worst_case(cs: ConstraintSystem, c: int, d: int, w: WelfareSpec, g: CostSpec) -> float:
    """``max_q [omega_d(q) - omega_c(q)]`` over the identification region."""
    _check_inputs(cs, w, g)
    if c == d:
        return 0.0
    coef, const = _objective_pair(cs, c, d, w, g)
    return _maximize_over_region(cs, coef).value + const


def clinical_mmr(cs: ConstraintSystem, w: WelfareSpec, g: CostSpec) -> ClinicalDecision:
    """Single dose with the smallest worst-case regret; ties go to the lowest dose."""
    _check_inputs(cs, w, g)
    n = cs.T + 1
    pair = np.zeros((n, n))
    for c in range(n):
        for d in range(n):
            if c != d:
                pair[c, d] = pairwise_worst_case(cs, c, d, w, g)
    raw = pair.max(axis=1)
    regret = np.maximum(raw, 0.0)
    if raw.min() < -REGRET_TOL:
        log.warning("negative raw regret %.3g clamped to 0", raw.min())
    best = regret.min()
    # lowest dose among values tied to rounding
    chosen = int(np.flatnonzero(regret <= best + TIE_TOL)[0])
    return ClinicalDecision(chosen, float(regret[chosen]), regret, pair, raw, n * (n - 1))


def _allocation_cuts(cs, delta, w, g):
    """Raw worst-case regret of ``delta`` plus the net-welfare vectors of the maximizers."""
    n = cs.T + 1
    coefs = np.stack([net_welfare_coefficients(t, w, g)[0].ravel() for t in range(n)])
    offsets = -g.g
    mixed = delta @ coefs
    mixed_off = float(delta @ offsets)
    worst = -np.inf
    cuts = []
    for d in range(n):
        out = _maximize_over_region(cs, coefs[d] - mixed)
        worst = max(worst, out.value + offsets[d] - mixed_off)
        cuts.append(coefs @ out.point + offsets)
    return worst, np.array(cuts)


def allocation_worst_case_regret(
    cs: ConstraintSystem, delta, w: WelfareSpec, g: CostSpec
) -> float:
    """Maximum regret of allocation ``delta``, from ``T + 1`` LPs, clamped at 0."""
    _check_inputs(cs, w, g)
    if not isinstance(delta, Allocation):
        delta = Allocation(delta)
    if len(delta) != cs.T + 1:
        raise ModelError(f"allocation has {len(delta)} entries, need {cs.T + 1}")
    raw, _ = _allocation_cuts(cs, delta.delta, w, g)
    return max(raw, 0.0)


def _grid_search(cs, w, g, resolution, lo, hi, cuts, budget):
    """Exact minimizer of worst-case regret over a (box-restricted) grid.

    Lower envelopes from accumulated cuts rank all grid points at once; the
    incumbent is then checked with LPs and any new maximizers become cuts.
    When the LP value matches the envelope, no other point can beat it.
    """
    count = _kernels.count_compositions(resolution, lo, hi)
    if count > budget:
        raise GridBudgetExceeded(count, budget, resolution)
    points = _kernels.compositions(resolution, lo, hi) / resolution
    lp_solves = 0
    while True:
        env = _kernels.regret_envelope(points, cuts)
        best = env.min()
        idx = int(np.flatnonzero(env <= best + TIE_TOL)[0])
        raw, new_cuts = _allocation_cuts(cs, points[idx], w, g)
        lp_solves += cs.T + 1
        cuts = np.vstack([cuts, new_cuts])
        if raw <= env[idx] + TIE_TOL:
            return points[idx], raw, cuts, lp_solves, count


def allocation_mmr_grid(
    cs: ConstraintSystem,
    w: WelfareSpec,
    g: CostSpec,
    resolution: int = 100,
    refine: bool = False,
    budget: int = DEFAULT_BUDGET,
) -> AllocationDecision:
    """MMR allocation over allocations whose shares are multiples of ``1/resolution``.

    With ``refine`` a coarse pass at ``M = 20`` is followed by a pass at
    ``M = 10 * 20`` restricted to a box of half-width ``2/20`` around the
    coarse incumbent; ``resolution`` is then ignored.
    """
    _check_inputs(cs, w, g)
    if int(resolution) != resolution or resolution < 1:
        raise DecisionError(f"grid resolution must be a positive integer, got {resolution!r}")
    n = cs.T + 1
    # seed cuts from the pure doses
    cuts = np.empty((0, n))
    lp_solves = 0
    for dose in range(n):
        _, c = _allocation_cuts(cs, Allocation.pure(cs.T, dose).delta, w, g)
        cuts = np.vstack([cuts, c])
        lp_solves += n
    if refine:
        coarse, fine = 20, 200
        zeros, full = np.zeros(n, dtype=np.int64), np.full(n, coarse, dtype=np.int64)
        point, _, cuts, k, count = _grid_search(cs, w, g, coarse, zeros, full, cuts, budget)
        lp_solves += k
        centre = np.rint(point * fine).astype(np.int64)
        width = 2 * fine // coarse
        lo = np.maximum(centre - width, 0)
        hi = np.minimum(centre + width, fine)
        point, raw, cuts, k, count2 = _grid_search(cs, w, g, fine, lo, hi, cuts, budget)
        lp_solves += k
        step, count = 1.0 / fine, count + count2
    else:
        resolution = int(resolution)
        zeros = np.zeros(n, dtype=np.int64)
        full = np.full(n, resolution, dtype=np.int64)
        point, raw, cuts, k, count = _grid_search(cs, w, g, resolution, zeros, full, cuts, budget)
        lp_solves += k
        step = 1.0 / resolution
    return AllocationDecision(
        Allocation(point), max(raw, 0.0), step, "grid", raw, lp_solves, count
    )


def _t2_regret(delta, omega0, omega2, omega1):
    """Worst-case regret when only the dose-1 welfare is unknown."""
    worst = -np.inf
    for w1 in (omega1.lo, omega1.hi):
        omega = np.array([omega0, w1, omega2])
        worst = max(worst, omega.max() - delta @ omega)
    return worst


def allocation_mmr_t2(
    omega0: float,
    omega2: float,
    omega1: Interval,
    cs: ConstraintSystem | None = None,
    w: WelfareSpec | None = None,
    g: CostSpec | None = None,
) -> AllocationDecision:
    """Closed-form MMR allocation over doses 0, 1, 2 when only dose 1 is ambiguous.

    When ``cs``, ``w`` and ``g`` are given the reported value is recomputed by
    LP; otherwise it is evaluated over the two endpoints of ``omega1`` (the
    regret is a maximum of functions linear in the dose-1 welfare).
    """
    values = np.array([omega0, omega2, omega1.lo, omega1.hi], dtype=float)
    if not np.all(np.isfinite(values)) or omega1.lo > omega1.hi:
        raise DecisionError("T=2 rule needs finite values and a valid interval")
    lo, hi = omega1.lo, omega1.hi
    top = max(omega0, omega2)
    top_dose = 0 if omega0 >= omega2 else 2
    delta = np.zeros(3)
    if lo >= top:
        delta[1] = 1.0
        closed = 0.0
    elif hi <= top:
        delta[top_dose] = 1.0
        closed = 0.0
    else:
        share1 = (hi - top) / (hi - lo)
        delta[1] = share1
        delta[top_dose] = (top - lo) / (hi - lo)
        closed = (hi - top) * (top - lo) / (hi - lo)
    # the two shares are computed separately; renormalize rounding only
    delta /= delta.sum()
    if cs is not None:
        if w is None or g is None:
            raise DecisionError("welfare and cost are required with a constraint system")
        raw, _ = _allocation_cuts(cs, delta, w, g)
        lp_solves = 3
    else:
        raw = _t2_regret(delta, omega0, omega2, omega1)
        lp_solves = 0
    scale = max(1.0, float(np.abs(values).max()))
    if abs(raw - closed) > 1e-7 * scale:
        raise AssertionError(
            f"T=2 regret {raw!r} disagrees with the closed form {closed!r}"
        )
    return AllocationDecision(Allocation(delta), max(raw, 0.0), 0.0, "analytical_t2", raw, lp_solves)


def t2_applicable(cs: ConstraintSystem) -> bool:
    """True when doses 0 and 2 of a T=2 problem are both trial arms."""
    return cs.T == 2 and {0, 2} <= set(cs.evidence.doses)


def allocation_mmr(
    cs: ConstraintSystem,
    w: WelfareSpec,
    g: CostSpec,
    resolution: int = 100,
    refine: bool = False,
    budget: int = DEFAULT_BUDGET,
) -> AllocationDecision:
    """Analytical rule when it applies, otherwise the grid."""
    if t2_applicable(cs):
        omega = [bound_net_welfare(cs, t, w, g) for t in range(3)]
        return allocation_mmr_t2(omega[0].lo, omega[2].lo, omega[1], cs, w, g)
    return allocation_mmr_grid(cs, w, g, resolution, refine, budget)

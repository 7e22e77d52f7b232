"""Threshold-dose model: domain types and the linear maps between them.

A patient is described by two threshold doses.  ``t_d`` is the lowest dose at
which the disease is prevented and ``t_e`` the lowest dose at which an adverse
effect (AE) occurs; the value ``T + 1`` means "never".  Population
uncertainty lives in the joint mass function ``q(t_d, t_e)`` on
``{0..T+1}^2``, and every dose-indexed outcome distribution is a quadrant sum
of it.

Outcome cells are always ordered ``(0,0), (1,0), (0,1), (1,1)`` where the
pair is ``(d, e)``: disease indicator then AE indicator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

PROB_TOL = 1e-9

CELLS: tuple[tuple[int, int], ...] = ((0, 0), (1, 0), (0, 1), (1, 1))
CELL_INDEX = {cell: k for k, cell in enumerate(CELLS)}


class ModelError(ValueError):
    """Invalid argument to a model constructor or operation."""


def cell_index(cell) -> int:
    try:
        return CELL_INDEX[tuple(int(v) for v in cell)]
    except (KeyError, TypeError, ValueError):
        raise ModelError(f"not an outcome cell: {cell!r}") from None


def _as_probabilities(values, shape, what, renormalize):
    arr = np.array(values, dtype=float)
    if arr.shape != shape:
        raise ModelError(f"{what} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{what} has non-finite entries")
    if arr.min() < -PROB_TOL:
        raise ModelError(f"{what} has a negative entry {arr.min():.3g}")
    arr = np.clip(arr, 0.0, None)
    total = arr.sum()
    if renormalize:
        if total <= 0:
            raise ModelError(f"{what} has zero total mass")
        arr = arr / total
    elif abs(total - 1.0) > PROB_TOL:
        raise ModelError(f"{what} sums to {total!r}, not 1")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DoseGrid:
    """Integer doses ``0..T``; thresholds range over ``0..T+1``."""

    T: int

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 1:
            raise ModelError(f"T must be an integer >= 1, got {self.T!r}")
        object.__setattr__(self, "T", int(self.T))

    @property
    def doses(self) -> range:
        return range(self.T + 1)

    @property
    def n_thresholds(self) -> int:
        return self.T + 2

    @property
    def never(self) -> int:
        return self.T + 1

    def check_dose(self, t) -> int:
        if int(t) != t or not 0 <= t <= self.T:
            raise ModelError(f"dose {t!r} outside 0..{self.T}")
        return int(t)

    def check_threshold(self, h) -> int:
        if int(h) != h or not 0 <= h <= self.T + 1:
            raise ModelError(f"threshold {h!r} outside 0..{self.T + 1}")
        return int(h)


@dataclass(frozen=True)
class ThresholdDistribution:
    """Joint mass ``mass[h, i] = q(t_d = h, t_e = i)``."""

    mass: np.ndarray

    def __init__(self, mass, renormalize: bool = False):
        arr = np.asarray(mass, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 3:
            raise ModelError(f"threshold mass must be square, at least 3x3, got {arr.shape}")
        object.__setattr__(
            self, "mass", _as_probabilities(arr, arr.shape, "threshold mass", renormalize)
        )

    @property
    def grid(self) -> DoseGrid:
        return DoseGrid(self.mass.shape[0] - 2)

    @property
    def T(self) -> int:
        return self.mass.shape[0] - 2

    @classmethod
    def point_mass(cls, T: int, t_d: int, t_e: int) -> "ThresholdDistribution":
        grid = DoseGrid(T)
        m = np.zeros((T + 2, T + 2))
        m[grid.check_threshold(t_d), grid.check_threshold(t_e)] = 1.0
        return cls(m)

    def marginal_d(self) -> np.ndarray:
        return self.mass.sum(axis=1)

    def marginal_e(self) -> np.ndarray:
        return self.mass.sum(axis=0)


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probabilities of the four outcome cells, in ``CELLS`` order."""

    p: np.ndarray

    def __init__(self, p, renormalize: bool = False):
        object.__setattr__(self, "p", _as_probabilities(p, (4,), "outcome distribution", renormalize))

    def __getitem__(self, cell) -> float:
        return float(self.p[cell_index(cell)])

    @property
    def disease(self) -> float:
        """P[d = 1]."""
        return float(self.p[1] + self.p[3])

    @property
    def adverse(self) -> float:
        """P[e = 1]."""
        return float(self.p[2] + self.p[3])


@dataclass(frozen=True)
class WelfareSpec:
    """Mean welfare of each outcome cell, in ``CELLS`` order."""

    w: np.ndarray

    def __init__(self, w, strict: bool = False):
        arr = np.array(w, dtype=float)
        if arr.shape != (4,) or not np.all(np.isfinite(arr)):
            raise ModelError(f"welfare needs 4 finite values, got {w!r}")
        if strict:
            w00, w10, w01, w11 = arr
            if not (w00 > max(w01, w10) and min(w01, w10) > w11):
                raise ModelError(
                    "welfare is not in the realistic order "
                    "w(0,0) > max[w(0,1), w(1,0)] >= min[w(0,1), w(1,0)] > w(1,1)"
                )
        arr.setflags(write=False)
        object.__setattr__(self, "w", arr)

    def __getitem__(self, cell) -> float:
        return float(self.w[cell_index(cell)])

    def scaled(self, factor: float) -> "WelfareSpec":
        return WelfareSpec(self.w * factor)


@dataclass(frozen=True)
class CostSpec:
    """Mean treatment cost at each dose ``0..T``, in welfare units."""

    g: np.ndarray

    def __init__(self, g, strict: bool = False):
        arr = np.array(g, dtype=float)
        if arr.ndim != 1 or arr.size < 2 or not np.all(np.isfinite(arr)):
            raise ModelError(f"cost needs T+1 >= 2 finite values, got {g!r}")
        if strict and (arr.min() < 0 or np.any(np.diff(arr) < 0)):
            raise ModelError("cost must be non-negative and weakly increasing in dose")
        arr.setflags(write=False)
        object.__setattr__(self, "g", arr)

    @classmethod
    def zero(cls, T: int) -> "CostSpec":
        return cls(np.zeros(T + 1))

    @classmethod
    def linear(cls, T: int, slope: float) -> "CostSpec":
        return cls(slope * np.arange(T + 1, dtype=float))

    @property
    def T(self) -> int:
        return self.g.size - 1

    def __getitem__(self, t) -> float:
        return float(self.g[t])

    def scaled(self, factor: float) -> "CostSpec":
        return CostSpec(self.g * factor)


@dataclass(frozen=True)
class Arm:
    dose: int
    outcomes: OutcomeDistribution
    n: int | None = None


@dataclass(frozen=True)
class TrialEvidence:
    """Outcome distributions observed at ``K`` distinct doses."""

    arms: tuple[Arm, ...] = field(default_factory=tuple)

    def __init__(self, arms: Sequence):
        built = []
        for arm in arms:
            if not isinstance(arm, Arm):
                dose, outcomes, *rest = arm
                if not isinstance(outcomes, OutcomeDistribution):
                    outcomes = OutcomeDistribution(outcomes)
                arm = Arm(int(dose), outcomes, rest[0] if rest else None)
            built.append(arm)
        if not built:
            raise ModelError("trial evidence needs at least one arm")
        doses = [a.dose for a in built]
        if any(b <= a for a, b in zip(doses, doses[1:])):
            raise ModelError(f"arm doses must be strictly increasing, got {doses}")
        object.__setattr__(self, "arms", tuple(built))

    @property
    def doses(self) -> tuple[int, ...]:
        return tuple(a.dose for a in self.arms)

    @property
    def K(self) -> int:
        return len(self.arms)

    def validate(self, grid: DoseGrid) -> None:
        if self.K > grid.T + 1:
            raise ModelError(f"{self.K} arms exceed the {grid.T + 1} available doses")
        for arm in self.arms:
            grid.check_dose(arm.dose)

    def arm_at(self, dose: int) -> Arm | None:
        for arm in self.arms:
            if arm.dose == dose:
                return arm
        return None


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------


def outcome_of(t: int, t_d: int, t_e: int, T: int | None = None) -> tuple[int, int]:
    """Outcome cell ``(d, e)`` of a patient with thresholds ``(t_d, t_e)`` at dose ``t``."""
    if T is not None:
        grid = DoseGrid(T)
        grid.check_dose(t)
        grid.check_threshold(t_d)
        grid.check_threshold(t_e)
    elif min(t, t_d, t_e) < 0:
        raise ModelError(f"negative dose or threshold in {(t, t_d, t_e)}")
    return int(t < t_d), int(t >= t_e)


def quadrant_masks(T: int, t: int) -> np.ndarray:
    """Boolean masks of shape (4, T+2, T+2) selecting each outcome cell at dose t."""
    h = np.arange(T + 2)[:, None]
    i = np.arange(T + 2)[None, :]
    cured = h <= t
    ae = i <= t
    return np.stack(
        [
            cured & ~ae,  # (0,0)
            ~cured & ~ae,  # (1,0)
            cured & ae,  # (0,1)
            ~cured & ae,  # (1,1)
        ]
    )


def push_forward(q: ThresholdDistribution, t: int) -> OutcomeDistribution:
    """Outcome distribution at dose ``t`` implied by threshold distribution ``q``."""
    q.grid.check_dose(t)
    m = q.mass
    s = t + 1
    p = np.array(
        [
            m[:s, s:].sum(),
            m[s:, s:].sum(),
            m[:s, :s].sum(),
            m[s:, :s].sum(),
        ]
    )
    return OutcomeDistribution(p)


def expected_welfare(p: OutcomeDistribution, w: WelfareSpec) -> float:
    return float(np.dot(w.w, p.p))


def net_welfare(q: ThresholdDistribution, t: int, w: WelfareSpec, g: CostSpec) -> float:
    """Expected welfare at dose ``t`` under ``q``, net of the mean cost ``g(t)``."""
    return expected_welfare(push_forward(q, t), w) - g[t]


def net_welfare_coefficients(t: int, w: WelfareSpec, g: CostSpec) -> tuple[np.ndarray, float]:
    """Linear form of net welfare at dose ``t`` as a function of ``q``.

    Returns ``(coef, offset)`` with ``coef[h, i] = w(outcome_of(t, h, i))`` and
    ``offset = -g(t)``.
    """
    T = g.T
    DoseGrid(T).check_dose(t)
    coef = np.tensordot(w.w, quadrant_masks(T, t).astype(float), axes=1)
    return coef, -g[t]


def net_welfare_vector(q: ThresholdDistribution, w: WelfareSpec, g: CostSpec) -> np.ndarray:
    """Net welfare at every dose ``0..T``."""
    return np.array([net_welfare(q, t, w, g) for t in range(q.T + 1)])

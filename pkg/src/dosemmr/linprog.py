"""Dense two-phase simplex for ``{x >= 0, A x = b}``.

Deliberately small and auditable: Bland's rule everywhere, a full tableau,
and artificial columns kept alive through phase 2 so dual multipliers can be
read straight off the reduced costs.  Problem sizes in this package are a few
dozen rows and columns at most.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels

FEAS_TOL = 1e-8
PIVOT_TOL = 1e-11
VALUE_TOL = 1e-9
COST_TOL = 1e-11
# Entries of a redundant row at or below this are rounding residue.
REDUNDANT_TOL = 1e-12


class LpError(ValueError):
    """Malformed linear program."""


class NumericalFailure(ArithmeticError):
    """The simplex could not proceed without pivoting on a near-zero entry."""


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    objective: np.ndarray
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    maximize: bool = True

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        A = np.asarray(self.eq_matrix, dtype=float)
        b = np.asarray(self.eq_rhs, dtype=float).ravel()
        if A.ndim == 1 and c.size:
            A = A.reshape(-1, c.size)
        if A.ndim != 2 or A.shape[1] != c.size or A.shape[0] != b.size:
            raise LpError(
                f"dimension mismatch: objective {c.shape}, matrix {A.shape}, rhs {b.shape}"
            )
        if c.size == 0:
            raise LpError("linear program has no variables")
        for name, arr in (("objective", c), ("matrix", A), ("rhs", b)):
            if not np.all(np.isfinite(arr)):
                raise LpError(f"{name} has non-finite entries")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "eq_matrix", A)
        object.__setattr__(self, "eq_rhs", b)

    @property
    def shape(self) -> tuple[int, int]:
        return self.eq_matrix.shape


@dataclass(frozen=True)
class LpOutcome:
    status: Status
    value: float | None = None
    point: np.ndarray | None = None
    certificate: np.ndarray | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass(frozen=True)
class Feasible:
    point: np.ndarray


@dataclass(frozen=True)
class Infeasible:
    """Farkas certificate: ``y @ A <= 0`` componentwise and ``y @ b > 0``."""

    certificate: np.ndarray


class _Tableau:
    """Phase-1 tableau ``[S A | I | S b]`` with a cost row appended."""

    def __init__(self, A, b, use_numba):
        m, n = A.shape
        self.m, self.n = m, n
        self.use_numba = use_numba
        self.sign = np.where(b < 0, -1.0, 1.0)
        tab = np.zeros((m + 1, n + m + 1))
        tab[:m, :n] = A * self.sign[:, None]
        tab[:m, n : n + m] = np.eye(m)
        tab[:m, -1] = b * self.sign
        tab[m, :n] = -tab[:m, :n].sum(axis=0)
        tab[m, -1] = -tab[:m, -1].sum()
        self.tab = tab
        self.basis = np.arange(n, n + m, dtype=np.int64)
        self.iterations = 0
        self.max_iter = 50 * (n + m) + 1000

    def run(self, n_enter):
        status, it = _kernels.run_simplex(
            self.tab, self.basis, n_enter, self.max_iter, COST_TOL, PIVOT_TOL, self.use_numba
        )
        self.iterations += it
        if status == _kernels.TINY_PIVOT:
            raise NumericalFailure("entering column has only pivots below 1e-11")
        if status == _kernels.ITERATION_LIMIT:
            raise NumericalFailure(f"simplex did not terminate in {self.max_iter} pivots")
        return status

    def duals(self):
        """Multipliers for the original rows, from the artificial columns' reduced costs."""
        n, m = self.n, self.m
        return self.tab[m, n : n + m]

    def drive_out_artificials(self):
        """Pivot basic artificials onto structural columns; zero rows that are redundant."""
        n, m = self.n, self.m
        for r in range(m):
            if self.basis[r] < n:
                continue
            row = self.tab[r, :n]
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) > PIVOT_TOL:
                _kernels.pivot(self.tab, r, j, self.use_numba)
                self.basis[r] = j
            elif abs(row[j]) > REDUNDANT_TOL:
                raise NumericalFailure(
                    f"row {r} is neither redundant nor safely pivotable (entry {row[j]:.3g})"
                )
            else:
                self.tab[r, :n] = 0.0
                self.tab[r, -1] = 0.0

    def set_phase2_costs(self, c):
        n, m = self.n, self.m
        cost_row = np.zeros(n + m + 1)
        cost_row[:n] = c
        for r in range(m):
            j = self.basis[r]
            if j < n and c[j] != 0.0:
                cost_row -= c[j] * self.tab[r]
        self.tab[m] = cost_row

    def point(self):
        x = np.zeros(self.n)
        for r in range(self.m):
            j = self.basis[r]
            if j < self.n:
                x[j] = self.tab[r, -1]
        return x


def _phase1(A, b, use_numba):
    tab = _Tableau(A, b, use_numba)
    tab.run(tab.n + tab.m)
    infeasibility = -tab.tab[tab.m, -1]
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if infeasibility > FEAS_TOL * scale:
        # phase-1 duals u = 1 - reduced cost of each artificial
        u = 1.0 - tab.duals()
        return tab, u * tab.sign
    return tab, None


def _check_residual(A, b, x):
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    resid = float(np.abs(A @ x - b).max(initial=0.0))
    if resid > FEAS_TOL * scale or x.min(initial=0.0) < -1e-9:
        raise NumericalFailure(f"simplex point violates the constraints (residual {resid:.3g})")


def check_feasible(eq_matrix, eq_rhs, use_numba=None) -> Feasible | Infeasible:
    """Phase-1 feasibility of ``{x >= 0, A x = b}``."""
    A = np.asarray(eq_matrix, dtype=float)
    b = np.asarray(eq_rhs, dtype=float).ravel()
    if A.ndim == 1:
        A = A.reshape(b.size, -1)
    lp = LinearProgram(np.zeros(A.shape[1]), A, b)
    if use_numba is None:
        use_numba = _kernels.HAVE_NUMBA
    tab, cert = _phase1(lp.eq_matrix, lp.eq_rhs, use_numba)
    if cert is not None:
        return Infeasible(cert)
    x = np.clip(tab.point(), 0.0, None)
    _check_residual(lp.eq_matrix, lp.eq_rhs, x)
    return Feasible(x)


def solve(lp: LinearProgram, use_numba=None) -> LpOutcome:
    """Optimize ``lp`` with the two-phase simplex.

    On an optimal outcome ``certificate`` holds dual multipliers ``y`` with
    ``b @ y == value``; for maximization ``A.T @ y >= c``, for minimization
    ``A.T @ y <= c``.  On an infeasible outcome it holds a Farkas vector.
    """
    if use_numba is None:
        use_numba = _kernels.HAVE_NUMBA
    A, b = lp.eq_matrix, lp.eq_rhs
    c = -lp.objective if lp.maximize else lp.objective
    tab, cert = _phase1(A, b, use_numba)
    if cert is not None:
        return LpOutcome(Status.INFEASIBLE, certificate=cert, iterations=tab.iterations)
    tab.drive_out_artificials()
    tab.set_phase2_costs(c)
    status = tab.run(tab.n)
    if status == _kernels.UNBOUNDED:
        return LpOutcome(Status.UNBOUNDED, iterations=tab.iterations)
    x = tab.point()
    _check_residual(A, b, x)
    x = np.clip(x, 0.0, None)
    value = float(c @ x)
    # reduced cost of artificial i is -(c_B B^-1)_i
    y = -tab.duals() * tab.sign
    if lp.maximize:
        value, y = -value, -y
    return LpOutcome(Status.OPTIMAL, value, x, y, tab.iterations)


def maximize(c, A, b, **kw) -> LpOutcome:
    return solve(LinearProgram(c, A, b, maximize=True), **kw)


def minimize(c, A, b, **kw) -> LpOutcome:
    return solve(LinearProgram(c, A, b, maximize=False), **kw)

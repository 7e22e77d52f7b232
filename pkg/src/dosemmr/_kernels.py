"""Hot numeric kernels with a numba path and a pure-numpy twin.

The numba versions are used when numba imports cleanly and the environment
variable ``DOSEMMR_DISABLE_NUMBA`` is unset (or set to ``0``).  Both paths
implement identical arithmetic in identical order, so results agree to the
last bit on the pivoting kernels and to rounding on the reductions.
"""

from __future__ import annotations

import os

import numpy as np

# Simplex loop status codes.
OPTIMAL = 0
UNBOUNDED = 1
ITERATION_LIMIT = 2
TINY_PIVOT = 3

# Column entries at or below this magnitude are treated as exact zeros.
ZERO_TOL = 1e-14


def _numba_requested() -> bool:
    flag = os.environ.get("DOSEMMR_DISABLE_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "no")


try:
    if not _numba_requested():
        raise ImportError("numba disabled by DOSEMMR_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


# --------------------------------------------------------------------------
# Simplex pivoting (Bland's rule on a dense tableau)
# --------------------------------------------------------------------------
#
# Tableau layout: rows 0..m-1 are constraints, row m holds reduced costs of a
# minimization problem; the last column is the right-hand side, and
# tab[m, -1] equals minus the current objective value.


def _simplex_numpy(tab, basis, n_enter, max_iter, cost_tol, pivot_tol):
    m = tab.shape[0] - 1
    rhs = tab.shape[1] - 1
    it = 0
    while it < max_iter:
        costs = tab[m, :n_enter]
        candidates = np.flatnonzero(costs < -cost_tol)
        if candidates.size == 0:
            return OPTIMAL, it
        col = int(candidates[0])
        column = tab[:m, col]
        best_row = -1
        best_ratio = np.inf
        tiny = False
        for r in range(m):
            a = column[r]
            if a > pivot_tol:
                ratio = tab[r, rhs] / a
                if ratio < best_ratio or (ratio == best_ratio and basis[r] < basis[best_row]):
                    best_ratio = ratio
                    best_row = r
            elif a > ZERO_TOL:
                tiny = True
        if best_row < 0:
            return (TINY_PIVOT if tiny else UNBOUNDED), it
        _pivot_numpy(tab, best_row, col)
        basis[best_row] = col
        it += 1
    return ITERATION_LIMIT, it


def _pivot_numpy(tab, row, col):
    tab[row] /= tab[row, col]
    factors = tab[:, col].copy()
    factors[row] = 0.0
    tab -= np.outer(factors, tab[row])
    tab[:, col] = 0.0
    tab[row, col] = 1.0


if HAVE_NUMBA:

    @njit(cache=True)
    def _pivot_numba(tab, row, col):
        nrow, ncol = tab.shape
        piv = tab[row, col]
        for j in range(ncol):
            tab[row, j] /= piv
        for r in range(nrow):
            if r == row:
                continue
            f = tab[r, col]
            if f != 0.0:
                for j in range(ncol):
                    tab[r, j] -= f * tab[row, j]
            tab[r, col] = 0.0
        tab[row, col] = 1.0

    @njit(cache=True)
    def _simplex_numba(tab, basis, n_enter, max_iter, cost_tol, pivot_tol):
        m = tab.shape[0] - 1
        rhs = tab.shape[1] - 1
        it = 0
        while it < max_iter:
            col = -1
            for j in range(n_enter):
                if tab[m, j] < -cost_tol:
                    col = j
                    break
            if col < 0:
                return OPTIMAL, it
            best_row = -1
            best_ratio = np.inf
            tiny = False
            for r in range(m):
                a = tab[r, col]
                if a > pivot_tol:
                    ratio = tab[r, rhs] / a
                    if ratio < best_ratio or (ratio == best_ratio and basis[r] < basis[best_row]):
                        best_ratio = ratio
                        best_row = r
                elif a > ZERO_TOL:
                    tiny = True
            if best_row < 0:
                if tiny:
                    return TINY_PIVOT, it
                return UNBOUNDED, it
            _pivot_numba(tab, best_row, col)
            basis[best_row] = col
            it += 1
        return ITERATION_LIMIT, it


def run_simplex(tab, basis, n_enter, max_iter, cost_tol, pivot_tol, use_numba=None):
    """Pivot ``tab`` in place until optimal, unbounded or stuck.

    Only columns ``0..n_enter-1`` may enter the basis.  Returns
    ``(status, iterations)``.
    """
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba:
        status, it = _simplex_numba(tab, basis, n_enter, max_iter, cost_tol, pivot_tol)
        return int(status), int(it)
    return _simplex_numpy(tab, basis, n_enter, max_iter, cost_tol, pivot_tol)


def pivot(tab, row, col, use_numba=None):
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba:
        _pivot_numba(tab, row, col)
    else:
        _pivot_numpy(tab, row, col)


# --------------------------------------------------------------------------
# Bounded compositions of an integer, in lexicographic order
# --------------------------------------------------------------------------


def count_compositions(total, lo, hi):
    """Number of integer vectors x with lo <= x <= hi and sum(x) == total."""
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    ways = np.zeros(total + 1, dtype=object)
    ways[0] = 1
    for a, b in zip(lo, hi):
        nxt = np.zeros(total + 1, dtype=object)
        for s in range(total + 1):
            if ways[s]:
                for v in range(a, min(b, total - s) + 1):
                    nxt[s + v] += ways[s]
        ways = nxt
    return int(ways[total])


def _compositions_numpy(total, lo, hi, count):
    parts = lo.shape[0]
    out = np.empty((count, parts), dtype=np.int64)
    # suffix bounds tell whether a prefix can still be completed
    min_rest = np.zeros(parts + 1, dtype=np.int64)
    max_rest = np.zeros(parts + 1, dtype=np.int64)
    for j in range(parts - 1, -1, -1):
        min_rest[j] = min_rest[j + 1] + lo[j]
        max_rest[j] = max_rest[j + 1] + hi[j]
    cur = np.empty(parts, dtype=np.int64)
    idx = 0

    def fill(j, remaining):
        nonlocal idx
        if j == parts - 1:
            cur[j] = remaining
            out[idx] = cur
            idx += 1
            return
        start = max(lo[j], remaining - max_rest[j + 1])
        stop = min(hi[j], remaining - min_rest[j + 1])
        for v in range(start, stop + 1):
            cur[j] = v
            fill(j + 1, remaining - v)

    if min_rest[0] <= total <= max_rest[0]:
        fill(0, total)
    return out[:idx]


if HAVE_NUMBA:

    @njit(cache=True)
    def _compositions_numba(total, lo, hi, count):
        parts = lo.shape[0]
        out = np.empty((count, parts), dtype=np.int64)
        min_rest = np.zeros(parts + 1, dtype=np.int64)
        max_rest = np.zeros(parts + 1, dtype=np.int64)
        for j in range(parts - 1, -1, -1):
            min_rest[j] = min_rest[j + 1] + lo[j]
            max_rest[j] = max_rest[j + 1] + hi[j]
        if total < min_rest[0] or total > max_rest[0]:
            return out[:0]
        cur = np.empty(parts, dtype=np.int64)
        remaining = np.empty(parts + 1, dtype=np.int64)
        stop = np.empty(parts, dtype=np.int64)
        remaining[0] = total
        # iterative depth-first walk: cur[j] counts up to stop[j]
        j = 0
        cur[0] = max(lo[0], total - max_rest[1])
        stop[0] = min(hi[0], total - min_rest[1])
        idx = 0
        while j >= 0:
            if cur[j] > stop[j]:
                j -= 1
                if j >= 0:
                    cur[j] += 1
                continue
            if j == parts - 2:
                cur[parts - 1] = remaining[j] - cur[j]
                for k in range(parts):
                    out[idx, k] = cur[k]
                idx += 1
                cur[j] += 1
                continue
            rem = remaining[j] - cur[j]
            j += 1
            remaining[j] = rem
            cur[j] = max(lo[j], rem - max_rest[j + 1])
            stop[j] = min(hi[j], rem - min_rest[j + 1])
        return out[:idx]


def compositions(total, lo=None, hi=None, parts=None, use_numba=None):
    """All integer vectors with ``lo <= x <= hi`` summing to ``total``.

    Rows come out in ascending lexicographic order.
    """
    if lo is None:
        lo = np.zeros(parts, dtype=np.int64)
    if hi is None:
        hi = np.full(len(lo), total, dtype=np.int64)
    lo = np.ascontiguousarray(lo, dtype=np.int64)
    hi = np.ascontiguousarray(hi, dtype=np.int64)
    if lo.shape[0] == 1:
        if lo[0] <= total <= hi[0]:
            return np.array([[total]], dtype=np.int64)
        return np.empty((0, 1), dtype=np.int64)
    count = count_compositions(total, lo, hi)
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba:
        return _compositions_numba(total, lo, hi, count)
    return _compositions_numpy(total, lo, hi, count)


# --------------------------------------------------------------------------
# Regret lower envelope over a set of cuts
# --------------------------------------------------------------------------
#
# A cut is a net-welfare vector omega (one entry per dose) of some state.
# Its regret for allocation delta is max(omega) - delta @ omega, and the
# maximum over cuts is a lower bound on the worst-case regret of delta.


def _envelope_numpy(points, cuts):
    best = cuts.max(axis=1)
    values = best[None, :] - points @ cuts.T
    return values.max(axis=1)


if HAVE_NUMBA:

    @njit(cache=True)
    def _envelope_numba(points, cuts):
        npts, ndose = points.shape
        ncut = cuts.shape[0]
        best = np.empty(ncut)
        for c in range(ncut):
            b = cuts[c, 0]
            for t in range(1, ndose):
                if cuts[c, t] > b:
                    b = cuts[c, t]
            best[c] = b
        out = np.empty(npts)
        for p in range(npts):
            worst = -np.inf
            for c in range(ncut):
                s = 0.0
                for t in range(ndose):
                    s += points[p, t] * cuts[c, t]
                v = best[c] - s
                if v > worst:
                    worst = v
            out[p] = worst
        return out


def regret_envelope(points, cuts, use_numba=None):
    """Lower envelope ``max_c [max(cuts[c]) - points @ cuts[c]]`` per point."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    cuts = np.ascontiguousarray(cuts, dtype=np.float64)
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba:
        return _envelope_numba(points, cuts)
    return _envelope_numpy(points, cuts)

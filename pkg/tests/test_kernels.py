import itertools

import numpy as np
import pytest

from dosemmr import _kernels

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba unavailable or disabled")


def brute_compositions(total, lo, hi):
    ranges = [range(a, b + 1) for a, b in zip(lo, hi)]
    return np.array([v for v in itertools.product(*ranges) if sum(v) == total])


@pytest.mark.parametrize(
    "total,lo,hi",
    [
        (5, [0, 0, 0], [5, 5, 5]),
        (1, [0, 0, 0, 0], [1, 1, 1, 1]),
        (7, [1, 0, 2], [4, 3, 5]),
        (10, [0, 0], [10, 10]),
        (3, [2, 2], [3, 3]),  # infeasible box
    ],
)
@pytest.mark.parametrize("use_numba", [False, pytest.param(True, marks=needs_numba)])
def test_compositions_match_brute_force_in_lex_order(total, lo, hi, use_numba):
    got = _kernels.compositions(total, lo, hi, use_numba=use_numba)
    want = brute_compositions(total, lo, hi)
    assert _kernels.count_compositions(total, lo, hi) == len(want)
    if len(want) == 0:
        assert got.shape[0] == 0
    else:
        np.testing.assert_array_equal(got, want)


def test_composition_count_for_simplex_grid():
    # C(M + T, T) grid points for T + 1 doses
    assert _kernels.count_compositions(1000, [0, 0, 0], [1000] * 3) == 501501


@pytest.mark.parametrize("use_numba", [False, pytest.param(True, marks=needs_numba)])
def test_envelope_matches_direct_formula(rng, use_numba):
    points = rng.dirichlet(np.ones(4), size=50)
    cuts = rng.normal(size=(7, 4))
    got = _kernels.regret_envelope(points, cuts, use_numba=use_numba)
    want = np.array([max(c.max() - p @ c for c in cuts) for p in points])
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)


@needs_numba
def test_simplex_paths_agree(rng):
    from dosemmr import linprog

    for _ in range(20):
        m, n = rng.integers(2, 8), rng.integers(3, 15)
        A = rng.normal(size=(m, n))
        b = A @ rng.random(n)
        c = rng.normal(size=n)
        a = linprog.solve(linprog.LinearProgram(c, A, b), use_numba=True)
        z = linprog.solve(linprog.LinearProgram(c, A, b), use_numba=False)
        assert a.status == z.status
        if a.optimal:
            assert a.value == pytest.approx(z.value, abs=1e-9)
            assert a.iterations == z.iterations

"""Time the numba kernels against their pure-numpy fallbacks.

Run: python3 benchmarks/bench_kernels.py [--repeat N]
Each case is run once untimed so JIT compilation is excluded.
"""

import argparse
import time

import numpy as np

from dosemmr import _kernels, illustration
from dosemmr.decision import allocation_mmr_grid
from dosemmr.identification import Restrictions, build_constraints
from dosemmr.linprog import maximize
from dosemmr.model import CostSpec, WelfareSpec


def best_of(fn, repeat):
    fn()
    best = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def cases():
    rng = np.random.default_rng(0)
    cs = build_constraints(illustration.evidence(), Restrictions(), illustration.GRID)
    c = rng.normal(size=cs.matrix.shape[1])
    points = _kernels.compositions(200, parts=3, use_numba=False) / 200.0
    cuts = rng.uniform(size=(40, 3))
    w = WelfareSpec(illustration.WELFARE)
    g = CostSpec.linear(2, 0.1)

    def swap_kernels(use_numba, fn):
        def run():
            saved = _kernels.HAVE_NUMBA
            _kernels.HAVE_NUMBA = use_numba
            try:
                fn()
            finally:
                _kernels.HAVE_NUMBA = saved
        return run

    yield "compositions(M=200, 4 parts)", lambda nb: (
        lambda: _kernels.compositions(200, parts=4, use_numba=nb)
    )
    yield "regret envelope (20301 pts x 40 cuts)", lambda nb: (
        lambda: _kernels.regret_envelope(points, cuts, use_numba=nb)
    )
    yield "simplex, 9x16 bound LP", lambda nb: (
        lambda: maximize(c, cs.matrix, cs.rhs, use_numba=nb)
    )
    yield "allocation grid M=1000", lambda nb: swap_kernels(
        nb, lambda: allocation_mmr_grid(cs, w, g, resolution=1000)
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not _kernels.HAVE_NUMBA:
        print("numba unavailable or disabled; only the numpy path can be timed")
    print(f"{'case':40s} {'numpy [s]':>12s} {'numba [s]':>12s} {'speed-up':>9s}")
    for name, make in cases():
        t_np = best_of(make(False), args.repeat)
        if _kernels.HAVE_NUMBA:
            t_nb = best_of(make(True), args.repeat)
            print(f"{name:40s} {t_np:12.5f} {t_nb:12.5f} {t_np / t_nb:8.1f}x")
        else:
            print(f"{name:40s} {t_np:12.5f} {'-':>12s} {'-':>9s}")


if __name__ == "__main__":
    main()

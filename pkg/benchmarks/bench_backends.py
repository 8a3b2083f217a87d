"""Compare the numba and pure-numpy kernel backends.

Both backends are timed in the same process by calling the kernel
implementations directly, so the environment flag does not matter here. Each
timing is the median of several repeats after one warm-up call (which also
triggers numba compilation). Outputs are checked for agreement before timing.

Usage:
    python benchmarks/bench_backends.py [--n 2000] [--d 10000] [--m 64] [--repeats 5]
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time

import numpy as np

from sketchlsh import _kernels as K
from sketchlsh.hashcore import derive_seed, scrambled_keys
from sketchlsh.sketch import make_cs_plan, make_hcs_plan


def _median_time(fn, repeats: int) -> float:
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def run(n: int, d: int, m: int, repeats: int, seed: int = 0) -> list[tuple[str, float, float]]:
    """Time each kernel on both backends; returns (name, numpy_s, numba_s) rows."""
    rng = np.random.default_rng(seed)
    X = np.ascontiguousarray(rng.standard_normal((n, d)))
    q = rng.standard_normal(d)
    ids = np.arange(n, dtype=np.int64)
    keys = np.ascontiguousarray(scrambled_keys(d), dtype=np.uint64)

    cs = make_cs_plan(derive_seed(seed, "bench/cs"), d, m)
    hcs = make_hcs_plan(derive_seed(seed, "bench/hcs"), d, 2, m=m)
    h_modes = [h for h, _ in hcs.mode_tables()]
    s_modes = [s for _, s in hcs.mode_tables()]
    H, S = hcs.H, hcs.S
    mode_d = np.asarray(hcs.mode_d, dtype=np.int64)
    mode_m = np.asarray(hcs.mode_m, dtype=np.int64)
    a, b = 123456789, 987654321

    cases = {
        "twowise_table": (
            lambda: K.twowise_table_numpy(a, b, m, keys),
            lambda: K._twowise_table_nb(a, b, m, keys),
        ),
        "cs_batch": (
            lambda: K.cs_batch_numpy(X, cs.h_table, cs.s_table, m),
            lambda: K._cs_batch_nb(X, cs.h_table, cs.s_table, m),
        ),
        "hcs_batch": (
            lambda: K.hcs_batch_numpy(X, h_modes, s_modes, tuple(int(v) for v in mode_m)),
            lambda: K._hcs_batch_nb(X, H, S, mode_d, mode_m),
        ),
        "row_scores": (
            lambda: K.row_scores_numpy(X, ids, q, False),
            lambda: K._row_scores_nb(X, ids, q, False),
        ),
    }
    rows = []
    for name, (np_fn, nb_fn) in cases.items():
        ref, fast = np_fn(), nb_fn()
        if name == "row_scores":
            assert np.allclose(ref, fast, rtol=1e-12, atol=1e-12), name
        else:
            assert np.array_equal(ref, fast), name
        rows.append((name, _median_time(np_fn, repeats), _median_time(nb_fn, repeats)))
    return rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=2000, help="rows to sketch")
    parser.add_argument("--d", type=int, default=10_000, help="input dimension")
    parser.add_argument("--m", type=int, default=64, help="sketch width")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args(argv)
    if not K.HAVE_NUMBA:
        print("numba is unavailable or disabled; nothing to compare", file=sys.stderr)
        return 1
    print(f"n={args.n} d={args.d} m={args.m} repeats={args.repeats}")
    print(f"{'kernel':<14} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for name, t_np, t_nb in run(args.n, args.d, args.m, args.repeats):
        print(f"{name:<14} {t_np * 1e3:10.2f} {t_nb * 1e3:10.2f} {t_np / t_nb:8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

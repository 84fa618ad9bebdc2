"""Time each hot kernel under the numba and numpy backends.

    python benchmarks/bench_kernels.py [--size 1024] [--repeat 3]

Numba is warmed up (compiled) before timing. Each row also reports whether
the two backends produced the same result.
"""

import argparse
import os
import time

import numpy as np

from floodfuse import _accel, kernels


def _cases(size, rng):
    values = rng.normal(size=(size, size))
    valid = rng.random((size, size)) > 0.05
    fg = rng.random((size, size)) > 0.55
    image = rng.random((size // 2, size // 2))
    template = rng.random((16, 16))
    coarse_n = size // 4
    rows, cols = np.divmod(np.arange(coarse_n * coarse_n), coarse_n)
    coarse = (0.0, float(size), 4.0, 4.0)
    fine = (0.0, float(size), 1.0, 1.0)
    return {
        "focal median 5x5": (kernels.focal_stat, (values, valid, 5, True)),
        "focal mean 5x5": (kernels.focal_stat, (values, valid, 5, False)),
        "label8": (kernels.label8, (fg,)),
        "ncc 16x16": (kernels.ncc_scores, (image, template)),
        "covered area": (kernels.covered_area, (rows, cols, coarse, fg, fine)),
    }


def _best(fn, args, repeat):
    times = []
    out = None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - start)
    return min(times), out


def _same(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return all(np.allclose(np.asarray(x, float), np.asarray(y, float), rtol=0, atol=1e-12, equal_nan=True)
               for x, y in zip(a, b))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--size", type=int, default=1024, help="raster side in cells")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if not _accel.HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    cases = _cases(args.size, np.random.default_rng(args.seed))
    print(f"size {args.size}x{args.size}, best of {args.repeat}, numba threads {_accel.thread_cap() or 'default'}")
    print(f"{'kernel':<18}{'numpy s':>10}{'numba s':>10}{'speedup':>9}  same")
    for name, (fn, fargs) in cases.items():
        os.environ["FLOODFUSE_BACKEND"] = "numba"
        fn(*fargs)  # compile
        t_numba, out_numba = _best(fn, fargs, args.repeat)
        os.environ["FLOODFUSE_BACKEND"] = "numpy"
        t_numpy, out_numpy = _best(fn, fargs, args.repeat)
        same = "yes" if _same(out_numba, out_numpy) else "NO"
        print(f"{name:<18}{t_numpy:>10.3f}{t_numba:>10.3f}{t_numpy / t_numba:>8.1f}x  {same}")


if __name__ == "__main__":
    main()

"""Time the SC decode and genie kernels of both backends.

    python3 benchmarks/bench_kernels.py [--sizes 64 256 1024] [--batch 256] [--repeat 5]

Prints the best-of-``repeat`` wall time per batch and the speed-up of the
compiled extension over the numpy fallback.
"""
import argparse
import time

import numpy as np

from polarcm import _sc_py

try:
    from polarcm import _sc_ext
except ImportError:
    _sc_ext = None


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        tic = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - tic)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[64, 256, 1024])
    parser.add_argument("--batch", type=int, default=256)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    backends = {"python": _sc_py}
    if _sc_ext is not None:
        backends["cython"] = _sc_ext
    else:
        print("compiled extension not built; timing the numpy fallback only")

    rng = np.random.default_rng(0)
    print(f"{'kernel':8s} {'N':>6s} " + " ".join(f"{name + ' ms':>12s}" for name in backends) + "   speed-up")
    for N in args.sizes:
        u = rng.integers(0, 2, (args.batch, N), dtype=np.uint8)
        llr = 2.0 * (1.0 - 2.0 * u) + rng.normal(0, 1.5, (args.batch, N))
        frozen = (rng.random(N) < 0.5).astype(np.uint8)
        fvals = np.zeros(N, dtype=np.uint8)
        kernels = {
            "decode": lambda mod: mod.sc_decode_batch(llr, frozen, fvals, True),
            "genie": lambda mod: mod.sc_genie_batch(llr, u, True),
        }
        for name, kernel in kernels.items():
            times = {b: best_time(lambda mod=mod: kernel(mod), args.repeat) for b, mod in backends.items()}
            line = f"{name:8s} {N:6d} " + " ".join(f"{1e3 * t:12.2f}" for t in times.values())
            if "cython" in times:
                line += f"   {times['python'] / times['cython']:8.1f}x"
            print(line)


if __name__ == "__main__":
    main()

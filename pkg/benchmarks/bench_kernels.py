#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the numpy fallback.

Shapes mirror the two convolution stages of the downstream network at a
few upstream embedding widths, batch 32. Run:

    python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from sourcetrace.kernels import get_backend

CASES = [
    # (label, N, Cin, Cout, L)
    ("conv stage1 d=64", 32, 1, 128, 64),
    ("conv stage2 d=64", 32, 128, 64, 31),
    ("conv stage1 d=512", 32, 1, 128, 512),
    ("conv stage2 d=512", 32, 128, 64, 255),
    ("conv stage2 d=1024", 32, 128, 64, 511),
]


def time_call(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = {"numpy": get_backend("numpy")}
    try:
        backends["cython"] = get_backend("cython")
    except ImportError:
        print("compiled backend not built; benchmarking numpy only")

    rng = np.random.default_rng(0)
    header = f"{'case':22s} {'dir':4s}" + "".join(f" {n:>12s}" for n in backends)
    if len(backends) == 2:
        header += f" {'speedup':>9s}"
    print(header)
    print("-" * len(header))
    for label, n, cin, cout, length in CASES:
        x = rng.standard_normal((n, cin, length))
        k = rng.standard_normal((cout, cin, 3))
        b = rng.standard_normal(cout)
        g = rng.standard_normal((n, cout, length - 2))
        for direction, call in (
            ("fwd", lambda m: m.conv1d_forward(x, k, b)),
            ("bwd", lambda m: m.conv1d_backward(x, k, g)),
        ):
            times = {
                name: time_call(lambda m=mod: call(m), args.repeats)
                for name, mod in backends.items()
            }
            row = f"{label:22s} {direction:4s}" + "".join(
                f" {1e3 * t:9.3f} ms" for t in times.values()
            )
            if len(times) == 2:
                row += f" {times['numpy'] / times['cython']:8.2f}x"
            print(row)

    # pooling at the stage-2 output width
    x = rng.standard_normal((32, 64, 253))
    g = rng.standard_normal((32, 64, 126))
    for direction, make in (
        ("fwd", lambda m: (lambda: m.maxpool1d_forward(x))),
        ("bwd", lambda m: (lambda sw=m.maxpool1d_forward(x)[1]: m.maxpool1d_backward(sw, g, 253))),
    ):
        times = {name: time_call(make(mod), args.repeats) for name, mod in backends.items()}
        row = f"{'maxpool d=512':22s} {direction:4s}" + "".join(
            f" {1e3 * t:9.3f} ms" for t in times.values()
        )
        if len(times) == 2:
            row += f" {times['numpy'] / times['cython']:8.2f}x"
        print(row)


if __name__ == "__main__":
    main()

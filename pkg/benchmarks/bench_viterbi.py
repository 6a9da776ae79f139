#!/usr/bin/env python3
"""Benchmark the trellis kernels: compiled extension vs NumPy fallback.

Times the encoder and the soft-input decoder at several payload sizes and,
when both backends are importable, reports the speedup. Run from the repo
root:

    python benchmarks/bench_viterbi.py [--payloads 12,96,768] [--repeats 5]
"""

import argparse
import time

import numpy as np

from aoicoop._kernels import available_backends

G0, G1, K = 0o133, 0o171, 7


def _time(fn, min_seconds=0.2):
    """Best-of-repeats timing with an adaptive iteration count."""
    fn()  # warm up
    iters = 1
    while True:
        t0 = time.perf_counter()
        for _ in range(iters):
            fn()
        dt = time.perf_counter() - t0
        if dt >= min_seconds:
            return dt / iters
        iters = max(iters * 2, int(iters * min_seconds / max(dt, 1e-9)))


def bench(payload_bytes: int, repeats: int):
    rng = np.random.default_rng(9)
    bits = rng.integers(0, 2, payload_bytes * 8).astype(np.uint8)
    soft = rng.integers(0, 256, 2 * (bits.size + K - 1)).astype(np.int64)
    rows = {}
    for name, mod in available_backends().items():
        enc = min(_time(lambda: mod.conv_encode(bits, G0, G1, K)) for _ in range(repeats))
        dec = min(_time(lambda: mod.viterbi_decode(soft, G0, G1, K)) for _ in range(repeats))
        rows[name] = (enc, dec)
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--payloads", default="12,96,768",
                        help="comma-separated payload sizes in bytes")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    backends = available_backends()
    print(f"backends available: {', '.join(backends)}")
    header = f"{'payload':>8} {'backend':>8} {'encode':>12} {'decode':>12} {'decodes/s':>10}"
    print(header)
    print("-" * len(header))
    for payload in (int(p) for p in args.payloads.split(",")):
        rows = bench(payload, args.repeats)
        for name, (enc, dec) in rows.items():
            print(f"{payload:>7}B {name:>8} {enc * 1e6:>10.1f}us {dec * 1e6:>10.1f}us"
                  f" {1 / dec:>10.0f}")
        if {"python", "cython"} <= set(rows):
            speedup = rows["python"][1] / rows["cython"][1]
            print(f"{'':>8} {'speedup':>8} {'':>12} {speedup:>11.1f}x")


if __name__ == "__main__":
    main()

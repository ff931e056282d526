"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the median wall time of each backend and the
speedup, after checking both backends agree.
"""
import argparse
import statistics
import timeit

import numpy as np

from ddpilot._kernels import compiled_backend, python_backend


def _inputs(M, N, seed=0):
    rng = np.random.default_rng(seed)
    tx = rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N))
    span = np.arange(-5, 6, dtype=np.int64)
    coef = rng.standard_normal(span.size) + 1j * rng.standard_normal(span.size)
    phase = np.exp(2j * np.pi * rng.random(M))
    hyp_l = rng.integers(0, M // 2, 256).astype(np.int64)
    hyp_k = rng.integers(-N // 2, N // 2, 256).astype(np.int64)
    return tx, span, coef, phase, hyp_l, hyp_k


def _cases(M, N):
    tx, span, coef, phase, hl, hk = _inputs(M, N)
    pilot = np.ascontiguousarray(tx[::-1])

    def accumulate(backend):
        out = np.zeros_like(tx)
        backend.twisted_accumulate(out, tx, 7, -3, span, coef, phase)
        return out

    def correlate(backend):
        return backend.correlate_direct(tx, pilot, hl, hk, M // 4, True, True)

    return {f"twisted_accumulate {M}x{N}, 11 IDI taps": accumulate,
            f"correlate_direct {M}x{N}, 256 hypotheses": correlate}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if compiled_backend is None:
        print("compiled extension not built; only the numpy backend is available")
    for M, N in ((64, 16), (64, 64), (64, 256)):
        for name, fn in _cases(M, N).items():
            py = statistics.median(timeit.repeat(lambda: fn(python_backend), number=1,
                                                 repeat=args.repeat))
            if compiled_backend is None:
                print(f"{name:45s} python {py * 1e3:9.2f} ms")
                continue
            diff = np.max(np.abs(fn(python_backend) - fn(compiled_backend)))
            cy = statistics.median(timeit.repeat(lambda: fn(compiled_backend), number=1,
                                                 repeat=args.repeat))
            print(f"{name:45s} python {py * 1e3:9.2f} ms  cython {cy * 1e3:9.2f} ms  "
                  f"x{py / cy:6.1f}  max diff {diff:.1e}")


if __name__ == "__main__":
    main()

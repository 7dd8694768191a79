"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel runs once untimed (JIT compilation) and then ``--repeat``
times; the best wall-clock time is reported.
"""

import argparse
import time

import numpy as np

from ocrhmm import _accel, kernels


def best_of(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    stack = (rng.random((5000, 16, 8)) < 0.4).astype(np.uint8)
    d2 = rng.random((1024, 17000))
    a, b = rng.normal(size=(1024, 13)), rng.normal(size=(17000, 13))
    labels = rng.integers(0, 26, 17000)
    x = rng.normal(size=3000)
    centers = np.sort(rng.normal(size=600))
    w = np.full(600, -np.log(600))
    n, length = 26, 8
    vit = (np.log(rng.random(n)), np.log(rng.random((n, n))), np.log(rng.random((n, n))),
           np.log(rng.random((length, n))), np.log(rng.random(n)))
    return {
        "count_components (5000 glyphs, 8-conn)": ("count_components", (stack, 8)),
        "smallest_k (1024 x 17000, k=18)": ("smallest_k", (d2, 18)),
        "sqdist_direct (1024 x 17000, D=13)": ("sqdist_direct", (a, b)),
        "class_logsumexp (1024 x 17000)": ("class_logsumexp", (d2, labels, 0.5, -1, 26)),
        "kde_logpdf (3000 x 600)": ("kde_logpdf", (x, centers, w, 0.3)),
        "viterbi (26 states, L=8)": ("viterbi", vit),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _accel.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':42s} {'numba':>10s} {'numpy':>10s} {'speed-up':>9s}")
    for label, (name, fn_args) in cases(rng).items():
        t_nb = best_of(getattr(kernels, f"_{name}_nb"), fn_args, args.repeat)
        t_np = best_of(getattr(kernels, f"_{name}_np"), fn_args, args.repeat)
        print(f"{label:42s} {t_nb * 1e3:8.2f}ms {t_np * 1e3:8.2f}ms {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()

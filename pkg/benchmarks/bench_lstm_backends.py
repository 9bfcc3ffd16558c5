"""Compare the compiled and pure-numpy LSTM sequence kernels.

Runs forward and backward passes over a grid of sequence lengths and
hidden sizes, printing per-call timings and the speedup.  The numba
backend pays a one-time JIT cost, so each kernel is warmed before timing.

Usage: python3 benchmarks/bench_lstm_backends.py [--repeats N]
"""

import argparse
import time

import numpy as np

from sentorder.kernels import numpy_impl

try:
    from sentorder.kernels import numba_impl
except ImportError:
    numba_impl = None


def make_case(rng, steps, hidden):
    wx = rng.uniform(-0.08, 0.08, size=(steps, 4 * hidden))
    wh = rng.uniform(-0.08, 0.08, size=(hidden, 4 * hidden))
    dh = rng.standard_normal((steps, hidden))
    return wx, wh, dh


def time_call(fn, *args, repeats):
    fn(*args)  # warm (and JIT, for the compiled backend)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench(impl, wx, wh, dh, repeats):
    fwd = time_call(impl.lstm_seq_forward, wx, wh, repeats=repeats)
    h_all, stash = impl.lstm_seq_forward(wx, wh)
    bwd = time_call(impl.lstm_seq_backward, dh, wh, h_all, stash, repeats=repeats)
    return fwd, bwd


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    header = f"{'steps':>6} {'hidden':>7} {'numpy fwd':>11} {'numpy bwd':>11}"
    if numba_impl is not None:
        header += f" {'numba fwd':>11} {'numba bwd':>11} {'fwd x':>7} {'bwd x':>7}"
    print(header)

    for steps in (8, 32, 128):
        for hidden in (16, 64, 256):
            wx, wh, dh = make_case(rng, steps, hidden)
            np_fwd, np_bwd = bench(numpy_impl, wx, wh, dh, args.repeats)
            row = (f"{steps:>6} {hidden:>7} {np_fwd * 1e6:>9.1f}us "
                   f"{np_bwd * 1e6:>9.1f}us")
            if numba_impl is not None:
                nb_fwd, nb_bwd = bench(numba_impl, wx, wh, dh, args.repeats)
                row += (f" {nb_fwd * 1e6:>9.1f}us {nb_bwd * 1e6:>9.1f}us"
                        f" {np_fwd / nb_fwd:>6.1f}x {np_bwd / nb_bwd:>6.1f}x")
            print(row)

    if numba_impl is None:
        print("\nnumba not importable; compiled backend skipped")


if __name__ == "__main__":
    main()

"""Timing comparison of the numba and pure-numpy kernel backends.

Runs every hot kernel at desk-scale shapes under both implementations,
reports per-call microseconds and the speedup ratio, and cross-checks that
the two backends agree numerically. The numba path is warmed (and its
compilation cached) before timing.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--batch N]
"""

import argparse
import time

import numpy as np

from lifegcn import kernels


def make_cases(batch, classes, dim):
    rng = np.random.default_rng(7)
    pre = rng.standard_normal((batch, classes))
    grad = rng.standard_normal((batch, classes))
    prob = rng.random((batch, classes)) * 0.98 + 0.01
    target = (rng.random((batch, classes)) < 0.3).astype(np.float64)
    labels = (rng.random((batch, classes)) < 0.3).astype(np.float64)
    soft = rng.random((batch, classes))
    param = rng.standard_normal((dim, dim))
    pgrad = rng.standard_normal((dim, dim))
    square = rng.random((classes, classes))
    ref = rng.standard_normal((classes, dim))
    cur = rng.standard_normal((classes + 2, dim))

    def fresh_counts():
        return (np.zeros((classes, classes), dtype=np.int64),
                np.zeros(classes, dtype=np.int64))

    def fresh_soft():
        return (np.zeros(classes), np.zeros((classes, classes)))

    def fresh_adam():
        return (param.copy(), pgrad, np.zeros_like(param),
                np.zeros_like(param))

    return {
        "leaky_relu": lambda impls: impls["leaky_relu"](pre, 0.2),
        "leaky_relu_grad": lambda impls: impls["leaky_relu_grad"](
            pre, grad, 0.2),
        "sigmoid": lambda impls: impls["sigmoid"](pre),
        "bce_loss_grad": lambda impls: impls["bce_loss_grad"](
            target, prob, 1e-7, 1.0 / batch),
        "adam_update": lambda impls: impls["adam_update"](
            *fresh_adam(), 1, 1e-3, 0.9, 0.999, 1e-4),
        "count_label_pairs": lambda impls: impls["count_label_pairs"](
            *fresh_counts(), labels),
        "accumulate_soft_stats": lambda impls: impls[
            "accumulate_soft_stats"](*fresh_soft(), soft, labels),
        "row_normalize": lambda impls: impls["row_normalize"](square),
        "squared_row_gap": lambda impls: impls["squared_row_gap"](ref, cur),
    }


def time_call(fn, impls, repeat):
    fn(impls)
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(impls)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=200)
    parser.add_argument("--batch", type=int, default=16)
    parser.add_argument("--classes", type=int, default=12)
    parser.add_argument("--dim", type=int, default=64)
    args = parser.parse_args()

    backends = kernels.available_backends()
    print(f"available backends: {', '.join(backends)}")
    if "numba" not in backends:
        print("numba not installed; timing the numpy backend only")

    cases = make_cases(args.batch, args.classes, args.dim)
    impls = {name: kernels.get_impls(name) for name in backends}

    header = f"{'kernel':<24}" + "".join(f"{b + ' (us)':>14}"
                                         for b in backends)
    if len(backends) == 2:
        header += f"{'ratio':>9}"
    print(header)
    for name, fn in cases.items():
        times = [time_call(fn, impls[b], args.repeat) for b in backends]
        row = f"{name:<24}" + "".join(f"{t * 1e6:>14.2f}" for t in times)
        if len(times) == 2 and times[1] > 0:
            row += f"{times[0] / times[1]:>9.2f}"
        print(row)


if __name__ == "__main__":
    main()

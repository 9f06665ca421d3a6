"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Timings are per 5 s ECG window at 500 Hz (2500 samples), the unit of work
the jobs run on. The ``window`` row is the whole preprocess + delineate path.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from healthcep import delineate, dsp, kernels
from healthcep.synth import ecg_train


def cases(impl, x, sos, zi, order, d):
    return {
        "sosfilt": lambda: impl.sosfilt(sos, x, zi),
        "extrema": lambda: impl.zero_crossing_extrema(d),
        "select_peaks": lambda: impl.select_peaks(x, order, 100),
    }


def window_path(impl_name: str, x: np.ndarray) -> float:
    """Seconds per window for znormalize -> bandpass -> delineate with one backend."""
    saved = (kernels.sosfilt, kernels.zero_crossing_extrema, kernels.select_peaks)
    impl = kernels.BACKENDS[impl_name]
    kernels.sosfilt, kernels.zero_crossing_extrema, kernels.select_peaks = (
        impl.sosfilt, impl.zero_crossing_extrema, impl.select_peaks)
    try:
        spec = dsp.FilterSpec.bandpass(0.5, 40, 4, 500)
        run = lambda: delineate.delineate_ecg(dsp.butterworth(dsp.znormalize(x), spec, "median"), 500)
        n, total = timeit.Timer(run).autorange()
        return total / n
    finally:
        kernels.sosfilt, kernels.zero_crossing_extrema, kernels.select_peaks = saved


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    x, _ = ecg_train(5.0, 500.0, 72.0)
    x = x + np.random.default_rng(0).normal(0, 0.01, len(x))
    sos = dsp.design_sos(dsp.FilterSpec.bandpass(0.5, 40, 4, 500))
    zi = np.ascontiguousarray(dsp.steady_state(sos) * x[0])
    xn = dsp.minmax_normalize(x)
    d = dsp.first_difference(xn)
    order = np.ascontiguousarray(np.argsort(-xn, kind="stable"), dtype=np.int64)

    names = sorted(kernels.BACKENDS)
    rows = {}
    for name in names:
        for case, fn in cases(kernels.BACKENDS[name], xn, sos, zi, order, d).items():
            n, _ = timeit.Timer(fn).autorange()
            best = min(timeit.repeat(fn, number=n, repeat=args.repeat)) / n
            rows.setdefault(case, {})[name] = best
        rows.setdefault("window", {})[name] = window_path(name, x)

    print(f"default backend: {kernels.BACKEND}")
    header = f"{'kernel':<14}" + "".join(f"{n:>14}" for n in names)
    if len(names) == 2:
        header += f"{'speed-up':>12}"
    print(header)
    for case, t in rows.items():
        line = f"{case:<14}" + "".join(f"{t[n] * 1e6:>11.1f} us" for n in names)
        if len(names) == 2:
            line += f"{t['python'] / t['cython']:>11.1f}x"
        print(line)
    if "cython" not in names:
        print("compiled extension not built; only the pure-Python backend was measured")


if __name__ == "__main__":
    main()

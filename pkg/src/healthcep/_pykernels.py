"""Pure-Python reference kernels.

Selected at import when the compiled ``_ckernels`` extension is missing
(or ``HEALTHCEP_PURE_PYTHON`` is set). Both backends must agree exactly on
integer outputs and to rounding on the filter.
"""
import numpy as np


def sosfilt(sos, x, zi):
    """Direct-form II transposed cascade. ``sos`` rows are normalized (a0 == 1).

    Returns ``(y, zf)``; ``zi`` is not modified.
    """
    sections = [tuple(float(c) for c in row) for row in sos]
    state = [[float(z[0]), float(z[1])] for z in zi]
    out = [0.0] * len(x)
    for n, xn in enumerate(x.tolist()):
        for (b0, b1, b2, _a0, a1, a2), z in zip(sections, state):
            yn = b0 * xn + z[0]
            z[0] = b1 * xn - a1 * yn + z[1]
            z[1] = b2 * xn - a2 * yn
            xn = yn
        out[n] = xn
    return np.asarray(out, dtype=np.float64), np.asarray(state, dtype=np.float64)


def zero_crossing_extrema(d):
    maxima = []
    minima = []
    prev = 0
    plateau_start = -1
    for i, v in enumerate(d.tolist()):
        s = (v > 0) - (v < 0)
        if s == 0:
            if plateau_start < 0:
                plateau_start = i
            continue
        if prev != 0 and s != prev:
            idx = plateau_start if plateau_start >= 0 else i
            (maxima if prev > 0 else minima).append(idx)
        prev = s
        plateau_start = -1
    return np.asarray(maxima, dtype=np.int64), np.asarray(minima, dtype=np.int64)


def select_peaks(x, order, refractory):
    """Greedy refractory selection over candidates pre-sorted by priority."""
    n = len(x)
    blocked = bytearray(n)
    accepted = []
    for i in order.tolist():
        if blocked[i]:
            continue
        accepted.append(i)
        lo = max(0, i - refractory + 1)
        hi = min(n, i + refractory)
        blocked[lo:hi] = b"\x01" * (hi - lo)
    accepted.sort()
    return np.asarray(accepted, dtype=np.int64)

"""Numerical building blocks for ECG/BP analytics.

Filtering runs a causal direct-form II transposed cascade of biquads; the
sample loop lives in :mod:`healthcep.kernels`. Filter *design* is delegated
to :func:`scipy.signal.butter`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import signal as _sig

from healthcep import kernels
from healthcep.errors import DegenerateSignal, InsufficientData, UnstableDesign

FILTER_KINDS = ("lowpass", "highpass", "bandpass")


@dataclass(frozen=True)
class FilterSpec:
    """Butterworth design. ``order`` is the overall filter order (even);
    a bandpass of order 4 is two biquads."""

    kind: str
    order: int
    cutoffs: tuple[float, ...]
    sample_rate: float

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.order < 2 or self.order % 2:
            raise ValueError("order must be a positive even integer")
        cutoffs = tuple(float(c) for c in np.atleast_1d(self.cutoffs))
        object.__setattr__(self, "cutoffs", cutoffs)
        nyq = self.sample_rate / 2
        want = 2 if self.kind == "bandpass" else 1
        if len(cutoffs) != want:
            raise ValueError(f"{self.kind} needs {want} cutoff(s)")
        if not all(0 < c < nyq for c in cutoffs):
            raise ValueError("cutoffs must lie strictly between 0 and Nyquist")
        if self.kind == "bandpass" and not cutoffs[0] < cutoffs[1]:
            raise ValueError("bandpass needs low < high")

    @classmethod
    def lowpass(cls, cutoff, order, sample_rate):
        return cls("lowpass", order, (cutoff,), sample_rate)

    @classmethod
    def highpass(cls, cutoff, order, sample_rate):
        return cls("highpass", order, (cutoff,), sample_rate)

    @classmethod
    def bandpass(cls, low, high, order, sample_rate):
        return cls("bandpass", order, (low, high), sample_rate)


class Spectrum(NamedTuple):
    freqs: np.ndarray
    power: np.ndarray


class Extrema(NamedTuple):
    maxima: np.ndarray
    minima: np.ndarray


def _as_series(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float64)


def minmax_normalize(x) -> np.ndarray:
    x = _as_series(x)
    if len(x) < 2:
        raise DegenerateSignal("need at least two samples")
    lo, hi = x.min(), x.max()
    if not hi > lo:
        raise DegenerateSignal("constant signal cannot be min-max normalized")
    return (x - lo) / (hi - lo)


def znormalize(x) -> np.ndarray:
    x = _as_series(x)
    sd = x.std()
    if len(x) < 2 or sd == 0:
        raise DegenerateSignal("zero variance")
    return (x - x.mean()) / sd


def design_sos(spec: FilterSpec) -> np.ndarray:
    # scipy's N is the prototype order; a bandpass doubles it
    n = spec.order // 2 if spec.kind == "bandpass" else spec.order
    cut = spec.cutoffs if spec.kind == "bandpass" else spec.cutoffs[0]
    sos = _sig.butter(n, cut, btype=spec.kind, fs=spec.sample_rate, output="sos")
    for row in sos:
        if np.any(np.abs(np.roots(row[3:])) >= 1.0):
            raise UnstableDesign(f"section pole on or outside the unit circle for {spec}")
    return np.ascontiguousarray(sos, dtype=np.float64)


def steady_state(sos: np.ndarray) -> np.ndarray:
    """Per-section DF2T state for a unit step input held forever."""
    zi = np.zeros((len(sos), 2))
    gain = 1.0
    for k, (b0, b1, b2, _a0, a1, a2) in enumerate(sos):
        g = (b0 + b1 + b2) / (1.0 + a1 + a2)
        y = gain * g
        z1 = gain * b2 - a2 * y
        z0 = gain * b1 - a1 * y + z1
        zi[k] = (z0, z1)
        gain = y
    return zi


def butterworth(x, spec: FilterSpec, initial: str = "steady") -> np.ndarray:
    """Causal Butterworth filtering.

    ``initial="steady"`` starts every section at the steady state for a
    constant input equal to ``x[0]`` (still causal, avoids the start-up
    step). ``"median"`` uses the series median as that constant, which
    keeps a window that opens mid-beat from inflating its first beat; it
    is not linear in ``x``. ``"zero"`` starts from rest.
    """
    x = _as_series(x)
    if len(x) <= 3 * spec.order:
        raise InsufficientData(f"need more than {3 * spec.order} samples")
    sos = design_sos(spec)
    if initial == "steady":
        zi = steady_state(sos) * x[0]
    elif initial == "median":
        zi = steady_state(sos) * float(np.median(x))
    elif initial == "zero":
        zi = np.zeros((len(sos), 2))
    else:
        raise ValueError(f"unknown initial condition {initial!r}")
    y, _ = kernels.sosfilt(sos, x, np.ascontiguousarray(zi))
    return y


def first_difference(x) -> np.ndarray:
    return np.diff(_as_series(x))


def zero_crossing_extrema(d) -> Extrema:
    """Indices (into the undifferenced series) where ``d`` changes sign.

    +→− marks a maximum, −→+ a minimum. Zero runs between opposite signs
    are plateaus; the first plateau index is reported.
    """
    maxima, minima = kernels.zero_crossing_extrema(_as_series(d))
    return Extrema(maxima, minima)


def peaks_above(x, threshold: float = 0.90, refractory: int = 100, extrema: Extrema | None = None) -> np.ndarray:
    """Local maxima strictly above ``threshold`` at least ``refractory`` samples apart.

    Conflicts keep the taller peak (earlier index on ties).
    """
    x = _as_series(x)
    if extrema is None:
        extrema = zero_crossing_extrema(first_difference(x))
    cand = extrema.maxima[x[extrema.maxima] > threshold]
    if len(cand) == 0:
        return cand.astype(np.int64)
    order = cand[np.lexsort((cand, -x[cand]))]
    return kernels.select_peaks(x, np.ascontiguousarray(order, dtype=np.int64), max(int(refractory), 1))


def psd(x, sample_rate: float) -> Spectrum:
    """One-sided periodogram of the mean-removed, Hann-windowed series.

    Scaled so that integrating over frequency recovers the variance
    (window power is compensated).
    """
    x = _as_series(x)
    n = len(x)
    if n < 16:
        raise InsufficientData("psd needs at least 16 samples")
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)  # periodic Hann
    spec = np.fft.rfft((x - x.mean()) * w)
    power = (np.abs(spec) ** 2) / (sample_rate * np.sum(w**2))
    if n % 2 == 0:
        power[1:-1] *= 2
    else:
        power[1:] *= 2
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    return Spectrum(freqs, power)


def band_power(s: Spectrum, lo: float, hi: float) -> float:
    """Trapezoidal integral of the linearly interpolated spectrum over [lo, hi]."""
    f, p = s.freqs, s.power
    if not (0 <= lo < hi <= f[-1] + 1e-12):
        raise ValueError(f"band [{lo}, {hi}] outside [0, {f[-1]}]")
    hi = min(hi, f[-1])
    inner = (f > lo) & (f < hi)
    ff = np.concatenate(([lo], f[inner], [hi]))
    pp = np.concatenate(([np.interp(lo, f, p)], p[inner], [np.interp(hi, f, p)]))
    return float(np.sum((ff[1:] - ff[:-1]) * (pp[1:] + pp[:-1]) / 2))


def total_power(s: Spectrum) -> float:
    return float(np.sum((s.freqs[1:] - s.freqs[:-1]) * (s.power[1:] + s.power[:-1]) / 2))


def tachogram(rr_ms, rate_hz: float = 4.0) -> np.ndarray:
    """Resample an RR series onto a uniform grid by linear interpolation.

    Each interval is placed at the time of the beat that ends it.
    """
    rr = _as_series(rr_ms)
    if len(rr) < 2:
        raise InsufficientData("need at least two RR intervals")
    t = np.cumsum(rr) / 1000.0
    grid = np.arange(t[0], t[-1] + 1e-9, 1.0 / rate_hz)
    return np.interp(grid, t, rr)

"""Synthetic ECG and arterial-pressure generators with known ground truth."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class Wave:
    offset_ms: float  # centre relative to the R peak
    amplitude: float
    width_ms: float  # gaussian sigma


@dataclass(frozen=True)
class EcgTemplate:
    p: Wave = Wave(-200.0, 0.15, 25.0)
    q: Wave = Wave(-40.0, -0.12, 10.0)
    r: Wave = Wave(0.0, 1.0, 12.0)
    s: Wave = Wave(40.0, -0.18, 10.0)
    t: Wave = Wave(250.0, 0.30, 40.0)
    st_shift: float = 0.0  # added between S and T (negative = depression)

    def waves(self):
        return (self.p, self.q, self.r, self.s, self.t)

    def with_(self, **kw) -> "EcgTemplate":
        return replace(self, **kw)


def ecg_from_r_times(r_times_ms, duration_ms: float, rate: float = 500.0, template: EcgTemplate | None = None):
    """Sum of gaussian PQRST bumps placed around each R time."""
    template = template or EcgTemplate()
    n = int(round(duration_ms * rate / 1000.0))
    t = np.arange(n) * (1000.0 / rate)
    x = np.zeros(n)
    for r in r_times_ms:
        lo = np.searchsorted(t, r - 500.0)
        hi = np.searchsorted(t, r + 600.0)
        tt = t[lo:hi] - r
        seg = x[lo:hi]
        for w in template.waves():
            seg += w.amplitude * np.exp(-0.5 * ((tt - w.offset_ms) / w.width_ms) ** 2)
        if template.st_shift:
            # smooth plateau spanning S+20 ms .. T-60 ms
            a, b = template.s.offset_ms + 20.0, template.t.offset_ms - 60.0
            ramp = 1 / (1 + np.exp(-(tt - a) / 6.0)) - 1 / (1 + np.exp(-(tt - b) / 6.0))
            seg += template.st_shift * ramp
    return x


def ecg_train(duration_s: float = 5.0, rate: float = 500.0, hr_bpm: float = 60.0,
              first_r_ms: float = 500.0, template: EcgTemplate | None = None):
    """Evenly spaced beats. Returns ``(signal, r_sample_indices)``."""
    period = 60_000.0 / hr_bpm
    duration_ms = duration_s * 1000.0
    r_times = np.arange(first_r_ms, duration_ms, period)
    x = ecg_from_r_times(r_times, duration_ms, rate, template)
    return x, np.round(r_times * rate / 1000.0).astype(np.int64)


def hrv_r_times(duration_s: float, mean_rr_ms: float = 800.0, lf_amp_ms: float = 30.0,
                hf_amp_ms: float = 20.0, lf_hz: float = 0.1, hf_hz: float = 0.25,
                jitter_ms: float = 5.0, seed: int = 0):
    """Beat times whose RR series is modulated in the LF and HF bands."""
    rng = np.random.default_rng(seed)
    times = []
    t = 300.0
    end = duration_s * 1000.0
    while t < end:
        times.append(t)
        s = t / 1000.0
        rr = (mean_rr_ms + lf_amp_ms * np.sin(2 * np.pi * lf_hz * s)
              + hf_amp_ms * np.sin(2 * np.pi * hf_hz * s) + rng.normal(0.0, jitter_ms))
        t += rr
    return np.asarray(times)


def arterial_pressure(duration_s: float, rate: float = 500.0, r_times_ms=None,
                      systolic: float = 120.0, diastolic: float = 80.0, hr_bpm: float = 75.0):
    """Pulse train: fast systolic upstroke and exponential diastolic runoff,
    scaled so steady-state peaks sit at ``systolic`` and troughs at ``diastolic``."""
    n = int(round(duration_s * rate))
    t = np.arange(n) * (1000.0 / rate)
    period = 60_000.0 / hr_bpm
    if r_times_ms is None:
        r_times_ms = np.arange(200.0, duration_s * 1000.0, period)
    r_times_ms = np.asarray(r_times_ms, dtype=np.float64)
    if len(r_times_ms) > 1:
        period = float(np.mean(np.diff(r_times_ms)))
    first = r_times_ms[0] if len(r_times_ms) else 0.0
    history = first - period * np.arange(8, 0, -1)  # settle the runoff before t = 0
    raw = np.zeros(n)
    for r in np.concatenate((history, r_times_ms)):
        onset = r + 150.0  # pulse transit
        lo = np.searchsorted(t, onset)
        if lo >= n:
            continue
        tt = t[lo:] - onset
        raw[lo:] += (1 - np.exp(-tt / 40.0)) * np.exp(-tt / 300.0)
    lo_v, hi_v = raw.min(), raw.max()
    return diastolic + (raw - lo_v) / (hi_v - lo_v) * (systolic - diastolic)

"""Heart-rate variability and the stepped short-term stress index."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from healthcep import dsp
from healthcep.delineate import INVALID_F
from healthcep.errors import DegenerateSpectrum, InsufficientData
from healthcep.windowing import RRBuffer

HF_EPSILON = 1e-12  # ms^2; below this the tachogram carries no variability
HF_FLOOR = 1e-9  # relative floor on HF so a pure LF tone gives a large finite ratio


def rmssd(rr: Sequence[float]) -> float:
    """Root mean square of successive RR differences (ms)."""
    rr = np.asarray(rr, dtype=np.float64)
    if len(rr) < 3:
        raise InsufficientData("rmssd needs at least 3 RR intervals")
    return rmssd_from_diffs(np.diff(rr))


def rmssd_from_diffs(diffs: Sequence[float]) -> float:
    d = np.asarray(diffs, dtype=np.float64)
    if len(d) < 2:
        raise InsufficientData("rmssd needs at least 2 successive differences")
    return float(np.sqrt(np.dot(d, d) / len(d)))


@dataclass(frozen=True)
class Bands:
    lf: tuple[float, float] = (0.04, 0.15)
    hf: tuple[float, float] = (0.15, 0.40)
    vlf: tuple[float, float] = (0.0, 0.04)


@dataclass(frozen=True)
class SpectralHrv:
    vlf: float
    lf: float
    hf: float
    ratio: float  # INVALID_F when HF vanishes


def lf_hf_from_tachogram(tach, rate_hz: float = 4.0, bands: Bands = Bands()) -> SpectralHrv:
    spec = dsp.psd(tach, rate_hz)
    lf = dsp.band_power(spec, *bands.lf)
    hf = dsp.band_power(spec, *bands.hf)
    vlf = dsp.band_power(spec, *bands.vlf)
    if lf + hf < HF_EPSILON:
        raise DegenerateSpectrum(f"LF+HF power {lf + hf:g} too small for a ratio")
    return SpectralHrv(vlf, lf, hf, lf / max(hf, HF_FLOOR * (lf + hf)))


def lf_hf_ratio(rr_ms: Sequence[float], rate_hz: float = 4.0, bands: Bands = Bands(),
                min_span_ms: float = 60_000.0) -> SpectralHrv:
    """LF/HF of an RR series covering at least ``min_span_ms``."""
    if math.fsum(rr_ms) < min_span_ms:
        raise InsufficientData("LF/HF needs at least one minute of RR data")
    return lf_hf_from_tachogram(dsp.tachogram(rr_ms, rate_hz), rate_hz, bands)


@dataclass
class StressResult:
    hr: float
    hrv: float
    lf: float
    hf: float
    lf_hf: float
    index: float
    buffer_full: bool


@dataclass
class StressState:
    """Per-user stress tracking.

    The baseline is the HRV of the previous window: falling HRV raises the
    index by ``step``, rising HRV lowers it, clamped to [0, 1].
    """

    step: float = 0.1
    index: float = 0.1
    baseline_hrv: float | None = None
    rr_buffer: RRBuffer = field(default_factory=RRBuffer)
    last_rr: float | None = None
    tachogram_rate_hz: float = 4.0
    bands: Bands = Bands()
    last_hr: float = INVALID_F
    last_hrv: float = INVALID_F
    last_lf: float = INVALID_F
    last_hf: float = INVALID_F

    def advance(self, hrv: float) -> float:
        """Move the index one step against the previous window's HRV."""
        if hrv < 0 or not math.isfinite(hrv):
            return self.index
        if self.baseline_hrv is not None:
            if hrv < self.baseline_hrv:
                self.index += self.step
            elif hrv > self.baseline_hrv:
                self.index -= self.step
            # repeated float steps must land on the decimal grid
            self.index = round(min(1.0, max(0.0, self.index)), 12)
        self.baseline_hrv = hrv
        self.last_hrv = hrv
        return self.index

    def update(self, window_rr: Sequence[float]) -> StressResult:
        rr = [float(v) for v in window_rr]
        chain = ([self.last_rr] if self.last_rr is not None else []) + rr
        diffs = [b - a for a, b in zip(chain, chain[1:])]
        self.rr_buffer.push(diffs, chain[1:] if diffs else [])
        if rr:
            self.last_rr = rr[-1]

        hr = 60_000.0 / (math.fsum(rr) / len(rr)) if rr else INVALID_F
        hrv = INVALID_F
        lf = hf = ratio = INVALID_F
        full = self.rr_buffer.full
        if full:
            hrv = rmssd_from_diffs(self.rr_buffer.snapshot())
            try:
                spec = lf_hf_ratio(self.rr_buffer.intervals(), self.tachogram_rate_hz, self.bands,
                                   self.rr_buffer.min_span_ms)
                lf, hf, ratio = spec.lf, spec.hf, spec.ratio
            except DegenerateSpectrum:
                lf = hf = ratio = INVALID_F
        elif len(rr) >= 3:
            hrv = rmssd(rr)
        index = self.advance(hrv)
        self.last_hr, self.last_lf, self.last_hf = hr, lf, hf
        return StressResult(hr, hrv, lf, hf, ratio, index, full)

    def reset_rr(self) -> None:
        """Forget RR history (e.g. after a gap in the beat sequence)."""
        self.last_rr = None
        self.rr_buffer.clear()

"""ECG key-point delineation, interval measurement, ST/T morphology and BP extremes.

Invalid measurements use the sentinel ``INVALID`` (-1 for indices and
flags, -1.0 for amplitudes and durations) instead of raising; consumers
must check validity before use.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from healthcep import dsp
from healthcep.errors import DegenerateSignal

INVALID = -1
INVALID_F = -1.0


@dataclass(frozen=True)
class DelineationConfig:
    r_threshold: float = 0.90
    refractory_ms: float = 200.0
    q_window_ms: float = 50.0
    s_window_ms: float = 50.0
    p_window_ms: tuple[float, float] = (250.0, 80.0)  # before R: (far, near)
    t_window_ms: tuple[float, float] = (80.0, 400.0)  # after R: (near, far)
    st_offset_ms: float = 80.0
    theta_st: float = 0.04
    theta_t: float = 0.0


@dataclass(frozen=True)
class EcgKeyPoints:
    r_idx: np.ndarray
    p_idx: np.ndarray
    q_idx: np.ndarray
    s_idx: np.ndarray
    t_idx: np.ndarray
    r_amp: np.ndarray
    p_amp: np.ndarray
    q_amp: np.ndarray
    s_amp: np.ndarray
    t_amp: np.ndarray
    signal: np.ndarray  # min-max normalized window
    sample_rate: float
    degenerate: bool = False

    @property
    def n_beats(self) -> int:
        return len(self.r_idx)


@dataclass(frozen=True)
class BeatIntervals:
    rr_ms: np.ndarray  # one per consecutive R pair
    qrs_ms: np.ndarray  # one per beat
    qt_ms: np.ndarray
    hr_bpm: float
    mean_qrs_ms: float
    mean_qt_ms: float


@dataclass(frozen=True)
class MorphologyFlags:
    st_depression: int
    st_elevation: int
    inverted_t: int


@dataclass(frozen=True)
class BpFeatures:
    sbp_mmhg: float
    dbp_mmhg: float


def _ms(ms: float, rate: float) -> int:
    return int(round(ms * rate / 1000.0))


def empty_keypoints(signal, rate, degenerate) -> EcgKeyPoints:
    e_i = np.zeros(0, dtype=np.int64)
    e_f = np.zeros(0)
    return EcgKeyPoints(e_i, e_i, e_i, e_i, e_i, e_f, e_f, e_f, e_f, e_f, signal, rate, degenerate)


def _pick(cands: np.ndarray, x: np.ndarray, lo: int, hi: int, n: int, best) -> int:
    """Best candidate strictly inside (lo, hi); INVALID if the range leaves the window."""
    if lo < 0 or hi > n - 1:
        return INVALID
    a = np.searchsorted(cands, lo, side="right")
    b = np.searchsorted(cands, hi, side="left")
    inside = cands[a:b]
    if len(inside) == 0:
        return INVALID
    return int(inside[best(x[inside])])


def delineate_ecg(values, sample_rate: float = 500.0, cfg: DelineationConfig = DelineationConfig()) -> EcgKeyPoints:
    """Locate R peaks and the P, Q, S, T points around each.

    ``values`` should already be filtered. R peaks are normalized-amplitude
    maxima above ``cfg.r_threshold``; Q/S are the deepest minima within
    the Q/S ranges, P the tallest maximum before R, and T the extremum
    after R that deviates most from the window median (so inverted T waves
    are located too).
    """
    x = np.asarray(values, dtype=np.float64)
    try:
        xn = dsp.minmax_normalize(x)
    except DegenerateSignal:
        return empty_keypoints(x * 0.0, sample_rate, True)
    n = len(xn)
    ext = dsp.zero_crossing_extrema(dsp.first_difference(xn))
    r = dsp.peaks_above(xn, cfg.r_threshold, max(1, _ms(cfg.refractory_ms, sample_rate)), ext)
    if len(r) == 0:
        return empty_keypoints(xn, sample_rate, False)
    both = np.union1d(ext.maxima, ext.minima)
    med = float(np.median(xn))

    def farthest(a):
        return np.argmax(np.abs(a - med))

    q_w, s_w = _ms(cfg.q_window_ms, sample_rate), _ms(cfg.s_window_ms, sample_rate)
    p_far, p_near = (_ms(v, sample_rate) for v in cfg.p_window_ms)
    t_near, t_far = (_ms(v, sample_rate) for v in cfg.t_window_ms)
    p, q, s, t = ([] for _ in range(4))
    for ri in r.tolist():
        q.append(_pick(ext.minima, xn, ri - q_w, ri, n, np.argmin))
        s.append(_pick(ext.minima, xn, ri, ri + s_w, n, np.argmin))
        p.append(_pick(ext.maxima, xn, ri - p_far, ri - p_near, n, np.argmax))
        t.append(_pick(both, xn, ri + t_near, ri + t_far, n, farthest))

    def amps(idx):
        idx = np.asarray(idx, dtype=np.int64)
        return idx, np.where(idx >= 0, xn[np.maximum(idx, 0)], INVALID_F)

    p_i, p_a = amps(p)
    q_i, q_a = amps(q)
    s_i, s_a = amps(s)
    t_i, t_a = amps(t)
    return EcgKeyPoints(r, p_i, q_i, s_i, t_i, xn[r], p_a, q_a, s_a, t_a, xn, sample_rate)


def _mean_valid(v: np.ndarray) -> float:
    ok = v[v >= 0]
    return float(ok.mean()) if len(ok) else INVALID_F


def beat_intervals(k: EcgKeyPoints, sample_rate: float | None = None) -> BeatIntervals:
    rate = k.sample_rate if sample_rate is None else sample_rate
    to_ms = 1000.0 / rate
    rr = np.diff(k.r_idx).astype(np.float64) * to_ms
    qs_ok = (k.q_idx >= 0) & (k.s_idx >= 0)
    qt_ok = (k.q_idx >= 0) & (k.t_idx >= 0)
    qrs = np.where(qs_ok, (k.s_idx - k.q_idx) * to_ms, INVALID_F)
    qt = np.where(qt_ok, (k.t_idx - k.q_idx) * to_ms, INVALID_F)
    hr = float(60_000.0 / rr.mean()) if len(rr) else INVALID_F
    return BeatIntervals(rr, qrs, qt, hr, _mean_valid(qrs), _mean_valid(qt))


def _majority(votes: list[bool]) -> int:
    if not votes:
        return INVALID
    return int(sum(votes) * 2 > len(votes))


def morphology(k: EcgKeyPoints, cfg: DelineationConfig = DelineationConfig()) -> MorphologyFlags:
    """Window-level ST depression/elevation and inverted-T flags.

    Per beat the isoelectric level is the signal at the PQ midpoint and the
    ST level the signal ``st_offset_ms`` after S. A window flag is set when
    most beats with the needed key-points show the pattern.
    """
    x = k.signal
    n = len(x)
    off = _ms(cfg.st_offset_ms, k.sample_rate)
    dep, elev, inv = [], [], []
    for p, q, s, t, t_amp in zip(k.p_idx, k.q_idx, k.s_idx, k.t_idx, k.t_amp):
        if p < 0 or q < 0:
            continue
        base = x[(p + q) // 2]
        if s >= 0 and s + off < n:
            st = x[s + off]
            dep.append(base - st > cfg.theta_st)
            elev.append(st - base > cfg.theta_st)
        if t >= 0:
            inv.append(t_amp - base < -cfg.theta_t)
    return MorphologyFlags(_majority(dep), _majority(elev), _majority(inv))


def bp_features(values) -> BpFeatures:
    """Mean of local maxima (SBP) and minima (DBP) of a filtered pressure trace, mmHg."""
    x = np.asarray(getattr(values, "values", values), dtype=np.float64)
    if len(x) < 3:
        return BpFeatures(INVALID_F, INVALID_F)
    ext = dsp.zero_crossing_extrema(dsp.first_difference(x))
    sbp = float(x[ext.maxima].mean()) if len(ext.maxima) >= 2 else INVALID_F
    dbp = float(x[ext.minima].mean()) if len(ext.minima) >= 2 else INVALID_F
    return BpFeatures(sbp, dbp)

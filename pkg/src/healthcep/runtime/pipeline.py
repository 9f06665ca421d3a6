"""Per-window analytics shared by the risk and stress jobs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from healthcep import delineate as dl
from healthcep import dsp, risk
from healthcep.config import Config, delineation_config
from healthcep.errors import DegenerateSignal, InsufficientData
from healthcep.wire import ResultKind, ResultRecord
from healthcep.windowing import SignalWindow


@dataclass(frozen=True)
class Analyzer:
    cfg: Config
    model: risk.NaiveBayesModel

    @classmethod
    def from_config(cls, cfg: Config) -> "Analyzer":
        model = risk.NaiveBayesModel.load(cfg.risk_model_path) if cfg.risk_model_path else risk.NaiveBayesModel()
        return cls(cfg, model)

    def preprocess_ecg(self, w: SignalWindow) -> np.ndarray | None:
        """z-normalize then band-pass; ``None`` for unusable windows."""
        return self._filter_ecg(w.values, w.sample_rate)

    def _filter_ecg(self, values: np.ndarray, rate: float) -> np.ndarray | None:
        c = self.cfg
        spec = dsp.FilterSpec.bandpass(c.filter_ecg_low_hz, c.filter_ecg_high_hz, c.filter_ecg_order, rate)
        try:
            return dsp.butterworth(dsp.znormalize(values), spec, initial="median")
        except (DegenerateSignal, InsufficientData):
            return None

    def preprocess_bp(self, w: SignalWindow) -> np.ndarray | None:
        c = self.cfg
        spec = dsp.FilterSpec.lowpass(c.filter_bp_cutoff_hz, c.filter_bp_order, w.sample_rate)
        try:
            return dsp.butterworth(w.values, spec)
        except InsufficientData:
            return None

    def keypoints(self, w: SignalWindow) -> dl.EcgKeyPoints:
        x = self.preprocess_ecg(w)
        if x is None:
            return dl.empty_keypoints(np.zeros(len(w)), w.sample_rate, True)
        return dl.delineate_ecg(x, w.sample_rate, delineation_config(self.cfg))

    def risk(self, ecg: SignalWindow, bp: SignalWindow | None) -> ResultRecord:
        k = self.keypoints(ecg)
        bi = dl.beat_intervals(k)
        mf = dl.morphology(k, delineation_config(self.cfg))
        fv = risk.extract_features(bi, mf)
        bpf = dl.BpFeatures(dl.INVALID_F, dl.INVALID_F)
        if bp is not None:
            x = self.preprocess_bp(bp)
            if x is not None:
                bpf = dl.bp_features(x)
        aux = {name: float(v) for name, v in fv.as_dict().items()}
        aux.update(
            beats=float(k.n_beats),
            hr_bpm=bi.hr_bpm,
            mean_qrs_ms=bi.mean_qrs_ms,
            mean_qt_ms=bi.mean_qt_ms,
            sbp_mmhg=bpf.sbp_mmhg,
            dbp_mmhg=bpf.dbp_mmhg,
            valid_features=float(sum(v != dl.INVALID for v in fv.values())),
        )
        value = risk.score(fv, self.model)
        kind = ResultKind.CHF_RISK
        if value < 0:  # withheld: no valid feature in this window
            kind, value = ResultKind.DIAGNOSTIC, 0.0
        return ResultRecord(ecg.user_id, kind, ecg.window_start, ecg.window_end, value, aux)

    def r_times(self, w: SignalWindow, context: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
        """Absolute R-peak times (ms) in an ECG window.

        ``context`` is ``(timestamps, values)`` of raw samples just before the
        window. Detecting over context + window finds beats whose peak sits
        on the boundary; callers drop the ones they already counted.
        """
        if context is None or len(context[0]) == 0:
            k = self.keypoints(w)
            return w.timestamps[k.r_idx]
        ts = np.concatenate((context[0], w.timestamps))
        x = self._filter_ecg(np.concatenate((context[1], w.values)), w.sample_rate)
        if x is None:
            return ts[:0]
        k = dl.delineate_ecg(x, w.sample_rate, delineation_config(self.cfg))
        return ts[k.r_idx]

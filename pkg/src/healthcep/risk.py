"""Congestive-heart-failure risk from seven binary ECG findings.

A naive Bayes log-odds score is mapped affinely onto [0, 100] using the
lowest and highest scores reachable with the features that are valid in
the window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from healthcep.config import parse_kv
from healthcep.delineate import INVALID, BeatIntervals, MorphologyFlags
from healthcep.errors import ConfigError, InvalidModel

FEATURES = ("hr_gt_80", "qrs_gt_100", "qrs_gt_120", "qt_gt_410", "st_depression", "st_elevation", "inverted_t")

# Illustrative stand-ins: P(finding | CHF), P(finding | no CHF).
DEFAULT_LIKELIHOODS = {
    "hr_gt_80": (0.60, 0.30),
    "qrs_gt_100": (0.50, 0.20),
    "qrs_gt_120": (0.35, 0.08),
    "qt_gt_410": (0.45, 0.15),
    "st_depression": (0.40, 0.10),
    "st_elevation": (0.30, 0.08),
    "inverted_t": (0.40, 0.12),
}


@dataclass(frozen=True)
class ChfFeatureVector:
    hr_gt_80: int
    qrs_gt_100: int
    qrs_gt_120: int
    qt_gt_410: int
    st_depression: int
    st_elevation: int
    inverted_t: int

    def __post_init__(self):
        for name in FEATURES:
            if getattr(self, name) not in (0, 1, INVALID):
                raise ValueError(f"{name} must be 0, 1 or INVALID")

    def as_dict(self) -> dict[str, int]:
        return {name: getattr(self, name) for name in FEATURES}

    def values(self) -> tuple[int, ...]:
        return tuple(getattr(self, name) for name in FEATURES)

    @classmethod
    def from_values(cls, values) -> "ChfFeatureVector":
        return cls(*values)


@dataclass(frozen=True)
class NaiveBayesModel:
    prior: float = 0.1
    likelihoods: Mapping[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_LIKELIHOODS))

    def __post_init__(self):
        if not 0 < self.prior < 1:
            raise InvalidModel("prior must lie in (0, 1)")
        missing = set(FEATURES) - set(self.likelihoods)
        extra = set(self.likelihoods) - set(FEATURES)
        if missing or extra:
            raise InvalidModel(f"model features mismatch: missing {sorted(missing)}, unknown {sorted(extra)}")
        for name, (p, q) in self.likelihoods.items():
            if not (0 < p < 1 and 0 < q < 1):
                raise InvalidModel(f"{name}: probabilities must lie in (0, 1)")
            if not p > q:
                raise InvalidModel(f"{name}: P(f|CHF) must exceed P(f|healthy)")

    def log_terms(self, name: str) -> tuple[float, float]:
        """(contribution when the finding is present, when absent)."""
        p, q = self.likelihoods[name]
        return math.log(p / q), math.log((1 - p) / (1 - q))

    def weight(self, name: str) -> float:
        on, off = self.log_terms(name)
        return on - off

    @classmethod
    def load(cls, path: str | Path) -> "NaiveBayesModel":
        """Read ``prior = x`` and ``<feature>.p`` / ``<feature>.q`` lines."""
        kv = parse_kv(Path(path).read_text())
        prior = float(kv.pop("prior", 0.1))
        lik = dict(DEFAULT_LIKELIHOODS)
        for key, val in kv.items():
            name, _, which = key.rpartition(".")
            if name not in FEATURES or which not in ("p", "q"):
                raise ConfigError(f"unknown model key {key!r}")
            p, q = lik[name]
            lik[name] = (float(val), q) if which == "p" else (p, float(val))
        return cls(prior, lik)


def _gt(value: float, limit: float) -> int:
    return INVALID if value < 0 else int(value > limit)


def extract_features(bi: BeatIntervals, mf: MorphologyFlags) -> ChfFeatureVector:
    return ChfFeatureVector(
        hr_gt_80=_gt(bi.hr_bpm, 80.0),
        qrs_gt_100=_gt(bi.mean_qrs_ms, 100.0),
        qrs_gt_120=_gt(bi.mean_qrs_ms, 120.0),
        qt_gt_410=_gt(bi.mean_qt_ms, 410.0),
        st_depression=mf.st_depression,
        st_elevation=mf.st_elevation,
        inverted_t=mf.inverted_t,
    )


def log_odds(fv: ChfFeatureVector, m: NaiveBayesModel) -> tuple[float, float, float]:
    """``(L, L_min, L_max)`` over the valid features; the bounds use all-0 / all-1."""
    base = math.log(m.prior / (1 - m.prior))
    score = lo = hi = base
    for name in FEATURES:
        f = getattr(fv, name)
        if f == INVALID:
            continue
        on, off = m.log_terms(name)
        score += on if f else off
        lo += off
        hi += on
    return score, lo, hi


def score(fv: ChfFeatureVector, m: NaiveBayesModel | None = None) -> float:
    """Risk percent in [0, 100]; ``INVALID`` (-1.0) when no feature is valid."""
    m = m or NaiveBayesModel()
    if all(f == INVALID for f in fv.values()):
        return float(INVALID)
    # L - L_min is the summed weight of the present findings, L_max - L_min
    # the summed weight of all valid ones; this keeps the endpoints exact
    on = [m.weight(n) for n in FEATURES if getattr(fv, n) == 1]
    valid = [m.weight(n) for n in FEATURES if getattr(fv, n) != INVALID]
    return min(100.0, max(0.0, 100.0 * (math.fsum(on) / math.fsum(valid))))

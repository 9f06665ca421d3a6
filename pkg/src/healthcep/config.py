"""Flat ``key = value`` configuration with namespaced keys.

Lines starting with ``#`` are comments. Unknown keys are rejected so
typos surface as errors instead of silently falling back to defaults.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from healthcep.errors import ConfigError


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {n}: empty key")
        out[key] = val
    return out


@dataclass(frozen=True)
class Config:
    broker_address: str = "127.0.0.1:9092"
    broker_retention_ms: float = float("inf")
    topic_ecg: str = "ecg"
    topic_bp: str = "bp"
    topic_risk: str = "chf_risk"
    topic_stress: str = "stress"
    ecg_rate_hz: float = 500.0
    bp_rate_hz: float = 500.0
    timestamp_unit: str = "ms"
    window_ms: int = 5000
    lateness_ms: int = 500
    rr_capacity: int = 512
    filter_ecg_low_hz: float = 0.5
    filter_ecg_high_hz: float = 40.0
    filter_ecg_order: int = 4
    filter_bp_cutoff_hz: float = 10.0
    filter_bp_order: int = 4
    r_threshold: float = 0.90
    refractory_ms: float = 200.0
    q_window_ms: float = 50.0
    s_window_ms: float = 50.0
    p_window_far_ms: float = 250.0
    p_window_near_ms: float = 80.0
    t_window_near_ms: float = 80.0
    t_window_far_ms: float = 400.0
    st_offset_ms: float = 80.0
    theta_st: float = 0.04
    theta_t: float = 0.0
    risk_model_path: str = ""
    risk_bp_wait_ms: int = 10_000
    stress_initial: float = 0.1
    stress_step: float = 0.1
    stress_tachogram_rate_hz: float = 4.0
    stress_lf_low_hz: float = 0.04
    stress_lf_high_hz: float = 0.15
    stress_hf_low_hz: float = 0.15
    stress_hf_high_hz: float = 0.40
    stress_max_rr_ms: float = 2000.0
    stress_context_ms: float = 500.0
    store_dir: str = "results"
    job_group: str = ""
    poll_batch: int = 5000
    stats_interval_s: float = 10.0

    @classmethod
    def from_file(cls, path: str | Path) -> "Config":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_mapping(parse_kv(text))

    @classmethod
    def from_mapping(cls, kv: dict[str, str]) -> "Config":
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for key, raw in kv.items():
            attr = KEY_ALIASES.get(key, key.replace(".", "_"))
            if attr not in types:
                raise ConfigError(f"unknown config key {key!r}")
            kind = types[attr]
            try:
                values[attr] = int(raw) if kind == "int" else float(raw) if kind == "float" else raw
            except ValueError:
                raise ConfigError(f"{key}: expected {kind}, got {raw!r}") from None
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def with_(self, **kw) -> "Config":
        return replace(self, **kw)

    def validate(self) -> None:
        if self.window_ms <= 0 or self.lateness_ms < 0:
            raise ConfigError("window.ms must be positive and window.lateness_ms nonnegative")
        if self.rr_capacity < 1:
            raise ConfigError("window.rr_capacity must be >= 1")
        if self.timestamp_unit not in ("ms", "seconds"):
            raise ConfigError("wire.timestamp_unit must be ms or seconds")
        if self.stress_context_ms < 0:
            raise ConfigError("stress.context_ms must be non-negative")
        if not 0 <= self.stress_initial <= 1 or self.stress_step <= 0:
            raise ConfigError("stress.initial must be in [0,1] and stress.step positive")
        if not (0 <= self.stress_lf_low_hz < self.stress_lf_high_hz
                and self.stress_hf_low_hz < self.stress_hf_high_hz <= self.stress_tachogram_rate_hz / 2):
            raise ConfigError("invalid LF/HF band edges")


# Documented dotted names that do not map mechanically onto attribute names.
KEY_ALIASES = {
    "broker.retention_ms": "broker_retention_ms",
    "window.ms": "window_ms",
    "window.lateness_ms": "lateness_ms",
    "window.rr_capacity": "rr_capacity",
    "topics.ecg": "topic_ecg",
    "topics.bp": "topic_bp",
    "topics.risk": "topic_risk",
    "topics.stress": "topic_stress",
    "signal.ecg.rate_hz": "ecg_rate_hz",
    "signal.bp.rate_hz": "bp_rate_hz",
    "wire.timestamp_unit": "timestamp_unit",
    "delineate.r_threshold": "r_threshold",
    "delineate.refractory_ms": "refractory_ms",
    "delineate.q_window_ms": "q_window_ms",
    "delineate.s_window_ms": "s_window_ms",
    "delineate.p_window_far_ms": "p_window_far_ms",
    "delineate.p_window_near_ms": "p_window_near_ms",
    "delineate.t_window_near_ms": "t_window_near_ms",
    "delineate.t_window_far_ms": "t_window_far_ms",
    "delineate.st_offset_ms": "st_offset_ms",
    "delineate.theta_st": "theta_st",
    "delineate.theta_t": "theta_t",
    "risk.model.path": "risk_model_path",
    "risk.bp_wait_ms": "risk_bp_wait_ms",
    "stress.lf_low_hz": "stress_lf_low_hz",
    "stress.lf_high_hz": "stress_lf_high_hz",
    "stress.hf_low_hz": "stress_hf_low_hz",
    "stress.hf_high_hz": "stress_hf_high_hz",
    "job.group": "job_group",
    "job.poll_batch": "poll_batch",
    "job.stats_interval_s": "stats_interval_s",
}


def delineation_config(cfg: Config):
    from healthcep.delineate import DelineationConfig

    return DelineationConfig(
        r_threshold=cfg.r_threshold,
        refractory_ms=cfg.refractory_ms,
        q_window_ms=cfg.q_window_ms,
        s_window_ms=cfg.s_window_ms,
        p_window_ms=(cfg.p_window_far_ms, cfg.p_window_near_ms),
        t_window_ms=(cfg.t_window_near_ms, cfg.t_window_far_ms),
        st_offset_ms=cfg.st_offset_ms,
        theta_st=cfg.theta_st,
        theta_t=cfg.theta_t,
    )

"""Shared end-to-end driver: synthetic input files, producers and both jobs on threads."""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from healthcep.config import Config
from healthcep.runtime.cli import main as cli_main
from healthcep.runtime.jobs import JOBS
from healthcep.runtime.producer import Producer, ReplaySpec
from healthcep.runtime.store import ResultStore
from healthcep.wire import DataType


def write_inputs(out: Path, users=("101", "102"), minutes=1.0, seed=0) -> dict:
    """Synthetic ECG/BP files via the CLI; returns {(user, DataType): path}."""
    rc = cli_main(["synth", "--out", str(out), "--users", ",".join(users), "--minutes", str(minutes),
                   "--seed", str(seed)])
    assert rc == 0
    files = {}
    for u in users:
        files[(u, DataType.ECG)] = out / f"ecg_{u}.csv"
        files[(u, DataType.BP)] = out / f"bp_{u}.csv"
    return files


@dataclass
class RunReport:
    elapsed_s: float
    job_stats: dict = field(default_factory=dict)
    published: dict = field(default_factory=dict)


def run_pipeline(broker, files: dict, store_dir: Path, cfg: Config = Config(), jobs=("risk", "stress"),
                 run_id="run", clock="afap", speed=1.0, timeout_s=300.0) -> RunReport:
    """Replay every file concurrently, run the jobs until the inputs are drained."""
    t0 = time.perf_counter()
    stop_jobs = threading.Event()
    producers = []
    for (user, dtype), path in sorted(files.items()):
        topic = cfg.topic_ecg if dtype == DataType.ECG else cfg.topic_bp
        broker.create_topic(topic, cfg.broker_retention_ms)
        spec = ReplaySpec(path, user, dtype, cfg.ecg_rate_hz, clock, speed)
        producers.append(Producer(broker, spec, topic=topic))
    p_threads = [threading.Thread(target=p.run, daemon=True) for p in producers]
    for t in p_threads:
        t.start()
    # every stream has shown up before any job looks at it, so BP pairing never times out
    for p in producers:
        assert p.started.wait(timeout_s)
    running = []
    for kind in jobs:
        job = JOBS[kind](broker, cfg, ResultStore(store_dir, kind, run_id=run_id))
        th = threading.Thread(target=job.run, args=(stop_jobs,), kwargs={"poll_wait_s": 0.01}, daemon=True)
        running.append((job, th))
        th.start()
    for t in p_threads:
        t.join(timeout_s)
    stop_jobs.set()
    for _, th in running:
        th.join(timeout_s)
        assert not th.is_alive(), "job did not finish"
    report = RunReport(time.perf_counter() - t0)
    report.job_stats = {job.kind: job.stats() for job, _ in running}
    report.published = {(p.spec.user_id, p.spec.data_type): p.stats.published for p in producers}
    return report


def store_bytes(store_dir: Path) -> dict[str, bytes]:
    """Result files keyed by relative path, with ``#`` comment lines removed."""
    out = {}
    for p in sorted(Path(store_dir).rglob("*.ldjson")):
        lines = [ln for ln in p.read_bytes().splitlines(keepends=True) if not ln.startswith(b"#")]
        out[str(p.relative_to(store_dir))] = b"".join(lines)
    return out

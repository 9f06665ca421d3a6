"""Replay a recorded signal file onto the broker at a controlled pace."""
from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from healthcep.errors import SourceUnreadable
from healthcep.wire import DataType, SampleRecord, encode_sample

log = logging.getLogger(__name__)

CLOCK_MODES = ("realtime", "accelerated", "afap")


@dataclass(frozen=True)
class ReplaySpec:
    path: str | Path
    user_id: str
    data_type: DataType
    sample_rate: float = 500.0
    clock: str = "afap"
    speed: float = 1.0  # accelerated: k times faster than real time
    loop: bool = False
    topic: str | None = None
    start_ms: int = 0
    max_loops: int | None = None

    def __post_init__(self):
        if self.clock not in CLOCK_MODES:
            raise ValueError(f"clock must be one of {CLOCK_MODES}")
        if self.sample_rate <= 0 or self.speed <= 0:
            raise ValueError("sample_rate and speed must be positive")
        object.__setattr__(self, "data_type", DataType(self.data_type))


@dataclass
class ReplayStats:
    published: int = 0
    malformed_rows: int = 0
    loops: int = 0


def read_rows(path: str | Path, sample_rate: float, stats: ReplayStats | None = None):
    """``(timestamp_ms, value)`` rows from ``ts,value`` or bare ``value`` CSV.

    Timestamps are synthesized at the nominal rate when the file has none.
    A non-numeric first line is treated as a header.
    """
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise SourceUnreadable(str(exc)) from None
    rows = []
    step = 1000.0 / sample_rate
    n_bare = 0
    with fh:
        for lineno, raw in enumerate(fh):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                if len(parts) == 1:
                    rows.append((int(round(n_bare * step)), float(parts[0])))
                    n_bare += 1
                elif len(parts) == 2:
                    rows.append((int(float(parts[0])), float(parts[1])))
                else:
                    raise ValueError
            except ValueError:
                if lineno > 0 and stats is not None:
                    stats.malformed_rows += 1
    return rows


class Producer:
    def __init__(self, broker, spec: ReplaySpec, topic: str | None = None, batch: int = 1000):
        self.broker = broker
        self.spec = spec
        self.topic = topic or spec.topic or spec.data_type.value.lower()
        self.batch = batch
        self.stats = ReplayStats()
        self.started = threading.Event()
        self.publish_times: list[float] = []  # wall clock per publish in paced modes

    def _records(self, rows):
        spec = self.spec
        step = 1000.0 / spec.sample_rate
        shift = spec.start_ms
        loops = 0
        while True:
            last = None
            for ts, value in rows:
                try:
                    rec = SampleRecord(spec.user_id, spec.data_type, value, ts + shift)
                except Exception:
                    self.stats.malformed_rows += 1
                    continue
                last = rec.timestamp
                yield rec
            loops += 1
            self.stats.loops = loops
            if not spec.loop or last is None or (spec.max_loops is not None and loops >= spec.max_loops):
                return
            shift = int(round(last + step)) - rows[0][0]

    def run(self, stop: threading.Event | None = None) -> ReplayStats:
        stop = stop or threading.Event()
        rows = read_rows(self.spec.path, self.spec.sample_rate, self.stats)
        if self.spec.clock == "afap":
            self._run_afap(rows, stop)
        else:
            self._run_paced(rows, stop)
        self.started.set()
        log.info("producer %s/%s published=%d malformed=%d", self.spec.user_id, self.topic,
                 self.stats.published, self.stats.malformed_rows)
        return self.stats

    def _run_afap(self, rows, stop):
        buf = []
        for rec in self._records(rows):
            buf.append(encode_sample(rec))
            if len(buf) >= self.batch:
                self.broker.publish_many(self.topic, buf)
                self.stats.published += len(buf)
                self.started.set()
                buf = []
                if stop.is_set():
                    return
        if buf:
            self.broker.publish_many(self.topic, buf)
            self.stats.published += len(buf)

    def _run_paced(self, rows, stop):
        speed = 1.0 if self.spec.clock == "realtime" else self.spec.speed
        wall0 = None
        ts0 = None
        for rec in self._records(rows):
            if wall0 is None:
                wall0, ts0 = time.perf_counter(), rec.timestamp
            due = wall0 + (rec.timestamp - ts0) / 1000.0 / speed
            delay = due - time.perf_counter()
            if delay > 0:
                if stop.wait(delay):
                    return
            elif stop.is_set():
                return
            self.broker.publish(self.topic, encode_sample(rec))
            self.publish_times.append(time.perf_counter())
            self.stats.published += 1
            self.started.set()


def run_producer(broker, spec: ReplaySpec, stop: threading.Event | None = None) -> ReplayStats:
    return Producer(broker, spec).run(stop)

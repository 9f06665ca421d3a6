"""Embedded topic-based publish/subscribe log.

Each topic is an append-only sequence of wire lines addressed by a
monotone offset. Consumer groups keep a committed offset per topic;
``poll`` never advances it. Records older than the topic's retention are
removed by ``prune``; a consumer positioned inside the pruned range
resumes at the oldest surviving record and is told so via ``gap``.

With a ``data_dir`` the broker persists to one directory per topic::

    <data_dir>/<topic>/meta.json        retention and base offset
    <data_dir>/<topic>/records.ldjson   one wire line per record
    <data_dir>/<topic>/arrivals.txt     arrival time (ms) per record
    <data_dir>/<topic>/cursors.tsv      group<TAB>offset lines

New records are appended to disk on commit and on ``close``.
"""
from __future__ import annotations

import json
import math
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, NamedTuple

from healthcep.errors import ConflictingRetention, OffsetAhead, UnknownTopic

INFINITE = math.inf


def wall_clock_ms() -> int:
    return int(time.time() * 1000)


class PollResult(NamedTuple):
    records: list[tuple[int, str]]
    gap: bool
    next_offset: int


@dataclass(frozen=True)
class Cursor:
    group_id: str
    topic: str


class TopicLog:
    def __init__(self, name: str, retention: float):
        self.name = name
        self.retention = retention
        self.base = 0  # offset of payloads[0]
        self.payloads: list[str] = []
        self.arrivals: list[int] = []
        self.cursors: dict[str, int] = {}
        self.lock = threading.Lock()
        self.cond = threading.Condition(self.lock)
        self.flushed = 0  # absolute offset up to which records are on disk
        self.dirty_cursors = False

    @property
    def head(self) -> int:
        return self.base + len(self.payloads)

    def read(self, offset: int, max_records: int) -> PollResult:
        gap = offset < self.base
        start = max(offset, self.base) - self.base
        chunk = self.payloads[start : start + max_records]
        first = self.base + start
        return PollResult([(first + i, p) for i, p in enumerate(chunk)], gap, first + len(chunk))


class Broker:
    """Thread-safe in-process broker.

    ``clock`` returns the current time in ms and stamps record arrival.
    """

    def __init__(self, data_dir: str | os.PathLike | None = None, clock: Callable[[], int] = wall_clock_ms):
        self._topics: dict[str, TopicLog] = {}
        self._lock = threading.Lock()
        self._clock = clock
        self.data_dir = Path(data_dir) if data_dir is not None else None
        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            self._recover()

    # -- topic management -------------------------------------------------

    def create_topic(self, name: str, retention: float = INFINITE) -> TopicLog:
        if not name or any(c in name for c in "/\\\n\t ") or name.startswith("."):
            raise ValueError(f"invalid topic name {name!r}")
        if retention is None:
            retention = INFINITE
        if retention <= 0:
            raise ValueError("retention must be positive")
        with self._lock:
            log = self._topics.get(name)
            if log is not None:
                if log.retention != retention:
                    raise ConflictingRetention(f"topic {name!r} exists with retention {log.retention}")
                return log
            log = TopicLog(name, retention)
            self._topics[name] = log
            if self.data_dir is not None:
                self._write_meta(log)
            return log

    def topics(self) -> list[str]:
        with self._lock:
            return sorted(self._topics)

    def _log(self, topic: str) -> TopicLog:
        try:
            return self._topics[topic]
        except KeyError:
            raise UnknownTopic(f"unknown topic {topic!r}") from None

    # -- data path --------------------------------------------------------

    def publish(self, topic: str, payload: str) -> int:
        log = self._log(topic)
        payload = _line(payload)
        now = self._clock()
        with log.cond:
            offset = log.head
            log.payloads.append(payload)
            log.arrivals.append(now)
            log.cond.notify_all()
        return offset

    def publish_many(self, topic: str, payloads: Iterable[str]) -> list[int]:
        log = self._log(topic)
        payloads = [_line(p) for p in payloads]
        now = self._clock()
        with log.cond:
            first = log.head
            log.payloads.extend(payloads)
            log.arrivals.extend([now] * len(payloads))
            log.cond.notify_all()
        return list(range(first, first + len(payloads)))

    def fetch(self, topic: str, offset: int, max_records: int) -> PollResult:
        """Read up to ``max_records`` starting at ``offset``; no cursor involved."""
        log = self._log(topic)
        with log.lock:
            return log.read(offset, max_records)

    def poll(self, cursor: Cursor | str, max_records: int, group: str | None = None) -> PollResult:
        """Records from the group's committed offset on. Does not commit."""
        cursor = _cursor(cursor, group)
        log = self._log(cursor.topic)
        with log.lock:
            return log.read(log.cursors.get(cursor.group_id, 0), max_records)

    def wait(self, topic: str, offset: int, timeout: float) -> bool:
        """Block until the log head passes ``offset`` or ``timeout`` elapses."""
        log = self._log(topic)
        with log.cond:
            return log.cond.wait_for(lambda: log.head > offset, timeout)

    def committed(self, cursor: Cursor | str, group: str | None = None) -> int:
        cursor = _cursor(cursor, group)
        log = self._log(cursor.topic)
        with log.lock:
            return log.cursors.get(cursor.group_id, 0)

    def commit(self, cursor: Cursor | str, offset: int, group: str | None = None) -> int:
        cursor = _cursor(cursor, group)
        log = self._log(cursor.topic)
        with log.lock:
            if offset > log.head:
                raise OffsetAhead(f"offset {offset} beyond head {log.head} of {cursor.topic!r}")
            current = log.cursors.get(cursor.group_id, 0)
            new = max(current, offset)
            log.cursors[cursor.group_id] = new
            log.dirty_cursors = True
        if self.data_dir is not None:
            self._persist(log)
        return new

    def end_offset(self, topic: str) -> int:
        log = self._log(topic)
        with log.lock:
            return log.head

    def start_offset(self, topic: str) -> int:
        log = self._log(topic)
        with log.lock:
            return log.base

    def prune(self, topic: str, now: int | None = None) -> int:
        log = self._log(topic)
        if now is None:
            now = self._clock()
        with log.lock:
            if math.isinf(log.retention):
                return 0
            cutoff = now - log.retention
            n = 0
            for t in log.arrivals:  # arrivals are nondecreasing
                if t >= cutoff:
                    break
                n += 1
            if n:
                del log.payloads[:n]
                del log.arrivals[:n]
                log.base += n
        if n and self.data_dir is not None:
            self._rewrite(log)
        return n

    # -- persistence ------------------------------------------------------

    def close(self) -> None:
        if self.data_dir is None:
            return
        with self._lock:
            logs = list(self._topics.values())
        for log in logs:
            self._persist(log)

    def _topic_dir(self, log: TopicLog) -> Path:
        return self.data_dir / log.name

    def _write_meta(self, log: TopicLog) -> None:
        d = self._topic_dir(log)
        d.mkdir(parents=True, exist_ok=True)
        retention = None if math.isinf(log.retention) else log.retention
        _atomic_write(d / "meta.json", json.dumps({"retention_ms": retention, "base_offset": log.base}) + "\n")

    def _persist(self, log: TopicLog) -> None:
        d = self._topic_dir(log)
        with log.lock:
            if log.flushed < log.base:  # pruned past what was on disk
                log.flushed = log.base
            start = log.flushed - log.base
            new_payloads = log.payloads[start:]
            new_arrivals = log.arrivals[start:]
            log.flushed = log.head
            cursors = dict(log.cursors) if log.dirty_cursors else None
            log.dirty_cursors = False
        if new_payloads:
            with open(d / "records.ldjson", "a", encoding="utf-8") as fh:
                fh.writelines(new_payloads)
            with open(d / "arrivals.txt", "a", encoding="utf-8") as fh:
                fh.writelines(f"{t}\n" for t in new_arrivals)
        if cursors is not None:
            _atomic_write(d / "cursors.tsv", "".join(f"{g}\t{o}\n" for g, o in sorted(cursors.items())))

    def _rewrite(self, log: TopicLog) -> None:
        d = self._topic_dir(log)
        with log.lock:
            payloads = log.payloads[: max(0, log.flushed - log.base)]
            arrivals = log.arrivals[: len(payloads)]
            self._write_meta(log)
            _atomic_write(d / "records.ldjson", "".join(payloads))
            _atomic_write(d / "arrivals.txt", "".join(f"{t}\n" for t in arrivals))

    def _recover(self) -> None:
        for meta_path in sorted(self.data_dir.glob("*/meta.json")):
            d = meta_path.parent
            meta = json.loads(meta_path.read_text())
            retention = meta.get("retention_ms")
            log = TopicLog(d.name, INFINITE if retention is None else retention)
            log.base = int(meta.get("base_offset", 0))
            rec = d / "records.ldjson"
            arr = d / "arrivals.txt"
            if rec.exists():
                with open(rec, encoding="utf-8") as fh:
                    log.payloads = [line for line in fh if line.endswith("\n")]
            if arr.exists():
                log.arrivals = [int(x) for x in arr.read_text().split()]
            n = min(len(log.payloads), len(log.arrivals))
            del log.payloads[n:]
            del log.arrivals[n:]
            log.flushed = log.head
            cur = d / "cursors.tsv"
            if cur.exists():
                for line in cur.read_text().splitlines():
                    if line.strip():
                        group, off = line.rsplit("\t", 1)
                        log.cursors[group] = min(int(off), log.head)
            self._topics[log.name] = log


def _cursor(cursor: Cursor | str, group: str | None) -> Cursor:
    if isinstance(cursor, Cursor):
        return cursor
    if group is None:
        raise TypeError("group is required when passing a topic name")
    return Cursor(group, cursor)


def _line(payload: str) -> str:
    if not payload.endswith("\n"):
        payload += "\n"
    if "\n" in payload[:-1]:
        raise ValueError("payload must be a single line")
    return payload


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class Consumer:
    """A group member reading one topic from a local position.

    The position starts at the committed offset; ``poll`` advances only
    the local position. ``commit`` makes progress durable.
    """

    def __init__(self, broker, topic: str, group: str):
        self.broker = broker
        self.topic = topic
        self.group = group
        self.position = broker.committed(Cursor(group, topic))
        self.gaps = 0

    def poll(self, max_records: int = 1000) -> list[tuple[int, str]]:
        res = self.broker.fetch(self.topic, self.position, max_records)
        if res.gap:
            self.gaps += 1
        self.position = res.next_offset
        return res.records

    def commit(self, offset: int | None = None) -> int:
        return self.broker.commit(Cursor(self.group, self.topic), self.position if offset is None else offset)

    def seek(self, offset: int) -> None:
        self.position = offset


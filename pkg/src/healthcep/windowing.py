"""Event-time tumbling windows per (user, signal) and the RR-difference ring buffer."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from healthcep.wire import DataType, SampleRecord

MIN_RR_SPAN_MS = 60_000.0


class WindowKey(NamedTuple):
    user_id: str
    data_type: DataType
    index: int


@dataclass(frozen=True)
class SignalWindow:
    user_id: str
    data_type: DataType
    window_start: int
    window_length: int
    timestamps: np.ndarray
    values: np.ndarray
    sample_rate: float
    first_offset: int | None = None  # lowest source-log offset among the samples

    def __post_init__(self):
        ts = self.timestamps
        if len(ts) != len(self.values):
            raise ValueError("timestamps and values differ in length")
        if len(ts) and (ts[0] < self.window_start or ts[-1] >= self.window_end):
            raise ValueError("sample outside window bounds")
        if len(ts) > 1 and not np.all(np.diff(ts) > 0):
            raise ValueError("timestamps must be strictly increasing")

    @property
    def window_end(self) -> int:
        return self.window_start + self.window_length

    @property
    def index(self) -> int:
        return self.window_start // self.window_length

    def __len__(self):
        return len(self.values)


def assign(record: SampleRecord, window_length: int) -> WindowKey:
    return WindowKey(record.user_id, record.data_type, record.timestamp // window_length)


@dataclass
class WindowStats:
    late: int = 0
    duplicates: int = 0
    replayed: int = 0
    emitted: int = 0


class _KeyState:
    __slots__ = ("watermark", "pending", "closed_through", "min_offset", "replay_through")

    def __init__(self):
        self.watermark = -math.inf
        self.pending: dict[int, dict[int, float]] = {}
        self.min_offset: dict[int, int] = {}
        self.closed_through = -1  # highest window index that is closed
        self.replay_through = -1  # windows already emitted by a previous run


class Windower:
    """Assigns samples to tumbling event-time windows and emits closed ones.

    A window closes once the key's watermark (max timestamp seen) reaches
    ``window_end + lateness_ms``. Records for closed windows are counted as
    late and dropped; duplicate timestamps keep the first value.
    """

    def __init__(self, window_ms: int = 5000, lateness_ms: int = 500, sample_rate: float = 500.0):
        if window_ms <= 0 or lateness_ms < 0:
            raise ValueError("window_ms must be positive and lateness_ms nonnegative")
        self.window_ms = int(window_ms)
        self.lateness_ms = int(lateness_ms)
        self.sample_rate = float(sample_rate)
        self.stats = WindowStats()
        self._keys: dict[tuple[str, DataType], _KeyState] = {}

    def mark_emitted(self, user_id: str, data_type: DataType, index: int) -> None:
        """Treat every window up to ``index`` as already emitted (restart recovery)."""
        st = self._keys.setdefault((user_id, data_type), _KeyState())
        st.replay_through = max(st.replay_through, index)
        if index > st.closed_through:
            st.closed_through = index
            for i in [i for i in st.pending if i <= index]:
                del st.pending[i]
                st.min_offset.pop(i, None)

    def offer(self, record: SampleRecord, offset: int | None = None) -> list[SignalWindow]:
        key = (record.user_id, record.data_type)
        st = self._keys.get(key)
        if st is None:
            st = self._keys[key] = _KeyState()
        ts = record.timestamp
        idx = ts // self.window_ms
        if idx <= st.replay_through:
            self.stats.replayed += 1
            return []
        if idx <= st.closed_through:
            self.stats.late += 1
            return []
        if (idx + 1) * self.window_ms + self.lateness_ms <= st.watermark:
            self.stats.late += 1
            return []
        bucket = st.pending.get(idx)
        if bucket is None:
            bucket = st.pending[idx] = {}
        if offset is not None and offset < st.min_offset.get(idx, offset + 1):
            st.min_offset[idx] = offset
        if ts in bucket:
            self.stats.duplicates += 1
        else:
            bucket[ts] = record.value
        if ts > st.watermark:
            st.watermark = ts
            limit = (ts - self.lateness_ms) // self.window_ms  # windows with index < limit are closed
            if limit - 1 > st.closed_through:
                return self._close(key, st, limit - 1)
        return []

    def offer_many(self, records: Iterable[tuple[SampleRecord, int | None]]) -> list[SignalWindow]:
        out = []
        for rec, off in records:
            out.extend(self.offer(rec, off))
        return out

    def _close(self, key, st: _KeyState, through: int) -> list[SignalWindow]:
        ready = sorted(i for i in st.pending if i <= through)
        st.closed_through = through
        return [self._emit(key, st, i) for i in ready]

    def _emit(self, key, st: _KeyState, idx: int) -> SignalWindow:
        bucket = st.pending.pop(idx)
        first_offset = st.min_offset.pop(idx, None)
        items = sorted(bucket.items())
        self.stats.emitted += 1
        return SignalWindow(
            user_id=key[0],
            data_type=key[1],
            window_start=idx * self.window_ms,
            window_length=self.window_ms,
            timestamps=np.fromiter((t for t, _ in items), dtype=np.int64, count=len(items)),
            values=np.fromiter((v for _, v in items), dtype=np.float64, count=len(items)),
            sample_rate=self.sample_rate,
            first_offset=first_offset,
        )

    def flush(self) -> list[SignalWindow]:
        """Emit every pending (possibly partial) window, ordered by key then index."""
        out = []
        for key in sorted(self._keys, key=lambda k: (k[0], k[1].value)):
            st = self._keys[key]
            if st.pending:
                out.extend(self._close(key, st, max(st.pending)))
        return out

    def watermark(self, user_id: str, data_type: DataType) -> float:
        st = self._keys.get((user_id, data_type))
        return -math.inf if st is None else st.watermark

    def closed_through(self, user_id: str, data_type: DataType) -> int:
        st = self._keys.get((user_id, data_type))
        return -1 if st is None else st.closed_through

    def users(self, data_type: DataType) -> list[str]:
        return sorted(u for (u, t) in self._keys if t == data_type)

    def pending_min_offset(self) -> int | None:
        """Smallest source offset still held in an unemitted window."""
        offs = [o for st in self._keys.values() for o in st.min_offset.values()]
        return min(offs) if offs else None


class RRBuffer:
    """Ring buffer of successive RR-interval differences.

    Each entry carries the difference ``rr[n] - rr[n-1]`` and the RR interval
    ``rr[n]`` it ends on; the sum of those intervals is the span of RR data
    represented. The buffer is full once that span reaches one minute;
    ``capacity`` only bounds memory.
    """

    def __init__(self, capacity: int = 512, min_span_ms: float = MIN_RR_SPAN_MS):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.min_span_ms = min_span_ms
        self._diffs: deque[float] = deque(maxlen=capacity)
        self._spans: deque[float] = deque(maxlen=capacity)

    def push(self, diffs: Iterable[float], spans: Iterable[float]) -> None:
        diffs = list(diffs)
        spans = list(spans)
        if len(diffs) != len(spans):
            raise ValueError("each difference needs the RR interval it ends on")
        self._diffs.extend(float(d) for d in diffs)
        self._spans.extend(float(s) for s in spans)

    @property
    def total_span(self) -> float:
        return math.fsum(self._spans)

    @property
    def full(self) -> bool:
        return self.total_span >= self.min_span_ms

    def snapshot(self) -> list[float]:
        return list(self._diffs)

    def intervals(self) -> list[float]:
        return list(self._spans)

    def __len__(self):
        return len(self._diffs)

    def clear(self) -> None:
        self._diffs.clear()
        self._spans.clear()


def rr_push(buffer: RRBuffer, rr_diffs, spans) -> None:
    buffer.push(rr_diffs, spans)


def rr_full(buffer: RRBuffer) -> bool:
    return buffer.full


def rr_snapshot(buffer: RRBuffer) -> list[float]:
    return buffer.snapshot()

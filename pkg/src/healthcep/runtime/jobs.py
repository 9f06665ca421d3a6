"""Analytics jobs: broker topics -> windows -> analytics -> result topic + store."""
from __future__ import annotations

import logging
import threading
import time
from collections import Counter, deque

from healthcep.broker import Consumer
from healthcep.config import Config
from healthcep.errors import MalformedRecord
from healthcep.runtime.pipeline import Analyzer
from healthcep.runtime.store import ResultStore
from healthcep.stress import Bands, StressState
from healthcep.wire import DataType, ResultKind, ResultRecord, decode_sample, encode_result
from healthcep.windowing import RRBuffer, SignalWindow, Windower

log = logging.getLogger(__name__)


class Job:
    """Common consume/window/commit loop. Subclasses handle emitted windows."""

    kind = ""
    output_kind = ResultKind.CHF_RISK

    def __init__(self, broker, cfg: Config = Config(), store: ResultStore | None = None,
                 analyzer: Analyzer | None = None, group: str | None = None):
        self.broker = broker
        self.cfg = cfg
        self.store = store
        self.analyzer = analyzer or Analyzer.from_config(cfg)
        self.group = group or cfg.job_group or f"{self.kind}-job"
        self.output_topic = self.output_topic_name()
        for t in (*self.input_topics(), self.output_topic):
            broker.create_topic(t, cfg.broker_retention_ms)
        self.consumers = {t: Consumer(broker, t, self.group) for t in self.input_topics()}
        rates = {cfg.topic_ecg: cfg.ecg_rate_hz, cfg.topic_bp: cfg.bp_rate_hz}
        self.windowers = {t: Windower(cfg.window_ms, cfg.lateness_ms, rates[t]) for t in self.input_topics()}
        self.counters: Counter[str] = Counter()
        self.caught_up: dict[str, bool] = {t: False for t in self.input_topics()}
        self._committed = {t: c.position for t, c in self.consumers.items()}
        self._last_stats = time.monotonic()
        if store is not None:
            self._recover()

    # hooks
    def input_topics(self) -> tuple[str, ...]:
        raise NotImplementedError

    def output_topic_name(self) -> str:
        raise NotImplementedError

    def on_windows(self, topic: str, windows: list[SignalWindow]) -> None:
        raise NotImplementedError

    def drain(self, force: bool = False) -> None:
        pass

    def held_offsets(self, topic: str) -> list[int]:
        return []

    def restore(self, last: ResultRecord) -> None:
        pass

    # machinery
    def _recover(self) -> None:
        ecg = self.windowers[self.cfg.topic_ecg]
        for user in self.store.users():
            last = self.store.last(user)
            if last is None:
                continue
            ecg.mark_emitted(user, DataType.ECG, last.window_start // self.cfg.window_ms)
            self.restore(last)

    def emit(self, r: ResultRecord) -> None:
        self.broker.publish(self.output_topic, encode_result(r))
        if self.store is not None:
            self.store.append(r)
        self.counters["results" if r.kind != ResultKind.DIAGNOSTIC else "diagnostics"] += 1

    def _ingest(self, topic: str, batch) -> list[SignalWindow]:
        w = self.windowers[topic]
        unit = self.cfg.timestamp_unit
        out = []
        for offset, line in batch:
            try:
                rec = decode_sample(line, unit)
            except MalformedRecord:
                self.counters["malformed"] += 1
                continue
            out.extend(w.offer(rec, offset))
        return out

    def step(self) -> int:
        """One poll cycle over every input topic; returns records consumed."""
        n = 0
        for topic, consumer in self.consumers.items():
            batch = consumer.poll(self.cfg.poll_batch)
            self.caught_up[topic] = len(batch) < self.cfg.poll_batch
            n += len(batch)
            windows = self._ingest(topic, batch)
            if windows:
                self.on_windows(topic, windows)
        self.counters["consumed"] += n
        self.drain()
        self.commit()
        self.maybe_log_stats()
        return n

    def commit(self) -> None:
        for topic, consumer in self.consumers.items():
            offs = [consumer.position, *self.held_offsets(topic)]
            pend = self.windowers[topic].pending_min_offset()
            if pend is not None:
                offs.append(pend)
            target = min(offs)
            if target > self._committed.get(topic, -1):
                consumer.commit(target)
                self._committed[topic] = target

    def finish(self) -> None:
        """End of stream: emit partial windows, process everything held, commit."""
        for topic, w in self.windowers.items():
            windows = w.flush()
            if windows:
                self.on_windows(topic, windows)
        self.drain(force=True)
        self.commit()
        self.log_stats()

    def run(self, stop: threading.Event, idle_exit_s: float | None = None, poll_wait_s: float = 0.05) -> None:
        """Consume until ``stop`` is set (then drain and finish) or inputs idle too long."""
        idle_since = None
        while True:
            n = self.step()
            if n:
                idle_since = None
                continue
            if stop.is_set():
                break
            now = time.monotonic()
            idle_since = idle_since or now
            if idle_exit_s is not None and now - idle_since >= idle_exit_s:
                break
            topic, consumer = next(iter(self.consumers.items()))
            self.broker.wait(topic, consumer.position, poll_wait_s)
        self.finish()

    def stats(self) -> dict[str, int]:
        out = dict(self.counters)
        for w in self.windowers.values():
            for k in ("late", "duplicates", "replayed"):
                out[k] = out.get(k, 0) + getattr(w.stats, k)
        out["gaps"] = sum(c.gaps for c in self.consumers.values())
        return out

    def log_stats(self) -> None:
        s = self.stats()
        log.info("stats job=%s %s", self.kind, " ".join(f"{k}={v}" for k, v in sorted(s.items())))
        self._last_stats = time.monotonic()

    def maybe_log_stats(self) -> None:
        if time.monotonic() - self._last_stats >= self.cfg.stats_interval_s:
            self.log_stats()


class RiskJob(Job):
    """CHF risk per ECG window, paired with the same-index BP window when there is one."""

    kind = "risk"

    def __init__(self, *args, **kwargs):
        self.ecg_wait: dict[str, deque[SignalWindow]] = {}
        self.bp_ready: dict[str, dict[int, SignalWindow]] = {}
        super().__init__(*args, **kwargs)

    def input_topics(self):
        return (self.cfg.topic_ecg, self.cfg.topic_bp)

    def output_topic_name(self):
        return self.cfg.topic_risk

    def on_windows(self, topic, windows):
        for w in windows:
            if w.data_type == DataType.ECG:
                self.ecg_wait.setdefault(w.user_id, deque()).append(w)
            else:
                self.bp_ready.setdefault(w.user_id, {})[w.index] = w
        if topic == self.cfg.topic_ecg:
            self.counters["ecg_windows"] += sum(w.data_type == DataType.ECG for w in windows)

    def _bp_settled(self, user: str, w: SignalWindow) -> bool:
        """True once no BP window with ``w``'s index can still arrive."""
        bp = self.windowers[self.cfg.topic_bp]
        if bp.closed_through(user, DataType.BP) >= w.index:
            return True
        if self.cfg.risk_bp_wait_ms <= 0 or bp.watermark(user, DataType.BP) != float("-inf"):
            return False
        lead = self.windowers[self.cfg.topic_ecg].watermark(user, DataType.ECG) - w.window_end
        return self.caught_up[self.cfg.topic_bp] and lead >= self.cfg.risk_bp_wait_ms

    def drain(self, force=False):
        for user in sorted(self.ecg_wait):
            queue = self.ecg_wait[user]
            ready = self.bp_ready.get(user, {})
            while queue:
                w = queue[0]
                bp = ready.pop(w.index, None)
                if bp is None and not force and not self._bp_settled(user, w):
                    break
                queue.popleft()
                self.emit(self.analyzer.risk(w, bp))
                for i in [i for i in ready if i < w.index]:
                    del ready[i]
        if force:
            self.bp_ready.clear()

    def held_offsets(self, topic):
        if topic == self.cfg.topic_ecg:
            return [w.first_offset for q in self.ecg_wait.values() for w in q if w.first_offset is not None]
        return [w.first_offset for d in self.bp_ready.values() for w in d.values() if w.first_offset is not None]


class StressJob(Job):
    """Stress index per ECG window from the evolving RR series of each user."""

    kind = "stress"
    output_kind = ResultKind.STRESS

    def __init__(self, *args, **kwargs):
        self.states: dict[str, StressState] = {}
        self.last_r: dict[str, float] = {}
        self.tails: dict[str, tuple] = {}  # raw samples ending the previous window
        super().__init__(*args, **kwargs)

    def input_topics(self):
        return (self.cfg.topic_ecg,)

    def output_topic_name(self):
        return self.cfg.topic_stress

    def state(self, user: str) -> StressState:
        st = self.states.get(user)
        if st is None:
            c = self.cfg
            st = self.states[user] = StressState(
                step=c.stress_step,
                index=c.stress_initial,
                rr_buffer=RRBuffer(c.rr_capacity),
                tachogram_rate_hz=c.stress_tachogram_rate_hz,
                bands=Bands((c.stress_lf_low_hz, c.stress_lf_high_hz), (c.stress_hf_low_hz, c.stress_hf_high_hz),
                            (0.0, c.stress_lf_low_hz)),
            )
        return st

    def restore(self, last):
        st = self.state(last.user_id)
        if last.kind == ResultKind.STRESS:
            st.index = last.value
            hrv = last.aux.get("hrv_ms", -1.0)
            st.baseline_hrv = hrv if hrv >= 0 else None

    def window_rr(self, user: str, r_times) -> list[float]:
        prev = self.last_r.get(user)
        times = [float(t) for t in r_times]
        if prev is not None:
            # context detections repeat beats the previous window already counted
            times = [t for t in times if t > prev + self.cfg.refractory_ms]
        st = self.state(user)
        if prev is not None and times and times[0] - prev > self.cfg.stress_max_rr_ms:
            st.last_rr = None  # missed beats: do not difference across the gap
        if prev is not None and times and times[0] - prev <= self.cfg.stress_max_rr_ms:
            times.insert(0, prev)
        if times:
            self.last_r[user] = times[-1]
        rr = [b - a for a, b in zip(times, times[1:])]
        return rr

    def _context(self, w: SignalWindow):
        tail = self.tails.get(w.user_id)
        ctx_ms = self.cfg.stress_context_ms
        if ctx_ms > 0 and len(w):
            keep = w.timestamps >= w.window_end - ctx_ms
            self.tails[w.user_id] = (w.timestamps[keep], w.values[keep])
        # only a tail that runs right up to this window is usable
        if tail is None or not len(tail[0]) or w.window_start - tail[0][-1] > 2 * 1000.0 / w.sample_rate:
            return None
        return tail

    def on_windows(self, topic, windows):
        for w in windows:
            rr = self.window_rr(w.user_id, self.analyzer.r_times(w, self._context(w)))
            res = self.state(w.user_id).update(rr)
            aux = {
                "hr_bpm": res.hr,
                "hrv_ms": res.hrv,
                "lf": res.lf,
                "hf": res.hf,
                "lf_hf": res.lf_hf,
                "buffer_full": float(res.buffer_full),
                "rr_count": float(len(rr)),
            }
            self.emit(ResultRecord(w.user_id, ResultKind.STRESS, w.window_start, w.window_end, res.index, aux))


JOBS = {"risk": RiskJob, "stress": StressJob}

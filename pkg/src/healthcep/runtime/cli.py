"""``healthcep`` command line.

Subcommands::

    healthcep broker --listen HOST:PORT --data-dir DIR
    healthcep produce --file F --topic T --user U --rate HZ --clock realtime|accelerated|afap
    healthcep job risk|stress --config FILE
    healthcep results tail --kind risk|stress --user U
    healthcep synth --out DIR --users 101,102 --minutes 1
"""
from __future__ import annotations

import argparse
import logging
import signal
import sys
import threading
import time
from pathlib import Path

import numpy as np

from healthcep import synth
from healthcep.broker import Broker
from healthcep.config import Config
from healthcep.errors import ConfigError, HealthCepError
from healthcep.runtime.client import RemoteBroker
from healthcep.runtime.jobs import JOBS
from healthcep.runtime.producer import Producer, ReplaySpec
from healthcep.runtime.server import serve
from healthcep.runtime.store import ResultStore, read_results
from healthcep.wire import DataType, decode_result, encode_result

log = logging.getLogger("healthcep")

KIND_TOPIC = {"risk": "topic_risk", "stress": "topic_stress"}


def _load_config(path: str | None) -> Config:
    return Config.from_file(path) if path else Config()


def _stop_on_signals() -> threading.Event:
    stop = threading.Event()

    def handler(signum, frame):
        stop.set()

    signal.signal(signal.SIGINT, handler)
    signal.signal(signal.SIGTERM, handler)
    return stop


def cmd_broker(args) -> int:
    cfg = _load_config(args.config)
    broker = Broker(args.data_dir)
    server = serve(broker, args.listen or cfg.broker_address, background=True)
    log.info("broker listening on %s (data dir %s)", server.address, args.data_dir or "memory")
    print(f"listening {server.address}", flush=True)
    stop = _stop_on_signals()
    while not stop.wait(args.prune_interval):
        for t in broker.topics():
            n = broker.prune(t)
            if n:
                log.info("pruned %d records from %s", n, t)
    server.shutdown()
    server.server_close()
    broker.close()
    return 0


def cmd_produce(args) -> int:
    cfg = _load_config(args.config)
    dtype = DataType(args.type.upper()) if args.type else (
        DataType.BP if args.topic == cfg.topic_bp else DataType.ECG)
    spec = ReplaySpec(args.file, args.user, dtype, args.rate, args.clock, args.speed, args.loop, args.topic)
    with RemoteBroker(args.broker or cfg.broker_address) as broker:
        broker.create_topic(args.topic, cfg.broker_retention_ms)
        stats = Producer(broker, spec, topic=args.topic).run(_stop_on_signals())
    print(f"published {stats.published} malformed_rows {stats.malformed_rows}", flush=True)
    return 0


def cmd_job(args) -> int:
    cfg = _load_config(args.config)
    broker = RemoteBroker(args.broker or cfg.broker_address)
    store = ResultStore(cfg.store_dir, args.kind)
    job = JOBS[args.kind](broker, cfg, store)
    log.info("job %s consuming %s -> %s", args.kind, ",".join(job.input_topics()), job.output_topic)
    job.run(_stop_on_signals(), idle_exit_s=args.idle_exit)
    broker.close()
    return 0


def cmd_results(args) -> int:
    cfg = _load_config(args.config)
    if args.store:
        store = ResultStore(args.store, args.kind)
        users = [args.user] if args.user else store.users()
        for u in users:
            if store.path(u).exists():
                for r in read_results(store.path(u)):
                    sys.stdout.write(encode_result(r))
        return 0
    topic = getattr(cfg, KIND_TOPIC[args.kind])
    with RemoteBroker(args.broker or cfg.broker_address) as broker:
        sub = broker.subscribe(topic, args.group or f"tail-{time.time_ns()}")
        stop = _stop_on_signals()
        idle = 0.0
        while not stop.is_set():
            try:
                _, line = sub.get(timeout=0.5)
            except Exception:
                idle += 0.5
                if not args.follow and idle >= args.idle_exit:
                    break
                continue
            idle = 0.0
            r = decode_result(line)
            if args.user is None or r.user_id == args.user:
                sys.stdout.write(line)
                sys.stdout.flush()
        sub.close()
    return 0


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seconds = args.minutes * 60.0
    for i, user in enumerate(args.users.split(",")):
        rng = np.random.default_rng(args.seed + i)
        r_times = synth.hrv_r_times(seconds, mean_rr_ms=args.mean_rr + 40 * i, seed=args.seed + i)
        ecg = synth.ecg_from_r_times(r_times, seconds * 1000.0, args.rate)
        ecg += rng.normal(0.0, args.noise, len(ecg))
        bp = synth.arterial_pressure(seconds, args.rate, r_times)
        np.savetxt(out / f"ecg_{user}.csv", ecg, fmt="%.6f")
        np.savetxt(out / f"bp_{user}.csv", bp, fmt="%.4f")
        print(f"wrote {out / f'ecg_{user}.csv'} {out / f'bp_{user}.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="healthcep", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("broker", help="run the broker socket front-end")
    b.add_argument("--listen", help="HOST:PORT (default: broker.address from config)")
    b.add_argument("--data-dir", help="persist topics and cursors here")
    b.add_argument("--config")
    b.add_argument("--prune-interval", type=float, default=1.0)
    b.set_defaults(func=cmd_broker)

    pr = sub.add_parser("produce", help="replay a signal file to a topic")
    pr.add_argument("--file", required=True)
    pr.add_argument("--topic", required=True)
    pr.add_argument("--user", required=True)
    pr.add_argument("--type", choices=["ecg", "bp", "ECG", "BP"])
    pr.add_argument("--rate", type=float, default=500.0)
    pr.add_argument("--clock", choices=["realtime", "accelerated", "afap"], default="realtime")
    pr.add_argument("--speed", type=float, default=1.0, help="speed-up factor for --clock accelerated")
    pr.add_argument("--loop", action="store_true")
    pr.add_argument("--broker")
    pr.add_argument("--config")
    pr.set_defaults(func=cmd_produce)

    j = sub.add_parser("job", help="run an analytics job")
    j.add_argument("kind", choices=sorted(JOBS))
    j.add_argument("--config")
    j.add_argument("--broker")
    j.add_argument("--idle-exit", type=float, default=None, help="stop after this many idle seconds")
    j.set_defaults(func=cmd_job)

    r = sub.add_parser("results", help="read analytics results")
    rsub = r.add_subparsers(dest="action", required=True)
    t = rsub.add_parser("tail", help="print results for a user")
    t.add_argument("--kind", choices=sorted(KIND_TOPIC), required=True)
    t.add_argument("--user")
    t.add_argument("--store", help="read the result store directory instead of the broker")
    t.add_argument("--broker")
    t.add_argument("--group")
    t.add_argument("--follow", action="store_true")
    t.add_argument("--idle-exit", type=float, default=2.0)
    t.add_argument("--config")
    t.set_defaults(func=cmd_results)

    s = sub.add_parser("synth", help="write synthetic ECG/BP CSV files")
    s.add_argument("--out", required=True)
    s.add_argument("--users", default="101,102")
    s.add_argument("--minutes", type=float, default=1.0)
    s.add_argument("--rate", type=float, default=500.0)
    s.add_argument("--mean-rr", type=float, default=800.0)
    s.add_argument("--noise", type=float, default=0.01)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s", stream=sys.stderr)
    # stats lines are always shown
    logging.getLogger("healthcep.runtime.jobs").setLevel(logging.INFO)
    try:
        return args.func(args) or 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (HealthCepError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

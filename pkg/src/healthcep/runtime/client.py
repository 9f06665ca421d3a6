"""Client for the broker socket front-end, mirroring the in-process API."""
from __future__ import annotations

import math
import queue
import socket
import threading

from healthcep import errors
from healthcep.broker import Cursor, PollResult
from healthcep.runtime.server import parse_address

_ERRORS = {
    name: getattr(errors, name)
    for name in ("UnknownTopic", "ConflictingRetention", "OffsetAhead", "MalformedRecord")
}


def _raise(line: str):
    _, name, *rest = line.split(" ", 2) + [""]
    msg = rest[0] if rest else ""
    exc = _ERRORS.get(name, errors.HealthCepError if name != "ValueError" else ValueError)
    raise exc(msg.strip())


def _cursor(cursor, group):
    if isinstance(cursor, Cursor):
        return cursor
    if group is None:
        raise TypeError("group is required when passing a topic name")
    return Cursor(group, cursor)


class RemoteBroker:
    def __init__(self, address: str, timeout: float | None = 30.0):
        self.address = address
        self._sock = socket.create_connection(parse_address(address), timeout=timeout)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._r = self._sock.makefile("rb")
        self._lock = threading.Lock()

    def close(self) -> None:
        try:
            self._r.close()
        finally:
            self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _readline(self) -> str:
        raw = self._r.readline()
        if not raw:
            raise ConnectionError("broker closed the connection")
        return raw.decode("utf-8")

    def _ok(self, line: str) -> str:
        if line.startswith("ERR"):
            _raise(line.rstrip("\n"))
        if not line.startswith("OK"):
            raise ConnectionError(f"unexpected reply {line!r}")
        return line[2:].strip()

    def _call(self, request: str) -> str:
        with self._lock:
            self._sock.sendall(request.encode())
            return self._ok(self._readline())

    def create_topic(self, name: str, retention: float = math.inf) -> None:
        r = "inf" if retention is None or math.isinf(retention) else repr(float(retention))
        self._call(f"CREATE {name} {r}\n")

    def topics(self) -> list[str]:
        return self._call("TOPICS\n").split()

    def publish(self, topic: str, payload: str) -> int:
        if not payload.endswith("\n"):
            payload += "\n"
        return int(self._call(f"PUB {topic}\n{payload}"))

    def publish_many(self, topic: str, payloads) -> list[int]:
        """Pipelined publishes: all requests are sent before reading replies."""
        lines = [p if p.endswith("\n") else p + "\n" for p in payloads]
        if not lines:
            return []
        body = "".join(f"PUB {topic}\n{p}" for p in lines).encode()
        with self._lock:
            sender = threading.Thread(target=self._sock.sendall, args=(body,))
            sender.start()
            replies = [self._readline() for _ in lines]
            sender.join()
        return [int(self._ok(r)) for r in replies]

    def _batch(self, request: str) -> PollResult:
        with self._lock:
            self._sock.sendall(request.encode())
            head = self._readline()
            if not head.startswith("BATCH"):
                self._ok(head)
                raise ConnectionError(f"unexpected reply {head!r}")
            _, n, gap, nxt = head.split()
            records = []
            for _ in range(int(n)):
                off = int(self._readline().split()[1])
                records.append((off, self._readline()))
        return PollResult(records, gap == "1", int(nxt))

    def fetch(self, topic: str, offset: int, max_records: int) -> PollResult:
        return self._batch(f"FETCH {topic} {offset} {max_records}\n")

    def poll(self, cursor, max_records: int, group: str | None = None) -> PollResult:
        c = _cursor(cursor, group)
        return self._batch(f"POLL {c.topic} {c.group_id} {max_records}\n")

    def committed(self, cursor, group: str | None = None) -> int:
        c = _cursor(cursor, group)
        return int(self._call(f"COMMITTED {c.topic} {c.group_id}\n"))

    def commit(self, cursor, offset: int, group: str | None = None) -> int:
        c = _cursor(cursor, group)
        return int(self._call(f"COMMIT {c.topic} {c.group_id} {offset}\n"))

    def prune(self, topic: str, now: int | None = None) -> int:
        return int(self._call(f"PRUNE {topic}\n" if now is None else f"PRUNE {topic} {now}\n"))

    def end_offset(self, topic: str) -> int:
        return int(self._call(f"END {topic}\n"))

    def start_offset(self, topic: str) -> int:
        return int(self._call(f"START {topic}\n"))

    def wait(self, topic: str, offset: int, timeout: float) -> bool:
        return self._call(f"WAIT {topic} {offset} {timeout}\n") == "1"

    def subscribe(self, topic: str, group: str) -> "Subscription":
        return Subscription(self.address, topic, group)


class Subscription:
    """Push subscription: the server streams MSG frames from the committed offset."""

    def __init__(self, address: str, topic: str, group: str):
        self.topic = topic
        self.group = group
        self._sock = socket.create_connection(parse_address(address))
        self._r = self._sock.makefile("rb")
        self._sock.sendall(f"SUB {topic} {group}\n".encode())
        first = self._r.readline().decode()
        if first.startswith("ERR"):
            self.close()
            _raise(first.rstrip("\n"))
        self.start = int(first.split()[1])
        self.messages: queue.Queue[tuple[int, str]] = queue.Queue()
        self._replies: queue.Queue[str] = queue.Queue()
        self._reader = threading.Thread(target=self._read, daemon=True)
        self._reader.start()

    def _read(self) -> None:
        try:
            while True:
                raw = self._r.readline()
                if not raw:
                    break
                line = raw.decode()
                if line.startswith("MSG "):
                    payload = self._r.readline().decode()
                    self.messages.put((int(line.split()[1]), payload))
                else:
                    self._replies.put(line)
        except (OSError, ValueError):
            pass

    def get(self, timeout: float | None = None) -> tuple[int, str]:
        return self.messages.get(timeout=timeout)

    def commit(self, offset: int, timeout: float = 10.0) -> int:
        self._sock.sendall(f"COMMIT {self.topic} {self.group} {offset}\n".encode())
        reply = self._replies.get(timeout=timeout)
        if reply.startswith("ERR"):
            _raise(reply.rstrip("\n"))
        return int(reply.split()[1])

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()

"""Line-protocol socket front-end for a :class:`~healthcep.broker.Broker`.

Requests are single lines; a ``PUB`` line is followed by the record line::

    PUB <topic>\\n<record>\\n              -> OK <offset>
    SUB <topic> <group>\\n                  -> OK <start>, then MSG frames pushed
    COMMIT <topic> <group> <offset>\\n      -> OK <committed>
    CREATE <topic> [<retention_ms>|inf]\\n  -> OK
    FETCH <topic> <offset> <max>\\n         -> BATCH <n> <gap> <next>, then n MSG frames
    POLL <topic> <group> <max>\\n           -> same as FETCH, from the committed offset
    COMMITTED <topic> <group>\\n            -> OK <offset>
    PRUNE <topic> [<now_ms>]\\n             -> OK <removed>
    END <topic>\\n | START <topic>\\n       -> OK <offset>
    WAIT <topic> <offset> <seconds>\\n      -> OK 0|1
    TOPICS\\n                               -> OK <name> ...

A MSG frame is ``MSG <offset>\\n<record>\\n``. Failures answer
``ERR <ErrorName> <message>``.
"""
from __future__ import annotations

import logging
import math
import socketserver
import threading

from healthcep.broker import Broker, Cursor

log = logging.getLogger(__name__)


def parse_address(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not port.isdigit():
        raise ValueError(f"address must be host:port, got {addr!r}")
    return host or "127.0.0.1", int(port)


def _frames(records) -> bytes:
    return b"".join(f"MSG {off}\n{line}".encode() for off, line in records)


class _Handler(socketserver.StreamRequestHandler):
    server: "BrokerServer"

    def setup(self):
        super().setup()
        self.write_lock = threading.Lock()
        self.closed = threading.Event()

    def send(self, data: bytes) -> None:
        with self.write_lock:
            self.wfile.write(data)
            self.wfile.flush()

    def handle(self):
        broker = self.server.broker
        try:
            while True:
                raw = self.rfile.readline()
                if not raw:
                    break
                parts = raw.decode("utf-8").split()
                if not parts:
                    continue
                cmd, args = parts[0].upper(), parts[1:]
                try:
                    reply = self.dispatch(broker, cmd, args)
                except Exception as exc:  # reported to the client, connection stays up
                    reason = str(exc).replace("\n", " ")
                    reply = f"ERR {type(exc).__name__} {reason}\n".encode()
                if reply:
                    self.send(reply)
        except (ConnectionError, OSError):
            pass
        finally:
            self.closed.set()

    def dispatch(self, broker: Broker, cmd: str, args: list[str]) -> bytes:
        if cmd == "PUB":
            line = self.rfile.readline().decode("utf-8")
            return f"OK {broker.publish(args[0], line)}\n".encode()
        if cmd == "SUB":
            topic, group = args
            start = broker.committed(Cursor(group, topic))
            self.send(f"OK {start}\n".encode())
            threading.Thread(target=self.stream, args=(broker, topic, start), daemon=True).start()
            return b""
        if cmd == "COMMIT":
            topic, group, off = args
            return f"OK {broker.commit(Cursor(group, topic), int(off))}\n".encode()
        if cmd == "CREATE":
            retention = math.inf if len(args) < 2 or args[1] == "inf" else float(args[1])
            broker.create_topic(args[0], retention)
            return b"OK\n"
        if cmd in ("FETCH", "POLL"):
            if cmd == "FETCH":
                res = broker.fetch(args[0], int(args[1]), int(args[2]))
            else:
                res = broker.poll(Cursor(args[1], args[0]), int(args[2]))
            head = f"BATCH {len(res.records)} {int(res.gap)} {res.next_offset}\n".encode()
            return head + _frames(res.records)
        if cmd == "COMMITTED":
            return f"OK {broker.committed(Cursor(args[1], args[0]))}\n".encode()
        if cmd == "PRUNE":
            now = int(args[1]) if len(args) > 1 else None
            return f"OK {broker.prune(args[0], now)}\n".encode()
        if cmd == "END":
            return f"OK {broker.end_offset(args[0])}\n".encode()
        if cmd == "START":
            return f"OK {broker.start_offset(args[0])}\n".encode()
        if cmd == "WAIT":
            return f"OK {int(broker.wait(args[0], int(args[1]), float(args[2])))}\n".encode()
        if cmd == "TOPICS":
            return ("OK " + " ".join(broker.topics()) + "\n").encode()
        raise ValueError(f"unknown command {cmd}")

    def stream(self, broker: Broker, topic: str, offset: int) -> None:
        try:
            while not self.closed.is_set():
                res = broker.fetch(topic, offset, 1000)
                if res.records:
                    self.send(_frames(res.records))
                    offset = res.next_offset
                else:
                    broker.wait(topic, offset, 0.2)
        except (ConnectionError, OSError, ValueError):
            pass


class BrokerServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, broker: Broker, address: tuple[str, int]):
        self.broker = broker
        super().__init__(address, _Handler)

    @property
    def address(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"


def serve(broker: Broker, address: str | tuple[str, int] = ("127.0.0.1", 0), background: bool = True) -> BrokerServer:
    """Start the front-end. With ``background`` the server runs in a daemon thread."""
    if isinstance(address, str):
        address = parse_address(address)
    server = BrokerServer(broker, address)
    if background:
        threading.Thread(target=server.serve_forever, name="broker-server", daemon=True).start()
    return server

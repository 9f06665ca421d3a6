"""Raw line protocol of the socket front-end."""
import socket

import pytest

from healthcep.broker import Broker
from healthcep.errors import UnknownTopic
from healthcep.runtime.client import RemoteBroker
from healthcep.runtime.server import parse_address, serve


@pytest.fixture
def server():
    s = serve(Broker())
    yield s
    s.shutdown()
    s.server_close()


class Raw:
    def __init__(self, address):
        self.sock = socket.create_connection(parse_address(address), timeout=5)
        self.r = self.sock.makefile("rb")

    def send(self, text):
        self.sock.sendall(text.encode())

    def line(self):
        return self.r.readline().decode()

    def close(self):
        self.sock.close()


def test_pub_sub_commit(server):
    c = Raw(server.address)
    c.send("CREATE ecg\n")
    assert c.line() == "OK\n"
    c.send('PUB ecg\n{"a":1}\n')
    assert c.line() == "OK 0\n"
    c.send('PUB ecg\n{"a":2}\n')
    assert c.line() == "OK 1\n"

    s = Raw(server.address)
    s.send("SUB ecg g\n")
    assert s.line() == "OK 0\n"
    assert [s.line() for _ in range(4)] == ["MSG 0\n", '{"a":1}\n', "MSG 1\n", '{"a":2}\n']
    # pushed as they arrive
    c.send('PUB ecg\n{"a":3}\n')
    assert c.line() == "OK 2\n"
    assert [s.line() for _ in range(2)] == ["MSG 2\n", '{"a":3}\n']
    s.send("COMMIT ecg g 2\n")
    assert s.line() == "OK 2\n"
    s.close()

    again = Raw(server.address)
    again.send("SUB ecg g\n")
    assert again.line() == "OK 2\n"
    assert again.line() == "MSG 2\n"
    again.close()
    c.close()


def test_errors_keep_connection(server):
    c = Raw(server.address)
    c.send("PUB nope\n{}\n")
    assert c.line().startswith("ERR UnknownTopic")
    c.send("BOGUS\n")
    assert c.line().startswith("ERR ValueError")
    c.send("CREATE t\n")
    assert c.line() == "OK\n"
    c.send("COMMIT t g 5\n")
    assert c.line().startswith("ERR OffsetAhead")
    c.send("TOPICS\n")
    assert c.line() == "OK t\n"
    c.close()


def test_fetch_frames(server):
    c = Raw(server.address)
    c.send("CREATE t\n")
    c.line()
    for i in range(3):
        c.send(f"PUB t\n{i}\n")
        c.line()
    c.send("FETCH t 1 10\n")
    assert c.line() == "BATCH 2 0 3\n"
    assert [c.line() for _ in range(4)] == ["MSG 1\n", "1\n", "MSG 2\n", "2\n"]
    c.close()


def test_client_subscription(server):
    with RemoteBroker(server.address) as b:
        b.create_topic("r")
        b.publish_many("r", [f"{i}\n" for i in range(50)])
        sub = b.subscribe("r", "tail")
        got = [sub.get(timeout=5) for _ in range(50)]
        assert [o for o, _ in got] == list(range(50))
        assert got[7][1] == "7\n"
        assert sub.commit(50) == 50
        sub.close()
        assert b.committed("r", group="tail") == 50
        with pytest.raises(UnknownTopic):
            b.subscribe("missing", "g")


def test_parse_address():
    assert parse_address("localhost:9092") == ("localhost", 9092)
    assert parse_address(":80") == ("127.0.0.1", 80)
    with pytest.raises(ValueError):
        parse_address("nope")

import os
import threading

import pytest
from hypothesis import settings

from healthcep.broker import Broker
from healthcep.runtime.client import RemoteBroker
from healthcep.runtime.server import serve

settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


class FakeClock:
    def __init__(self, now=0):
        self.now = now
        self.lock = threading.Lock()

    def __call__(self):
        with self.lock:
            return self.now


class InProcessHarness:
    name = "inproc"

    def __init__(self):
        self.broker = None

    def open(self, data_dir=None, clock=None):
        self.broker = Broker(data_dir, clock=clock) if clock else Broker(data_dir)
        return self.broker

    def connect(self):
        return self.broker

    def crash(self):
        """Drop the broker without a graceful close."""
        self.broker = None

    def close(self):
        pass


class SocketHarness:
    name = "socket"

    def __init__(self):
        self.server = None
        self.clients = []

    def open(self, data_dir=None, clock=None):
        self.broker = Broker(data_dir, clock=clock) if clock else Broker(data_dir)
        self.server = serve(self.broker, ("127.0.0.1", 0))
        return self.connect()

    def connect(self):
        c = RemoteBroker(self.server.address)
        self.clients.append(c)
        return c

    def crash(self):
        self._stop()

    def _stop(self):
        for c in self.clients:
            c.close()
        self.clients = []
        if self.server is not None:
            self.server.shutdown()
            self.server.server_close()
            self.server = None

    def close(self):
        self._stop()


@pytest.fixture(params=["inproc", "socket"])
def harness(request):
    h = InProcessHarness() if request.param == "inproc" else SocketHarness()
    yield h
    h.close()


@pytest.fixture
def clock():
    return FakeClock()


# acceptance criteria report: one line per criterion in the terminal summary

_criteria: dict[int, tuple[str, bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        ok = report.passed and _criteria.get(number, (title, True))[1]
        _criteria[number] = (title, ok)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")

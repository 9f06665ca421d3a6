"""Broker contract; every test runs against the in-process broker and the socket front-end."""
import threading

import pytest

from healthcep.broker import Broker, Consumer, Cursor
from healthcep.errors import ConflictingRetention, OffsetAhead, UnknownTopic


def payloads(n, prefix="r"):
    return [f'{{"n":"{prefix}{i}"}}\n' for i in range(n)]


def test_create_is_idempotent(harness):
    b = harness.open()
    b.create_topic("ecg", 60_000)
    b.create_topic("ecg", 60_000)
    assert b.topics() == ["ecg"]


def test_conflicting_retention(harness):
    b = harness.open()
    b.create_topic("ecg", 60_000)
    with pytest.raises(ConflictingRetention):
        b.create_topic("ecg", 10_000)


def test_hundred_topics_are_independent(harness):
    b = harness.open()
    for i in range(100):
        b.create_topic(f"t{i}")
        for _ in range(i % 3):
            b.publish(f"t{i}", "{}")
    assert len(b.topics()) == 100
    for i in range(100):
        assert b.end_offset(f"t{i}") == i % 3


def test_first_publish_offset_zero(harness):
    b = harness.open()
    b.create_topic("ecg")
    assert b.publish("ecg", "{}") == 0
    assert b.publish("ecg", "{}") == 1


def test_unknown_topic(harness):
    b = harness.open()
    with pytest.raises(UnknownTopic):
        b.publish("missing", "{}")
    with pytest.raises(UnknownTopic):
        b.poll(Cursor("g", "missing"), 10)
    with pytest.raises(UnknownTopic):
        b.prune("missing", 0)


def test_poll_empty(harness):
    b = harness.open()
    b.create_topic("ecg")
    res = b.poll(Cursor("g", "ecg"), 10)
    assert res.records == [] and not res.gap


def test_poll_does_not_advance(harness):
    b = harness.open()
    b.create_topic("ecg")
    for p in payloads(5):
        b.publish("ecg", p)
    first = b.poll(Cursor("g", "ecg"), 3)
    second = b.poll(Cursor("g", "ecg"), 3)
    assert [o for o, _ in first.records] == [0, 1, 2]
    assert first.records == second.records


def test_commit_then_poll(harness):
    b = harness.open()
    b.create_topic("ecg")
    for p in payloads(5):
        b.publish("ecg", p)
    b.commit(Cursor("g", "ecg"), 2)
    res = b.poll(Cursor("g", "ecg"), 10)
    assert [o for o, _ in res.records] == [2, 3, 4]
    assert res.records[0][1] == payloads(5)[2]


def test_commit_never_decreases(harness):
    b = harness.open()
    b.create_topic("ecg")
    for p in payloads(5):
        b.publish("ecg", p)
    b.commit(Cursor("g", "ecg"), 4)
    assert b.commit(Cursor("g", "ecg"), 1) == 4
    assert b.committed(Cursor("g", "ecg")) == 4


def test_commit_ahead_of_head(harness):
    b = harness.open()
    b.create_topic("ecg")
    b.publish("ecg", "{}")
    b.commit(Cursor("g", "ecg"), 1)  # == head is fine
    with pytest.raises(OffsetAhead):
        b.commit(Cursor("g", "ecg"), 2)


def test_independent_groups_see_everything(harness):
    b = harness.open()
    b.create_topic("ecg")
    for p in payloads(10):
        b.publish("ecg", p)
    b.commit(Cursor("a", "ecg"), 10)
    assert len(b.poll(Cursor("b", "ecg"), 100).records) == 10
    assert b.poll(Cursor("a", "ecg"), 100).records == []


def test_fifo_four_concurrent_publishers(harness):
    b = harness.open()
    b.create_topic("ecg")
    n_pub, n = 4, 10_000
    clients = [harness.connect() for _ in range(n_pub)]

    def work(k):
        c = clients[k]
        for i in range(n):
            c.publish("ecg", f'{{"p":{k},"i":{i}}}')

    threads = [threading.Thread(target=work, args=(k,)) for k in range(n_pub)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    seen = []
    pos = 0
    while True:
        res = b.fetch("ecg", pos, 7_000)
        if not res.records:
            break
        seen.extend(res.records)
        pos = res.next_offset
    assert [o for o, _ in seen] == list(range(n_pub * n))  # gap-free total order
    last = [-1] * n_pub
    import json

    for _, line in seen:
        obj = json.loads(line)
        assert obj["i"] == last[obj["p"]] + 1  # per-producer order preserved
        last[obj["p"]] = obj["i"]
    assert last == [n - 1] * n_pub


def test_consumer_offsets_strictly_increase(harness):
    b = harness.open()
    b.create_topic("ecg")
    c = Consumer(b, "ecg", "g")
    got = []
    for chunk in range(5):
        b.publish_many("ecg", payloads(37, f"c{chunk}"))
        got.extend(o for o, _ in c.poll(20))
        got.extend(o for o, _ in c.poll(20))
    assert got == sorted(set(got))
    assert got == list(range(len(got)))


def test_restart_resumes_uncommitted_suffix(harness, tmp_path):
    b = harness.open(tmp_path)
    b.create_topic("ecg")
    b.publish_many("ecg", payloads(100))
    c = Consumer(b, "ecg", "job")
    consumed = [o for o, _ in c.poll(60)]
    c.commit(40)  # processed 0..39 durably; 40..59 read but uncommitted
    assert consumed == list(range(60))
    harness.crash()

    b2 = harness.open(tmp_path)
    c2 = Consumer(b2, "ecg", "job")
    resumed = []
    while True:
        batch = c2.poll(33)
        if not batch:
            break
        resumed.extend(batch)
    assert [o for o, _ in resumed] == list(range(40, 100))  # no loss, no committed duplicate
    assert [p for _, p in resumed] == payloads(100)[40:]


def test_restart_after_graceful_close(tmp_path):
    b = Broker(tmp_path)
    b.create_topic("bp", 5_000)
    b.publish_many("bp", payloads(10))
    b.close()
    b2 = Broker(tmp_path)
    assert b2.end_offset("bp") == 10
    with pytest.raises(ConflictingRetention):
        b2.create_topic("bp", 6_000)


def test_cursor_file_format(tmp_path):
    b = Broker(tmp_path)
    b.create_topic("ecg")
    b.publish_many("ecg", payloads(3))
    b.commit(Cursor("g1", "ecg"), 2)
    b.commit(Cursor("g0", "ecg"), 1)
    assert (tmp_path / "ecg" / "cursors.tsv").read_text() == "g0\t1\ng1\t2\n"
    assert (tmp_path / "ecg" / "records.ldjson").read_text() == "".join(payloads(3))


def test_prune_infinite_retention(harness, clock):
    b = harness.open(clock=clock)
    b.create_topic("ecg")
    b.publish_many("ecg", payloads(5))
    assert b.prune("ecg", 10**12) == 0


def test_prune_removes_exactly_aged(harness, clock, tmp_path):
    b = harness.open(tmp_path, clock=clock)
    b.create_topic("ecg", 1_000)
    clock.now = 0
    for p in payloads(10, "old"):
        b.publish("ecg", p)
    clock.now = 5_000
    for p in payloads(5, "new"):
        b.publish("ecg", p)
    # cutoff = 5_500 - 1_000 = 4_500: arrivals at 0 go, arrivals at 5_000 stay
    assert b.prune("ecg", 5_500) == 10
    assert b.start_offset("ecg") == 10
    res = b.fetch("ecg", 10, 100)
    assert [o for o, _ in res.records] == list(range(10, 15))
    assert [p for _, p in res.records] == payloads(5, "new")
    assert b.prune("ecg", 5_999) == 0  # boundary: arrival 5_000 == cutoff survives


def test_prune_never_removes_fresh(harness, clock):
    b = harness.open(clock=clock)
    b.create_topic("ecg", 1_000)
    for t in range(0, 3_000, 100):
        clock.now = t
        b.publish("ecg", f'{{"t":{t}}}')
    b.prune("ecg", 3_000)
    res = b.fetch("ecg", 0, 100)
    import json

    assert all(json.loads(p)["t"] >= 2_000 for _, p in res.records)
    assert len(res.records) == 10


def test_poll_after_prune_reports_gap(harness, clock):
    b = harness.open(clock=clock)
    b.create_topic("ecg", 1_000)
    b.publish_many("ecg", payloads(10))
    b.commit(Cursor("g", "ecg"), 3)
    clock.now = 10_000
    b.publish_many("ecg", payloads(2, "fresh"))
    assert b.prune("ecg", 10_000) == 10
    res = b.poll(Cursor("g", "ecg"), 100)
    assert res.gap
    assert [o for o, _ in res.records] == [10, 11]


def test_pruned_log_survives_restart(harness, clock, tmp_path):
    b = harness.open(tmp_path, clock=clock)
    b.create_topic("ecg", 1_000)
    b.publish_many("ecg", payloads(4, "old"))
    clock.now = 5_000
    b.publish_many("ecg", payloads(3, "new"))
    b.commit(Cursor("g", "ecg"), 0)
    b.prune("ecg", 5_000)
    harness.crash()
    b2 = harness.open(tmp_path, clock=clock)
    res = b2.fetch("ecg", 0, 100)
    assert res.gap
    assert res.records == list(zip(range(4, 7), payloads(3, "new")))


def test_publish_rejects_multiline():
    b = Broker()
    b.create_topic("ecg")
    with pytest.raises(ValueError):
        b.publish("ecg", "a\nb\n")

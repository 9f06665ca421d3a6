"""Append-only result files, one per (job, user), in wire format.

Every run appends a ``# run <id>`` header line before its first record;
readers skip lines starting with ``#``.
"""
from __future__ import annotations

import threading
import uuid
from pathlib import Path
from urllib.parse import quote, unquote

from healthcep.wire import ResultRecord, decode_result, encode_result


class ResultStore:
    def __init__(self, root: str | Path, job: str, run_id: str | None = None):
        self.dir = Path(root) / job
        self.dir.mkdir(parents=True, exist_ok=True)
        self.run_id = run_id or uuid.uuid4().hex
        self._headed: set[str] = set()
        self._lock = threading.Lock()

    def path(self, user_id: str) -> Path:
        return self.dir / f"{quote(user_id, safe='') or '%'}.ldjson"

    def append(self, r: ResultRecord) -> None:
        line = encode_result(r)
        with self._lock:
            with open(self.path(r.user_id), "a", encoding="utf-8") as fh:
                if r.user_id not in self._headed:
                    fh.write(f"# run {self.run_id}\n")
                    self._headed.add(r.user_id)
                fh.write(line)

    def users(self) -> list[str]:
        return sorted(unquote(p.stem) if p.stem != "%" else "" for p in self.dir.glob("*.ldjson"))

    def read(self, user_id: str) -> list[ResultRecord]:
        return list(read_results(self.path(user_id)))

    def last(self, user_id: str) -> ResultRecord | None:
        p = self.path(user_id)
        if not p.exists():
            return None
        last = None
        for r in read_results(p):
            last = r
        return last


def read_results(path: str | Path):
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            yield decode_result(line)

"""Line-delimited JSON records exchanged between producers, broker and jobs.

Each record encodes to exactly one line of UTF-8 JSON terminated by ``\\n``.
Reals are written with 15 significant digits and records quantize their
reals to that precision on construction, so ``decode(encode(r)) == r``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Mapping

from healthcep.errors import MalformedRecord


class DataType(str, Enum):
    ECG = "ECG"
    BP = "BP"


class ValueType(str, Enum):
    DOUBLE = "DOUBLE"


class ResultKind(str, Enum):
    CHF_RISK = "CHF_RISK"
    STRESS = "STRESS"
    DIAGNOSTIC = "DIAGNOSTIC"


RESULT_RANGES = {
    ResultKind.CHF_RISK: (0.0, 100.0),
    ResultKind.STRESS: (0.0, 1.0),
    ResultKind.DIAGNOSTIC: (-math.inf, math.inf),
}

_DATA_TYPES = {t.value: t for t in DataType}
_RESULT_KINDS = {k.value: k for k in ResultKind}
_SAMPLE_KEYS = ("UserID", "DataType", "ValueType", "Value", "TimeStamp")
_RESULT_KEYS = ("UserID", "Kind", "WindowStart", "WindowEnd", "Value", "Aux")
_TS_SCALE = {"ms": 1, "milliseconds": 1, "s": 1000, "seconds": 1000}


def format_real(x: float) -> str:
    return "%.15g" % x


_MAX_15 = 1.79769313486231e308  # largest double with an exact 15-digit form


def quantize(x: float) -> float:
    """Round to the 15 significant digits the wire format carries."""
    q = float("%.15g" % x)
    if q in (math.inf, -math.inf) and math.isfinite(x):
        return math.copysign(_MAX_15, x)
    return q


@lru_cache(maxsize=4096)
def _json_str(s: str) -> str:
    return json.dumps(s)


def _reject_constant(name):
    raise ValueError(f"non-finite constant {name}")


_DECODER = json.JSONDecoder(parse_constant=_reject_constant)


def _loads(line) -> dict:
    try:
        obj = _DECODER.decode(line)
    except (ValueError, TypeError) as exc:
        raise MalformedRecord(f"bad JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise MalformedRecord("record is not a JSON object")
    return obj


def _real(obj: dict, key: str) -> float:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise MalformedRecord(f"{key} is not a number: {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise MalformedRecord(f"{key} is not finite")
    return v


def _int(obj: dict, key: str) -> int:
    v = obj[key]
    if isinstance(v, bool):
        raise MalformedRecord(f"{key} is not an integer")
    if isinstance(v, float) and v.is_integer():
        v = int(v)
    if not isinstance(v, int):
        raise MalformedRecord(f"{key} is not an integer: {v!r}")
    return v


@dataclass(frozen=True, slots=True)
class SampleRecord:
    user_id: str
    data_type: DataType
    value: float
    timestamp: int
    value_type: ValueType = ValueType.DOUBLE

    def __post_init__(self):
        if not isinstance(self.user_id, str):
            raise MalformedRecord("user_id must be a string")
        if not isinstance(self.data_type, DataType):
            try:
                object.__setattr__(self, "data_type", DataType(self.data_type))
            except ValueError:
                raise MalformedRecord(f"unknown DataType {self.data_type!r}") from None
        if self.value_type != ValueType.DOUBLE:
            raise MalformedRecord(f"unsupported ValueType {self.value_type!r}")
        if not math.isfinite(self.value):
            raise MalformedRecord("value must be finite")
        if self.timestamp < 0:
            raise MalformedRecord("timestamp must be >= 0")
        object.__setattr__(self, "value", quantize(self.value))
        object.__setattr__(self, "timestamp", int(self.timestamp))


def encode_sample(r: SampleRecord) -> str:
    return (
        f'{{"UserID":{_json_str(r.user_id)},"DataType":"{r.data_type.value}",'
        f'"ValueType":"{r.value_type.value}","Value":{format_real(r.value)},'
        f'"TimeStamp":{r.timestamp}}}\n'
    )


def decode_sample(line, timestamp_unit: str = "ms") -> SampleRecord:
    """Parse one wire line. Unknown extra keys are ignored.

    ``timestamp_unit="seconds"`` accepts files whose TimeStamp is in
    seconds since the epoch and converts them to milliseconds.
    """
    obj = _loads(line)
    try:
        user, dt, vt = obj["UserID"], obj["DataType"], obj["ValueType"]
        obj["Value"], obj["TimeStamp"]
    except KeyError as exc:
        raise MalformedRecord(f"missing key {exc.args[0]}") from None
    if type(user) is not str:
        raise MalformedRecord("UserID must be a string")
    dtype = _DATA_TYPES.get(dt) if type(dt) is str else None
    if dtype is None:
        raise MalformedRecord(f"unknown DataType {dt!r}")
    if vt != "DOUBLE":
        raise MalformedRecord(f"unsupported ValueType {vt!r}")
    try:
        scale = _TS_SCALE[timestamp_unit]
    except KeyError:
        raise ValueError(f"unknown timestamp unit {timestamp_unit!r}") from None
    ts = _int(obj, "TimeStamp") if scale == 1 else int(round(_real(obj, "TimeStamp") * scale))
    if ts < 0:
        raise MalformedRecord("TimeStamp must be >= 0")
    # already validated: skip __post_init__
    r = _new(SampleRecord)
    _set(r, "user_id", user)
    _set(r, "data_type", dtype)
    _set(r, "value", quantize(_real(obj, "Value")))
    _set(r, "timestamp", ts)
    _set(r, "value_type", ValueType.DOUBLE)
    return r


_new = object.__new__
_set = object.__setattr__


@dataclass(frozen=True, slots=True)
class ResultRecord:
    user_id: str
    kind: ResultKind
    window_start: int
    window_end: int
    value: float
    aux: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.kind, ResultKind):
            try:
                object.__setattr__(self, "kind", ResultKind(self.kind))
            except ValueError:
                raise MalformedRecord(f"unknown result kind {self.kind!r}") from None
        if not self.window_start < self.window_end:
            raise MalformedRecord("window_start must precede window_end")
        lo, hi = RESULT_RANGES[self.kind]
        if not (math.isfinite(self.value) and lo <= self.value <= hi):
            raise MalformedRecord(f"{self.kind.value} value {self.value} outside [{lo}, {hi}]")
        aux = {}
        for k, v in self.aux.items():
            if not math.isfinite(v):
                raise MalformedRecord(f"aux {k} is not finite")
            aux[str(k)] = quantize(float(v))
        object.__setattr__(self, "value", quantize(self.value))
        object.__setattr__(self, "aux", aux)


def encode_result(r: ResultRecord) -> str:
    aux = ",".join(f"{_json_str(k)}:{format_real(r.aux[k])}" for k in sorted(r.aux))
    return (
        f'{{"UserID":{_json_str(r.user_id)},"Kind":"{r.kind.value}",'
        f'"WindowStart":{r.window_start},"WindowEnd":{r.window_end},'
        f'"Value":{format_real(r.value)},"Aux":{{{aux}}}}}\n'
    )


def decode_result(line) -> ResultRecord:
    obj = _loads(line)
    for key in _RESULT_KEYS:
        if key not in obj:
            raise MalformedRecord(f"missing key {key}")
    kind = _RESULT_KINDS.get(obj["Kind"]) if isinstance(obj["Kind"], str) else None
    if kind is None:
        raise MalformedRecord(f"unknown Kind {obj['Kind']!r}")
    if not isinstance(obj["UserID"], str):
        raise MalformedRecord("UserID must be a string")
    raw_aux = obj["Aux"]
    if not isinstance(raw_aux, dict):
        raise MalformedRecord("Aux must be an object")
    aux = {k: _real(raw_aux, k) for k in raw_aux}
    return ResultRecord(
        obj["UserID"], kind, _int(obj, "WindowStart"), _int(obj, "WindowEnd"), _real(obj, "Value"), aux
    )

"""Wire contract between the jack device emulator and the scoring service.

One UTF-8 JSON object per message, a single line terminated by LF.  Encoding
is byte-deterministic: "type" first, then the fields in declaration order,
no extra whitespace, distances with exactly two decimals and echo durations
with one.  Decoding tolerates reordered fields but is strict about types.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

ERROR_CODES = ("out_of_range", "busy", "malformed")


class ProtocolError(Exception):
    pass


class UnknownMessageError(ProtocolError):
    pass


class MalformedError(ProtocolError):
    pass


@dataclass(frozen=True)
class Hello:
    device_id: str
    firmware: str


@dataclass(frozen=True)
class MeasureRequest:
    request_id: str
    boule_id: str


@dataclass(frozen=True)
class MeasurementReport:
    request_id: str
    boule_id: str
    distance_cm: float  # two-decimal value
    echo_duration_us: float  # one-decimal value
    environment: str


@dataclass(frozen=True)
class DeviceError:
    request_id: str
    code: str
    detail: str

    def __post_init__(self):
        if self.code not in ERROR_CODES:
            raise ValueError(f"unknown device error code {self.code!r}")


ProtocolMessage = Hello | MeasureRequest | MeasurementReport | DeviceError

_s = json.dumps  # escapes control chars, so no interior LF can appear


def encode(msg: ProtocolMessage) -> bytes:
    if isinstance(msg, Hello):
        line = (
            f'{{"type":"hello","device_id":{_s(msg.device_id)},'
            f'"firmware":{_s(msg.firmware)}}}'
        )
    elif isinstance(msg, MeasureRequest):
        line = (
            f'{{"type":"measure_request","request_id":{_s(msg.request_id)},'
            f'"boule_id":{_s(msg.boule_id)}}}'
        )
    elif isinstance(msg, MeasurementReport):
        line = (
            f'{{"type":"measurement_report","request_id":{_s(msg.request_id)},'
            f'"boule_id":{_s(msg.boule_id)},'
            f'"distance_cm":{msg.distance_cm:.2f},'
            f'"echo_duration_us":{msg.echo_duration_us:.1f},'
            f'"environment":{_s(msg.environment)}}}'
        )
    elif isinstance(msg, DeviceError):
        line = (
            f'{{"type":"device_error","request_id":{_s(msg.request_id)},'
            f'"code":{_s(msg.code)},"detail":{_s(msg.detail)}}}'
        )
    else:
        raise TypeError(f"not a protocol message: {msg!r}")
    return line.encode("utf-8") + b"\n"


def _field(obj: dict, name: str, kind) -> object:
    if name not in obj:
        raise MalformedError(f"missing field {name!r}")
    value = obj[name]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise MalformedError(f"field {name!r} must be a number")
        return float(value)
    if not isinstance(value, kind):
        raise MalformedError(f"field {name!r} must be {kind.__name__}")
    return value


def decode(line: bytes | str) -> ProtocolMessage:
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedError(f"not UTF-8: {exc}") from None
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedError(f"not a JSON object: {exc}") from None
    if not isinstance(obj, dict):
        raise MalformedError("frame must be a JSON object")
    kind = obj.get("type")
    if kind == "hello":
        return Hello(_field(obj, "device_id", str), _field(obj, "firmware", str))
    if kind == "measure_request":
        return MeasureRequest(_field(obj, "request_id", str), _field(obj, "boule_id", str))
    if kind == "measurement_report":
        return MeasurementReport(
            _field(obj, "request_id", str),
            _field(obj, "boule_id", str),
            _field(obj, "distance_cm", float),
            _field(obj, "echo_duration_us", float),
            _field(obj, "environment", str),
        )
    if kind == "device_error":
        code = _field(obj, "code", str)
        if code not in ERROR_CODES:
            raise MalformedError(f"unknown device error code {code!r}")
        return DeviceError(_field(obj, "request_id", str), code, _field(obj, "detail", str))
    if kind is None:
        raise MalformedError("missing field 'type'")
    raise UnknownMessageError(f"unknown message type {kind!r}")

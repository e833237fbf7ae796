"""Line-delimited wire protocol between the manikin and the application.

Grammar (one UTF-8 frame per line, newline-terminated):

    command:  CMD <START|STOP|RESET> <distance|gyro|all>
    ack:      ACK <verb> <sensor> <bitmap>
    sample:   SMP <distance|gyro> <value with exactly 1 decimal> <ts_ms>
    error:    ERR <code> <message...>

The ack bitmap is two characters, the streaming flags for distance then
gyro ("10" = distance on, gyro off). Sample timestamps are non-negative
integer milliseconds of the device clock.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Union


class ProtocolError(ValueError):
    """A line that does not parse under the frame grammar."""


class Verb(str, Enum):
    START = "START"
    STOP = "STOP"
    RESET = "RESET"


class Sensor(str, Enum):
    DISTANCE = "distance"
    GYRO = "gyro"
    ALL = "all"


@dataclass(frozen=True)
class CommandFrame:
    verb: Verb
    sensor: Sensor


@dataclass(frozen=True)
class AckFrame:
    verb: Verb
    sensor: Sensor
    bitmap: str


@dataclass(frozen=True)
class SampleFrame:
    sensor: Sensor
    value: float
    ts: int


@dataclass(frozen=True)
class ErrorFrame:
    code: str
    message: str


Frame = Union[CommandFrame, AckFrame, SampleFrame, ErrorFrame]

_VALUE_RE = re.compile(r"^-?\d+\.\d$")
_TS_RE = re.compile(r"^\d+$")
_BITMAP_RE = re.compile(r"^[01]{2}$")
_CODE_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_-]*$")


def _strip_line(line: str) -> str:
    if "\n" in line.rstrip("\r\n") or "\r" in line.rstrip("\r\n"):
        raise ProtocolError("embedded newline in frame")
    return line.rstrip("\r\n")


def parse_frame(line: str) -> Frame:
    """Parse one frame line; raises :class:`ProtocolError` on any deviation."""
    body = _strip_line(line)
    if not body:
        raise ProtocolError("empty frame")
    parts = body.split(" ")
    tag = parts[0]
    if tag == "CMD":
        if len(parts) != 3:
            raise ProtocolError(f"command needs 2 fields, got {len(parts) - 1}")
        try:
            return CommandFrame(Verb(parts[1]), Sensor(parts[2]))
        except ValueError as exc:
            raise ProtocolError(f"bad command token: {exc}") from None
    if tag == "ACK":
        if len(parts) != 4:
            raise ProtocolError(f"ack needs 3 fields, got {len(parts) - 1}")
        if not _BITMAP_RE.match(parts[3]):
            raise ProtocolError(f"bad streaming bitmap: {parts[3]!r}")
        try:
            return AckFrame(Verb(parts[1]), Sensor(parts[2]), parts[3])
        except ValueError as exc:
            raise ProtocolError(f"bad ack token: {exc}") from None
    if tag == "SMP":
        if len(parts) != 4:
            raise ProtocolError(f"sample needs 3 fields, got {len(parts) - 1}")
        if parts[1] not in (Sensor.DISTANCE.value, Sensor.GYRO.value):
            raise ProtocolError(f"bad sample sensor: {parts[1]!r}")
        if not _VALUE_RE.match(parts[2]):
            raise ProtocolError(f"bad sample value: {parts[2]!r}")
        if not _TS_RE.match(parts[3]):
            raise ProtocolError(f"bad sample timestamp: {parts[3]!r}")
        return SampleFrame(Sensor(parts[1]), float(parts[2]), int(parts[3]))
    if tag == "ERR":
        if len(parts) < 3:
            raise ProtocolError("error frame needs a code and a message")
        if not _CODE_RE.match(parts[1]):
            raise ProtocolError(f"bad error code: {parts[1]!r}")
        return ErrorFrame(parts[1], " ".join(parts[2:]))
    raise ProtocolError(f"unknown frame tag: {tag!r}")


def format_frame(frame: Frame) -> str:
    """Render a frame to its wire line, including the trailing newline."""
    if isinstance(frame, CommandFrame):
        return f"CMD {frame.verb.value} {frame.sensor.value}\n"
    if isinstance(frame, AckFrame):
        return f"ACK {frame.verb.value} {frame.sensor.value} {frame.bitmap}\n"
    if isinstance(frame, SampleFrame):
        return f"SMP {frame.sensor.value} {frame.value:.1f} {frame.ts}\n"
    if isinstance(frame, ErrorFrame):
        return f"ERR {frame.code} {frame.message}\n"
    raise TypeError(f"not a frame: {frame!r}")

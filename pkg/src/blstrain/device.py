"""Virtual sensor-equipped manikin.

Simulates the chest/head hardware behind the wire protocol: an ultrasonic
distance channel (chest-top to ground, spring travel capped at 6.5 cm) and a
gyro channel for head pitch. Sampling runs on a shared period grid
(1000/sample_rate ms); distance readings carry seeded gaussian noise and are
quantized to 0.1 cm. Commands toggle streaming per sensor; a device built
without a gyro still acks gyro commands but never emits gyro samples.

`DeviceServer` exposes one device on a TCP port, one connection at a time,
newline-delimited frames both ways.
"""

from __future__ import annotations

import random
import select
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Any

from .protocol import (
    AckFrame,
    CommandFrame,
    ErrorFrame,
    Frame,
    ProtocolError,
    SampleFrame,
    Sensor,
    Verb,
    format_frame,
    parse_frame,
)

MAX_TRAVEL_CM = 6.5
MIN_HEAD_PITCH = -45.0
MAX_HEAD_PITCH = 60.0


class DeviceError(Exception):
    pass


class DeviceUnreachableError(DeviceError):
    """The configured device address does not answer."""


@dataclass
class DeviceConfig:
    rest_height: float = 20.0
    sample_rate: float = 20.0
    noise_sigma: float = 0.05
    seed: int = 0
    gyro: bool = True

    def __post_init__(self) -> None:
        if self.sample_rate <= 0 or not (5.0 <= self.sample_rate <= 100.0):
            raise ValueError("sample_rate must be within 5..100 Hz")
        if self.rest_height <= MAX_TRAVEL_CM:
            raise ValueError("rest_height must exceed the spring travel")

    def to_doc(self) -> dict[str, Any]:
        return {
            "rest_height": self.rest_height,
            "sample_rate": self.sample_rate,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "gyro": self.gyro,
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "DeviceConfig":
        return cls(
            rest_height=float(doc.get("rest_height", 20.0)),
            sample_rate=float(doc.get("sample_rate", 20.0)),
            noise_sigma=float(doc.get("noise_sigma", 0.05)),
            seed=int(doc.get("seed", 0)),
            gyro=bool(doc.get("gyro", True)),
        )


@dataclass
class DeviceState:
    chest_rest_height: float
    applied_depth: float = 0.0
    head_pitch: float = 0.0
    streaming: dict[str, bool] = field(
        default_factory=lambda: {Sensor.DISTANCE.value: False, Sensor.GYRO.value: False}
    )
    sample_rate: float = 20.0
    noise_sigma: float = 0.05
    clock: int = 0


@dataclass
class CompressionPulse:
    """Scripted square push: full depth over [start, start+duration)."""

    start_ms: int
    depth_cm: float
    duration_ms: int


class VirtualManikin:
    """Deterministic manikin simulator given (seed, commands, compressions)."""

    def __init__(self, config: DeviceConfig | None = None):
        self.config = config or DeviceConfig()
        self.state = DeviceState(
            chest_rest_height=self.config.rest_height,
            sample_rate=self.config.sample_rate,
            noise_sigma=self.config.noise_sigma,
        )
        self._rng = random.Random(self.config.seed)
        self._emit_index = 0
        self._pulses: list[CompressionPulse] = []
        self._pitch_schedule: list[tuple[int, float]] = []

    @property
    def period_ms(self) -> float:
        return 1000.0 / self.state.sample_rate

    # -- command handling ---------------------------------------------------

    def handle_line(self, line: str) -> str:
        """Process one received line; returns the ack or error line."""
        try:
            frame = parse_frame(line)
        except ProtocolError as exc:
            return format_frame(ErrorFrame("bad-frame", str(exc)))
        if not isinstance(frame, CommandFrame):
            return format_frame(ErrorFrame("not-a-command", f"got {type(frame).__name__}"))
        return format_frame(self.handle_command(frame))

    def handle_command(self, cmd: CommandFrame) -> AckFrame:
        if cmd.verb in (Verb.START, Verb.STOP):
            on = cmd.verb == Verb.START
            if cmd.sensor == Sensor.ALL:
                self.state.streaming[Sensor.DISTANCE.value] = on
                self.state.streaming[Sensor.GYRO.value] = on
            else:
                self.state.streaming[cmd.sensor.value] = on
        elif cmd.verb == Verb.RESET:
            self.state.clock = 0
            self.state.applied_depth = 0.0
            self._emit_index = 0
        return AckFrame(cmd.verb, cmd.sensor, self._bitmap())

    def _bitmap(self) -> str:
        return "{}{}".format(
            int(self.state.streaming[Sensor.DISTANCE.value]),
            int(self.state.streaming[Sensor.GYRO.value]),
        )

    # -- physical inputs ----------------------------------------------------

    def apply_compression(self, depth_cm: float) -> None:
        """Set the externally applied push depth (spring tracks instantly)."""
        if depth_cm < 0:
            raise DeviceError("compression depth must be >= 0")
        self.state.applied_depth = min(depth_cm, MAX_TRAVEL_CM)

    def set_head_pitch(self, degrees: float) -> None:
        if not (MIN_HEAD_PITCH <= degrees <= MAX_HEAD_PITCH):
            raise DeviceError(f"head pitch {degrees} out of range [{MIN_HEAD_PITCH}, {MAX_HEAD_PITCH}]")
        self.state.head_pitch = degrees

    def load_compression_profile(self, pulses: list[CompressionPulse]) -> None:
        self._pulses = sorted(pulses, key=lambda p: p.start_ms)

    def add_pulse(self, pulse: CompressionPulse) -> None:
        self._pulses.append(pulse)
        self._pulses.sort(key=lambda p: p.start_ms)

    def load_pitch_schedule(self, steps: list[tuple[int, float]]) -> None:
        """Step function of (ts_ms, degrees); overrides manual pitch."""
        self._pitch_schedule = sorted(steps)

    def _depth_at(self, t: int) -> float:
        depth = self.state.applied_depth
        for p in self._pulses:
            if p.start_ms <= t < p.start_ms + p.duration_ms:
                depth = max(depth, p.depth_cm)
        return min(depth, MAX_TRAVEL_CM)

    def _pitch_at(self, t: int) -> float:
        pitch = self.state.head_pitch
        for ts, deg in self._pitch_schedule:
            if ts <= t:
                pitch = deg
            else:
                break
        return pitch

    # -- sampling -----------------------------------------------------------

    def tick(self, dt_ms: int) -> list[str]:
        """Advance the clock; returns the wire lines emitted in the interval."""
        if dt_ms <= 0:
            raise DeviceError("dt must be > 0")
        end = self.state.clock + dt_ms
        lines: list[str] = []
        while True:
            next_t = round((self._emit_index + 1) * self.period_ms)
            if next_t > end:
                break
            self._emit_index += 1
            if self.state.streaming[Sensor.DISTANCE.value]:
                value = self.state.chest_rest_height - self._depth_at(next_t)
                if self.state.noise_sigma > 0:
                    value += self._rng.gauss(0.0, self.state.noise_sigma)
                value = max(0.0, round(value, 1))
                lines.append(format_frame(SampleFrame(Sensor.DISTANCE, value, next_t)))
            if self.state.streaming[Sensor.GYRO.value] and self.config.gyro:
                pitch = round(self._pitch_at(next_t), 1)
                lines.append(format_frame(SampleFrame(Sensor.GYRO, pitch, next_t)))
        self.state.clock = end
        return lines

    def next_emit_ts(self) -> int:
        return round((self._emit_index + 1) * self.period_ms)


# -- transports --------------------------------------------------------------


class DeviceLink:
    """Engine-side handle to a device; `ensure_connected` must not block long."""

    def ensure_connected(self) -> None:
        raise NotImplementedError

    def close(self) -> None:
        pass


class InProcessLink(DeviceLink):
    def __init__(self, manikin: VirtualManikin):
        self.manikin = manikin

    def ensure_connected(self) -> None:
        return None


class SocketLink(DeviceLink):
    """TCP client for a device server; frames read line by line."""

    def __init__(self, host: str, port: int, timeout: float = 2.0):
        self.host = host
        self.port = port
        self.timeout = timeout
        self._sock: socket.socket | None = None
        self._buf = b""

    @classmethod
    def from_address(cls, address: str) -> "SocketLink":
        host, _, port = address.rpartition(":")
        if not host or not port.isdigit():
            raise DeviceError(f"bad device address: {address!r} (want host:port)")
        return cls(host, int(port))

    def ensure_connected(self) -> None:
        if self._sock is not None:
            return
        try:
            self._sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
        except OSError as exc:
            raise DeviceUnreachableError(f"device at {self.host}:{self.port} unreachable: {exc}") from exc

    def send_command(self, verb: Verb, sensor: Sensor) -> None:
        self.ensure_connected()
        assert self._sock is not None
        self._sock.sendall(format_frame(CommandFrame(verb, sensor)).encode("utf-8"))

    def read_line(self, timeout: float | None = None) -> str | None:
        """Next full line, or None on timeout/close."""
        self.ensure_connected()
        assert self._sock is not None
        deadline = time.monotonic() + (timeout if timeout is not None else self.timeout)
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            ready, _, _ = select.select([self._sock], [], [], remaining)
            if not ready:
                return None
            chunk = self._sock.recv(4096)
            if not chunk:
                return None
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line.decode("utf-8") + "\n"

    def close(self) -> None:
        if self._sock is not None:
            self._sock.close()
            self._sock = None


class DeviceServer:
    """Serves one VirtualManikin on a TCP port, one connection at a time.

    Command handling and sample emission share one loop, so an ack for STOP
    is on the wire strictly before any later frame, and no frames for a
    stopped sensor follow its ack.
    """

    def __init__(self, manikin: VirtualManikin, host: str = "127.0.0.1", port: int = 0):
        self.manikin = manikin
        self._listener = socket.create_server((host, port))
        self._listener.settimeout(0.2)
        self.host, self.port = self._listener.getsockname()[:2]
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> "DeviceServer":
        self._thread = threading.Thread(target=self._run, name="device-server", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
        self._listener.close()

    def _run(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            with conn:
                self._serve_connection(conn)

    def _serve_connection(self, conn: socket.socket) -> None:
        conn.setblocking(False)
        buf = b""
        period_s = self.manikin.period_ms / 1000.0
        last_tick = time.monotonic()
        while not self._stop.is_set():
            now = time.monotonic()
            timeout = max(0.0, period_s - (now - last_tick))
            try:
                ready, _, _ = select.select([conn], [], [], timeout)
            except OSError:
                return
            try:
                if ready:
                    chunk = conn.recv(4096)
                    if not chunk:
                        return
                    buf += chunk
                    while b"\n" in buf:
                        raw, buf = buf.split(b"\n", 1)
                        try:
                            line = raw.decode("utf-8") + "\n"
                        except UnicodeDecodeError:
                            line = ""
                        reply = (
                            self.manikin.handle_line(line)
                            if line
                            else format_frame(ErrorFrame("bad-frame", "not utf-8"))
                        )
                        conn.sendall(reply.encode("utf-8"))
                now = time.monotonic()
                if now - last_tick >= period_s:
                    dt = int(round((now - last_tick) * 1000.0))
                    last_tick = now
                    for sample_line in self.manikin.tick(max(1, dt)):
                        conn.sendall(sample_line.encode("utf-8"))
            except (BrokenPipeError, ConnectionResetError, OSError):
                return

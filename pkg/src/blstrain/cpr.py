"""Streaming chest-compression analytics.

Turns raw chest-distance telemetry into compression events and quality
metrics. The pipeline is:

- `calibrate_zero_level()`: average the unpushed chest distance into a baseline.
- `PushTracker`: detect pushes as excursions below baseline minus a fixed
  threshold (3 cm by default), measure per-push depth from the lowest
  distance seen, and back-fill whether the chest was fully released.
- `instant_rate()` / `displayed_rate()`: per-minute rate between push starts,
  smoothed over a four-push rolling window for display.
- `summarize()`: end-of-session averages and per-push series for debriefing.
- `head_tilt_angle()`: maximum sustained head pitch from gyro samples.

Distances are centimeters quantized to 0.1 cm, timestamps integer
milliseconds; both match what the wire protocol carries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable

from . import protocol


class CprError(Exception):
    """Base class for analytics errors."""


class CalibrationError(CprError):
    """Not enough clean samples to establish a zero level."""


class NotCalibratedError(CprError):
    """Samples fed to a tracker that has no zero level yet."""


class StreamOrderError(CprError):
    """Sample timestamps went backwards within one stream."""


class SensorChannel(str, Enum):
    DISTANCE = "distance"
    GYRO = "gyro"


@dataclass(frozen=True)
class SensorSample:
    """One sensor reading: distance in cm or head pitch in degrees."""

    sensor: SensorChannel
    value: float
    ts: int


@dataclass(frozen=True)
class ZeroLevel:
    """Calibrated chest-top distance with no compression applied."""

    baseline: float
    sample_count: int


@dataclass
class CprConfig:
    """Detection thresholds and display bands.

    ``push_threshold`` is the fixed depth (cm) below baseline that starts and
    ends a push; ``release_tolerance`` is how close to baseline the chest must
    return for the push to count as fully released.
    """

    push_threshold: float = 3.0
    release_tolerance: float = 0.5
    rolling_window: int = 4
    target_rate: float = 105.0
    rate_ok_band: tuple[float, float] = (95.0, 125.0)
    depth_ok_band: tuple[float, float] = (5.0, 6.0)

    def __post_init__(self) -> None:
        if not (0 < self.release_tolerance < self.push_threshold):
            raise ValueError("release_tolerance must be within (0, push_threshold)")
        if self.rolling_window < 1:
            raise ValueError("rolling_window must be >= 1")

    def to_doc(self) -> dict[str, Any]:
        return {
            "push_threshold": self.push_threshold,
            "release_tolerance": self.release_tolerance,
            "rolling_window": self.rolling_window,
            "target_rate": self.target_rate,
            "rate_ok_band": list(self.rate_ok_band),
            "depth_ok_band": list(self.depth_ok_band),
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "CprConfig":
        return cls(
            push_threshold=float(doc.get("push_threshold", 3.0)),
            release_tolerance=float(doc.get("release_tolerance", 0.5)),
            rolling_window=int(doc.get("rolling_window", 4)),
            target_rate=float(doc.get("target_rate", 105.0)),
            rate_ok_band=tuple(doc.get("rate_ok_band", (95.0, 125.0))),  # type: ignore[arg-type]
            depth_ok_band=tuple(doc.get("depth_ok_band", (5.0, 6.0))),  # type: ignore[arg-type]
        )


@dataclass
class PushEvent:
    """One detected compression.

    ``depth`` is baseline minus the lowest distance measured during the push.
    ``released_fully`` is back-filled once the chest returns to within the
    release tolerance of baseline before the next push starts.
    """

    start_ts: int
    end_ts: int
    depth: float
    min_distance: float
    released_fully: bool = False


@dataclass
class CprSummary:
    """Session-level compression statistics plus per-push debrief series."""

    push_count: int
    avg_rate: float | None
    avg_depth: float | None
    full_release_always: bool
    rate_series: list[tuple[int, float]]
    depth_series: list[tuple[int, float]]

    def to_doc(self) -> dict[str, Any]:
        return {
            "push_count": self.push_count,
            "avg_rate": self.avg_rate,
            "avg_depth": self.avg_depth,
            "full_release_always": self.full_release_always,
            "rate_series": [[ts, v] for ts, v in self.rate_series],
            "depth_series": [[ts, v] for ts, v in self.depth_series],
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "CprSummary":
        return cls(
            push_count=int(doc["push_count"]),
            avg_rate=doc.get("avg_rate"),
            avg_depth=doc.get("avg_depth"),
            full_release_always=bool(doc["full_release_always"]),
            rate_series=[(int(ts), float(v)) for ts, v in doc.get("rate_series", [])],
            depth_series=[(int(ts), float(v)) for ts, v in doc.get("depth_series", [])],
        )


def calibrate_zero_level(
    samples: Iterable[SensorSample], min_samples: int = 10, min_span_ms: int = 500
) -> ZeroLevel:
    """Average unpushed distance samples into the zero level.

    Requires at least ``min_samples`` distance samples spanning at least
    ``min_span_ms``; any non-distance sample in the batch is an error.
    """
    batch = list(samples)
    for s in batch:
        if s.sensor != SensorChannel.DISTANCE:
            raise CalibrationError(f"non-distance sample in calibration batch: {s.sensor.value}")
    if len(batch) < min_samples:
        raise CalibrationError(f"too few samples: {len(batch)} < {min_samples}")
    span = batch[-1].ts - batch[0].ts
    if span < min_span_ms:
        raise CalibrationError(f"samples span {span} ms < {min_span_ms} ms")
    baseline = sum(s.value for s in batch) / len(batch)
    if baseline <= 0:
        raise CalibrationError("baseline must be positive")
    return ZeroLevel(baseline=baseline, sample_count=len(batch))


def instant_rate(prev: PushEvent, curr: PushEvent) -> float:
    """Compressions per minute from two consecutive push starts."""
    delta = curr.start_ts - prev.start_ts
    if delta <= 0:
        raise StreamOrderError(f"push starts not increasing: {prev.start_ts} -> {curr.start_ts}")
    return 60000.0 / delta


def displayed_rate(recent: list[float], window: int = 4) -> float | None:
    """Mean of the trailing ``window`` instantaneous rates; None if empty."""
    if not recent:
        return None
    tail = recent[-window:]
    return sum(tail) / len(tail)


@dataclass
class LiveMetrics:
    """What the real-time compression display shows."""

    push_count: int
    last_depth: float | None
    displayed_rate: float | None


class PushTracker:
    """Single-writer streaming push detector for one distance stream.

    Feed samples in timestamp order via :meth:`ingest`; each call returns the
    (zero or one) push that just finished. The tracker must be calibrated
    before the first distance sample.
    """

    def __init__(self, config: CprConfig | None = None):
        self.config = config or CprConfig()
        self.zero: ZeroLevel | None = None
        self.events: list[PushEvent] = []
        self.instant_rates: list[float] = []
        self._last_ts: int | None = None
        self._in_push = False
        self._push_start = 0
        self._push_min = 0.0
        self._pending_release: PushEvent | None = None

    def calibrate(self, zero: ZeroLevel) -> None:
        self.zero = zero

    @property
    def calibrated(self) -> bool:
        return self.zero is not None

    def ingest(self, sample: SensorSample) -> list[PushEvent]:
        if self.zero is None:
            raise NotCalibratedError("tracker has no zero level")
        if sample.sensor != SensorChannel.DISTANCE:
            return []
        if self._last_ts is not None and sample.ts < self._last_ts:
            raise StreamOrderError(f"timestamp regression: {self._last_ts} -> {sample.ts}")
        self._last_ts = sample.ts

        level = self.zero.baseline - self.config.push_threshold
        value = sample.value
        emitted: list[PushEvent] = []

        if self._in_push:
            self._push_min = min(self._push_min, value)
            if value > level:
                event = PushEvent(
                    start_ts=self._push_start,
                    end_ts=sample.ts,
                    depth=self.zero.baseline - self._push_min,
                    min_distance=self._push_min,
                )
                self.events.append(event)
                if len(self.events) >= 2:
                    self.instant_rates.append(instant_rate(self.events[-2], event))
                self._in_push = False
                self._pending_release = event
                emitted.append(event)
        elif value < level:
            self._in_push = True
            self._push_start = sample.ts
            self._push_min = value
            self._pending_release = None
        elif self._pending_release is not None:
            if value >= self.zero.baseline - self.config.release_tolerance:
                self._pending_release.released_fully = True
                self._pending_release = None
        return emitted

    def displayed_rate(self) -> float | None:
        return displayed_rate(self.instant_rates, self.config.rolling_window)

    def live_metrics(self) -> LiveMetrics:
        return LiveMetrics(
            push_count=len(self.events),
            last_depth=self.events[-1].depth if self.events else None,
            displayed_rate=self.displayed_rate(),
        )


def summarize(events: list[PushEvent]) -> CprSummary:
    """Fold push events into the debrief summary.

    The rate series starts at the second push (rate is defined on inter-push
    intervals); the depth series carries one point per push.
    """
    depth_series = [(e.start_ts, e.depth) for e in events]
    rate_series: list[tuple[int, float]] = []
    for prev, curr in zip(events, events[1:]):
        rate_series.append((curr.start_ts, instant_rate(prev, curr)))
    rates = [v for _, v in rate_series]
    depths = [v for _, v in depth_series]
    return CprSummary(
        push_count=len(events),
        avg_rate=sum(rates) / len(rates) if rates else None,
        avg_depth=sum(depths) / len(depths) if depths else None,
        full_release_always=all(e.released_fully for e in events),
        rate_series=rate_series,
        depth_series=depth_series,
    )


def head_tilt_angle(samples: Iterable[SensorSample], hold_ms: int = 500) -> float:
    """Maximum pitch angle sustained for at least ``hold_ms``.

    A window counts as sustained only if samples cover it end to end; the
    sustained angle of a window is its minimum pitch. Returns 0.0 when no
    window spans the hold time. Errors if no gyro samples are present.
    """
    gyro = [s for s in samples if s.sensor == SensorChannel.GYRO]
    if not gyro:
        raise CprError("no gyro samples")
    best = 0.0
    j = 0
    for i in range(len(gyro)):
        if j < i:
            j = i
        while j < len(gyro) and gyro[j].ts - gyro[i].ts < hold_ms:
            j += 1
        if j == len(gyro):
            break
        window_min = min(s.value for s in gyro[i : j + 1])
        best = max(best, window_min)
    return best


def samples_from_lines(lines: Iterable[str]) -> list[SensorSample]:
    """Parse recorded wire sample lines (non-sample frames are skipped)."""
    out: list[SensorSample] = []
    for line in lines:
        if not line.strip():
            continue
        frame = protocol.parse_frame(line)
        if isinstance(frame, protocol.SampleFrame):
            out.append(SensorSample(SensorChannel(frame.sensor.value), frame.value, frame.ts))
    return out


def read_trace(path: str) -> list[SensorSample]:
    """Load a recorded sensor trace file (one wire frame per line)."""
    with open(path, "r", encoding="utf-8") as fh:
        return samples_from_lines(fh)

"""Scripted trainee runs.

A scenario script stands in for the human trainee: a timed list of session
events plus a compression profile (and optional head-pitch schedule) played
through an in-process virtual manikin. The runner advances one logical
millisecond at a time, so a fixed (script, config, seed) always produces an
identical sealed log.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .device import MAX_TRAVEL_CM, CompressionPulse, DeviceConfig, SocketLink, VirtualManikin
from .engine import EngineConfig, Session, SessionLog, TrainingMode
from .events import EventSource, SessionEvent
from .jsonutil import doc_hash
from .protocol import CommandFrame, ProtocolError, SampleFrame, Sensor, Verb, parse_frame
from .sequence import SequenceGraph, build_default_sequence, graph_from_doc

SCENARIO_SCHEMA = "bls-scenario/1"


class ScenarioError(ValueError):
    pass


@dataclass
class ScenarioScript:
    name: str
    mode: TrainingMode
    events: list[SessionEvent]
    compressions: list[CompressionPulse] = field(default_factory=list)
    pitch_schedule: list[tuple[int, float]] = field(default_factory=list)
    device: DeviceConfig = field(default_factory=lambda: DeviceConfig(noise_sigma=0.0))
    trainee_id: str = "anon"
    sequence_doc: dict[str, Any] | None = None

    def to_doc(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "schema": SCENARIO_SCHEMA,
            "name": self.name,
            "mode": self.mode.value,
            "trainee": self.trainee_id,
            "device": self.device.to_doc(),
            "events": [
                {"ts": e.ts, "kind": e.kind.value, "payload": e.payload} for e in self.events
            ],
            "compressions": [
                {"start": p.start_ms, "depth": p.depth_cm, "duration": p.duration_ms}
                for p in self.compressions
            ],
            "pitch_schedule": [[ts, deg] for ts, deg in self.pitch_schedule],
        }
        if self.sequence_doc is not None:
            doc["sequence"] = self.sequence_doc
        return doc

    def graph(self) -> SequenceGraph:
        if self.sequence_doc is not None:
            return graph_from_doc(self.sequence_doc)
        return build_default_sequence()


def validate_script(script: ScenarioScript) -> list[str]:
    """Schedule checks: strictly increasing timestamps, depths within travel."""
    violations: list[str] = []
    last_ts = -1
    for e in script.events:
        if e.ts <= last_ts:
            violations.append(f"event timestamps not strictly increasing at ts={e.ts}")
        last_ts = e.ts
    last_start = -1
    for p in script.compressions:
        if p.start_ms <= last_start:
            violations.append(f"compression starts not strictly increasing at {p.start_ms}")
        last_start = p.start_ms
        if not (0 < p.depth_cm <= MAX_TRAVEL_CM):
            violations.append(f"compression depth {p.depth_cm} outside (0, {MAX_TRAVEL_CM}]")
        if p.duration_ms <= 0:
            violations.append(f"compression duration {p.duration_ms} must be > 0")
    return violations


def script_from_doc(doc: dict[str, Any]) -> ScenarioScript:
    if doc.get("schema") != SCENARIO_SCHEMA:
        raise ScenarioError(f"unsupported scenario schema: {doc.get('schema')!r}")
    script = ScenarioScript(
        name=doc["name"],
        mode=TrainingMode(doc.get("mode", "training")),
        events=[
            SessionEvent.from_doc({**e, "source": "script"}) for e in doc.get("events", [])
        ],
        compressions=[
            CompressionPulse(int(c["start"]), float(c["depth"]), int(c["duration"]))
            for c in doc.get("compressions", [])
        ],
        pitch_schedule=[(int(ts), float(deg)) for ts, deg in doc.get("pitch_schedule", [])],
        device=DeviceConfig.from_doc(doc.get("device", {"noise_sigma": 0.0})),
        trainee_id=doc.get("trainee", "anon"),
        sequence_doc=doc.get("sequence"),
    )
    violations = validate_script(script)
    if violations:
        raise ScenarioError("; ".join(violations))
    return script


def load_script(path: str) -> ScenarioScript:
    with open(path, "r", encoding="utf-8") as fh:
        return script_from_doc(json.load(fh))


def _script_end_ts(script: ScenarioScript) -> int:
    end = 0
    if script.events:
        end = max(end, script.events[-1].ts)
    for p in script.compressions:
        end = max(end, p.start_ms + p.duration_ms)
    for ts, _ in script.pitch_schedule:
        end = max(end, ts)
    return end


def run_script(
    script: ScenarioScript,
    mode: TrainingMode | None = None,
    config: EngineConfig | None = None,
    seed: int | None = None,
    trace_ref: str | None = None,
    tail_ms: int = 1500,
) -> tuple[SessionLog, list[str]]:
    """Drive a full session from a script through an in-process device.

    Returns the sealed log and the emitted sensor-trace lines. The session id
    derives from the script content, so reruns are bit-identical.
    """
    mode = mode or script.mode
    device_cfg = script.device
    if seed is not None:
        device_cfg = DeviceConfig.from_doc({**device_cfg.to_doc(), "seed": seed})
    session_id = "run-" + doc_hash({"script": script.to_doc(), "mode": mode.value, "seed": device_cfg.seed})[:12]

    manikin = VirtualManikin(device_cfg)
    manikin.load_compression_profile(script.compressions)
    if script.pitch_schedule:
        manikin.load_pitch_schedule(script.pitch_schedule)
    manikin.handle_command(CommandFrame(Verb.START, Sensor.DISTANCE))
    if device_cfg.gyro and script.pitch_schedule:
        manikin.handle_command(CommandFrame(Verb.START, Sensor.GYRO))

    session = Session(
        script.graph(),
        mode,
        config,
        session_id=session_id,
        started_at=0,
        trainee_id=script.trainee_id,
        sensor_trace_ref=trace_ref,
    )
    trace: list[str] = []
    end_ts = _script_end_ts(script) + tail_ms
    event_idx = 0
    events = script.events
    for now in range(1, end_ts + 1):
        for line in manikin.tick(1):
            trace.append(line)
            session.ingest_frame(line)
        while event_idx < len(events) and events[event_idx].ts <= now:
            event = events[event_idx]
            event.source = EventSource.SCRIPT
            session.apply_event(event)
            event_idx += 1
        session.tick_clock(now)
    log = session.finish(aborted=not session.end_task_completed, at=end_ts)
    return log, trace


def run_script_against_device(
    script: ScenarioScript,
    link: SocketLink,
    mode: TrainingMode | None = None,
    config: EngineConfig | None = None,
    trace_ref: str | None = None,
    idle_timeout_s: float = 5.0,
) -> tuple[SessionLog, list[str]]:
    """Drive a session against a live socket device (wall-clock paced).

    Script events fire once the device clock passes their timestamp; the run
    ends after the schedule is exhausted or the device goes quiet.
    """
    mode = mode or script.mode
    link.ensure_connected()
    link.send_command(Verb.START, Sensor.DISTANCE)
    if script.pitch_schedule:
        link.send_command(Verb.START, Sensor.GYRO)
    session = Session(
        script.graph(),
        mode,
        config,
        device=link,
        session_id="live-" + doc_hash(script.to_doc())[:12],
        started_at=0,
        trainee_id=script.trainee_id,
        sensor_trace_ref=trace_ref,
    )
    trace: list[str] = []
    end_ts = _script_end_ts(script) + 1500
    event_idx = 0
    now = 0
    while now < end_ts:
        line = link.read_line(timeout=idle_timeout_s)
        if line is None:
            break
        try:
            frame = parse_frame(line)
        except ProtocolError:
            continue
        if not isinstance(frame, SampleFrame):
            continue
        now = max(now, frame.ts)
        trace.append(line)
        session.ingest_frame(line)
        while event_idx < len(script.events) and script.events[event_idx].ts <= now:
            event = script.events[event_idx]
            event.source = EventSource.SCRIPT
            session.apply_event(event)
            event_idx += 1
        session.tick_clock(now)
    link.send_command(Verb.STOP, Sensor.ALL)
    log = session.finish(aborted=not session.end_task_completed, at=now)
    return log, trace

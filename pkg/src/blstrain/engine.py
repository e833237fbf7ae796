"""Training session engine.

Runs one trainee session over a task graph: consumes typed trainee events,
manikin telemetry frames and clock ticks, tracks per-task subtask progress,
emits real-time feedback, and seals a replayable session log.

Modes differ in gating: learning keeps only the current task's module active
and shows instructions; training activates every incomplete task so
out-of-order execution is observable (and penalized later by assessment).

All inputs are recorded in consumption order; device-derived events and all
feedback are regenerated on replay, so a sealed log plus its sensor trace
reproduces the feedback stream byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .cpr import (
    CprConfig,
    CprSummary,
    PushEvent,
    PushTracker,
    SensorChannel,
    SensorSample,
    calibrate_zero_level,
    displayed_rate,
    instant_rate,
    summarize,
)
from .device import DeviceLink
from .events import EventKind, EventSource, FeedbackEvent, FeedbackKind, SessionEvent
from .jsonutil import canonical, doc_hash
from .protocol import ProtocolError, SampleFrame, Sensor, parse_frame
from .sequence import (
    SequenceGraph,
    SubTaskSpec,
    TaskId,
    graph_from_doc,
    graph_to_doc,
    predecessors,
    successors,
    topological_order,
    validate_sequence,
)

SESSION_SCHEMA = "bls-session/1"


class EngineError(Exception):
    pass


class InvalidGraphError(EngineError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class SessionFinishedError(EngineError):
    pass


class SessionStateError(EngineError):
    pass


class TimestampRegressionError(EngineError):
    pass


class SchemaMismatchError(EngineError):
    pass


class TrainingMode(str, Enum):
    LEARNING = "learning"
    TRAINING = "training"


@dataclass
class EngineConfig:
    """Session-level thresholds on top of the CPR detection config."""

    cpr: CprConfig = field(default_factory=CprConfig)
    head_tilt_min_angle: float = 20.0
    head_tilt_hold_ms: int = 500
    calibration_ms: int = 1000
    calibration_min_samples: int = 10

    def to_doc(self) -> dict[str, Any]:
        return {
            "cpr": self.cpr.to_doc(),
            "head_tilt_min_angle": self.head_tilt_min_angle,
            "head_tilt_hold_ms": self.head_tilt_hold_ms,
            "calibration_ms": self.calibration_ms,
            "calibration_min_samples": self.calibration_min_samples,
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "EngineConfig":
        return cls(
            cpr=CprConfig.from_doc(doc.get("cpr", {})),
            head_tilt_min_angle=float(doc.get("head_tilt_min_angle", 20.0)),
            head_tilt_hold_ms=int(doc.get("head_tilt_hold_ms", 500)),
            calibration_ms=int(doc.get("calibration_ms", 1000)),
            calibration_min_samples=int(doc.get("calibration_min_samples", 10)),
        )


def _subtask_matches(spec: SubTaskSpec, event: SessionEvent) -> bool:
    if spec.required_event != event.kind:
        return False
    p, pay = spec.params, event.payload
    if event.kind == EventKind.KEYPHRASE:
        return str(pay.get("phrase", "")).lower() == str(p.get("keyphrase", "")).lower()
    if event.kind == EventKind.HEAD_TILT_REACHED:
        return float(pay.get("angle", 0.0)) >= float(p.get("min_angle", 20.0))
    if event.kind == EventKind.HEAD_ABOVE_MOUTH:
        return int(pay.get("hold_ms", 0)) >= int(p.get("min_hold_ms", 3000))
    if event.kind == EventKind.PHONE_DIALED:
        return str(pay.get("number", "")) == str(p.get("number", ""))
    if event.kind == EventKind.AED_PAD_PLACED:
        return pay.get("side") == p.get("side")
    if event.kind == EventKind.POSITION_TRIGGER_ENTERED:
        return pay.get("zone") == p.get("zone")
    return True


class _SubTaskState:
    def __init__(self, spec: SubTaskSpec):
        self.spec = spec
        self.needed = int(spec.params.get("count", 1))
        self.count = 0
        self.done = False

    def offer(self, event: SessionEvent) -> tuple[bool, bool]:
        """(consumed, completed_now)."""
        if self.done or not _subtask_matches(self.spec, event):
            return False, False
        self.count += 1
        if self.count >= self.needed:
            self.done = True
            return True, True
        return True, False


class TaskModule:
    """Tracks subtask completion for exactly one base task.

    Observes events only while the task is incomplete; completion fires once.
    """

    def __init__(self, spec):
        self.spec = spec
        self.states = [_SubTaskState(s) for s in spec.subtasks]
        self.completed = False

    def offer(self, event: SessionEvent) -> tuple[bool, bool, bool]:
        """(consumed, subtask_completed_now, task_completed_now)."""
        if self.completed:
            return False, False, False
        for st in self.states:
            if st.done:
                continue
            consumed, done_now = st.offer(event)
            if consumed:
                if all(s.done for s in self.states):
                    self.completed = True
                    return True, done_now, True
                return True, done_now, False
        return False, False, False

    @property
    def subtasks_done(self) -> int:
        return sum(1 for s in self.states if s.done)

    @property
    def subtasks_total(self) -> int:
        return len(self.states)


@dataclass
class TaskOutcome:
    task: TaskId
    completed: bool
    started_ts: int | None
    finished_ts: int | None
    position: int | None
    subtasks_done: int
    subtasks_total: int

    def to_doc(self) -> dict[str, Any]:
        return {
            "t": "outcome",
            "task": self.task.value,
            "completed": self.completed,
            "started_ts": self.started_ts,
            "finished_ts": self.finished_ts,
            "position": self.position,
            "subtasks_done": self.subtasks_done,
            "subtasks_total": self.subtasks_total,
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "TaskOutcome":
        return cls(
            task=TaskId(doc["task"]),
            completed=bool(doc["completed"]),
            started_ts=doc.get("started_ts"),
            finished_ts=doc.get("finished_ts"),
            position=doc.get("position"),
            subtasks_done=int(doc.get("subtasks_done", 0)),
            subtasks_total=int(doc.get("subtasks_total", 0)),
        )


@dataclass
class SessionLog:
    """Sealed, replayable record of one session."""

    session_id: str
    mode: TrainingMode
    started_at: int
    trainee_id: str
    graph_doc: dict[str, Any]
    config_doc: dict[str, Any]
    sensor_trace_ref: str | None
    records: list[dict[str, Any]]
    outcomes: list[TaskOutcome]
    cpr: CprSummary
    finished_at: int
    aborted: bool

    @property
    def events(self) -> list[SessionEvent]:
        return [SessionEvent.from_doc(r) for r in self.records if r.get("t") == "event"]

    @property
    def feedback(self) -> list[FeedbackEvent]:
        return [FeedbackEvent.from_doc(r) for r in self.records if r.get("t") == "feedback"]

    @property
    def total_duration_ms(self) -> int:
        return self.finished_at - self.started_at

    def header_doc(self) -> dict[str, Any]:
        body = {"config": self.config_doc, "sequence": self.graph_doc}
        return {
            "schema": SESSION_SCHEMA,
            "session_id": self.session_id,
            "mode": self.mode.value,
            "started_at": self.started_at,
            "trainee": self.trainee_id,
            "sensor_trace": self.sensor_trace_ref,
            "config_hash": doc_hash(body),
            **body,
        }

    def to_lines(self) -> list[str]:
        lines = [canonical(self.header_doc())]
        lines.extend(canonical(r) for r in self.records)
        lines.extend(canonical(o.to_doc()) for o in self.outcomes)
        lines.append(canonical({"t": "cpr", **self.cpr.to_doc()}))
        # digest over header + all prior records makes any single edit stale
        digest = hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()
        lines.append(
            canonical(
                {"t": "end", "finished_at": self.finished_at, "aborted": self.aborted, "records_digest": digest}
            )
        )
        return lines

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.to_lines():
                fh.write(line + "\n")

    @classmethod
    def from_lines(cls, lines: list[str]) -> "SessionLog":
        rows = [line.rstrip("\n") for line in lines if line.strip()]
        if not rows:
            raise SchemaMismatchError("empty log")
        try:
            header = json.loads(rows[0])
        except json.JSONDecodeError as exc:
            raise SchemaMismatchError(f"unparseable header: {exc}") from exc
        if header.get("schema") != SESSION_SCHEMA:
            raise SchemaMismatchError(f"unsupported log schema: {header.get('schema')!r}")
        records: list[dict[str, Any]] = []
        outcomes: list[TaskOutcome] = []
        cpr: CprSummary | None = None
        end: dict[str, Any] | None = None
        try:
            for row in rows[1:]:
                doc = json.loads(row)
                kind = doc.get("t")
                if kind in ("event", "frame", "tick", "feedback"):
                    records.append(doc)
                elif kind == "outcome":
                    outcomes.append(TaskOutcome.from_doc(doc))
                elif kind == "cpr":
                    cpr = CprSummary.from_doc(doc)
                elif kind == "end":
                    end = doc
            if cpr is None or end is None:
                raise SchemaMismatchError("log is not sealed (missing cpr/end records)")
            return cls(
                session_id=header["session_id"],
                mode=TrainingMode(header["mode"]),
                started_at=int(header["started_at"]),
                trainee_id=header.get("trainee", "anon"),
                graph_doc=header["sequence"],
                config_doc=header["config"],
                sensor_trace_ref=header.get("sensor_trace"),
                records=records,
                outcomes=outcomes,
                cpr=cpr,
                finished_at=int(end["finished_at"]),
                aborted=bool(end["aborted"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise SchemaMismatchError(f"unparseable log record: {exc}") from exc

    @classmethod
    def read(cls, path: str) -> "SessionLog":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_lines(fh.readlines())


class Session:
    """Single-writer session state machine.

    Exactly one logical consumer must feed `apply_event`, `ingest_frame` and
    `tick_clock` in timestamp order; the engine is not concurrently mutable.
    """

    def __init__(
        self,
        graph: SequenceGraph,
        mode: TrainingMode | str,
        config: EngineConfig | None = None,
        device: DeviceLink | None = None,
        *,
        session_id: str = "session",
        started_at: int = 0,
        trainee_id: str = "anon",
        sensor_trace_ref: str | None = None,
    ):
        violations = validate_sequence(graph)
        if violations:
            raise InvalidGraphError(violations)
        self.graph = graph
        self.mode = TrainingMode(mode)
        self.config = config or EngineConfig()
        self.session_id = session_id
        self.started_at = started_at
        self.trainee_id = trainee_id
        self.sensor_trace_ref = sensor_trace_ref

        self.device = device
        if device is not None:
            device.ensure_connected()

        self._order = topological_order(graph)
        self._modules: dict[TaskId, TaskModule] = {tid: TaskModule(graph.task(tid)) for tid in self._order}
        self._records: list[dict[str, Any]] = []
        self._opened: dict[TaskId, int] = {}
        self._finished: dict[TaskId, int] = {}
        self._positions: dict[TaskId, int] = {}
        self._budget_fired: set[TaskId] = set()
        self._pushes: list[PushEvent] = []
        self._push_rates: list[float] = []
        self._active = True
        self._last_event_ts = started_at
        self._max_ts = started_at

        self._calib_buf: list[SensorSample] = []
        self._tracker: PushTracker | None = None
        self._tilt_run_start: int | None = None
        self._tilt_run_min = 0.0
        self._tilt_fired = False

        for tid in self._order:
            if not predecessors(graph, tid):
                self._opened[tid] = started_at

        self.initial_feedback: list[FeedbackEvent] = []
        if self.mode == TrainingMode.LEARNING:
            self.initial_feedback = self._instruction_feedback(self.current_task, started_at)
            self._record_feedback(self.initial_feedback)

    # -- queries --------------------------------------------------------------

    @property
    def active(self) -> bool:
        return self._active

    @property
    def current_task(self) -> TaskId | None:
        """Next incomplete task in topological order (learning-mode cursor)."""
        for tid in self._order:
            if not self._modules[tid].completed:
                return tid
        return None

    @property
    def completed_tasks(self) -> list[TaskId]:
        ordered = sorted(self._positions.items(), key=lambda kv: kv[1])
        return [tid for tid, _ in ordered]

    @property
    def end_task_completed(self) -> bool:
        return self._modules[self.graph.end].completed

    @property
    def push_count(self) -> int:
        return len(self._pushes)

    def feedback_records(self) -> list[FeedbackEvent]:
        return [FeedbackEvent.from_doc(r) for r in self._records if r.get("t") == "feedback"]

    def _active_task_ids(self) -> list[TaskId]:
        if self.mode == TrainingMode.LEARNING:
            current = self.current_task
            return [current] if current is not None else []
        return [tid for tid in self._order if not self._modules[tid].completed]

    # -- inputs ---------------------------------------------------------------

    def apply_event(self, event: SessionEvent) -> list[FeedbackEvent]:
        self._require_active()
        if event.ts < self._last_event_ts:
            raise TimestampRegressionError(f"event ts {event.ts} < {self._last_event_ts}")
        self._last_event_ts = event.ts
        self._max_ts = max(self._max_ts, event.ts)
        self._records.append({"t": "event", **event.to_doc()})
        if event.kind == EventKind.COMPRESSION_PUSH and event.source != EventSource.DEVICE:
            # push starts must be strictly increasing for rate math; bump
            # same-millisecond synthetic pushes by one
            start = event.ts
            if self._pushes and start <= self._pushes[-1].start_ts:
                start = self._pushes[-1].start_ts + 1
            self._register_push(
                PushEvent(
                    start_ts=start,
                    end_ts=start + 1,
                    depth=float(event.payload.get("depth", 0.0)),
                    min_distance=0.0,
                    released_fully=bool(event.payload.get("released", True)),
                )
            )
        feedback: list[FeedbackEvent] = []
        for tid in self._active_task_ids():
            module = self._modules[tid]
            consumed, sub_done, task_done = module.offer(event)
            if not consumed:
                continue
            if tid == TaskId.PERFORM_COMPRESSIONS and event.kind == EventKind.COMPRESSION_PUSH:
                feedback.append(self._live_cpr(event.ts))
            if sub_done:
                feedback.append(FeedbackEvent(event.ts, FeedbackKind.SOUND_CUE, {"task": tid.value}))
            if task_done:
                self._complete_task(tid, event.ts, feedback)
        self._record_feedback(feedback)
        return feedback

    def ingest_frame(self, line: str) -> list[FeedbackEvent]:
        """Route one wire frame; malformed lines raise and leave the log unchanged."""
        self._require_active()
        frame = parse_frame(line)
        if not isinstance(frame, SampleFrame):
            return []
        self._records.append({"t": "frame", "line": line.rstrip("\r\n")})
        self._max_ts = max(self._max_ts, frame.ts)
        if frame.sensor == Sensor.DISTANCE:
            return self._distance_sample(frame)
        return self._gyro_sample(frame)

    def tick_clock(self, now: int) -> list[FeedbackEvent]:
        self._require_active()
        feedback: list[FeedbackEvent] = []
        for tid in self._order:
            task = self.graph.task(tid)
            if task.time_budget_s is None or tid in self._budget_fired:
                continue
            if self._modules[tid].completed:
                continue
            opened = self._opened.get(tid)
            if opened is None:
                continue
            if now - opened > task.time_budget_s * 1000.0:
                self._budget_fired.add(tid)
                feedback.append(
                    FeedbackEvent(
                        now,
                        FeedbackKind.TIME_BUDGET_EXCEEDED,
                        {"task": tid.value, "budget_s": task.time_budget_s},
                    )
                )
        if feedback:
            self._records.append({"t": "tick", "now": now})
            self._record_feedback(feedback)
            self._max_ts = max(self._max_ts, now)
        return feedback

    def finish(self, aborted: bool = False, at: int | None = None) -> SessionLog:
        self._require_active()
        if not aborted and not self._modules[self.graph.end].completed:
            raise SessionStateError("end task not completed; finish with aborted=True to abort")
        finished_at = self._max_ts if at is None else at
        outcomes = [
            TaskOutcome(
                task=tid,
                completed=self._modules[tid].completed,
                started_ts=self._opened.get(tid),
                finished_ts=self._finished.get(tid),
                position=self._positions.get(tid),
                subtasks_done=self._modules[tid].subtasks_done,
                subtasks_total=self._modules[tid].subtasks_total,
            )
            for tid in self._order
        ]
        self._active = False
        return SessionLog(
            session_id=self.session_id,
            mode=self.mode,
            started_at=self.started_at,
            trainee_id=self.trainee_id,
            graph_doc=graph_to_doc(self.graph),
            config_doc=self.config.to_doc(),
            sensor_trace_ref=self.sensor_trace_ref,
            records=self._records,
            outcomes=outcomes,
            cpr=summarize(self._pushes),
            finished_at=finished_at,
            aborted=aborted,
        )

    # -- internals ------------------------------------------------------------

    def _require_active(self) -> None:
        if not self._active:
            raise SessionFinishedError("session already finished")

    def _record_feedback(self, feedback: list[FeedbackEvent]) -> None:
        for fb in feedback:
            self._records.append({"t": "feedback", **fb.to_doc()})

    def _instruction_feedback(self, tid: TaskId | None, ts: int) -> list[FeedbackEvent]:
        if tid is None:
            return []
        instr = self.graph.task(tid).instruction
        out = [
            FeedbackEvent(
                ts,
                FeedbackKind.INSTRUCTION_SHOWN,
                {
                    "task": tid.value,
                    "text": instr.text,
                    "image_ref": instr.image_ref,
                    "audio_ref": instr.audio_ref,
                    "animation_ref": instr.animation_ref,
                },
            )
        ]
        if instr.keyphrase_hints:
            out.append(
                FeedbackEvent(ts, FeedbackKind.KEYPHRASE_HINT, {"phrases": list(instr.keyphrase_hints)})
            )
        return out

    def _complete_task(self, tid: TaskId, ts: int, feedback: list[FeedbackEvent]) -> None:
        self._finished[tid] = ts
        self._positions[tid] = len(self._positions) + 1
        for nxt in sorted(successors(self.graph, tid), key=lambda t: t.value):
            if nxt in self._opened:
                continue
            if all(self._modules[p].completed for p in predecessors(self.graph, nxt)):
                self._opened[nxt] = ts
        feedback.append(FeedbackEvent(ts, FeedbackKind.TASK_COMPLETED, {"task": tid.value}))
        if self.mode == TrainingMode.LEARNING:
            feedback.extend(self._instruction_feedback(self.current_task, ts))

    def _register_push(self, push: PushEvent) -> None:
        self._pushes.append(push)
        if len(self._pushes) >= 2:
            self._push_rates.append(instant_rate(self._pushes[-2], self._pushes[-1]))

    def _live_cpr(self, ts: int) -> FeedbackEvent:
        rate = displayed_rate(self._push_rates, self.config.cpr.rolling_window)
        last = self._pushes[-1].depth if self._pushes else None
        return FeedbackEvent(
            ts,
            FeedbackKind.LIVE_CPR,
            {
                "rate": None if rate is None else round(rate, 1),
                "depth": None if last is None else round(last, 2),
                "count": len(self._pushes),
            },
        )

    def _distance_sample(self, frame: SampleFrame) -> list[FeedbackEvent]:
        sample = SensorSample(SensorChannel.DISTANCE, frame.value, frame.ts)
        if self._tracker is None:
            self._calib_buf.append(sample)
            span = self._calib_buf[-1].ts - self._calib_buf[0].ts
            if len(self._calib_buf) >= self.config.calibration_min_samples and span >= self.config.calibration_ms:
                zero = calibrate_zero_level(
                    self._calib_buf,
                    min_samples=self.config.calibration_min_samples,
                    min_span_ms=self.config.calibration_ms,
                )
                self._tracker = PushTracker(self.config.cpr)
                self._tracker.calibrate(zero)
                self._calib_buf = []
            return []
        feedback: list[FeedbackEvent] = []
        for push in self._tracker.ingest(sample):
            self._register_push(push)
            event = SessionEvent(
                ts=push.end_ts,
                kind=EventKind.COMPRESSION_PUSH,
                payload={"depth": round(push.depth, 2), "count": len(self._pushes)},
                source=EventSource.DEVICE,
            )
            feedback.extend(self.apply_event(event))
        return feedback

    def _gyro_sample(self, frame: SampleFrame) -> list[FeedbackEvent]:
        angle, ts = frame.value, frame.ts
        if angle >= self.config.head_tilt_min_angle:
            if self._tilt_run_start is None:
                self._tilt_run_start = ts
                self._tilt_run_min = angle
                self._tilt_fired = False
            else:
                self._tilt_run_min = min(self._tilt_run_min, angle)
            sustained = ts - self._tilt_run_start >= self.config.head_tilt_hold_ms
            # fire only once per run, and only once a task is waiting for it:
            # a tilt held from before the airway task opens still counts
            if sustained and not self._tilt_fired and self._tilt_wanted():
                self._tilt_fired = True
                event = SessionEvent(
                    ts=ts,
                    kind=EventKind.HEAD_TILT_REACHED,
                    payload={"angle": round(self._tilt_run_min, 1)},
                    source=EventSource.DEVICE,
                )
                return self.apply_event(event)
        else:
            self._tilt_run_start = None
        return []

    def _tilt_wanted(self) -> bool:
        for tid in self._active_task_ids():
            module = self._modules[tid]
            for st in module.states:
                if not st.done and st.spec.required_event == EventKind.HEAD_TILT_REACHED:
                    return True
        return False


def start_session(
    graph: SequenceGraph,
    mode: TrainingMode | str,
    device: DeviceLink | None = None,
    *,
    config: EngineConfig | None = None,
    session_id: str = "session",
    started_at: int = 0,
    trainee_id: str = "anon",
    sensor_trace_ref: str | None = None,
) -> Session:
    """Validate the graph, ping the device if given, and open a session.

    In learning mode the first instruction is emitted immediately and is
    available as ``session.initial_feedback``.
    """
    return Session(
        graph,
        mode,
        config,
        device,
        session_id=session_id,
        started_at=started_at,
        trainee_id=trainee_id,
        sensor_trace_ref=sensor_trace_ref,
    )


@dataclass
class ReplayResult:
    identical: bool
    mismatch_line: int | None = None
    detail: str = ""


def replay_lines(lines: list[str]) -> ReplayResult:
    """Re-run a sealed log's inputs and compare the regenerated log byte-for-byte.

    The verdict is identical only if every line (events of any source,
    frames, ticks, feedback, outcomes, summary) matches the stored file.
    """
    stored = [line.rstrip("\n") for line in lines if line.strip()]
    log = SessionLog.from_lines(stored)

    session = Session(
        graph_from_doc(log.graph_doc),
        log.mode,
        EngineConfig.from_doc(log.config_doc),
        session_id=log.session_id,
        started_at=log.started_at,
        trainee_id=log.trainee_id,
        sensor_trace_ref=log.sensor_trace_ref,
    )
    line_no = 1
    try:
        for rec in log.records:
            line_no += 1
            kind = rec.get("t")
            if kind == "event" and rec.get("source") in (EventSource.UI.value, EventSource.SCRIPT.value):
                session.apply_event(SessionEvent.from_doc(rec))
            elif kind == "frame":
                session.ingest_frame(rec["line"] + "\n")
            elif kind == "tick":
                session.tick_clock(int(rec["now"]))
        regenerated = session.finish(aborted=log.aborted, at=log.finished_at)
    except (EngineError, ProtocolError, KeyError, ValueError) as exc:
        return ReplayResult(False, mismatch_line=line_no, detail=f"replay failed: {exc}")

    new_lines = regenerated.to_lines()
    for i, (a, b) in enumerate(zip(stored, new_lines), start=1):
        if a != b:
            return ReplayResult(False, mismatch_line=i, detail="line differs on replay")
    if len(stored) != len(new_lines):
        return ReplayResult(
            False,
            mismatch_line=min(len(stored), len(new_lines)) + 1,
            detail=f"length differs: stored {len(stored)} vs regenerated {len(new_lines)}",
        )
    return ReplayResult(True)


def replay_file(path: str) -> ReplayResult:
    with open(path, "r", encoding="utf-8") as fh:
        return replay_lines(fh.readlines())

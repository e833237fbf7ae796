"""Typed vocabulary of trainee actions and system feedback.

Every recognizable action in a session is a :class:`SessionEvent` with a
closed :class:`EventKind`; everything the system tells the trainee back is a
:class:`FeedbackEvent`. Both serialize to single-line JSON documents so
session logs replay byte-for-byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any


class EventKind(str, Enum):
    """Recognizable trainee actions (closed set)."""

    GLASS_DISPOSED = "GlassDisposed"
    HANDS_ON_SHOULDERS = "HandsOnShoulders"
    KEYPHRASE = "Keyphrase"
    HEAD_TILT_REACHED = "HeadTiltReached"
    HEAD_ABOVE_MOUTH = "HeadAboveMouth"
    PHONE_DIALED = "PhoneDialed"
    AED_PAD_PLACED = "AedPadPlaced"
    AED_SHOCK_PRESSED = "AedShockPressed"
    COMPRESSION_PUSH = "CompressionPush"
    VENTILATION_DELIVERED = "VentilationDelivered"
    POSITION_TRIGGER_ENTERED = "PositionTriggerEntered"


class EventSource(str, Enum):
    UI = "ui"
    DEVICE = "device"
    SCRIPT = "script"


@dataclass
class SessionEvent:
    """One trainee action at a point on the session timeline (ms)."""

    ts: int
    kind: EventKind
    payload: dict[str, Any] = field(default_factory=dict)
    source: EventSource = EventSource.SCRIPT

    def to_doc(self) -> dict[str, Any]:
        return {
            "ts": self.ts,
            "kind": self.kind.value,
            "payload": self.payload,
            "source": self.source.value,
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "SessionEvent":
        return cls(
            ts=int(doc["ts"]),
            kind=EventKind(doc["kind"]),
            payload=dict(doc.get("payload", {})),
            source=EventSource(doc.get("source", "script")),
        )


class FeedbackKind(str, Enum):
    SOUND_CUE = "SoundCue"
    TASK_COMPLETED = "TaskCompleted"
    INSTRUCTION_SHOWN = "InstructionShown"
    LIVE_CPR = "LiveCpr"
    TIME_BUDGET_EXCEEDED = "TimeBudgetExceeded"
    KEYPHRASE_HINT = "KeyphraseHint"


@dataclass
class FeedbackEvent:
    """One piece of real-time feedback emitted by the engine."""

    ts: int
    kind: FeedbackKind
    payload: dict[str, Any] = field(default_factory=dict)

    def to_doc(self) -> dict[str, Any]:
        return {"ts": self.ts, "kind": self.kind.value, "payload": self.payload}

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "FeedbackEvent":
        return cls(ts=int(doc["ts"]), kind=FeedbackKind(doc["kind"]), payload=dict(doc.get("payload", {})))

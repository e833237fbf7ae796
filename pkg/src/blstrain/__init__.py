"""Headless basic life support training engine.

Guideline task graph, streaming CPR analytics, a virtual sensor manikin with
its wire protocol, a replayable session engine, automated assessment and
debriefing, plus the CLI/service entry points that tie them together.
"""

from .assessment import (
    DebriefReport,
    TaskResult,
    build_debrief,
    final_score,
    order_fraction,
    score_cpr,
    score_task,
)
from .cpr import (
    CprConfig,
    CprSummary,
    PushEvent,
    PushTracker,
    SensorSample,
    ZeroLevel,
    calibrate_zero_level,
    displayed_rate,
    head_tilt_angle,
    instant_rate,
    summarize,
)
from .device import DeviceConfig, DeviceServer, VirtualManikin
from .engine import EngineConfig, Session, SessionLog, TrainingMode, replay_lines, start_session
from .events import EventKind, EventSource, FeedbackEvent, FeedbackKind, SessionEvent
from .sequence import (
    ScoreTable,
    SequenceGraph,
    TaskId,
    build_default_sequence,
    default_score_table,
    max_achievable_score,
    predecessors,
    topological_order,
    validate_sequence,
)

__version__ = "0.1.0"

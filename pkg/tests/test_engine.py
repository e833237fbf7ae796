from __future__ import annotations

import pytest

from blstrain.device import CompressionPulse, DeviceConfig, SocketLink, VirtualManikin
from blstrain.engine import (
    EngineConfig,
    InvalidGraphError,
    Session,
    SessionFinishedError,
    SessionStateError,
    TimestampRegressionError,
    TrainingMode,
    replay_lines,
    start_session,
)
from blstrain.device import DeviceUnreachableError
from blstrain.events import EventKind, EventSource, FeedbackKind, SessionEvent
from blstrain.protocol import CommandFrame, ProtocolError, Sensor, Verb
from blstrain.sequence import SequenceGraph, TaskId, build_default_sequence


def ev(ts: int, kind: str, source: str = "script", **payload) -> SessionEvent:
    return SessionEvent(ts=ts, kind=EventKind(kind), payload=payload, source=EventSource(source))


def kinds(feedback) -> list[str]:
    return [fb.kind.value for fb in feedback]


PERFECT = [
    ev(2000, "GlassDisposed"),
    ev(3000, "Keyphrase", phrase="are-you-okay"),
    ev(3500, "HandsOnShoulders"),
    ev(4000, "PositionTriggerEntered", zone="victim-head"),
    ev(4500, "HeadTiltReached", angle=25.0),
    ev(5600, "HeadAboveMouth", hold_ms=3200),
    ev(6000, "Keyphrase", phrase="not-breathing"),
    ev(7000, "PhoneDialed", number="112"),
    ev(8000, "Keyphrase", phrase="get-aed"),
    *[ev(10000 + k * 600, "CompressionPush", depth=5.5) for k in range(30)],
    ev(28200, "VentilationDelivered"),
    ev(28800, "VentilationDelivered"),
    ev(29200, "AedPadPlaced", side="left"),
    ev(29600, "AedPadPlaced", side="right"),
    ev(30200, "Keyphrase", phrase="stand-back"),
    ev(31000, "AedShockPressed"),
]


# -- session start -----------------------------------------------------------------


def test_learning_mode_shows_first_instruction(default_graph):
    session = start_session(default_graph, "learning")
    shown = [fb for fb in session.initial_feedback if fb.kind == FeedbackKind.INSTRUCTION_SHOWN]
    assert len(shown) == 1
    assert shown[0].payload["task"] == "EnsureSafety"
    assert shown[0].payload["text"]


def test_training_mode_never_shows_instructions(default_graph):
    session = start_session(default_graph, "training")
    assert session.initial_feedback == []
    feedback = []
    for event in PERFECT:
        feedback.extend(session.apply_event(event))
    assert FeedbackKind.INSTRUCTION_SHOWN.value not in kinds(feedback)


def test_dead_socket_raises_device_unreachable(default_graph):
    with pytest.raises(DeviceUnreachableError):
        start_session(default_graph, "learning", device=SocketLink("127.0.0.1", 1))


def test_invalid_graph_rejected(default_graph):
    broken = SequenceGraph(
        tasks=default_graph.tasks,
        edges=default_graph.edges + [(TaskId.TRIGGER_SHOCK, TaskId.ENSURE_SAFETY)],
        start=default_graph.start,
        end=default_graph.end,
    )
    with pytest.raises(InvalidGraphError):
        start_session(broken, "training")


# -- event handling ----------------------------------------------------------------


def test_learning_glass_disposed_sequence(default_graph):
    session = start_session(default_graph, "learning")
    feedback = session.apply_event(ev(2000, "GlassDisposed"))
    assert kinds(feedback)[:3] == ["SoundCue", "TaskCompleted", "InstructionShown"]
    assert feedback[1].payload["task"] == "EnsureSafety"
    assert feedback[2].payload["task"] == "CheckResponse"
    # next task advertises its keyphrase
    hint = [fb for fb in feedback if fb.kind == FeedbackKind.KEYPHRASE_HINT]
    assert hint and hint[0].payload["phrases"] == ["are-you-okay"]


def test_training_out_of_order_capture(default_graph):
    session = start_session(default_graph, "training")
    feedback = session.apply_event(ev(1000, "AedShockPressed"))
    assert kinds(feedback) == ["SoundCue", "TaskCompleted"]
    assert session.completed_tasks == [TaskId.TRIGGER_SHOCK]
    log = session.finish(aborted=True)
    outcome = next(o for o in log.outcomes if o.task == TaskId.TRIGGER_SHOCK)
    assert outcome.position == 1


def test_learning_requires_both_check_response_subtasks(default_graph):
    session = start_session(default_graph, "learning")
    session.apply_event(ev(2000, "GlassDisposed"))
    first = session.apply_event(ev(3000, "Keyphrase", phrase="are-you-okay"))
    assert kinds(first) == ["SoundCue"]  # one subtask done, task still open
    second = session.apply_event(ev(3500, "HandsOnShoulders"))
    assert "TaskCompleted" in kinds(second)


def test_keyphrase_matching_case_insensitive(default_graph):
    session = start_session(default_graph, "learning")
    session.apply_event(ev(2000, "GlassDisposed"))
    feedback = session.apply_event(ev(3000, "Keyphrase", phrase="ARE-YOU-OKAY"))
    assert kinds(feedback) == ["SoundCue"]


def test_wrong_keyphrase_ignored(default_graph):
    session = start_session(default_graph, "learning")
    session.apply_event(ev(2000, "GlassDisposed"))
    feedback = session.apply_event(ev(3000, "Keyphrase", phrase="stand-back"))
    assert feedback == []  # MakePeopleStandBack is not active in learning mode


def test_learning_ignores_events_for_other_tasks(default_graph):
    session = start_session(default_graph, "learning")
    feedback = session.apply_event(ev(1000, "AedShockPressed"))
    assert feedback == []
    assert session.completed_tasks == []


def test_event_after_finish_rejected(default_graph):
    session = start_session(default_graph, "training")
    session.finish(aborted=True)
    with pytest.raises(SessionFinishedError):
        session.apply_event(ev(1000, "GlassDisposed"))


def test_timestamp_regression_rejected(default_graph):
    session = start_session(default_graph, "training")
    session.apply_event(ev(2000, "GlassDisposed"))
    with pytest.raises(TimestampRegressionError):
        session.apply_event(ev(1000, "HandsOnShoulders"))


def test_same_millisecond_synthetic_pushes_survive(default_graph):
    # two UI pushes can land on the samems; rate math must not divide by zero
    session = start_session(default_graph, "training")
    session.apply_event(ev(1000, "CompressionPush", source="ui", depth=5.5))
    session.apply_event(ev(1000, "CompressionPush", source="ui", depth=5.4))
    session.apply_event(ev(1600, "CompressionPush", source="ui", depth=5.6))
    log = session.finish(aborted=True)
    assert log.cpr.push_count == 3
    assert log.cpr.avg_rate is not None


# -- device frames -----------------------------------------------------------------


def drive_device(session: Session, manikin: VirtualManikin, until_ms: int) -> list:
    feedback = []
    while manikin.state.clock < until_ms:
        for line in manikin.tick(1):
            feedback.extend(session.ingest_frame(line))
    return feedback


def compression_manikin(pulse_start: int = 2000, n: int = 30) -> VirtualManikin:
    m = VirtualManikin(DeviceConfig(noise_sigma=0.0, seed=3))
    m.handle_command(CommandFrame(Verb.START, Sensor.DISTANCE))
    m.load_compression_profile([CompressionPulse(pulse_start + round(k * 571), 5.5, 300) for k in range(n)])
    return m


def test_device_pushes_become_events_with_live_feedback(default_graph):
    session = start_session(default_graph, "training")
    manikin = compression_manikin()
    feedback = drive_device(session, manikin, 2000 + 30 * 571 + 1500)

    live = [fb for fb in feedback if fb.kind == FeedbackKind.LIVE_CPR]
    assert len(live) == 30
    assert live[0].payload["rate"] is None  # first push has no interval yet
    assert live[-1].payload["count"] == 30
    assert live[-1].payload["rate"] == pytest.approx(105.0, abs=5.0)
    pushes = [e for e in session.feedback_records() if e.kind == FeedbackKind.LIVE_CPR]
    assert len(pushes) == 30
    # the compression block completed the task
    assert TaskId.PERFORM_COMPRESSIONS in session.completed_tasks


def test_live_cpr_only_during_cpr_task_in_learning(default_graph):
    session = start_session(default_graph, "learning")
    manikin = compression_manikin(pulse_start=2000, n=5)
    feedback = drive_device(session, manikin, 2000 + 5 * 571 + 1000)
    # current task is EnsureSafety: pushes are logged but produce no gauge feedback
    assert FeedbackKind.LIVE_CPR.value not in kinds(feedback)
    assert TaskId.PERFORM_COMPRESSIONS not in session.completed_tasks
    push_events = [e for e in session._records if e.get("kind") == "CompressionPush"]
    assert len(push_events) == 5


def test_sustained_gyro_tilt_completes_open_airways(default_graph):
    session = start_session(default_graph, "training")
    session.apply_event(ev(100, "PositionTriggerEntered", zone="victim-head"))
    manikin = VirtualManikin(DeviceConfig(noise_sigma=0.0))
    manikin.handle_command(CommandFrame(Verb.START, Sensor.GYRO))
    manikin.load_pitch_schedule([(0, 0.0), (1000, 25.0), (2500, 0.0)])
    feedback = drive_device(session, manikin, 3000)
    assert TaskId.OPEN_AIRWAYS in session.completed_tasks
    tilt_events = [e for e in session._records if e.get("kind") == "HeadTiltReached"]
    assert len(tilt_events) == 1
    assert tilt_events[0]["payload"]["angle"] == 25.0
    assert "TaskCompleted" in kinds(feedback)


def test_brief_gyro_spike_does_not_fire(default_graph):
    session = start_session(default_graph, "training")
    session.apply_event(ev(100, "PositionTriggerEntered", zone="victim-head"))
    manikin = VirtualManikin(DeviceConfig(noise_sigma=0.0))
    manikin.handle_command(CommandFrame(Verb.START, Sensor.GYRO))
    manikin.load_pitch_schedule([(0, 0.0), (1000, 25.0), (1300, 0.0)])  # only 300 ms
    drive_device(session, manikin, 3000)
    assert TaskId.OPEN_AIRWAYS not in session.completed_tasks


def test_tilt_held_before_airway_task_opens_still_counts(default_graph):
    # learning mode: the tilt is sustained while earlier tasks are current and
    # fires once the airway task becomes the active one
    session = start_session(default_graph, "learning")
    manikin = VirtualManikin(DeviceConfig(noise_sigma=0.0))
    manikin.handle_command(CommandFrame(Verb.START, Sensor.GYRO))
    manikin.load_pitch_schedule([(0, 25.0)])  # held from the start

    events = iter(
        [
            ev(3000, "GlassDisposed"),
            ev(3050, "Keyphrase", phrase="are-you-okay"),
            ev(3100, "HandsOnShoulders"),
            ev(3150, "PositionTriggerEntered", zone="victim-head"),
        ]
    )
    pending = next(events)
    while manikin.state.clock < 4000:
        for line in manikin.tick(1):
            session.ingest_frame(line)
        while pending is not None and pending.ts == manikin.state.clock:
            session.apply_event(pending)
            pending = next(events, None)
    assert TaskId.OPEN_AIRWAYS in session.completed_tasks


def test_garbage_frame_raises_and_leaves_log_unchanged(default_graph):
    session = start_session(default_graph, "training")
    before = list(session._records)
    with pytest.raises(ProtocolError):
        session.ingest_frame("garbage\n")
    assert session._records == before


# -- clock budget ------------------------------------------------------------------


def advance_to_check_breathing(session: Session) -> None:
    session.apply_event(ev(2000, "GlassDisposed"))
    session.apply_event(ev(3000, "Keyphrase", phrase="are-you-okay"))
    session.apply_event(ev(3500, "HandsOnShoulders"))
    session.apply_event(ev(4000, "PositionTriggerEntered", zone="victim-head"))
    session.apply_event(ev(4500, "HeadTiltReached", angle=25.0))


def test_time_budget_fires_once(default_graph):
    session = start_session(default_graph, "learning")
    advance_to_check_breathing(session)  # CheckBreathing opens at ts 4500
    assert session.tick_clock(14000) == []  # 9.5 s open, within the 10 s budget
    feedback = session.tick_clock(15500)  # 11 s open
    assert kinds(feedback) == ["TimeBudgetExceeded"]
    assert feedback[0].payload["task"] == "CheckBreathing"
    assert session.tick_clock(16000) == []  # idempotent


def test_no_budget_no_feedback(default_graph):
    session = start_session(default_graph, "learning")
    assert session.tick_clock(60_000) == []  # EnsureSafety has no budget


def test_budget_not_fired_after_completion(default_graph):
    session = start_session(default_graph, "learning")
    advance_to_check_breathing(session)
    session.apply_event(ev(5000, "HeadAboveMouth", hold_ms=3200))
    assert session.tick_clock(20_000) == []


# -- finish ------------------------------------------------------------------------


def test_perfect_run_positions(default_graph):
    session = start_session(default_graph, "learning")
    for event in PERFECT:
        session.apply_event(event)
    log = session.finish()
    assert [o.position for o in log.outcomes] == list(range(1, 13))
    assert all(o.completed for o in log.outcomes)
    assert log.cpr.push_count == 30


def test_abort_after_three_tasks(default_graph):
    session = start_session(default_graph, "training")
    session.apply_event(ev(2000, "GlassDisposed"))
    session.apply_event(ev(3000, "Keyphrase", phrase="are-you-okay"))
    session.apply_event(ev(3500, "HandsOnShoulders"))
    session.apply_event(ev(4000, "PositionTriggerEntered", zone="victim-head"))
    session.apply_event(ev(4500, "HeadTiltReached", angle=25.0))
    log = session.finish(aborted=True)
    assert sum(o.completed for o in log.outcomes) == 3
    assert sum(not o.completed for o in log.outcomes) == 9


def test_finish_requires_end_or_abort(default_graph):
    session = start_session(default_graph, "training")
    with pytest.raises(SessionStateError):
        session.finish()


# -- invariants --------------------------------------------------------------------


def full_training_log(default_graph):
    session = start_session(default_graph, "training")
    for event in PERFECT:
        session.apply_event(event)
    return session.finish()


def test_task_completed_once_and_soundcue_dominates(default_graph):
    log = full_training_log(default_graph)
    completed = [fb for fb in log.feedback if fb.kind == FeedbackKind.TASK_COMPLETED]
    assert len(completed) == 12
    assert len({fb.payload["task"] for fb in completed}) == 12
    cues = [fb for fb in log.feedback if fb.kind == FeedbackKind.SOUND_CUE]
    assert len(cues) >= len(completed)


def test_feedback_never_precedes_cause(default_graph):
    session = start_session(default_graph, "training")
    for event in PERFECT:
        for fb in session.apply_event(event):
            assert fb.ts >= event.ts


def test_learning_positions_follow_topological_order(default_graph):
    session = start_session(default_graph, "learning")
    for event in PERFECT:
        session.apply_event(event)
    log = session.finish()
    by_position = sorted(log.outcomes, key=lambda o: o.position)
    assert [o.task for o in by_position] == [t.id for t in default_graph.tasks]


# -- replay ------------------------------------------------------------------------


def mixed_session_log(default_graph):
    """Events plus device frames plus a budget tick, all on one timeline."""
    session = start_session(default_graph, "training", session_id="mixed", trainee_id="kim")
    manikin = compression_manikin(pulse_start=6000, n=30)

    events = iter(
        [
            ev(2000, "GlassDisposed"),
            ev(3000, "Keyphrase", phrase="are-you-okay"),
            ev(3100, "HandsOnShoulders"),
            ev(3200, "PositionTriggerEntered", zone="victim-head"),
            ev(3300, "HeadTiltReached", angle=25.0),
            ev(26000, "HeadAboveMouth", hold_ms=3200),
            ev(26500, "Keyphrase", phrase="not-breathing"),
            ev(27000, "PhoneDialed", number="112"),
            ev(27500, "Keyphrase", phrase="get-aed"),
            ev(28000, "VentilationDelivered"),
            ev(28100, "VentilationDelivered"),
            ev(28200, "AedPadPlaced", side="left"),
            ev(28300, "AedPadPlaced", side="right"),
            ev(28400, "Keyphrase", phrase="stand-back"),
            ev(28500, "AedShockPressed"),
        ]
    )
    pending = next(events)
    for now in range(1, 30_000):
        for line in manikin.tick(1):
            session.ingest_frame(line)
        while pending is not None and pending.ts == now:
            session.apply_event(pending)
            pending = next(events, None)
        session.tick_clock(now)
    return session.finish(at=30_000)


def test_replay_reproduces_feedback_bit_for_bit(default_graph):
    log = mixed_session_log(default_graph)
    result = replay_lines(log.to_lines())
    assert result.identical, result.detail


def test_replay_detects_any_single_mutation(default_graph):
    log = mixed_session_log(default_graph)
    lines = log.to_lines()

    def mutate(predicate) -> int:
        index = next(i for i, l in enumerate(lines) if predicate(l))
        broken = list(lines)
        broken[index] = broken[index].replace('"ts":2000', '"ts":2001').replace("5.5", "5.6").replace(
            '"SoundCue"', '"SoundCueX"'
        )
        assert broken[index] != lines[index]
        result = replay_lines(broken)
        assert not result.identical
        return result.mismatch_line

    mutate(lambda l: '"kind":"GlassDisposed"' in l)  # a script event
    mutate(lambda l: '"kind":"CompressionPush"' in l)  # a device-derived event
    mutate(lambda l: '"kind":"SoundCue"' in l)  # a feedback record


def test_replay_flags_edited_feedback_line_number(default_graph):
    log = mixed_session_log(default_graph)
    lines = log.to_lines()
    index = next(i for i, l in enumerate(lines) if '"t":"feedback"' in l)
    lines[index] = lines[index].replace('"t":"feedback"', '"t":"feedback" ')
    result = replay_lines(lines)
    assert not result.identical
    assert result.mismatch_line == index + 1


def test_corrupted_log_reports_schema_error(default_graph):
    from blstrain.engine import SchemaMismatchError, SessionLog

    log = mixed_session_log(default_graph)
    lines = log.to_lines()
    index = next(i for i, l in enumerate(lines) if '"t":"outcome"' in l)
    lines[index] = lines[index].replace('"task":"EnsureSafety"', '"task":"NoSuchTask"')
    with pytest.raises(SchemaMismatchError):
        SessionLog.from_lines(lines)


# -- randomized training-mode orderings ------------------------------------------------

TASK_ACTIONS = {
    TaskId.ENSURE_SAFETY: [("GlassDisposed", {})],
    TaskId.CHECK_RESPONSE: [("Keyphrase", {"phrase": "are-you-okay"}), ("HandsOnShoulders", {})],
    TaskId.OPEN_AIRWAYS: [
        ("PositionTriggerEntered", {"zone": "victim-head"}),
        ("HeadTiltReached", {"angle": 25.0}),
    ],
    TaskId.CHECK_BREATHING: [("HeadAboveMouth", {"hold_ms": 3200})],
    TaskId.COMMUNICATE_BREATHING_STATUS: [("Keyphrase", {"phrase": "not-breathing"})],
    TaskId.CALL_AMBULANCE: [("PhoneDialed", {"number": "112"})],
    TaskId.SEND_FOR_AED: [("Keyphrase", {"phrase": "get-aed"})],
    TaskId.PERFORM_COMPRESSIONS: [("CompressionPush", {"depth": 5.5})] * 30,
    TaskId.VENTILATE: [("VentilationDelivered", {})] * 2,
    TaskId.PLACE_AED_PADS: [("AedPadPlaced", {"side": "left"}), ("AedPadPlaced", {"side": "right"})],
    TaskId.MAKE_PEOPLE_STAND_BACK: [("Keyphrase", {"phrase": "stand-back"})],
    TaskId.TRIGGER_SHOCK: [("AedShockPressed", {})],
}


@pytest.mark.parametrize("seed", range(20))
def test_random_training_orderings_preserve_invariants(default_graph, seed):
    import random as random_module

    from blstrain import assessment
    from blstrain.sequence import default_score_table, max_achievable_score

    rng = random_module.Random(seed)
    task_order = [t.id for t in default_graph.tasks]
    rng.shuffle(task_order)
    drop = set(rng.sample(task_order, rng.randint(0, 3)))  # some tasks never attempted

    session = start_session(default_graph, "training")
    ts = 1000
    for tid in task_order:
        if tid in drop:
            continue
        for kind, payload in TASK_ACTIONS[tid]:
            session.apply_event(ev(ts, kind, source="ui", **payload))
            ts += rng.randint(20, 700)
    log = session.finish(aborted=not session.end_task_completed, at=ts)

    completed = [o for o in log.outcomes if o.completed]
    positions = sorted(o.position for o in completed)
    assert positions == list(range(1, len(completed) + 1))  # permutation prefix of 1..n
    assert {o.task for o in completed} == set(task_order) - drop

    cues = sum(1 for fb in log.feedback if fb.kind == FeedbackKind.SOUND_CUE)
    done = sum(1 for fb in log.feedback if fb.kind == FeedbackKind.TASK_COMPLETED)
    assert done == len(completed) and cues >= done

    table = default_score_table()
    report = assessment.build_debrief(log, default_graph, table)
    assert 0.0 <= report.order_fraction <= 1.0
    assert report.intermediate_score <= max_achievable_score(table)
    assert report.final_score <= report.intermediate_score

    assert replay_lines(log.to_lines()).identical

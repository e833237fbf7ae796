"""The guideline-derived BLS procedure as an ordered task graph.

Twelve base tasks, from securing the scene up to triggering the
defibrillator shock, each composed of atomic subtasks that fire on one
recognition event. The graph carries scoring metadata; the default score
table awards 18 points for a flawless run (CPR quality contributing up to 4).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable

from .events import EventKind


class UnknownTaskError(KeyError):
    """Raised when a task id is not part of the graph."""


class TaskId(str, Enum):
    """Steps of the default resuscitation sequence (closed set)."""

    ENSURE_SAFETY = "EnsureSafety"
    CHECK_RESPONSE = "CheckResponse"
    OPEN_AIRWAYS = "OpenAirways"
    CHECK_BREATHING = "CheckBreathing"
    COMMUNICATE_BREATHING_STATUS = "CommunicateBreathingStatus"
    CALL_AMBULANCE = "CallAmbulance"
    SEND_FOR_AED = "SendForAed"
    PERFORM_COMPRESSIONS = "PerformCompressions"
    VENTILATE = "Ventilate"
    PLACE_AED_PADS = "PlaceAedPads"
    MAKE_PEOPLE_STAND_BACK = "MakePeopleStandBack"
    TRIGGER_SHOCK = "TriggerShock"


@dataclass
class SubTaskSpec:
    """One atomic action: completed by exactly one kind of recognition event.

    ``params`` refine the match (keyphrase id, trigger zone, minimum hold in
    ms, minimum tilt angle in degrees, required repetition count).
    """

    id: str
    required_event: EventKind
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class InstructionPayload:
    """What learning mode presents for a task; assets referenced by id only."""

    text: str
    image_ref: str | None = None
    audio_ref: str | None = None
    animation_ref: str | None = None
    keyphrase_hints: list[str] = field(default_factory=list)


@dataclass
class TaskSpec:
    id: TaskId
    subtasks: list[SubTaskSpec]
    max_points: int
    instruction: InstructionPayload
    time_budget_s: float | None = None


@dataclass
class SequenceGraph:
    """Directed acyclic task graph with a single start and end."""

    tasks: list[TaskSpec]
    edges: list[tuple[TaskId, TaskId]]
    start: TaskId
    end: TaskId

    def task(self, task_id: TaskId) -> TaskSpec:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise UnknownTaskError(task_id)

    def task_ids(self) -> list[TaskId]:
        return [t.id for t in self.tasks]


@dataclass
class ScoreTable:
    """Per-task maxima plus the CPR quality bands.

    ``task_points`` holds the maximum for each task (the compression task at
    its 4-point maximum, the pad task at one point per pad). Rate bands are
    (low, high, points) in compressions per minute; the depth band is
    (low cm, high cm, points). Band edges are inclusive: hitting a boundary
    exactly earns the higher adjacent score.
    """

    task_points: dict[TaskId, int]
    aed_pad_points: int = 1
    rate_bands: list[tuple[float, float, int]] = field(
        default_factory=lambda: [(95.0, 125.0, 2), (80.0, 95.0, 1), (125.0, 140.0, 1)]
    )
    depth_band: tuple[float, float, int] = (5.0, 6.0, 2)


def default_score_table() -> ScoreTable:
    return ScoreTable(
        task_points={
            TaskId.ENSURE_SAFETY: 2,
            TaskId.CHECK_RESPONSE: 1,
            TaskId.OPEN_AIRWAYS: 1,
            TaskId.CHECK_BREATHING: 0,
            TaskId.COMMUNICATE_BREATHING_STATUS: 0,
            TaskId.CALL_AMBULANCE: 2,
            TaskId.SEND_FOR_AED: 2,
            TaskId.PERFORM_COMPRESSIONS: 4,
            TaskId.VENTILATE: 2,
            TaskId.PLACE_AED_PADS: 2,
            TaskId.MAKE_PEOPLE_STAND_BACK: 1,
            TaskId.TRIGGER_SHOCK: 1,
        }
    )


def max_achievable_score(table: ScoreTable) -> int:
    """Sum of per-task maxima (CPR at 4, both AED pads counted)."""
    return sum(table.task_points.values())


_NARRATIVE_ORDER = [
    TaskId.ENSURE_SAFETY,
    TaskId.CHECK_RESPONSE,
    TaskId.OPEN_AIRWAYS,
    TaskId.CHECK_BREATHING,
    TaskId.COMMUNICATE_BREATHING_STATUS,
    TaskId.CALL_AMBULANCE,
    TaskId.SEND_FOR_AED,
    TaskId.PERFORM_COMPRESSIONS,
    TaskId.VENTILATE,
    TaskId.PLACE_AED_PADS,
    TaskId.MAKE_PEOPLE_STAND_BACK,
    TaskId.TRIGGER_SHOCK,
]


def build_default_sequence() -> SequenceGraph:
    """The default 12-task chain with subtasks and instruction content.

    Compressions and ventilations alternate 30:2; one full cycle is required
    before the AED phase. Only the breathing check carries a time budget.
    """
    tasks = [
        TaskSpec(
            id=TaskId.ENSURE_SAFETY,
            subtasks=[SubTaskSpec("dispose-glass", EventKind.GLASS_DISPOSED)],
            max_points=2,
            instruction=InstructionPayload(
                text="Make sure the scene is safe: clear the broken glass into the dustbin before approaching.",
                image_ref="img/ensure-safety",
                audio_ref="audio/ensure-safety",
            ),
        ),
        TaskSpec(
            id=TaskId.CHECK_RESPONSE,
            subtasks=[
                SubTaskSpec("ask-response", EventKind.KEYPHRASE, {"keyphrase": "are-you-okay"}),
                SubTaskSpec("shake-shoulders", EventKind.HANDS_ON_SHOULDERS),
            ],
            max_points=1,
            instruction=InstructionPayload(
                text="Check for a response: speak to the victim and shake both shoulders.",
                image_ref="img/check-response",
                audio_ref="audio/check-response",
                animation_ref="anim/shoulder-shake",
                keyphrase_hints=["are-you-okay"],
            ),
        ),
        TaskSpec(
            id=TaskId.OPEN_AIRWAYS,
            subtasks=[
                SubTaskSpec("hands-on-head", EventKind.POSITION_TRIGGER_ENTERED, {"zone": "victim-head"}),
                SubTaskSpec("tilt-head", EventKind.HEAD_TILT_REACHED, {"min_angle": 20.0}),
            ],
            max_points=1,
            instruction=InstructionPayload(
                text="Open the airways: place your hands on the head and tilt it back.",
                image_ref="img/open-airways",
                audio_ref="audio/open-airways",
                animation_ref="anim/head-tilt",
            ),
        ),
        TaskSpec(
            id=TaskId.CHECK_BREATHING,
            subtasks=[SubTaskSpec("listen-breathing", EventKind.HEAD_ABOVE_MOUTH, {"min_hold_ms": 3000})],
            max_points=0,
            instruction=InstructionPayload(
                text="Check breathing: hold your head above the victim's mouth and watch the chest.",
                image_ref="img/check-breathing",
                audio_ref="audio/check-breathing",
                animation_ref="anim/breathing-check",
            ),
            time_budget_s=10.0,
        ),
        TaskSpec(
            id=TaskId.COMMUNICATE_BREATHING_STATUS,
            subtasks=[SubTaskSpec("announce-status", EventKind.KEYPHRASE, {"keyphrase": "not-breathing"})],
            max_points=0,
            instruction=InstructionPayload(
                text="Tell the helpers around you that the victim is not breathing.",
                audio_ref="audio/communicate-status",
                keyphrase_hints=["not-breathing"],
            ),
        ),
        TaskSpec(
            id=TaskId.CALL_AMBULANCE,
            subtasks=[SubTaskSpec("dial-emergency", EventKind.PHONE_DIALED, {"number": "112"})],
            max_points=2,
            instruction=InstructionPayload(
                text="Call an ambulance: dial 112 on the phone.",
                image_ref="img/call-ambulance",
                audio_ref="audio/call-ambulance",
            ),
        ),
        TaskSpec(
            id=TaskId.SEND_FOR_AED,
            subtasks=[SubTaskSpec("send-for-aed", EventKind.KEYPHRASE, {"keyphrase": "get-aed"})],
            max_points=2,
            instruction=InstructionPayload(
                text="Send a helper to fetch a defibrillator. Never leave the victim alone.",
                audio_ref="audio/send-for-aed",
                keyphrase_hints=["get-aed"],
            ),
        ),
        TaskSpec(
            id=TaskId.PERFORM_COMPRESSIONS,
            subtasks=[SubTaskSpec("compression-block", EventKind.COMPRESSION_PUSH, {"count": 30})],
            max_points=4,
            instruction=InstructionPayload(
                text="Perform 30 chest compressions: push 5-6 cm deep at about 105 per minute and release fully.",
                image_ref="img/compressions",
                audio_ref="audio/compressions",
                animation_ref="anim/compressions",
            ),
        ),
        TaskSpec(
            id=TaskId.VENTILATE,
            subtasks=[SubTaskSpec("ventilate-twice", EventKind.VENTILATION_DELIVERED, {"count": 2})],
            max_points=2,
            instruction=InstructionPayload(
                text="Ventilate twice: tilt the head back and breathe into the victim's mouth.",
                image_ref="img/ventilate",
                audio_ref="audio/ventilate",
                animation_ref="anim/ventilate",
            ),
        ),
        TaskSpec(
            id=TaskId.PLACE_AED_PADS,
            subtasks=[
                SubTaskSpec("pad-left", EventKind.AED_PAD_PLACED, {"side": "left"}),
                SubTaskSpec("pad-right", EventKind.AED_PAD_PLACED, {"side": "right"}),
            ],
            max_points=2,
            instruction=InstructionPayload(
                text="Place both AED pads on the bare chest as shown on the pads.",
                image_ref="img/aed-pads",
                audio_ref="audio/aed-pads",
                animation_ref="anim/aed-pads",
            ),
        ),
        TaskSpec(
            id=TaskId.MAKE_PEOPLE_STAND_BACK,
            subtasks=[SubTaskSpec("stand-back", EventKind.KEYPHRASE, {"keyphrase": "stand-back"})],
            max_points=1,
            instruction=InstructionPayload(
                text="The AED analyses the heart rhythm: make sure nobody touches the victim.",
                audio_ref="audio/stand-back",
                keyphrase_hints=["stand-back"],
            ),
        ),
        TaskSpec(
            id=TaskId.TRIGGER_SHOCK,
            subtasks=[SubTaskSpec("press-shock", EventKind.AED_SHOCK_PRESSED)],
            max_points=1,
            instruction=InstructionPayload(
                text="Press the shock button when the AED tells you to.",
                image_ref="img/trigger-shock",
                audio_ref="audio/trigger-shock",
            ),
        ),
    ]
    edges = [(a, b) for a, b in zip(_NARRATIVE_ORDER, _NARRATIVE_ORDER[1:])]
    return SequenceGraph(tasks=tasks, edges=edges, start=TaskId.ENSURE_SAFETY, end=TaskId.TRIGGER_SHOCK)


def predecessors(graph: SequenceGraph, task: TaskId) -> set[TaskId]:
    """Exact predecessor set of ``task`` per the edge relation."""
    if task not in graph.task_ids():
        raise UnknownTaskError(task)
    return {a for a, b in graph.edges if b == task}


def successors(graph: SequenceGraph, task: TaskId) -> set[TaskId]:
    if task not in graph.task_ids():
        raise UnknownTaskError(task)
    return {b for a, b in graph.edges if a == task}


def validate_sequence(graph: SequenceGraph) -> list[str]:
    """Structural checks; an empty list means the graph is sound.

    Reports cycles, unreachable tasks, bad start/end declarations, empty
    subtask lists and negative point maxima. Violations are data, not errors.
    """
    violations: list[str] = []
    ids = graph.task_ids()
    if len(set(ids)) != len(ids):
        violations.append("duplicate task ids")
    known = set(ids)
    for a, b in graph.edges:
        if a not in known or b not in known:
            violations.append(f"edge references unknown task: {a.value}->{b.value}")
    for t in graph.tasks:
        if not t.subtasks:
            violations.append(f"task {t.id.value} has no subtasks")
        if t.max_points < 0:
            violations.append(f"task {t.id.value} has negative max_points")

    if graph.start not in known:
        violations.append("start task not in graph")
    if graph.end not in known:
        violations.append("end task not in graph")

    indeg = {t: 0 for t in known}
    outdeg = {t: 0 for t in known}
    for a, b in graph.edges:
        if a in known and b in known:
            outdeg[a] += 1
            indeg[b] += 1
    sources = [t for t in known if indeg[t] == 0]
    sinks = [t for t in known if outdeg[t] == 0]
    if graph.start in known and (indeg.get(graph.start, 0) != 0 or len(sources) != 1):
        violations.append("start must be the single task without predecessors")
    if graph.end in known and (outdeg.get(graph.end, 0) != 0 or len(sinks) != 1):
        violations.append("end must be the single task without successors")

    # Kahn's algorithm: leftover nodes imply a cycle.
    deg = dict(indeg)
    queue = sorted((t for t in known if deg[t] == 0), key=lambda t: t.value)
    seen = 0
    while queue:
        node = queue.pop(0)
        seen += 1
        for nxt in sorted(successors(graph, node), key=lambda t: t.value):
            deg[nxt] -= 1
            if deg[nxt] == 0:
                queue.append(nxt)
    if seen != len(known):
        violations.append("graph contains a cycle")
    elif graph.start in known:
        reached = {graph.start}
        frontier = [graph.start]
        while frontier:
            node = frontier.pop()
            for nxt in successors(graph, node):
                if nxt not in reached:
                    reached.add(nxt)
                    frontier.append(nxt)
        unreachable = known - reached
        for t in sorted(unreachable, key=lambda t: t.value):
            violations.append(f"task {t.value} unreachable from start")
    return violations


def topological_order(graph: SequenceGraph) -> list[TaskId]:
    """Deterministic topological order (ties broken by task id)."""
    known = set(graph.task_ids())
    indeg = {t: 0 for t in known}
    for _, b in graph.edges:
        indeg[b] += 1
    ready = sorted((t for t in known if indeg[t] == 0), key=lambda t: t.value)
    order: list[TaskId] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        for nxt in sorted(successors(graph, node), key=lambda t: t.value):
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
                ready.sort(key=lambda t: t.value)
    if len(order) != len(known):
        raise ValueError("graph contains a cycle")
    return order


def has_unique_topological_order(graph: SequenceGraph) -> bool:
    """True iff consecutive tasks in the topological order are all linked."""
    order = topological_order(graph)
    edge_set = set(graph.edges)
    return all((a, b) in edge_set for a, b in zip(order, order[1:]))


def graph_to_doc(graph: SequenceGraph) -> dict[str, Any]:
    """Serialize to the scenario-file document (one JSON doc per sequence)."""
    return {
        "schema": "bls-sequence/1",
        "start": graph.start.value,
        "end": graph.end.value,
        "tasks": [
            {
                "id": t.id.value,
                "max_points": t.max_points,
                "time_budget_s": t.time_budget_s,
                "instruction": {
                    "text": t.instruction.text,
                    "image_ref": t.instruction.image_ref,
                    "audio_ref": t.instruction.audio_ref,
                    "animation_ref": t.instruction.animation_ref,
                    "keyphrase_hints": list(t.instruction.keyphrase_hints),
                },
                "subtasks": [
                    {"id": s.id, "event": s.required_event.value, "params": s.params} for s in t.subtasks
                ],
            }
            for t in graph.tasks
        ],
        "edges": [[a.value, b.value] for a, b in graph.edges],
    }


def graph_from_doc(doc: dict[str, Any]) -> SequenceGraph:
    if doc.get("schema") != "bls-sequence/1":
        raise ValueError(f"unsupported sequence schema: {doc.get('schema')!r}")
    tasks = []
    for td in doc["tasks"]:
        instr = td.get("instruction", {})
        if not instr.get("text"):
            raise ValueError(f"task {td['id']} has no instruction text")
        tasks.append(
            TaskSpec(
                id=TaskId(td["id"]),
                subtasks=[
                    SubTaskSpec(
                        id=sd["id"],
                        required_event=EventKind(sd["event"]),
                        params=dict(sd.get("params", {})),
                    )
                    for sd in td["subtasks"]
                ],
                max_points=int(td["max_points"]),
                instruction=InstructionPayload(
                    text=instr["text"],
                    image_ref=instr.get("image_ref"),
                    audio_ref=instr.get("audio_ref"),
                    animation_ref=instr.get("animation_ref"),
                    keyphrase_hints=list(instr.get("keyphrase_hints", [])),
                ),
                time_budget_s=td.get("time_budget_s"),
            )
        )
    return SequenceGraph(
        tasks=tasks,
        edges=[(TaskId(a), TaskId(b)) for a, b in doc["edges"]],
        start=TaskId(doc["start"]),
        end=TaskId(doc["end"]),
    )


def subgraph(graph: SequenceGraph, keep: Iterable[TaskId]) -> SequenceGraph:
    """Induced subgraph over ``keep``; start/end recomputed from degrees."""
    keep_set = set(keep)
    tasks = [t for t in graph.tasks if t.id in keep_set]
    edges = [(a, b) for a, b in graph.edges if a in keep_set and b in keep_set]
    with_pred = {b for _, b in edges}
    with_succ = {a for a, _ in edges}
    starts = [t.id for t in tasks if t.id not in with_pred]
    ends = [t.id for t in tasks if t.id not in with_succ]
    if len(starts) != 1 or len(ends) != 1:
        raise ValueError("subgraph must have exactly one start and one end")
    return SequenceGraph(tasks=tasks, edges=edges, start=starts[0], end=ends[0])

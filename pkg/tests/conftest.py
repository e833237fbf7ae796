from __future__ import annotations

import os

import pytest

from blstrain.cpr import CprSummary, summarize
from blstrain.engine import SessionLog, TaskOutcome, TrainingMode
from blstrain.sequence import SequenceGraph, TaskId, build_default_sequence, graph_to_doc

SCENARIOS_DIR = os.path.join(os.path.dirname(__file__), "..", "scenarios")


@pytest.fixture(scope="session")
def default_graph() -> SequenceGraph:
    return build_default_sequence()


def scenario_path(name: str) -> str:
    return os.path.abspath(os.path.join(SCENARIOS_DIR, name + ".json"))


def make_log(
    graph: SequenceGraph,
    executed: list[TaskId],
    mode: str = "training",
    cpr: CprSummary | None = None,
    incomplete: set[TaskId] = frozenset(),
    trainee: str = "anon",
) -> SessionLog:
    """Synthesize a sealed log with the given execution order (tests only)."""
    positions = {tid: i + 1 for i, tid in enumerate(executed)}
    outcomes = []
    for spec in graph.tasks:
        done = spec.id in positions and spec.id not in incomplete
        outcomes.append(
            TaskOutcome(
                task=spec.id,
                completed=done,
                started_ts=0 if done else None,
                finished_ts=1000 * positions[spec.id] if done else None,
                position=positions.get(spec.id) if done else None,
                subtasks_done=len(spec.subtasks) if done else 0,
                subtasks_total=len(spec.subtasks),
            )
        )
    return SessionLog(
        session_id="synthetic",
        mode=TrainingMode(mode),
        started_at=0,
        trainee_id=trainee,
        graph_doc=graph_to_doc(graph),
        config_doc={},
        sensor_trace_ref=None,
        records=[],
        outcomes=outcomes,
        cpr=cpr if cpr is not None else summarize([]),
        finished_at=1000 * len(executed),
        aborted=False,
    )

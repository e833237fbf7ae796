"""Scoring and debriefing over sealed session logs.

Pure functions: per-task points (pads scored per pad, CPR from the rate and
depth bands), the order-correctness fraction, the 50%-floor order weighting,
and the full debrief report with per-push series, hints and a comparison to
the trainee's previous session.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from typing import Any, Iterable

from .cpr import CprSummary
from .engine import SessionLog, TaskOutcome
from .jsonutil import canonical
from .sequence import ScoreTable, SequenceGraph, TaskId, predecessors, topological_order

REPORT_SCHEMA = "bls-report/1"


@dataclass
class TaskResult:
    task: TaskId
    points_earned: int
    points_max: int
    completed: bool
    duration_ms: int | None
    in_order: bool
    subtask_completion: float

    def to_doc(self) -> dict[str, Any]:
        return {
            "task": self.task.value,
            "points_earned": self.points_earned,
            "points_max": self.points_max,
            "completed": self.completed,
            "duration_ms": self.duration_ms,
            "in_order": self.in_order,
            "subtask_completion": self.subtask_completion,
        }


@dataclass
class DebriefReport:
    session_id: str
    trainee_id: str
    mode: str
    task_results: list[TaskResult]
    intermediate_score: int
    order_fraction: float
    final_score: float
    total_duration_ms: int
    cpr: dict[str, Any]
    hints: list[str]
    previous_comparison: dict[str, Any] | None = None
    sequence_key: int = 0

    def to_doc(self) -> dict[str, Any]:
        return {
            "schema": REPORT_SCHEMA,
            "session_id": self.session_id,
            "trainee": self.trainee_id,
            "mode": self.mode,
            "sequence_key": self.sequence_key,
            "task_results": [r.to_doc() for r in self.task_results],
            "intermediate_score": self.intermediate_score,
            "order_fraction": round(self.order_fraction, 4),
            "final_score": round(self.final_score, 2),
            "total_duration_ms": self.total_duration_ms,
            "cpr": self.cpr,
            "hints": self.hints,
            "previous_comparison": self.previous_comparison,
        }

    def to_text(self) -> str:
        lines = [
            f"BLS session debrief — {self.session_id} ({self.mode} mode, trainee {self.trainee_id})",
            f"Final score: {self.final_score:.2f} / {sum(r.points_max for r in self.task_results)}"
            f"  (task points {self.intermediate_score}, order {self.order_fraction * 100:.0f}%)",
            f"Duration: {self.total_duration_ms / 1000.0:.1f} s",
            "Tasks:",
        ]
        for r in self.task_results:
            mark = "x" if r.completed else " "
            dur = f"{r.duration_ms / 1000.0:6.1f} s" if r.duration_ms is not None else "     --  "
            order = "in order" if r.in_order else "out of order"
            lines.append(
                f"  [{mark}] {r.task.value:<27} {r.points_earned}/{r.points_max}  {dur}  "
                f"{r.subtask_completion * 100:3.0f}%  {order}"
            )
        cpr = self.cpr
        if cpr.get("push_count"):
            rate = cpr.get("avg_rate")
            depth = cpr.get("avg_depth")
            lines.append(
                "CPR: {} pushes, avg rate {}, avg depth {}, full release: {}".format(
                    cpr["push_count"],
                    "--" if rate is None else f"{rate:.1f}/min",
                    "--" if depth is None else f"{depth:.2f} cm",
                    "yes" if cpr.get("full_release_always") else "no",
                )
            )
        else:
            lines.append("CPR: no compressions recorded")
        if self.hints:
            lines.append("Hints:")
            lines.extend(f"  - {h}" for h in self.hints)
        if self.previous_comparison:
            prev = self.previous_comparison
            lines.append(
                f"Previous session: score {prev['final_score']:.2f}, "
                f"duration {prev['total_duration_ms'] / 1000.0:.1f} s"
            )
        return "\n".join(lines) + "\n"


def score_cpr(summary: CprSummary, table: ScoreTable) -> int:
    """0..4 points from average rate and depth against the band table.

    Boundary values earn the higher adjacent band (all bands are closed);
    an empty summary earns 0.
    """
    if summary.push_count == 0 or summary.avg_depth is None:
        return 0
    points = 0
    rate = summary.avg_rate
    if rate is not None:
        for low, high, pts in sorted(table.rate_bands, key=lambda b: -b[2]):
            if low <= rate <= high:
                points += pts
                break
    low, high, pts = table.depth_band
    if low <= summary.avg_depth <= high:
        points += pts
    return points


def score_task(
    task_id: TaskId,
    outcome: TaskOutcome,
    table: ScoreTable,
    cpr_summary: CprSummary | None = None,
) -> int:
    """Points for one task outcome.

    Completed tasks earn their table value; the pad task earns per placed pad
    even when incomplete; the compression task is scored from CPR quality.
    """
    if task_id not in table.task_points:
        raise KeyError(f"task not in score table: {task_id}")
    if task_id == TaskId.PLACE_AED_PADS:
        return outcome.subtasks_done * table.aed_pad_points
    if task_id == TaskId.PERFORM_COMPRESSIONS:
        if not outcome.completed or cpr_summary is None:
            return 0
        return score_cpr(cpr_summary, table)
    return table.task_points[task_id] if outcome.completed else 0


def _executed_order(outcomes: Iterable[TaskOutcome]) -> list[TaskId]:
    done = [o for o in outcomes if o.completed and o.position is not None]
    return [o.task for o in sorted(done, key=lambda o: o.position)]


def _in_order_flags(executed: list[TaskId], graph: SequenceGraph) -> dict[TaskId, bool]:
    flags: dict[TaskId, bool] = {}
    for i, task in enumerate(executed):
        if i == 0:
            flags[task] = task == graph.start
        else:
            flags[task] = executed[i - 1] in predecessors(graph, task)
    return flags


def order_fraction(log: SessionLog, graph: SequenceGraph) -> float:
    """Share of graph tasks executed at the right time.

    A completed task counts when the task executed immediately before it is
    one of its graph predecessors; the first executed task counts when it is
    the start node. The denominator is the number of tasks in the graph.
    """
    executed = _executed_order(log.outcomes)
    flags = _in_order_flags(executed, graph)
    return sum(1 for ok in flags.values() if ok) / len(graph.tasks)


def final_score(intermediate: float, fraction: float) -> float:
    """Order weighting: 100% order keeps the full score, 0% halves it."""
    if intermediate < 0:
        raise ValueError("intermediate score must be >= 0")
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("order fraction must be in [0, 1]")
    return intermediate * (0.5 + 0.5 * fraction)


_HINTS = {
    "rate-low": "Increase your compression rate toward 105 per minute.",
    "rate-high": "Decrease your compression rate toward 105 per minute.",
    "depth-low": "Push deeper: aim for 5-6 cm of chest compression.",
    "depth-high": "Push less deep: aim for 5-6 cm of chest compression.",
    "incomplete-release": "Release the chest fully between compressions.",
    "praise": "Excellent work: every task completed in order.",
}


def _build_hints(
    results: list[TaskResult],
    cpr: CprSummary,
    budget_exceeded: list[TaskId],
    max_points: int,
    final: float,
) -> list[str]:
    hints: list[str] = []
    if cpr.push_count > 0:
        rate, depth = cpr.avg_rate, cpr.avg_depth
        if rate is not None and rate < 95.0:
            hints.append(_HINTS["rate-low"])
        if rate is not None and rate > 125.0:
            hints.append(_HINTS["rate-high"])
        if depth is not None and depth < 5.0:
            hints.append(_HINTS["depth-low"])
        if depth is not None and depth > 6.0:
            hints.append(_HINTS["depth-high"])
        if not cpr.full_release_always:
            hints.append(_HINTS["incomplete-release"])
    skipped = [r.task.value for r in results if not r.completed]
    if skipped:
        hints.append("Not completed: " + ", ".join(skipped) + ".")
    if budget_exceeded:
        hints.append(
            "Too slow on: " + ", ".join(t.value for t in budget_exceeded) + " (time budget exceeded)."
        )
    if not hints and final >= max_points:
        hints.append(_HINTS["praise"])
    return hints


def build_debrief(
    log: SessionLog,
    graph: SequenceGraph,
    table: ScoreTable,
    history: Iterable[DebriefReport] = (),
) -> DebriefReport:
    """Fold a sealed log into the debrief report.

    Pure: identical inputs yield an identical serialized report. ``history``
    must be ordered oldest to newest; the most recent report for the same
    trainee feeds the previous-session comparison.
    """
    executed = _executed_order(log.outcomes)
    flags = _in_order_flags(executed, graph)
    results: list[TaskResult] = []
    order = topological_order(graph)
    outcome_by_task = {o.task: o for o in log.outcomes}
    for tid in order:
        outcome = outcome_by_task[tid]
        duration = None
        if outcome.completed and outcome.started_ts is not None and outcome.finished_ts is not None:
            duration = outcome.finished_ts - outcome.started_ts
        results.append(
            TaskResult(
                task=tid,
                points_earned=score_task(tid, outcome, table, log.cpr),
                points_max=table.task_points[tid],
                completed=outcome.completed,
                duration_ms=duration,
                in_order=flags.get(tid, False),
                subtask_completion=(
                    outcome.subtasks_done / outcome.subtasks_total if outcome.subtasks_total else 0.0
                ),
            )
        )
    intermediate = sum(r.points_earned for r in results)
    fraction = order_fraction(log, graph)
    final = final_score(intermediate, fraction)

    budget_exceeded = [
        TaskId(fb.payload["task"])
        for fb in log.feedback
        if fb.kind.value == "TimeBudgetExceeded"
    ]
    max_points = sum(table.task_points[tid] for tid in order)
    hints = _build_hints(results, log.cpr, budget_exceeded, max_points, final)

    previous = None
    for report in history:
        if report.trainee_id == log.trainee_id:
            previous = report
    previous_comparison = None
    if previous is not None:
        previous_comparison = {
            "session_id": previous.session_id,
            "final_score": round(previous.final_score, 2),
            "total_duration_ms": previous.total_duration_ms,
        }

    band2 = next(b for b in table.rate_bands if b[2] == max(b[2] for b in table.rate_bands))
    cpr_doc = {
        **log.cpr.to_doc(),
        "rate_band": [band2[0], band2[1]],
        "depth_band": [table.depth_band[0], table.depth_band[1]],
        "target_rate": 105.0,
    }

    return DebriefReport(
        session_id=log.session_id,
        trainee_id=log.trainee_id,
        mode=log.mode.value,
        task_results=results,
        intermediate_score=intermediate,
        order_fraction=fraction,
        final_score=final,
        total_duration_ms=log.total_duration_ms,
        cpr=cpr_doc,
        hints=hints,
        previous_comparison=previous_comparison,
        sequence_key=log.started_at,
    )


def report_from_doc(doc: dict[str, Any]) -> DebriefReport:
    if doc.get("schema") != REPORT_SCHEMA:
        raise ValueError(f"unsupported report schema: {doc.get('schema')!r}")
    return DebriefReport(
        session_id=doc["session_id"],
        trainee_id=doc.get("trainee", "anon"),
        mode=doc.get("mode", "training"),
        task_results=[
            TaskResult(
                task=TaskId(r["task"]),
                points_earned=int(r["points_earned"]),
                points_max=int(r["points_max"]),
                completed=bool(r["completed"]),
                duration_ms=r.get("duration_ms"),
                in_order=bool(r.get("in_order", False)),
                subtask_completion=float(r.get("subtask_completion", 0.0)),
            )
            for r in doc["task_results"]
        ],
        intermediate_score=int(doc["intermediate_score"]),
        order_fraction=float(doc["order_fraction"]),
        final_score=float(doc["final_score"]),
        total_duration_ms=int(doc["total_duration_ms"]),
        cpr=dict(doc.get("cpr", {})),
        hints=list(doc.get("hints", [])),
        previous_comparison=doc.get("previous_comparison"),
        sequence_key=int(doc.get("sequence_key", 0)),
    )


_HISTORY_NAME = re.compile(r"^(?P<trainee>.+)__(?P<key>\d{12})__(?P<session>.+)\.json$")


def history_filename(report: DebriefReport) -> str:
    """File key: trainee id + zero-padded sequence key; latest sorts last."""
    return f"{report.trainee_id}__{report.sequence_key:012d}__{report.session_id}.json"


def load_history(history_dir: str, trainee_id: str | None = None) -> list[DebriefReport]:
    """Reports in a history directory, oldest first (lexicographic file order)."""
    if not os.path.isdir(history_dir):
        return []
    reports: list[DebriefReport] = []
    for name in sorted(os.listdir(history_dir)):
        match = _HISTORY_NAME.match(name)
        if not match:
            continue
        if trainee_id is not None and match.group("trainee") != trainee_id:
            continue
        with open(os.path.join(history_dir, name), "r", encoding="utf-8") as fh:
            reports.append(report_from_doc(json.load(fh)))
    return reports


def save_to_history(report: DebriefReport, history_dir: str) -> str:
    os.makedirs(history_dir, exist_ok=True)
    path = os.path.join(history_dir, history_filename(report))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical(report.to_doc()) + "\n")
    return path

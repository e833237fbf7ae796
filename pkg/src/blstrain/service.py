"""Trainer service: request/response endpoints plus a server-push feedback stream.

Surface (JSON bodies, CORS open, one live session per trainee connection):

    POST /sessions                  {"mode": "learning|training", "trainee"?}
    GET  /sessions/<id>             session info: tasks, completed, current
    POST /sessions/<id>/events      {"kind": ..., "payload": {...}}
    POST /sessions/<id>/compress    {"depth": cm} -> one device push pulse
    GET  /sessions/<id>/feedback    text/event-stream, backlog then live
    POST /sessions/<id>/finish      {"abort"?} -> debrief report
    GET  /sessions/<id>/debrief     debrief report (after finish)
    GET  /scenarios                 scenario names in the scenarios directory

Each session runs against its own in-process virtual manikin (or a live
socket device when the service was started with a device address); all
engine writes are serialized through a per-session lock.
"""

from __future__ import annotations

import json
import os
import queue
import threading
import time
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any

from . import assessment
from .device import CompressionPulse, DeviceConfig, SocketLink, VirtualManikin
from .engine import EngineError, Session, TrainingMode
from .events import EventKind, EventSource, SessionEvent
from .jsonutil import canonical
from .protocol import CommandFrame, ProtocolError, Sensor, Verb
from .sequence import build_default_sequence, default_score_table, graph_to_doc

TICK_MS = 50
PRESS_PULSE_MS = 250


class _LiveSession:
    """One running session plus its device pump and feedback fan-out."""

    def __init__(self, session_id: str, mode: str, trainee: str, device_addr: str | None):
        self.id = session_id
        self.lock = threading.RLock()
        self.subscribers: list[queue.Queue] = []
        self.graph = build_default_sequence()
        self.finished_log = None
        self.report: assessment.DebriefReport | None = None
        self._t0 = time.monotonic()
        self._stop = threading.Event()

        self.link: SocketLink | None = None
        self.manikin: VirtualManikin | None = None
        if device_addr:
            self.link = SocketLink.from_address(device_addr)
            self.link.ensure_connected()
            self.link.send_command(Verb.START, Sensor.DISTANCE)
            self.link.send_command(Verb.START, Sensor.GYRO)
        else:
            self.manikin = VirtualManikin(DeviceConfig(noise_sigma=0.05, seed=int(time.time()) & 0xFFFF))
            self.manikin.handle_command(CommandFrame(Verb.START, Sensor.DISTANCE))

        self.session = Session(
            self.graph,
            TrainingMode(mode),
            device=self.link,
            session_id=session_id,
            started_at=0,
            trainee_id=trainee,
        )
        for fb in self.session.initial_feedback:
            self._push(fb.to_doc())
        self._pump = threading.Thread(target=self._run_pump, name=f"pump-{session_id}", daemon=True)
        self._pump.start()

    def elapsed_ms(self) -> int:
        return int((time.monotonic() - self._t0) * 1000)

    def _push(self, doc: dict[str, Any]) -> None:
        for q in list(self.subscribers):
            q.put(doc)

    def _emit(self, feedback) -> None:
        for fb in feedback:
            self._push(fb.to_doc())

    def _run_pump(self) -> None:
        if self.link is not None:
            self._run_socket_pump()
        else:
            self._run_local_pump()

    def _run_local_pump(self) -> None:
        assert self.manikin is not None
        while not self._stop.is_set():
            time.sleep(TICK_MS / 1000.0)
            with self.lock:
                if not self.session.active:
                    return
                now = self.elapsed_ms()
                dt = now - self.manikin.state.clock
                if dt <= 0:
                    continue
                try:
                    for line in self.manikin.tick(dt):
                        self._emit(self.session.ingest_frame(line))
                    self._emit(self.session.tick_clock(now))
                except EngineError:
                    return

    def _run_socket_pump(self) -> None:
        assert self.link is not None
        while not self._stop.is_set():
            line = self.link.read_line(timeout=0.5)
            if line is None:
                continue
            with self.lock:
                if not self.session.active:
                    return
                try:
                    self._emit(self.session.ingest_frame(line))
                    self._emit(self.session.tick_clock(self.elapsed_ms()))
                except (EngineError, ProtocolError):
                    continue

    def post_event(self, kind: str, payload: dict[str, Any]) -> list[dict[str, Any]]:
        with self.lock:
            if not self.session.active:
                raise EngineError("session finished")
            event = SessionEvent(
                ts=max(self.elapsed_ms(), 0),
                kind=EventKind(kind),
                payload=payload,
                source=EventSource.UI,
            )
            feedback = self.session.apply_event(event)
            self._emit(feedback)
            return [fb.to_doc() for fb in feedback]

    def compress(self, depth: float) -> None:
        if self.manikin is None:
            raise EngineError("no in-process device attached")
        with self.lock:
            # presses inside the calibration window would skew the zero level
            start = max(self.elapsed_ms(), self.session.config.calibration_ms + 100)
            self.manikin.add_pulse(CompressionPulse(start, depth, PRESS_PULSE_MS))

    def info(self) -> dict[str, Any]:
        with self.lock:
            completed = [t.value for t in self.session.completed_tasks]
            current = self.session.current_task
            return {
                "session_id": self.id,
                "mode": self.session.mode.value,
                "active": self.session.active,
                "current": current.value if current else None,
                "completed": completed,
                "tasks": [
                    {
                        "id": t.id.value,
                        "max_points": t.max_points,
                        "text": t.instruction.text,
                        "keyphrase_hints": list(t.instruction.keyphrase_hints),
                    }
                    for t in self.graph.tasks
                ],
            }

    def backlog(self) -> list[dict[str, Any]]:
        with self.lock:
            return [fb.to_doc() for fb in self.session.feedback_records()]

    def finish(self, abort: bool | None, history: list[assessment.DebriefReport]) -> dict[str, Any]:
        """Seal the session once; repeated calls return the same report."""
        with self.lock:
            self._stop.set()
            if self.session.active:
                aborted = abort if abort is not None else not self.session.end_task_completed
                self.finished_log = self.session.finish(aborted=aborted, at=self.elapsed_ms())
                self.report = assessment.build_debrief(
                    self.finished_log, self.graph, default_score_table(), history
                )
                self.report.sequence_key = len(history)
                history.append(self.report)
            assert self.report is not None
            return self.report.to_doc()

    def close(self) -> None:
        self._stop.set()
        if self.link is not None:
            self.link.close()


class TrainerService:
    """Threaded HTTP server wrapping the session engine."""

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 0,
        scenarios_dir: str = "scenarios",
        device_addr: str | None = None,
        ui_dir: str | None = None,
    ):
        self.scenarios_dir = scenarios_dir
        self.device_addr = device_addr
        self.ui_dir = ui_dir
        self.sessions: dict[str, _LiveSession] = {}
        self.history: dict[str, list[assessment.DebriefReport]] = {}
        self._registry_lock = threading.Lock()

        service = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt: str, *args: Any) -> None:
                pass

            def _cors(self) -> None:
                self.send_header("Access-Control-Allow-Origin", "*")
                self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
                self.send_header("Access-Control-Allow-Headers", "Content-Type")

            def _json(self, code: int, doc: Any) -> None:
                body = canonical(doc).encode("utf-8")
                self.send_response(code)
                self._cors()
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def _read_body(self) -> dict[str, Any]:
                length = int(self.headers.get("Content-Length") or 0)
                if length == 0:
                    return {}
                return json.loads(self.rfile.read(length).decode("utf-8"))

            def do_OPTIONS(self) -> None:  # noqa: N802
                self.send_response(204)
                self._cors()
                self.send_header("Content-Length", "0")
                self.end_headers()

            def do_GET(self) -> None:  # noqa: N802
                try:
                    service._route_get(self)
                except BrokenPipeError:
                    pass
                except Exception as exc:  # noqa: BLE001
                    self._json(500, {"error": str(exc)})

            def do_POST(self) -> None:  # noqa: N802
                try:
                    service._route_post(self)
                except Exception as exc:  # noqa: BLE001
                    self._json(500, {"error": str(exc)})

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._server.daemon_threads = True
        self.host, self.port = self._server.server_address[:2]

    # -- routing ---------------------------------------------------------------

    def _session(self, sid: str) -> _LiveSession | None:
        with self._registry_lock:
            return self.sessions.get(sid)

    def _route_get(self, h: Any) -> None:
        parts = [p for p in h.path.split("?")[0].split("/") if p]
        if parts == ["scenarios"]:
            names = []
            if os.path.isdir(self.scenarios_dir):
                names = sorted(n[:-5] for n in os.listdir(self.scenarios_dir) if n.endswith(".json"))
            h._json(200, {"scenarios": names})
            return
        if len(parts) >= 2 and parts[0] == "sessions":
            live = self._session(parts[1])
            if live is None:
                h._json(404, {"error": "unknown session"})
                return
            if len(parts) == 2:
                h._json(200, live.info())
                return
            if parts[2] == "feedback":
                self._stream_feedback(h, live)
                return
            if parts[2] == "debrief":
                if live.report is None:
                    h._json(409, {"error": "session not finished"})
                else:
                    h._json(200, live.report.to_doc())
                return
        if parts and parts[0] == "ui" and self.ui_dir:
            self._serve_static(h, parts[1:])
            return
        h._json(404, {"error": "no such route"})

    def _route_post(self, h: Any) -> None:
        parts = [p for p in h.path.split("?")[0].split("/") if p]
        try:
            body = h._read_body()
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            h._json(400, {"error": f"bad body: {exc}"})
            return
        if parts == ["sessions"]:
            mode = body.get("mode", "learning")
            trainee = body.get("trainee", "anon")
            sid = uuid.uuid4().hex[:12]
            try:
                live = _LiveSession(sid, mode, trainee, self.device_addr)
            except (ValueError, EngineError, OSError) as exc:
                h._json(400, {"error": str(exc)})
                return
            with self._registry_lock:
                self.sessions[sid] = live
            h._json(201, {"session_id": sid, "mode": mode})
            return
        if len(parts) == 3 and parts[0] == "sessions":
            live = self._session(parts[1])
            if live is None:
                h._json(404, {"error": "unknown session"})
                return
            if parts[2] == "events":
                try:
                    feedback = live.post_event(body["kind"], dict(body.get("payload", {})))
                except (KeyError, ValueError, EngineError) as exc:
                    h._json(400, {"error": str(exc)})
                    return
                h._json(200, {"feedback": feedback})
                return
            if parts[2] == "compress":
                try:
                    live.compress(float(body.get("depth", 5.5)))
                except (ValueError, EngineError) as exc:
                    h._json(400, {"error": str(exc)})
                    return
                h._json(200, {"ok": True})
                return
            if parts[2] == "finish":
                trainee = live.session.trainee_id
                history = self.history.setdefault(trainee, [])
                try:
                    doc = live.finish(body.get("abort"), history)
                except EngineError as exc:
                    h._json(400, {"error": str(exc)})
                    return
                h._json(200, doc)
                return
        h._json(404, {"error": "no such route"})

    def _stream_feedback(self, h: Any, live: _LiveSession) -> None:
        q: queue.Queue = queue.Queue()
        for doc in live.backlog():
            q.put(doc)
        live.subscribers.append(q)
        h.send_response(200)
        h._cors()
        h.send_header("Content-Type", "text/event-stream")
        h.send_header("Cache-Control", "no-cache")
        h.send_header("Transfer-Encoding", "chunked")
        h.end_headers()

        def write_chunk(payload: bytes) -> None:
            h.wfile.write(f"{len(payload):X}\r\n".encode("ascii") + payload + b"\r\n")
            h.wfile.flush()

        try:
            while True:
                try:
                    doc = q.get(timeout=15.0)
                except queue.Empty:
                    write_chunk(b": keepalive\n\n")
                    continue
                write_chunk(f"data: {canonical(doc)}\n\n".encode("utf-8"))
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            if q in live.subscribers:
                live.subscribers.remove(q)

    def _serve_static(self, h: Any, rel_parts: list[str]) -> None:
        assert self.ui_dir is not None
        rel = "/".join(rel_parts) or "index.html"
        path = os.path.normpath(os.path.join(self.ui_dir, rel))
        if not path.startswith(os.path.normpath(self.ui_dir)) or not os.path.isfile(path):
            h._json(404, {"error": "not found"})
            return
        ctype = "text/html"
        if path.endswith(".js"):
            ctype = "text/javascript"
        elif path.endswith(".css"):
            ctype = "text/css"
        elif path.endswith(".json"):
            ctype = "application/json"
        with open(path, "rb") as fh:
            body = fh.read()
        h.send_response(200)
        h._cors()
        h.send_header("Content-Type", ctype)
        h.send_header("Content-Length", str(len(body)))
        h.end_headers()
        h.wfile.write(body)

    # -- lifecycle ---------------------------------------------------------------

    def serve_forever(self) -> None:
        self._server.serve_forever(poll_interval=0.2)

    def start_background(self) -> "TrainerService":
        thread = threading.Thread(target=self.serve_forever, name="trainer-service", daemon=True)
        thread.start()
        return self

    def stop(self) -> None:
        with self._registry_lock:
            for live in self.sessions.values():
                live.close()
        self._server.shutdown()
        self._server.server_close()

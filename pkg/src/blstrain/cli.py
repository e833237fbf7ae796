"""Operator command line: simulate, run, replay, report, serve.

Exit codes: 0 ok, 2 validation error, 3 I/O or connection error,
4 replay determinism mismatch.
"""

from __future__ import annotations

import json
import sys
import time

import click

from . import assessment
from .device import DeviceConfig, DeviceError, DeviceServer, DeviceUnreachableError, SocketLink, VirtualManikin
from .engine import EngineError, SchemaMismatchError, SessionLog, TrainingMode, replay_file
from .jsonutil import canonical
from .scenario import ScenarioError, load_script, run_script, run_script_against_device
from .sequence import default_score_table, graph_from_doc

EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_MISMATCH = 4


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main() -> None:
    """Basic life support training engine."""


@main.command("simulate")
@click.option("--config", "config_path", type=click.Path(), default=None, help="Device config JSON.")
@click.option("--port", type=int, default=9750, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def cmd_simulate(config_path: str | None, port: int, host: str) -> None:
    """Run a virtual manikin on a TCP port."""
    cfg = DeviceConfig()
    if config_path is not None:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                cfg = DeviceConfig.from_doc(json.load(fh))
        except (OSError, json.JSONDecodeError, ValueError) as exc:
            _fail(EXIT_VALIDATION, f"bad device config: {exc}")
    try:
        server = DeviceServer(VirtualManikin(cfg), host=host, port=port).start()
    except OSError as exc:
        _fail(EXIT_IO, f"cannot bind {host}:{port}: {exc}")
        return
    click.echo(f"device on {server.host}:{server.port}  config={canonical(cfg.to_doc())}")
    try:
        while True:
            time.sleep(1.0)
    except KeyboardInterrupt:
        server.stop()


@main.command("run")
@click.argument("script_path", type=click.Path())
@click.option("--mode", type=click.Choice(["learning", "training"]), default=None)
@click.option("--device", "device_addr", default=None, help="host:port of a live device.")
@click.option("--out", "out_log", type=click.Path(), required=True, help="Session log output path.")
@click.option("--seed", type=int, default=None, help="Override the device noise seed.")
def cmd_run(script_path: str, mode: str | None, device_addr: str | None, out_log: str, seed: int | None) -> None:
    """Drive a full session from a scenario script and write the sealed log."""
    try:
        script = load_script(script_path)
    except (OSError, json.JSONDecodeError, ScenarioError, ValueError) as exc:
        _fail(EXIT_VALIDATION, f"bad scenario script: {exc}")
        return
    trace_ref = out_log + ".trace"
    try:
        if device_addr:
            link = SocketLink.from_address(device_addr)
            log, trace = run_script_against_device(script, link, mode=TrainingMode(mode) if mode else None, trace_ref=trace_ref)
        else:
            log, trace = run_script(
                script, mode=TrainingMode(mode) if mode else None, seed=seed, trace_ref=trace_ref
            )
    except (DeviceUnreachableError, OSError) as exc:
        _fail(EXIT_IO, f"device lost: {exc}")
        return
    except (EngineError, DeviceError, ScenarioError) as exc:
        _fail(EXIT_VALIDATION, f"run failed: {exc}")
        return
    log.write(out_log)
    with open(trace_ref, "w", encoding="utf-8") as fh:
        fh.writelines(trace)
    done = sum(1 for o in log.outcomes if o.completed)
    click.echo(
        f"sealed {log.session_id}: {done}/{len(log.outcomes)} tasks, "
        f"{log.cpr.push_count} pushes, log -> {out_log}"
    )


@main.command("replay")
@click.argument("log_path", type=click.Path())
def cmd_replay(log_path: str) -> None:
    """Re-run a sealed log and verify the regenerated feedback byte-for-byte."""
    try:
        result = replay_file(log_path)
    except SchemaMismatchError as exc:
        _fail(EXIT_VALIDATION, f"schema mismatch: {exc}")
        return
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
        return
    if result.identical:
        click.echo("identical")
    else:
        click.echo(f"mismatch at line {result.mismatch_line}: {result.detail}")
        sys.exit(EXIT_MISMATCH)


@main.command("report")
@click.argument("log_path", type=click.Path())
@click.option("--history", "history_dir", type=click.Path(), default=None, help="Trainee history directory.")
@click.option("--format", "fmt", type=click.Choice(["structured", "text"]), default="structured", show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="Report output path (default stdout).")
def cmd_report(log_path: str, history_dir: str | None, fmt: str, out_path: str | None) -> None:
    """Build the debrief report for a sealed session log."""
    try:
        log = SessionLog.read(log_path)
    except SchemaMismatchError as exc:
        _fail(EXIT_VALIDATION, str(exc))
        return
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
        return
    graph = graph_from_doc(log.graph_doc)
    table = default_score_table()
    history = assessment.load_history(history_dir, log.trainee_id) if history_dir else []
    report = assessment.build_debrief(log, graph, table, history)
    if history_dir:
        report.sequence_key = len(history)
        assessment.save_to_history(report, history_dir)
    rendered = report.to_text() if fmt == "text" else canonical(report.to_doc()) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(rendered)
        click.echo(f"report -> {out_path}")
    else:
        click.echo(rendered, nl=False)


@main.command("serve")
@click.option("--port", type=int, default=9751, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--device", "device_addr", default=None, help="host:port of a live device (default: in-process).")
@click.option("--scenarios", "scenarios_dir", type=click.Path(), default="scenarios", show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(), default=None, help="Static directory served at /ui/.")
def cmd_serve(port: int, host: str, device_addr: str | None, scenarios_dir: str, ui_dir: str | None) -> None:
    """Run the trainer service (HTTP + server-push feedback stream)."""
    from .service import TrainerService

    try:
        service = TrainerService(
            host=host, port=port, scenarios_dir=scenarios_dir, device_addr=device_addr, ui_dir=ui_dir
        )
    except OSError as exc:
        _fail(EXIT_IO, f"cannot bind {host}:{port}: {exc}")
        return
    click.echo(f"trainer service on http://{service.host}:{service.port}")
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        service.stop()


if __name__ == "__main__":
    main()

"""Operator command line: serve, administer events, simulate, export, replay."""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from . import __version__
from .engine import Newsroom, replay_lines
from .gateway import create_app
from .model import NewsroomError, wire_to_ts
from .recruiting import PaidMarketplace, Sources, VolunteerRoster
from .report import STATS_CSV_HEADER, render_markdown, stats_csv_row
from .simulator import ScenarioConfig, SuiteFailure, run_scenario, run_table1_suite
from .templates import TemplateRegistry


def _newsroom(data_dir: str, templates_dir: str | None = None) -> Newsroom:
    registry = TemplateRegistry()
    if templates_dir:
        registry.load_directory(templates_dir)
    return Newsroom(registry, data_dir=data_dir)


def _fail(error: NewsroomError) -> None:
    raise click.ClickException(f"[{error.code}] {error.message}")


@click.group()
@click.version_option(version=__version__, prog_name="stringer")
def main():
    """Crowd-powered local event coverage."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8800, show_default=True, type=int)
@click.option("--data-dir", default="./data", show_default=True,
              type=click.Path(file_okay=False))
@click.option("--templates", "templates_dir", default=None,
              type=click.Path(exists=True, file_okay=False),
              help="Directory of template JSON files layered over the defaults.")
@click.option("--roster", "roster_file", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Volunteer roster JSON file.")
@click.option("--ui", "ui_dir", default=None, type=click.Path(exists=True, file_okay=False),
              help="Static directory to serve at / (the browser newsroom).")
def serve(host, port, data_dir, templates_dir, roster_file, ui_dir):
    """Serve the HTTP API (and optionally the browser UI)."""
    import uvicorn

    newsroom = _newsroom(data_dir, templates_dir)
    roster = VolunteerRoster.from_file(roster_file) if roster_file else VolunteerRoster()
    sources = Sources(marketplace=PaidMarketplace(), roster=roster)
    app = create_app(newsroom, sources)
    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    click.echo(f"stringer {__version__} serving on {host}:{port} (data: {data_dir})")
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        newsroom.close()


@main.group()
def event():
    """Administer events directly against a data directory."""


@event.command("create")
@click.option("--data-dir", default="./data", show_default=True)
@click.option("--name", required=True)
@click.option("--location", required=True)
@click.option("--start", required=True, help="ISO-8601 start time (UTC).")
@click.option("--end", required=True, help="ISO-8601 end time (UTC).")
@click.option("--type", "event_type", required=True)
@click.option("--budget-cap-cents", default=None, type=int)
def event_create(data_dir, name, location, start, end, event_type, budget_cap_cents):
    newsroom = _newsroom(data_dir)
    try:
        record = newsroom.create_event(
            name, location, wire_to_ts(start), wire_to_ts(end), event_type,
            budget_cap_cents=budget_cap_cents,
        )
    except NewsroomError as exc:
        _fail(exc)
    finally:
        newsroom.close()
    click.echo(json.dumps(record.to_wire(), indent=2))


@event.command("start")
@click.option("--data-dir", default="./data", show_default=True)
@click.option("--event", "event_id", required=True)
@click.option("--reporters", required=True, help="Comma-separated worker ids.")
def event_start(data_dir, event_id, reporters):
    newsroom = _newsroom(data_dir)
    try:
        missions = newsroom.start_event(event_id, [r.strip() for r in reporters.split(",")])
    except NewsroomError as exc:
        _fail(exc)
    finally:
        newsroom.close()
    click.echo(json.dumps({"missions": [m.to_wire() for m in missions]}, indent=2))


@event.command("close")
@click.option("--data-dir", default="./data", show_default=True)
@click.option("--event", "event_id", required=True)
def event_close(data_dir, event_id):
    newsroom = _newsroom(data_dir)
    try:
        record = newsroom.close_event(event_id)
    except NewsroomError as exc:
        _fail(exc)
    finally:
        newsroom.close()
    click.echo(json.dumps(record.to_wire(), indent=2))


@main.command()
@click.option("--scenario", "scenario_file", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--suite", "suite_dir", default=None,
              type=click.Path(exists=True, file_okay=False),
              help="Run every shipped scenario in a directory as a checked suite.")
@click.option("--seed", default=None, type=int, help="Override the scenario seed.")
@click.option("--data-dir", default=None, type=click.Path(file_okay=False),
              help="Keep the persisted event logs here instead of a temp dir.")
@click.option("--transport", default="http", type=click.Choice(["http", "direct"]),
              show_default=True)
def simulate(scenario_file, suite_dir, seed, data_dir, transport):
    """Run scripted crowd scenarios under virtual time."""
    if bool(scenario_file) == bool(suite_dir):
        raise click.UsageError("pass exactly one of --scenario or --suite")
    if suite_dir:
        try:
            results = run_table1_suite(suite_dir, transport=transport)
        except SuiteFailure as exc:
            raise click.ClickException(str(exc))
        click.echo(json.dumps([r.to_dict() for r in results], indent=2))
        return
    config = ScenarioConfig.from_file(scenario_file)
    if seed is not None:
        config = dataclasses.replace(config, seed=seed)
    result = run_scenario(config, data_dir=data_dir, transport=transport)
    click.echo(json.dumps(result.to_dict(), indent=2))
    if not result.ok:
        sys.exit(1)


@main.group()
def report():
    """Work with finalized and draft reports."""


@report.command("export")
@click.option("--data-dir", default="./data", show_default=True)
@click.option("--event", "event_id", required=True)
@click.option("--format", "fmt", default="md", type=click.Choice(["md", "json"]),
              show_default=True)
@click.option("--out", "out_file", default=None, type=click.Path(dir_okay=False))
def report_export(data_dir, event_id, fmt, out_file):
    newsroom = _newsroom(data_dir)
    try:
        record = newsroom.get_event(event_id)
        current = newsroom.report_for_event(event_id)
        if current is None:
            current = newsroom.draft_report(event_id)
        if fmt == "json":
            rendered = json.dumps(current.to_wire(), indent=2)
        else:
            rendered = render_markdown(current, record.name, record.location)
    except NewsroomError as exc:
        _fail(exc)
    finally:
        newsroom.close()
    if out_file:
        Path(out_file).write_text(rendered, encoding="utf-8")
        click.echo(f"wrote {out_file}")
    else:
        click.echo(rendered)


@report.command("stats")
@click.option("--data-dir", default="./data", show_default=True)
@click.option("--event", "event_id", required=True)
def report_stats(data_dir, event_id):
    newsroom = _newsroom(data_dir)
    try:
        stats = newsroom.report_stats(event_id)
    except NewsroomError as exc:
        _fail(exc)
    finally:
        newsroom.close()
    click.echo(STATS_CSV_HEADER)
    click.echo(stats_csv_row(stats))


@main.command()
@click.option("--log", "log_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--verify", is_flag=True,
              help="Also check canonical encoding and print the state digest.")
def replay(log_file, verify):
    """Rebuild state from a persisted event log."""
    lines = Path(log_file).read_text(encoding="utf-8").splitlines()
    try:
        state = replay_lines(lines)
    except NewsroomError as exc:
        _fail(exc)
    if state is None:
        click.echo("empty log: empty state")
        return
    summary = {
        "event_id": state.event.id,
        "status": state.event.status.value,
        "events": state.last_seq,
        "workers": len(state.workers),
        "submissions": len(state.submission_order),
        "ledger_total_cents": state.ledger_total(),
    }
    if verify:
        for index, line in enumerate(l for l in lines if l.strip()):
            round_tripped = state.log[index].to_line()
            if round_tripped != line:
                raise click.ClickException(
                    f"line {index + 1} is not canonically encoded"
                )
        import hashlib

        summary["state_sha256"] = hashlib.sha256(state.snapshot_bytes()).hexdigest()
        summary["verified"] = True
    click.echo(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()

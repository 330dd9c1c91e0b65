"""Command line entry points: generate, run, serve."""

from __future__ import annotations

import json
import logging
import os

import click

from .timeutil import parse_rfc3339


@click.group()
def main():
    """Grid decision support: synthetic installations, simulated runs,
    and the HTTP service."""
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _parse_injection(raw: str):
    from .simulator import Injection

    parts = raw.split(";")
    if len(parts) != 4:
        raise click.BadParameter(
            "expected SERIES;START;HOURS;SCALE, e.g. "
            "'load@sub03;2026-05-31T17:00:00Z;3;0.3'")
    series, start, hours, scale = parts
    return Injection(series=series, start=parse_rfc3339(start),
                     duration_h=float(hours), scale=float(scale))


@main.command()
@click.option("--preset", required=True,
              type=click.Choice(["cyprus", "switzerland", "germany"]),
              help="Trial-scale installation shape.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--days", default=7, show_default=True, type=int,
              help="Days of history to synthesize.")
@click.option("--live-hours", default=48, show_default=True, type=int,
              help="Hours of live feed beyond the history end.")
@click.option("--inject", "injections", multiple=True,
              help="Event as SERIES;START;HOURS;SCALE (repeatable).")
@click.option("--out", required=True,
              type=click.Path(file_okay=False), help="Output directory.")
def generate(preset, seed, days, live_hours, injections, out):
    """Write a synthetic installation (config + history + live feed)."""
    from .simulator import generate as do_generate, preset as make_preset

    spec = make_preset(preset, seed=seed, days=days, live_hours=live_hours,
                       injections=[_parse_injection(raw)
                                   for raw in injections])
    summary = do_generate(spec, out)
    click.echo(json.dumps(summary, indent=2))


@main.command()
@click.option("--dir", "directory", required=True,
              type=click.Path(exists=True, file_okay=False),
              help="Generated installation directory.")
@click.option("--hours", default=24, show_default=True, type=int,
              help="Simulated hours to advance.")
@click.option("--workers", default=None, type=int,
              help="Scheduler worker threads (default: GRIDFLEX_WORKERS or 8).")
@click.option("--report", "report_path", default=None,
              type=click.Path(dir_okay=False),
              help="Write the run report to this JSON file.")
def run(directory, hours, workers, report_path):
    """Advance the simulated clock hour by hour and report totals."""
    from .simulator import run_simulation

    if workers is None:
        workers = int(os.environ.get("GRIDFLEX_WORKERS", "8"))
    report = run_simulation(directory, hours=hours, workers=workers,
                            report_path=report_path, quiet=False)
    payload = report.to_json()
    payload.pop("hours_detail", None)
    click.echo(json.dumps(payload, indent=2))


@main.command()
@click.option("--dir", "directory", default=None,
              type=click.Path(exists=True, file_okay=False),
              help="Installation directory (default: GRIDFLEX_DATA_DIR).")
@click.option("--port", default=None, type=int,
              help="Listen port (default: GRIDFLEX_PORT or 8000).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--static", "static_dir", default=None,
              type=click.Path(exists=True, file_okay=False),
              help="Static console bundle to serve at / (default: a dist/ "
                   "folder next to the installation, if present).")
def serve(directory, port, host, static_dir):
    """Serve the HTTP interface for one installation."""
    import uvicorn

    from .config import Installation
    from .service import create_app

    if directory is None:
        directory = os.environ.get("GRIDFLEX_DATA_DIR")
        if not directory:
            raise click.UsageError("pass --dir or set GRIDFLEX_DATA_DIR")
    if port is None:
        port = int(os.environ.get("GRIDFLEX_PORT", "8000"))
    inst = Installation.open(directory)
    if static_dir is None:
        candidate = inst.directory / "dist"
        if candidate.is_dir():
            static_dir = str(candidate)
    app = create_app(inst, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()

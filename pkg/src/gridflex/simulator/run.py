"""Simulated-clock end-to-end runs.

The virtual clock starts at the generated history's end and advances one
hour at a time. Each hour: the live feed for that hour is ingested, the
scheduler ticks (training and scoring whatever is due), and a decision run
evaluates the fresh forecasts. The report captures job totals, violations,
and flex windows so seed determinism is checkable end to end.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from ..config import ConfigError, Installation
from ..store import DataPoint, NotFoundError
from ..timeutil import format_rfc3339, from_epoch, parse_rfc3339, to_epoch


@dataclass
class SimReport:
    directory: str
    hours: int
    start: datetime
    end: datetime
    score_jobs_done: int
    train_jobs_done: int
    jobs_failed: int
    forecasts_issued: int
    violations: int
    flex_windows: int
    wall_s: float
    hours_detail: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "schema": "gridflex/v1",
            "directory": self.directory,
            "hours": self.hours,
            "start": format_rfc3339(self.start),
            "end": format_rfc3339(self.end),
            "score_jobs_done": self.score_jobs_done,
            "train_jobs_done": self.train_jobs_done,
            "jobs_failed": self.jobs_failed,
            "forecasts_issued": self.forecasts_issued,
            "violations": self.violations,
            "flex_windows": self.flex_windows,
            "wall_s": round(self.wall_s, 3),
            "hours_detail": self.hours_detail,
        }


def _load_live_feed(inst: Installation) -> dict[str, list[tuple[int, float]]]:
    path = inst.directory / "live.csv"
    if not path.exists():
        raise ConfigError(f"{path} not found; generate the installation first")
    feed: dict[str, list[tuple[int, float]]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            sid = inst.series_ids.get(row["series_key"])
            if sid is None:
                raise ConfigError(
                    f"live feed references unknown series {row['series_key']!r}")
            feed.setdefault(sid, []).append(
                (to_epoch(parse_rfc3339(row["timestamp"])),
                 float(row["value"])))
    for rows in feed.values():
        rows.sort()
    return feed


def bootstrap_models(inst: Installation, as_of: datetime) -> int:
    """Train any config that has no version yet, so first scores succeed."""
    trained = 0
    for config_id in sorted(inst.engine.configs):
        try:
            inst.models.latest_version(config_id)
        except NotFoundError:
            inst.engine.train(config_id, as_of=as_of)
            trained += 1
    return trained


def run_simulation(directory, hours: int, workers: int = 8,
                   report_path=None, p_threshold: float | None = None,
                   quiet: bool = True) -> SimReport:
    if hours < 1:
        raise ValueError("hours must be >= 1")
    inst = Installation.open(directory)
    sim = inst.config.get("sim")
    if not sim:
        raise ConfigError(
            "config lacks the sim section; only generated installations "
            "can be simulated")
    start = parse_rfc3339(sim["history_end"])
    if hours > sim.get("live_hours", 0):
        raise ConfigError(
            f"live feed covers {sim.get('live_hours')} h, cannot simulate "
            f"{hours} h; regenerate with a larger live margin")

    feed = _load_live_feed(inst)
    wall0 = time.perf_counter()
    bootstrap_models(inst, start)
    scheduler = inst.scheduler(workers=workers, start=start)

    start_e = to_epoch(start)
    detail = []
    violations_total = 0
    windows_total = 0
    for h in range(1, hours + 1):
        now_e = start_e + h * 3600
        now = from_epoch(now_e)
        for sid, rows in feed.items():
            batch = [DataPoint(from_epoch(ts), value) for ts, value in rows
                     if now_e - 3600 < ts <= now_e]
            if batch:
                inst.store.ingest(sid, batch)
        tick = scheduler.tick(now=now)
        result = inst.runner.run(now, p_threshold=p_threshold)
        violations_total += len(result.violations)
        windows_total += len(result.windows)
        entry = {
            "hour": h,
            "now": format_rfc3339(now),
            "jobs_claimed": tick.claimed,
            "jobs_done": tick.done,
            "jobs_failed": tick.failed,
            "violations": len(result.violations),
            "flex_windows": len(result.windows),
            "doms_s": round(result.elapsed_s, 3),
        }
        detail.append(entry)
        if not quiet:
            print(f"hour {h:3d} {entry['now']}  jobs {tick.done}"
                  f"  violations {len(result.violations)}"
                  f"  windows {len(result.windows)}")

    jobs = inst.job_log()
    score_done = len(jobs.list_jobs(status="done", kind="score"))
    train_done = len(jobs.list_jobs(status="done", kind="train"))
    failed = len(jobs.list_jobs(status="failed"))
    report = SimReport(
        directory=str(inst.directory),
        hours=hours,
        start=start,
        end=from_epoch(start_e + hours * 3600),
        score_jobs_done=score_done,
        train_jobs_done=train_done,
        jobs_failed=failed,
        forecasts_issued=score_done,
        violations=violations_total,
        flex_windows=windows_total,
        wall_s=time.perf_counter() - wall0,
        hours_detail=detail,
    )
    if report_path:
        Path(report_path).write_text(json.dumps(report.to_json(), indent=2)
                                     + "\n")
    return report

"""Recurrence expansion and the exactly-once job scheduler.

A tick expands every config's schedules over (last_tick, now], claims each
occurrence through the job log's unique index, and runs the claimed jobs on
a worker pool. Claims make concurrent or overlapping ticks safe: an
occurrence is executed exactly once no matter how many ticks see it.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime

from ..timeutil import from_epoch, to_epoch


@dataclass(frozen=True)
class Recurrence:
    """Fixed-interval rule anchored at the epoch: fires when
    t ≡ offset_s (mod interval_s)."""

    interval_s: int
    offset_s: int = 0

    def __post_init__(self):
        if self.interval_s <= 0:
            raise ValueError("interval must be positive")
        if not 0 <= self.offset_s < self.interval_s:
            raise ValueError("offset must lie in [0, interval)")

    def occurrences(self, start: datetime, end: datetime) -> list[datetime]:
        """Occurrences in the half-open window (start, end]."""
        s, e = to_epoch(start), to_epoch(end)
        if e <= s:
            return []
        k = (s - self.offset_s) // self.interval_s + 1
        out = []
        t = self.offset_s + k * self.interval_s
        while t <= e:
            out.append(from_epoch(t))
            t += self.interval_s
        return out

    def next_after(self, t: datetime) -> datetime:
        e = to_epoch(t)
        k = (e - self.offset_s) // self.interval_s + 1
        return from_epoch(self.offset_s + k * self.interval_s)


@dataclass(frozen=True)
class Job:
    config_id: str
    kind: str  # "train" or "score"
    due_time: datetime


@dataclass(frozen=True)
class TickReport:
    now: datetime
    due: int
    claimed: int
    done: int
    failed: int


LAST_TICK_KEY = "scheduler.last_tick"


class Scheduler:
    """Drives a ForecastingEngine's schedules over a (possibly simulated)
    clock."""

    def __init__(self, engine, workers: int = 4,
                 start: datetime | None = None):
        self.engine = engine
        self.workers = max(1, int(workers))
        self._config_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        if self.last_tick() is None:
            if start is None:
                raise ValueError(
                    "no persisted tick state; pass the simulation start instant")
            self._store_last_tick(start)

    # -- persisted tick state ------------------------------------------------

    def last_tick(self) -> datetime | None:
        rows = self.engine.db.query(
            "SELECT value FROM meta WHERE key = ?", (LAST_TICK_KEY,))
        return from_epoch(int(rows[0][0])) if rows else None

    def _store_last_tick(self, now: datetime):
        with self.engine.db.tx() as cur:
            cur.execute(
                "INSERT INTO meta (key, value) VALUES (?, ?) "
                "ON CONFLICT(key) DO UPDATE SET value = excluded.value "
                "WHERE CAST(excluded.value AS INTEGER) > CAST(meta.value AS INTEGER)",
                (LAST_TICK_KEY, str(to_epoch(now))),
            )

    # -- expansion and execution ----------------------------------------------

    def due_jobs(self, now: datetime,
                 since: datetime | None = None) -> list[Job]:
        """Deterministic expansion of all schedules over (since, now]."""
        since = since if since is not None else self.last_tick()
        jobs = []
        for config in self.engine.configs.values():
            for due in config.train_schedule.occurrences(since, now):
                jobs.append(Job(config.id, "train", due))
            for due in config.score_schedule.occurrences(since, now):
                jobs.append(Job(config.id, "score", due))
        jobs.sort(key=lambda j: (j.due_time, j.config_id, j.kind))
        return jobs

    def _config_lock(self, config_id: str) -> threading.Lock:
        with self._locks_guard:
            lock = self._config_locks.get(config_id)
            if lock is None:
                lock = threading.Lock()
                self._config_locks[config_id] = lock
            return lock

    def _run_claimed(self, job_id: int, job: Job) -> bool:
        with self._config_lock(job.config_id):  # train/score never overlap
            return self.engine.execute_job(job_id, job.config_id, job.kind,
                                           job.due_time)

    def tick(self, now: datetime) -> TickReport:
        """Claim and execute everything due up to `now`."""
        jobs = self.due_jobs(now)
        claimed = []
        for job in jobs:
            job_id = self.engine.job_log.claim(job.config_id, job.kind,
                                               job.due_time)
            if job_id is not None:
                claimed.append((job_id, job))
        done = failed = 0
        # run trains to completion first so same-tick scores see new versions
        trains = [c for c in claimed if c[1].kind == "train"]
        scores = [c for c in claimed if c[1].kind != "train"]
        for batch in (trains, scores):
            if not batch:
                continue
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                for ok in pool.map(lambda t: self._run_claimed(*t), batch):
                    if ok:
                        done += 1
                    else:
                        failed += 1
        self._store_last_tick(now)
        return TickReport(now=now, due=len(jobs), claimed=len(claimed),
                          done=done, failed=failed)

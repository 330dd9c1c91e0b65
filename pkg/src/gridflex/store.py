"""Embedded storage: readings, versioned forecasts, model versions, job log.

One SQLite file backs the whole installation. Connections are per-thread
(WAL mode, busy timeout), writers serialize through short immediate
transactions, and every timestamp is stored as integer epoch seconds UTC.
"""

from __future__ import annotations

import json
import math
import sqlite3
import threading
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from .timeutil import (
    HORIZON_STEPS,
    RESOLUTION_S,
    format_rfc3339,
    from_epoch,
    parse_rfc3339,
    to_epoch,
)


class StoreError(Exception):
    """Base class for storage failures."""


class UnknownSeriesError(StoreError, KeyError):
    def __init__(self, series: str):
        super().__init__(f"unknown series {series!r}")
        self.series = series


class NotFoundError(StoreError, LookupError):
    pass


_SCHEMA = """
CREATE TABLE IF NOT EXISTS counters (
    name TEXT PRIMARY KEY,
    n INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS signals (
    id TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    unit TEXT NOT NULL
);
CREATE UNIQUE INDEX IF NOT EXISTS signals_name ON signals (lower(name));
CREATE TABLE IF NOT EXISTS entities (
    id TEXT PRIMARY KEY,
    name TEXT NOT NULL UNIQUE,
    kind TEXT NOT NULL,
    parent TEXT REFERENCES entities(id)
);
CREATE TABLE IF NOT EXISTS series (
    id TEXT PRIMARY KEY,
    signal TEXT NOT NULL REFERENCES signals(id),
    entity TEXT NOT NULL REFERENCES entities(id),
    resolution_s INTEGER NOT NULL CHECK (resolution_s > 0),
    UNIQUE (signal, entity)
);
CREATE TABLE IF NOT EXISTS points (
    series TEXT NOT NULL,
    ts INTEGER NOT NULL,
    value REAL NOT NULL,
    PRIMARY KEY (series, ts)
) WITHOUT ROWID;
CREATE TABLE IF NOT EXISTS forecasts (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    series TEXT NOT NULL,
    model_version TEXT NOT NULL,
    issue_ts INTEGER NOT NULL,
    points TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS forecasts_lookup ON forecasts (series, issue_ts, id);
CREATE TABLE IF NOT EXISTS model_versions (
    id TEXT PRIMARY KEY,
    config_id TEXT NOT NULL,
    trained_at INTEGER NOT NULL,
    parameters TEXT NOT NULL,
    residuals TEXT NOT NULL,
    train_from INTEGER NOT NULL,
    train_to INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS versions_lookup ON model_versions (config_id, trained_at, id);
CREATE TABLE IF NOT EXISTS jobs (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    config_id TEXT NOT NULL,
    kind TEXT NOT NULL CHECK (kind IN ('train', 'score')),
    due_ts INTEGER NOT NULL,
    status TEXT NOT NULL DEFAULT 'claimed',
    detail TEXT,
    result_id TEXT,
    finished_ts REAL,
    UNIQUE (config_id, kind, due_ts)
);
CREATE TABLE IF NOT EXISTS meta (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
"""


class Database:
    """Thread-local SQLite connections over one installation file."""

    def __init__(self, path):
        self.path = str(path)
        if self.path != ":memory:":
            Path(self.path).parent.mkdir(parents=True, exist_ok=True)
        self._local = threading.local()
        self._tx_guard = threading.Lock()  # :memory: shares one connection
        self._memory_conn = None
        self.connection().executescript(_SCHEMA)

    def connection(self) -> sqlite3.Connection:
        if self.path == ":memory:":
            if self._memory_conn is None:
                self._memory_conn = self._open()
            return self._memory_conn
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = self._open()
            self._local.conn = conn
        return conn

    def _open(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.path, timeout=30.0, isolation_level=None,
                               check_same_thread=False)
        conn.execute("PRAGMA journal_mode = WAL")
        conn.execute("PRAGMA synchronous = NORMAL")
        conn.execute("PRAGMA busy_timeout = 30000")
        conn.execute("PRAGMA foreign_keys = ON")
        return conn

    def tx(self):
        return _Transaction(self)

    def query(self, sql: str, params=()):
        return self.connection().execute(sql, params).fetchall()

    def next_id(self, cur: sqlite3.Cursor, prefix: str) -> str:
        """Monotone counter-backed id; call inside a write transaction."""
        cur.execute(
            "INSERT INTO counters (name, n) VALUES (?, 1) "
            "ON CONFLICT(name) DO UPDATE SET n = n + 1",
            (prefix,),
        )
        n = cur.execute("SELECT n FROM counters WHERE name = ?", (prefix,)).fetchone()[0]
        return f"{prefix}-{n:04d}"

    def close(self):
        conn = getattr(self._local, "conn", None)
        if conn is not None:
            conn.close()
            self._local.conn = None
        if self._memory_conn is not None:
            self._memory_conn.close()
            self._memory_conn = None


class _Transaction:
    """BEGIN IMMEDIATE … COMMIT/ROLLBACK wrapper yielding a cursor."""

    def __init__(self, db: Database):
        self.db = db

    def __enter__(self) -> sqlite3.Cursor:
        if self.db.path == ":memory:":
            self.db._tx_guard.acquire()
        self.conn = self.db.connection()
        self.cur = self.conn.cursor()
        self.cur.execute("BEGIN IMMEDIATE")
        return self.cur

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc_type is None:
                self.conn.commit()
            else:
                self.conn.rollback()
        finally:
            self.cur.close()
            if self.db.path == ":memory:":
                self.db._tx_guard.release()
        return False


@dataclass(frozen=True)
class DataPoint:
    timestamp: datetime
    value: float


@dataclass(frozen=True)
class ForecastRecord:
    series: str
    model_version: str
    issue_time: datetime
    points: tuple[DataPoint, ...]
    forecast_id: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if len(self.points) != HORIZON_STEPS:
            raise ValueError(
                f"forecast needs exactly {HORIZON_STEPS} points, got {len(self.points)}"
            )
        issue = to_epoch(self.issue_time)
        last = None
        for p in self.points:
            ts = to_epoch(p.timestamp)
            if ts < issue:
                raise ValueError("forecast points must not precede the issue time")
            if last is not None and ts <= last:
                raise ValueError("forecast points must be strictly increasing")
            last = ts


@dataclass(frozen=True)
class IngestReport:
    upserted: int
    rejected: tuple[tuple[datetime, str], ...] = ()

    @property
    def accepted(self) -> int:
        return self.upserted


@dataclass(frozen=True)
class ModelVersionRecord:
    id: str
    config_id: str
    trained_at: datetime
    parameters: dict
    residual_variance_per_step: tuple[float, ...]
    training_window: tuple[datetime, datetime]

    def __post_init__(self):
        if len(self.residual_variance_per_step) != HORIZON_STEPS:
            raise ValueError(f"need {HORIZON_STEPS} per-step residual variances")
        if any(v < 0 for v in self.residual_variance_per_step):
            raise ValueError("residual variances must be >= 0")


class TimeseriesStore:
    """Reading/forecast persistence over a shared Database."""

    def __init__(self, db: Database):
        self.db = db

    def series_resolution(self, series: str) -> int:
        rows = self.db.query("SELECT resolution_s FROM series WHERE id = ?", (series,))
        if not rows:
            raise UnknownSeriesError(series)
        return int(rows[0][0])

    def series_exists(self, series: str) -> bool:
        return bool(self.db.query("SELECT 1 FROM series WHERE id = ?", (series,)))

    def ingest(self, series: str, points) -> IngestReport:
        resolution = self.series_resolution(series)
        rows = []
        rejected = []
        for p in points:
            ts = to_epoch(p.timestamp)
            if ts % resolution != 0:
                rejected.append((p.timestamp, "timestamp off the resolution grid"))
            elif not math.isfinite(p.value):
                rejected.append((p.timestamp, "value not finite"))
            else:
                rows.append((series, ts, float(p.value)))
        upserted = 0
        if rows:
            with self.db.tx() as cur:
                for row in rows:
                    cur.execute(
                        "INSERT INTO points (series, ts, value) VALUES (?, ?, ?) "
                        "ON CONFLICT(series, ts) DO UPDATE SET value = excluded.value "
                        "WHERE points.value != excluded.value",
                        row,
                    )
                    upserted += cur.rowcount
        return IngestReport(upserted=upserted, rejected=tuple(rejected))

    def read_range(self, series: str, start: datetime, end: datetime) -> list[DataPoint]:
        self.series_resolution(series)  # raises on unknown series
        t0, t1 = to_epoch(start), to_epoch(end)
        if t1 < t0:
            raise ValueError("range end precedes start")
        rows = self.db.query(
            "SELECT ts, value FROM points WHERE series = ? AND ts >= ? AND ts < ? "
            "ORDER BY ts",
            (series, t0, t1),
        )
        return [DataPoint(from_epoch(ts), value) for ts, value in rows]

    def last_point_before(self, series: str, cutoff: datetime) -> DataPoint | None:
        rows = self.db.query(
            "SELECT ts, value FROM points WHERE series = ? AND ts < ? "
            "ORDER BY ts DESC LIMIT 1",
            (series, to_epoch(cutoff)),
        )
        return DataPoint(from_epoch(rows[0][0]), rows[0][1]) if rows else None

    def store_forecast(self, record: ForecastRecord) -> int:
        payload = json.dumps([[to_epoch(p.timestamp), p.value] for p in record.points])
        issue_ts = to_epoch(record.issue_time)
        with self.db.tx() as cur:
            cur.execute(
                "SELECT id FROM forecasts WHERE series = ? AND model_version = ? "
                "AND issue_ts = ? AND points = ? ORDER BY id DESC LIMIT 1",
                (record.series, record.model_version, issue_ts, payload),
            )
            row = cur.fetchone()
            if row:
                return int(row[0])  # identical re-store is a no-op
            cur.execute(
                "INSERT INTO forecasts (series, model_version, issue_ts, points) "
                "VALUES (?, ?, ?, ?)",
                (record.series, record.model_version, issue_ts, payload),
            )
            return int(cur.lastrowid)

    def latest_forecast(self, series: str, as_of: datetime) -> ForecastRecord:
        rows = self.db.query(
            "SELECT id, model_version, issue_ts, points FROM forecasts "
            "WHERE series = ? AND issue_ts <= ? ORDER BY issue_ts DESC, id DESC LIMIT 1",
            (series, to_epoch(as_of)),
        )
        if not rows:
            raise NotFoundError(f"no forecast for {series!r} at or before {as_of}")
        fid, version, issue_ts, payload = rows[0]
        points = tuple(DataPoint(from_epoch(ts), v) for ts, v in json.loads(payload))
        return ForecastRecord(series=series, model_version=version,
                              issue_time=from_epoch(issue_ts), points=points,
                              forecast_id=fid)

    def forecast_issue_times(self, series: str) -> list[datetime]:
        rows = self.db.query(
            "SELECT DISTINCT issue_ts FROM forecasts WHERE series = ? ORDER BY issue_ts",
            (series,),
        )
        return [from_epoch(ts) for ts, in rows]

    def count_points(self, series: str) -> int:
        return self.db.query(
            "SELECT count(*) FROM points WHERE series = ?", (series,))[0][0]


class ModelStore:
    def __init__(self, db: Database):
        self.db = db

    def save_version(self, config_id: str, trained_at: datetime, parameters: dict,
                     residuals, window: tuple[datetime, datetime]) -> ModelVersionRecord:
        residuals = tuple(float(v) for v in residuals)
        with self.db.tx() as cur:
            vid = self.db.next_id(cur, "mv")
            cur.execute(
                "INSERT INTO model_versions (id, config_id, trained_at, parameters, "
                "residuals, train_from, train_to) VALUES (?, ?, ?, ?, ?, ?, ?)",
                (vid, config_id, to_epoch(trained_at), json.dumps(parameters),
                 json.dumps(residuals), to_epoch(window[0]), to_epoch(window[1])),
            )
        return ModelVersionRecord(vid, config_id, trained_at, parameters, residuals,
                                  window)

    def get_version(self, version_id: str) -> ModelVersionRecord:
        rows = self.db.query(
            "SELECT id, config_id, trained_at, parameters, residuals, train_from, "
            "train_to FROM model_versions WHERE id = ?",
            (version_id,),
        )
        if not rows:
            raise NotFoundError(f"no model version {version_id!r}")
        return self._decode(rows[0])

    def latest_version(self, config_id: str,
                       as_of: datetime | None = None) -> ModelVersionRecord:
        if as_of is None:
            rows = self.db.query(
                "SELECT id, config_id, trained_at, parameters, residuals, train_from, "
                "train_to FROM model_versions WHERE config_id = ? "
                "ORDER BY trained_at DESC, id DESC LIMIT 1",
                (config_id,),
            )
        else:
            rows = self.db.query(
                "SELECT id, config_id, trained_at, parameters, residuals, train_from, "
                "train_to FROM model_versions WHERE config_id = ? AND trained_at <= ? "
                "ORDER BY trained_at DESC, id DESC LIMIT 1",
                (config_id, to_epoch(as_of)),
            )
        if not rows:
            raise NotFoundError(f"no trained version for config {config_id!r}")
        return self._decode(rows[0])

    @staticmethod
    def _decode(row) -> ModelVersionRecord:
        vid, config_id, trained_at, params, residuals, t0, t1 = row
        return ModelVersionRecord(
            id=vid,
            config_id=config_id,
            trained_at=from_epoch(trained_at),
            parameters=json.loads(params),
            residual_variance_per_step=tuple(json.loads(residuals)),
            training_window=(from_epoch(t0), from_epoch(t1)),
        )


@dataclass(frozen=True)
class JobRecord:
    id: int
    config_id: str
    kind: str
    due_time: datetime
    status: str
    detail: str | None = None
    result_id: str | None = None


class JobLog:
    """Exactly-once job claims plus status records for the scheduler."""

    def __init__(self, db: Database):
        self.db = db

    def claim(self, config_id: str, kind: str, due_time: datetime) -> int | None:
        """Claim one (config, kind, occurrence); None when already claimed."""
        with self.db.tx() as cur:
            cur.execute(
                "INSERT OR IGNORE INTO jobs (config_id, kind, due_ts) VALUES (?, ?, ?)",
                (config_id, kind, to_epoch(due_time)),
            )
            if cur.rowcount == 0:
                return None
            return int(cur.lastrowid)

    def finish(self, job_id: int, status: str, detail: str | None = None,
               result_id: str | None = None):
        if status not in ("done", "failed"):
            raise ValueError("status must be 'done' or 'failed'")
        import time

        with self.db.tx() as cur:
            cur.execute(
                "UPDATE jobs SET status = ?, detail = ?, result_id = ?, "
                "finished_ts = ? WHERE id = ?",
                (status, detail, result_id, time.time(), job_id),
            )

    def list_jobs(self, status: str | None = None, kind: str | None = None,
                  limit: int = 10_000) -> list[JobRecord]:
        sql = ("SELECT id, config_id, kind, due_ts, status, detail, result_id "
               "FROM jobs")
        conds, params = [], []
        if status is not None:
            conds.append("status = ?")
            params.append(status)
        if kind is not None:
            conds.append("kind = ?")
            params.append(kind)
        if conds:
            sql += " WHERE " + " AND ".join(conds)
        sql += " ORDER BY due_ts, config_id, kind LIMIT ?"
        params.append(limit)
        return [
            JobRecord(i, c, k, from_epoch(ts), st, d, r)
            for i, c, k, ts, st, d, r in self.db.query(sql, tuple(params))
        ]

    def counts(self) -> dict[str, int]:
        rows = self.db.query("SELECT status, count(*) FROM jobs GROUP BY status")
        return {status: n for status, n in rows}


def load_readings_csv(store: TimeseriesStore, path) -> dict[str, IngestReport]:
    """Bulk ingestion: header `series_id,timestamp,value`, RFC 3339 UTC."""
    import csv

    batches: dict[str, list[DataPoint]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"series_id", "timestamp", "value"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValueError(f"ingestion file needs columns {sorted(required)}")
        for row in reader:
            batches.setdefault(row["series_id"], []).append(
                DataPoint(parse_rfc3339(row["timestamp"]), float(row["value"]))
            )
    return {series: store.ingest(series, pts) for series, pts in batches.items()}


def export_forecasts_csv(store: TimeseriesStore, series_ids, path):
    """Forecast export: one row per point, plus issue_time and model_version."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series_id", "timestamp", "value", "issue_time",
                         "model_version"])
        for series in series_ids:
            for issue in store.forecast_issue_times(series):
                rec = store.latest_forecast(series, issue)
                for p in rec.points:
                    writer.writerow([
                        series,
                        format_rfc3339(p.timestamp),
                        repr(p.value),
                        format_rfc3339(rec.issue_time),
                        rec.model_version,
                    ])

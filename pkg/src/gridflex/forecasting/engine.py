"""Forecasting engine: trains model versions and scores 96-step forecasts.

Training reads history strictly before its as_of instant, so scheduled
retrains can never leak future data. Scoring reads through one gap-filled
window (last-observation-carried-forward, at most 4 h back), which makes a
forecast a pure function of stored history and keeps reruns bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from ..store import (
    Database,
    DataPoint,
    ForecastRecord,
    JobLog,
    ModelStore,
    ModelVersionRecord,
    TimeseriesStore,
)
from ..timeutil import (
    DAY_S,
    HORIZON_STEPS,
    HOUR_S,
    RESOLUTION_S,
    first_grid_after,
    from_epoch,
    to_epoch,
)
from . import algorithms
from .scheduler import Recurrence

MAX_GAP_S = 4 * HOUR_S
HOLDOUT_DAYS = 7
MIN_HOLDOUT_HISTORY_DAYS = 14


class ForecastingError(Exception):
    pass


class InsufficientHistoryError(ForecastingError):
    def __init__(self, series: str, required: int, available: int):
        super().__init__(
            f"series {series!r} has {available} points before the training "
            f"cutoff; need at least {required}"
        )
        self.series = series
        self.required = required
        self.available = available


class GapError(ForecastingError):
    def __init__(self, series: str, missing_at: datetime):
        super().__init__(
            f"series {series!r} has no observation within "
            f"{MAX_GAP_S // HOUR_S} h before {missing_at.isoformat()}"
        )
        self.series = series
        self.missing_at = missing_at


@dataclass(frozen=True)
class ModelConfig:
    id: str
    target: str
    algorithm: str
    hyperparameters: dict = field(default_factory=dict)
    feature_series: tuple[str, ...] = ()
    train_schedule: Recurrence = Recurrence(DAY_S, 2 * HOUR_S)  # daily at 02:00
    score_schedule: Recurrence = Recurrence(HOUR_S)             # hourly

    def __post_init__(self):
        if self.algorithm not in algorithms.ALGORITHMS:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r} "
                f"(have {algorithms.ALGORITHMS})"
            )


assert HORIZON_STEPS * RESOLUTION_S == DAY_S  # the horizon covers one day


class ForecastingEngine:
    def __init__(self, db: Database, configs=()):
        self.db = db
        self.store = TimeseriesStore(db)
        self.models = ModelStore(db)
        self.job_log = JobLog(db)
        self.configs: dict[str, ModelConfig] = {}
        for c in configs:
            self.add_config(c)

    def add_config(self, config: ModelConfig):
        if config.id in self.configs:
            raise ValueError(f"duplicate model config id {config.id!r}")
        self.configs[config.id] = config

    def config(self, config_id: str) -> ModelConfig:
        if config_id not in self.configs:
            raise ForecastingError(f"unknown model config {config_id!r}")
        return self.configs[config_id]

    # -- training -----------------------------------------------------------

    def train(self, config: ModelConfig | str, as_of: datetime) -> ModelVersionRecord:
        if isinstance(config, str):
            config = self.config(config)
        times, values = self._history(config.target, as_of)
        required = algorithms.min_history(config.algorithm, config.hyperparameters)
        if times.size < required:
            raise InsufficientHistoryError(config.target, required, int(times.size))
        params = algorithms.fit(config.algorithm, times, values,
                                config.hyperparameters)
        residuals = self._residual_variances(config, params, times, values, as_of)
        window = (from_epoch(int(times[0])), as_of)
        return self.models.save_version(
            config.id, as_of,
            {"algorithm": config.algorithm, **params},
            residuals, window,
        )

    def _history(self, series: str, as_of: datetime):
        points = self.store.read_range(series, from_epoch(0), as_of)
        times = np.array([to_epoch(p.timestamp) for p in points], dtype=np.int64)
        values = np.array([p.value for p in points], dtype=np.float64)
        return times, values

    def _residual_variances(self, config: ModelConfig, params: dict,
                            times: np.ndarray, values: np.ndarray,
                            as_of: datetime) -> np.ndarray:
        pooled = algorithms.training_residual_variance(
            config.algorithm, times, values, params)
        fallback = np.full(HORIZON_STEPS, pooled)
        if config.algorithm == "persistence":
            # defined directly as the day-apart difference variance
            return fallback
        if times.size == 0 or to_epoch(as_of) - int(times[0]) < MIN_HOLDOUT_HISTORY_DAYS * DAY_S:
            return fallback
        by_ts = dict(zip(times.tolist(), values.tolist()))
        errors = np.full((HOLDOUT_DAYS, HORIZON_STEPS), np.nan)
        as_of_e = to_epoch(as_of)
        for k in range(1, HOLDOUT_DAYS + 1):
            issue_e = as_of_e - k * DAY_S
            try:
                window = self._window_from_map(config.target, by_ts, issue_e)
            except GapError:
                continue
            fc_times = _forecast_epochs(issue_e)
            preds = algorithms.predict(config.algorithm, params, window,
                                       np.array(fc_times))
            for h, (t, p) in enumerate(zip(fc_times, preds)):
                actual = by_ts.get(t)
                if actual is not None and t < as_of_e:
                    errors[k - 1, h] = actual - p
        out = np.empty(HORIZON_STEPS)
        for h in range(HORIZON_STEPS):
            col = errors[:, h]
            col = col[~np.isnan(col)]
            out[h] = np.var(col, ddof=1) if col.size >= 2 else pooled
        return out

    # -- scoring ------------------------------------------------------------

    def score(self, config: ModelConfig | str, issue_time: datetime,
              version: ModelVersionRecord | None = None) -> ForecastRecord:
        if isinstance(config, str):
            config = self.config(config)
        if to_epoch(issue_time) % HOUR_S != 0:
            raise ForecastingError(
                f"issue time {issue_time.isoformat()} is off the hourly grid")
        if version is None:
            version = self.models.latest_version(config.id, as_of=issue_time)
        window = self._window(config.target, issue_time)
        fc_times = _forecast_epochs(to_epoch(issue_time))
        params = dict(version.parameters)
        algorithm = params.pop("algorithm")
        preds = algorithms.predict(algorithm, params, window, np.array(fc_times))
        record = ForecastRecord(
            series=config.target,
            model_version=version.id,
            issue_time=issue_time,
            points=tuple(DataPoint(from_epoch(t), float(v))
                         for t, v in zip(fc_times, preds)),
        )
        fid = self.store.store_forecast(record)
        return ForecastRecord(record.series, record.model_version,
                              record.issue_time, record.points, forecast_id=fid)

    def _window(self, series: str, issue_time: datetime) -> np.ndarray:
        start_e = to_epoch(first_grid_after(issue_time)) - HORIZON_STEPS * RESOLUTION_S
        points = self.store.read_range(
            series,
            from_epoch(start_e - MAX_GAP_S),
            first_grid_after(issue_time),
        )
        by_ts = {to_epoch(p.timestamp): p.value for p in points}
        return self._window_from_map(series, by_ts, to_epoch(issue_time))

    @staticmethod
    def _window_from_map(series: str, by_ts: dict, issue_e: int) -> np.ndarray:
        """Gap-filled pre-issue window; LOCF reaches at most MAX_GAP_S back."""
        t1 = (issue_e // RESOLUTION_S + 1) * RESOLUTION_S
        out = np.empty(HORIZON_STEPS)
        for j in range(HORIZON_STEPS):
            t = t1 + (j - HORIZON_STEPS) * RESOLUTION_S
            v = by_ts.get(t)
            if v is None:
                for back in range(RESOLUTION_S, MAX_GAP_S + RESOLUTION_S,
                                  RESOLUTION_S):
                    v = by_ts.get(t - back)
                    if v is not None:
                        break
                else:
                    raise GapError(series, from_epoch(t))
            out[j] = v
        return out

    # -- job execution ------------------------------------------------------

    def execute_job(self, job_id: int, config_id: str, kind: str,
                    due_time: datetime) -> bool:
        """Run one claimed job; failures land in the job log, never raise."""
        try:
            if kind == "train":
                version = self.train(config_id, due_time)
                self.job_log.finish(job_id, "done", result_id=version.id)
            elif kind == "score":
                record = self.score(config_id, due_time)
                self.job_log.finish(job_id, "done",
                                    result_id=str(record.forecast_id))
            else:
                raise ForecastingError(f"unknown job kind {kind!r}")
            return True
        except Exception as exc:  # noqa: BLE001 - failures become job records
            self.job_log.finish(job_id, "failed", detail=f"{type(exc).__name__}: {exc}")
            return False


def _forecast_epochs(issue_e: int) -> list[int]:
    t1 = (issue_e // RESOLUTION_S + 1) * RESOLUTION_S
    return [t1 + k * RESOLUTION_S for k in range(HORIZON_STEPS)]

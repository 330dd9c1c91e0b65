"""Decision runs over the 96-step horizon.

A run takes the latest stored forecast for every grid series, assembles one
factor graph per horizon step, infers the joint posterior, flags probable
band violations, and estimates which controllable series could absorb them.
What-if runs layer operator adjustments on top as near-exact evidence before
the same pipeline executes.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime

from .factorgraph import FactorGraph, UnderDeterminedGraphError, infer, sensor_factor
from .flexibility import (
    DEAD_BAND,
    FlexibilityError,
    FlexRequest,
    FlexWindow,
    Violation,
    aggregate_requests,
    detect_violations,
    estimate_flexibility,
)
from .gridmodel import (
    VARIANCE_FLOOR,
    GraphBuildInput,
    OperationalRange,
    RelationalModel,
    build_graph,
)
from .store import ModelStore, NotFoundError, TimeseriesStore
from .timeutil import HORIZON_STEPS, from_epoch, horizon_times, to_epoch


class DomsError(ValueError):
    pass


class MissingForecastsError(DomsError):
    """A run cannot start while grid series lack horizon coverage."""

    def __init__(self, series):
        self.series = tuple(sorted(series))
        super().__init__(
            "missing usable forecasts for: " + ", ".join(self.series))


class NotControllableError(DomsError):
    def __init__(self, series: str):
        self.series = series
        super().__init__(f"series {series!r} is not controllable")


@dataclass(frozen=True)
class DomsSettings:
    p_threshold: float = 0.5
    dead_band: float = DEAD_BAND
    max_workers: int = 8
    # live readings no older than this fuse into the first horizon step
    reading_max_age_s: int = 900
    reading_noise_variance: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.p_threshold < 1.0:
            raise ValueError("p_threshold must lie strictly between 0 and 1")
        if self.dead_band < 0:
            raise ValueError("dead_band must be >= 0")
        if self.max_workers < 1:
            raise ValueError("max_workers must be >= 1")
        if self.reading_noise_variance <= 0:
            raise ValueError("reading_noise_variance must be positive")


@dataclass(frozen=True)
class Adjustment:
    """Operator-proposed shift of one controllable series at one step."""

    series: str
    step: int
    delta: float

    def __post_init__(self):
        if not 0 <= self.step < HORIZON_STEPS:
            raise ValueError(f"step must be in [0, {HORIZON_STEPS}), got {self.step}")
        if not math.isfinite(self.delta):
            raise ValueError("delta must be finite")


@dataclass(frozen=True)
class StepResult:
    step: int
    timestamp: datetime
    mean: dict[str, float]
    sd: dict[str, float]
    violations: tuple[Violation, ...]
    requests: tuple[FlexRequest, ...]
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class DomsRunResult:
    issue_time: datetime
    p_threshold: float
    steps: tuple[StepResult, ...]
    violations: tuple[Violation, ...]
    requests: tuple[FlexRequest, ...]
    windows: tuple[FlexWindow, ...]
    adjustments: tuple[Adjustment, ...]
    elapsed_s: float
    warnings: tuple[str, ...]

    @property
    def is_what_if(self) -> bool:
        return bool(self.adjustments)


class DomsRunner:
    """Builds and evaluates the per-step graphs for one installation.

    The variable set is fixed by the configuration: every series mentioned
    by an operational range or a relational model takes part in inference.
    """

    def __init__(self, store: TimeseriesStore, models: ModelStore,
                 ranges: tuple[OperationalRange, ...],
                 relational_models: tuple[RelationalModel, ...],
                 controllables=(),
                 settings: DomsSettings | None = None):
        self.store = store
        self.models = models
        self.ranges = tuple(ranges)
        self.relational_models = tuple(relational_models)
        self.settings = settings or DomsSettings()

        mentioned = {r.series for r in self.ranges}
        for m in self.relational_models:
            mentioned.add(m.child)
            mentioned.update(m.parents)
        self.grid_series: tuple[str, ...] = tuple(sorted(mentioned))
        unknown = [c for c in controllables if c not in mentioned]
        if unknown:
            raise DomsError(
                f"controllables not part of any graph: {sorted(unknown)}")
        self.controllables: tuple[str, ...] = tuple(sorted(set(controllables)))

    # -- forecast plumbing ---------------------------------------------------

    def _residuals_for(self, version_id: str, cache: dict):
        if version_id not in cache:
            try:
                cache[version_id] = self.models.get_version(
                    version_id).residual_variance_per_step
            except NotFoundError:
                # forecast stored without a persisted version: fall back to
                # the default prior-variance rule downstream
                cache[version_id] = None
        return cache[version_id]

    def _load_forecasts(self, issue_time: datetime, instants):
        """Per-series forecast values keyed by horizon instant.

        Returns {series: {epoch: (mean, variance | None)}} covering every
        horizon instant, or raises MissingForecastsError naming the series
        that have no stored forecast or leave instants uncovered.
        """
        wanted = [to_epoch(t) for t in instants]
        version_cache: dict = {}
        missing = []
        table: dict[str, dict[int, tuple[float, float | None]]] = {}
        for series in self.grid_series:
            try:
                record = self.store.latest_forecast(series, as_of=issue_time)
            except NotFoundError:
                missing.append(series)
                continue
            residuals = self._residuals_for(record.model_version, version_cache)
            points = {}
            for j, p in enumerate(record.points):
                var = None if residuals is None else float(residuals[j])
                points[to_epoch(p.timestamp)] = (p.value, var)
            if any(e not in points for e in wanted):
                missing.append(series)
                continue
            table[series] = points
        if missing:
            raise MissingForecastsError(missing)
        return table

    def _load_readings(self, issue_time: datetime) -> dict[str, tuple[float, float]]:
        """Fresh metered values, fused into the first horizon step only."""
        issue_e = to_epoch(issue_time)
        cutoff = from_epoch(issue_e + 1)
        readings = {}
        for series in self.grid_series:
            point = self.store.last_point_before(series, cutoff)
            if point is None:
                continue
            if issue_e - to_epoch(point.timestamp) > self.settings.reading_max_age_s:
                continue
            readings[series] = (point.value, self.settings.reading_noise_variance)
        return readings

    # -- the run itself ------------------------------------------------------

    def run(self, issue_time: datetime, adjustments=(),
            p_threshold: float | None = None) -> DomsRunResult:
        t0 = time.perf_counter()
        adjustments = tuple(adjustments)
        for adj in adjustments:
            if adj.series not in self.controllables:
                raise NotControllableError(adj.series)
        threshold = self.settings.p_threshold if p_threshold is None else p_threshold
        if not 0.0 < threshold < 1.0:
            raise DomsError("p_threshold must lie strictly between 0 and 1")

        instants = horizon_times(issue_time)
        table = self._load_forecasts(issue_time, instants)
        fresh_readings = self._load_readings(issue_time)
        by_step_adjustments: dict[int, list[Adjustment]] = {}
        for adj in adjustments:
            by_step_adjustments.setdefault(adj.step, []).append(adj)

        def one_step(h: int) -> StepResult:
            epoch = to_epoch(instants[h])
            forecasts = {s: table[s][epoch] for s in self.grid_series}
            built = build_graph(
                GraphBuildInput(ranges=self.ranges,
                                relational_models=self.relational_models,
                                forecasts=forecasts,
                                readings=fresh_readings if h == 0 else {}),
                step=h,
            )
            graph = built.graph
            extra = []
            for adj in by_step_adjustments.get(h, ()):
                base = forecasts[adj.series][0]
                extra.append(sensor_factor(built.var_of[adj.series],
                                           base + adj.delta, VARIANCE_FLOOR))
            if extra:
                graph = FactorGraph(graph.variables, graph.factors + tuple(extra))

            posterior = infer(graph)
            violations = detect_violations(posterior, self.ranges, threshold,
                                           step=h, timestamp=instants[h])
            warnings: list[str] = []
            requests: list[FlexRequest] = []
            if violations:
                violated = {v.series for v in violations}
                candidates = [c for c in self.controllables if c not in violated]
                if not candidates:
                    warnings.append(
                        f"step {h}: violations found but no controllable "
                        "series available")
                else:
                    try:
                        requests = estimate_flexibility(
                            graph, violations, candidates,
                            dead_band=self.settings.dead_band,
                            baseline=posterior)
                    except (FlexibilityError, UnderDeterminedGraphError) as exc:
                        warnings.append(f"step {h}: {exc}")
            labels = [v.label for v in posterior.variables]
            return StepResult(
                step=h,
                timestamp=instants[h],
                mean={s: posterior.mean_of(s) for s in labels},
                sd={s: posterior.sd_of(s) for s in labels},
                violations=tuple(violations),
                requests=tuple(requests),
                warnings=tuple(warnings),
            )

        if self.settings.max_workers == 1:
            steps = [one_step(h) for h in range(HORIZON_STEPS)]
        else:
            with ThreadPoolExecutor(max_workers=self.settings.max_workers) as pool:
                steps = list(pool.map(one_step, range(HORIZON_STEPS)))

        violations = tuple(v for s in steps for v in s.violations)
        requests = tuple(q for s in steps for q in s.requests)
        windows = tuple(aggregate_requests(requests))
        warnings = tuple(w for s in steps for w in s.warnings)
        return DomsRunResult(
            issue_time=issue_time,
            p_threshold=threshold,
            steps=tuple(steps),
            violations=violations,
            requests=requests,
            windows=windows,
            adjustments=adjustments,
            elapsed_s=time.perf_counter() - t0,
            warnings=warnings,
        )

    def what_if(self, issue_time: datetime, adjustments,
                p_threshold: float | None = None) -> DomsRunResult:
        """A run with operator adjustments layered on as strong evidence."""
        return self.run(issue_time, adjustments=adjustments,
                        p_threshold=p_threshold)

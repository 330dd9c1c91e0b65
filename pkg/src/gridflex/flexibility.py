"""Violation detection and flexibility estimation on step posteriors.

A violation is a series whose posterior puts too much probability outside its
desired band. Flexibility is computed by conditioning the violated variables
exactly at their limits and reading off how the controllable series' means
must shift: the minimum-Mahalanobis adjustment consistent with the joint
Gaussian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime

from .factorgraph import FactorGraph, Posterior, condition, infer

DEAD_BAND = 0.1
P_THRESHOLD = 0.5
STEP_HOURS = 0.25


class FlexibilityError(ValueError):
    """Flexibility estimation cannot proceed as requested."""


def _phi(z: float) -> float:
    """Standard normal CDF."""
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


@dataclass(frozen=True)
class Violation:
    series: str
    step: int
    timestamp: datetime | None
    bound: str  # "high" or "low"
    limit: float
    predicted_mean: float
    predicted_sd: float
    exceedance_probability: float

    def __post_init__(self):
        if self.bound not in ("high", "low"):
            raise ValueError(f"bound must be 'high' or 'low', got {self.bound!r}")
        if not 0.0 <= self.exceedance_probability <= 1.0:
            raise ValueError("exceedance probability must lie in [0, 1]")
        if self.predicted_sd < 0:
            raise ValueError("predicted sd must be >= 0")


@dataclass(frozen=True)
class FlexRequest:
    series: str
    step: int
    timestamp: datetime | None
    amount: float  # negative = reduce consumption
    covering: tuple[Violation, ...]

    def __post_init__(self):
        if not math.isfinite(self.amount) or self.amount == 0.0:
            raise ValueError("flex amount must be finite and non-zero")


@dataclass(frozen=True)
class FlexWindow:
    """Maximal run of consecutive steps needing flexibility at one series."""

    series: str
    start_step: int
    end_step: int
    start_time: datetime | None
    end_time: datetime | None
    amounts: tuple[float, ...]
    energy: float  # series-units x hours over the window

    @property
    def n_steps(self) -> int:
        return self.end_step - self.start_step + 1


def _tail_probabilities(mean: float, sd: float, low: float, high: float):
    if sd == 0.0:
        return (1.0 if mean > high else 0.0), (1.0 if mean < low else 0.0)
    p_high = 1.0 - _phi((high - mean) / sd)
    p_low = _phi((low - mean) / sd)
    return p_high, p_low


def detect_violations(posterior: Posterior, ranges, p_threshold: float = P_THRESHOLD,
                      *, step: int = 0,
                      timestamp: datetime | None = None) -> list[Violation]:
    """Flag series whose band-exceedance probability reaches the threshold.

    At most one violation per series: the bound with the larger probability
    wins. A zero posterior sd degenerates to a deterministic comparison.
    """
    if not 0.0 < p_threshold < 1.0:
        raise ValueError("p_threshold must lie strictly between 0 and 1")
    out = []
    for r in ranges:
        mean = posterior.mean_of(r.series)
        sd = posterior.sd_of(r.series)
        p_high, p_low = _tail_probabilities(mean, sd, r.low, r.high)
        bound, p = ("high", p_high) if p_high >= p_low else ("low", p_low)
        if p >= p_threshold:
            out.append(Violation(
                series=r.series,
                step=step,
                timestamp=timestamp,
                bound=bound,
                limit=r.high if bound == "high" else r.low,
                predicted_mean=mean,
                predicted_sd=sd,
                exceedance_probability=p,
            ))
    return out


def estimate_flexibility(graph: FactorGraph, violations, controllables,
                         dead_band: float = DEAD_BAND,
                         baseline: Posterior | None = None) -> list[FlexRequest]:
    """Flexibility requests that restore the violated series to their limits.

    All violations are conditioned jointly at their bounds; each controllable
    series' request is the shift of its posterior mean under that evidence.
    Requests below the dead-band are dropped; the rest sort by |amount|
    descending.
    """
    if isinstance(violations, Violation):
        violations = [violations]
    violations = list(violations)
    if not violations:
        return []
    controllables = tuple(dict.fromkeys(controllables))
    if not controllables:
        raise FlexibilityError("controllable set is empty")
    steps = {v.step for v in violations}
    if len(steps) > 1:
        raise FlexibilityError(
            f"violations span steps {sorted(steps)}; estimate one step at a time"
        )
    violated = [v.series for v in violations]
    clash = set(violated) & set(controllables)
    if clash:
        raise FlexibilityError(
            f"violated series {sorted(clash)} cannot also be controllable"
        )
    by_label = {v.label: v for v in graph.variables}
    missing = [s for s in (*violated, *controllables) if s not in by_label]
    if missing:
        raise FlexibilityError(f"series not in graph: {missing}")

    if baseline is None:
        baseline = infer(graph)
    evidence = {by_label[v.series]: v.limit for v in violations}
    shifted = condition(graph, evidence)

    covering = tuple(violations)
    requests = []
    for s in controllables:
        amount = shifted.mean_of(s) - baseline.mean_of(s)
        if abs(amount) > dead_band:
            requests.append(FlexRequest(
                series=s,
                step=violations[0].step,
                timestamp=violations[0].timestamp,
                amount=amount,
                covering=covering,
            ))
    requests.sort(key=lambda q: (-abs(q.amount), q.series))
    return requests


def aggregate_requests(requests) -> list[FlexWindow]:
    """Merge per-step requests into maximal consecutive-step windows."""
    by_series: dict[str, list[FlexRequest]] = {}
    for q in sorted(requests, key=lambda q: (q.series, q.step)):
        by_series.setdefault(q.series, []).append(q)
    windows = []
    for series in sorted(by_series):
        run: list[FlexRequest] = []
        for q in by_series[series]:
            if run and q.step != run[-1].step + 1:
                windows.append(_close_window(series, run))
                run = []
            run.append(q)
        if run:
            windows.append(_close_window(series, run))
    return windows


def _close_window(series: str, run: list[FlexRequest]) -> FlexWindow:
    amounts = tuple(q.amount for q in run)
    return FlexWindow(
        series=series,
        start_step=run[0].step,
        end_step=run[-1].step,
        start_time=run[0].timestamp,
        end_time=run[-1].timestamp,
        amounts=amounts,
        energy=sum(amounts) * STEP_HOURS,
    )

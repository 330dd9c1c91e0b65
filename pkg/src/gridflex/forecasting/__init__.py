"""Scheduled forecasting: algorithms, engine, and the exactly-once scheduler."""

from .algorithms import ALGORITHMS
from .engine import (
    ForecastingEngine,
    ForecastingError,
    GapError,
    InsufficientHistoryError,
    ModelConfig,
)
from .scheduler import Job, Recurrence, Scheduler, TickReport

__all__ = [
    "ALGORITHMS",
    "ForecastingEngine",
    "ForecastingError",
    "GapError",
    "InsufficientHistoryError",
    "Job",
    "ModelConfig",
    "Recurrence",
    "Scheduler",
    "TickReport",
]

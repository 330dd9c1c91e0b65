from .presets import Injection, ScenarioSpec, preset
from .generate import generate
from .run import SimReport, run_simulation

__all__ = [
    "Injection",
    "ScenarioSpec",
    "SimReport",
    "generate",
    "preset",
    "run_simulation",
]

"""Trial-scale scenario presets.

Each preset fixes the installation shape: grid topology (substations,
feeders, voltage points), extra monitored entities, the signal catalogue,
how many series and forecasting models exist, and which series are
controllable. The generator turns a spec into a concrete installation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime

from ..timeutil import DAY_S, utc

HISTORY_END_DEFAULT = utc(2026, 6, 1)

# signals every preset carries
GRID_SIGNALS = (("load", "kW"), ("voltage", "V"))

# synthetic sensor catalogue; presets take a prefix of this list
SYNTH_SIGNALS = (
    ("current", "A"),
    ("apparent_power", "kVA"),
    ("energy", "kWh"),
    ("reactive_power", "kvar"),
    ("frequency", "Hz"),
    ("power_factor", "ratio"),
    ("temperature", "C"),
    ("humidity", "pct"),
    ("irradiance", "W/m2"),
    ("wind_speed", "m/s"),
    ("pressure", "hPa"),
    ("generation", "kW"),
    ("state_of_charge", "pct"),
    ("price", "EUR/MWh"),
    ("setpoint", "kW"),
    ("flow", "m3/h"),
    ("vibration", "mm/s"),
)

EXTRA_ENTITY_KINDS = ("plant", "meter", "other")


@dataclass(frozen=True)
class Injection:
    """A synthetic event: scale one series by (1 + scale) for a while.

    Injections on a substation load are pushed down to its child feeders so
    the generated data keeps satisfying conservation.
    """

    series: str          # "<signal>@<entity>" key
    start: datetime
    duration_h: float
    scale: float

    def __post_init__(self):
        if self.duration_h <= 0:
            raise ValueError("duration_h must be positive")
        if not math.isfinite(self.scale) or self.scale <= -1:
            raise ValueError("scale must be finite and > -1")


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    seed: int
    n_substations: int
    n_feeders: int
    n_voltage_points: int
    n_extra_entities: int
    n_signals: int             # total, grid signals included
    n_series: int              # total, grid series included
    n_models: int              # total model configs
    days: int = 7
    live_hours: int = 48
    history_end: datetime = HISTORY_END_DEFAULT
    p_threshold: float = 0.9
    injections: tuple[Injection, ...] = ()

    def __post_init__(self):
        if min(self.n_substations, self.n_feeders, self.n_voltage_points,
               self.n_signals, self.n_series, self.n_models) <= 0:
            raise ValueError("counts must be positive")
        if self.n_feeders < self.n_substations:
            raise ValueError("need at least one feeder per substation")
        if self.days < 3:
            raise ValueError("need at least 3 days of history")
        n_grid_entities = (self.n_substations + self.n_feeders
                           + self.n_voltage_points)
        if self.n_series < n_grid_entities:
            raise ValueError("series count cannot cover the grid series")
        if self.n_models < n_grid_entities:
            raise ValueError("model count cannot cover the grid series")
        if self.n_signals - len(GRID_SIGNALS) > len(SYNTH_SIGNALS):
            raise ValueError("signal count exceeds the catalogue")
        n_entities = n_grid_entities + self.n_extra_entities
        n_synth = self.n_signals - len(GRID_SIGNALS)
        if self.n_series - n_grid_entities > n_entities * n_synth:
            raise ValueError(
                "series count exceeds entity x signal combinations")
        history_start_e = (int(self.history_end.timestamp())
                           - self.days * DAY_S)
        for inj in self.injections:
            s = int(inj.start.timestamp())
            if not (history_start_e <= s
                    and s + inj.duration_h * 3600
                    <= int(self.history_end.timestamp())):
                raise ValueError(
                    f"injection on {inj.series!r} falls outside the history")

    @property
    def n_grid_entities(self) -> int:
        return self.n_substations + self.n_feeders + self.n_voltage_points

    @property
    def n_entities(self) -> int:
        return self.n_grid_entities + self.n_extra_entities

    @property
    def history_start(self) -> datetime:
        from ..timeutil import from_epoch, to_epoch

        return from_epoch(to_epoch(self.history_end) - self.days * DAY_S)


# Per-site shapes: series / entities / signals / models.
_PRESETS = {
    "germany": dict(n_substations=2, n_feeders=4, n_voltage_points=3,
                    n_extra_entities=2, n_signals=13, n_series=18,
                    n_models=11),
    "switzerland": dict(n_substations=8, n_feeders=16, n_voltage_points=12,
                        n_extra_entities=12, n_signals=11, n_series=196,
                        n_models=61),
    "cyprus": dict(n_substations=15, n_feeders=29, n_voltage_points=41,
                   n_extra_entities=94, n_signals=19, n_series=531,
                   n_models=174),
}

PRESET_NAMES = tuple(sorted(_PRESETS))


def preset(name: str, seed: int = 0, days: int = 7, live_hours: int = 48,
           injections=(), history_end: datetime = HISTORY_END_DEFAULT,
           p_threshold: float = 0.9) -> ScenarioSpec:
    if name not in _PRESETS:
        raise ValueError(f"unknown preset {name!r} (have {PRESET_NAMES})")
    return ScenarioSpec(name=name, seed=seed, days=days,
                        live_hours=live_hours,
                        injections=tuple(injections),
                        history_end=history_end,
                        p_threshold=p_threshold, **_PRESETS[name])

"""Declarative installation configuration.

One YAML file defines an installation: signals, entities, grid topology,
series (referenced everywhere as "<signal>@<entity>" keys), operational
ranges, relational models, the controllable set, and forecasting model
configs. `Installation.open` applies it idempotently to the installation's
database and wires up the engine and the decision runner.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .doms import DomsRunner, DomsSettings
from .forecasting import ForecastingEngine, ModelConfig, Recurrence, Scheduler
from .gridmodel import GridTopology, OperationalRange, RelationalModel
from .registry import Registry
from .store import Database, JobLog, ModelStore, TimeseriesStore, load_readings_csv
from .timeutil import DAY_S, HOUR_S

SCHEMA = "gridflex/v1"
CONFIG_FILE = "config.yaml"
DB_FILE = "installation.db"
HISTORY_FILE = "history.csv"


class ConfigError(ValueError):
    pass


def _require(cfg: dict, key: str, kind=None):
    if key not in cfg:
        raise ConfigError(f"configuration is missing the {key!r} section")
    value = cfg[key]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"section {key!r} must be a {kind.__name__}")
    return value


def load_config(path) -> dict:
    with open(path) as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("configuration root must be a mapping")
    if cfg.get("schema") != SCHEMA:
        raise ConfigError(
            f"unsupported schema {cfg.get('schema')!r}; expected {SCHEMA!r}")
    _require(cfg, "signals", list)
    _require(cfg, "entities", list)
    _require(cfg, "series", list)
    for sig in cfg["signals"]:
        if "@" in sig["name"]:
            raise ConfigError(f"signal name {sig['name']!r} may not contain '@'")
    return cfg


def _recurrence(spec: dict | None, default: Recurrence) -> Recurrence:
    if spec is None:
        return default
    return Recurrence(int(spec.get("interval", default.interval_s)),
                      int(spec.get("offset", default.offset_s)))


@dataclass
class Installation:
    """A configured installation: one directory, one database, one config."""

    directory: Path
    config: dict
    db: Database
    registry: Registry
    store: TimeseriesStore
    models: ModelStore
    engine: ForecastingEngine
    runner: DomsRunner
    topology: GridTopology | None
    series_ids: dict[str, str]          # "<signal>@<entity>" -> series id
    series_keys: dict[str, str]         # series id -> "<signal>@<entity>"
    controllables: tuple[str, ...] = ()  # series ids
    settings: DomsSettings = field(default_factory=DomsSettings)

    @classmethod
    def open(cls, directory) -> "Installation":
        directory = Path(directory)
        cfg = load_config(directory / CONFIG_FILE)
        db = Database(directory / DB_FILE)
        reg = Registry(db)
        store = TimeseriesStore(db)
        models = ModelStore(db)

        signal_ids = {}
        for sig in cfg["signals"]:
            signal_ids[sig["name"]] = reg.register_signal(sig["name"], sig["unit"])
        entity_ids = {}
        for ent in cfg["entities"]:
            parent = ent.get("parent")
            if parent is not None:
                if parent not in entity_ids:
                    raise ConfigError(
                        f"entity {ent['name']!r} lists parent {parent!r} "
                        "before it is defined")
                parent = entity_ids[parent]
            entity_ids[ent["name"]] = reg.register_entity(
                ent["name"], ent["kind"], parent)

        series_ids = {}
        for s in cfg["series"]:
            signal, entity = s["signal"], s["entity"]
            if signal not in signal_ids:
                raise ConfigError(f"series references unknown signal {signal!r}")
            if entity not in entity_ids:
                raise ConfigError(f"series references unknown entity {entity!r}")
            key = f"{signal}@{entity}"
            series_ids[key] = reg.declare_timeseries(
                signal_ids[signal], entity_ids[entity],
                int(s.get("resolution", 900)))
        series_keys = {v: k for k, v in series_ids.items()}

        def sid(key: str, context: str) -> str:
            if key not in series_ids:
                raise ConfigError(f"{context} references unknown series {key!r}")
            return series_ids[key]

        topology = None
        if "topology" in cfg:
            topo = cfg["topology"]
            topology = GridTopology(
                substations=tuple(topo.get("substations", ())),
                feeders=tuple((f, p) for f, p in topo.get("feeders", ())),
                voltage_points=tuple(
                    (v, a) for v, a in topo.get("voltage_points", ())),
            )

        ranges = tuple(
            OperationalRange(sid(r["series"], "range"), float(r["low"]),
                             float(r["high"]))
            for r in cfg.get("ranges", ())
        )
        rel_models = tuple(
            RelationalModel(
                child=sid(m["child"], "relational model"),
                parents=tuple(sid(p, "relational model") for p in m["parents"]),
                weights=tuple(float(w) for w in m["weights"]),
                bias=float(m.get("bias", 0.0)),
                residual_variance=float(m["residual_variance"]),
            )
            for m in cfg.get("relational_models", ())
        )
        controllables = tuple(
            sid(c, "controllables") for c in cfg.get("controllables", ()))

        doms_cfg = cfg.get("doms", {}) or {}
        settings = DomsSettings(
            p_threshold=float(doms_cfg.get("p_threshold", 0.5)),
            dead_band=float(doms_cfg.get("dead_band", 0.1)),
            max_workers=int(doms_cfg.get("max_workers", 8)),
        )

        engine = ForecastingEngine(db)
        for mc in cfg.get("model_configs", ()):
            engine.add_config(ModelConfig(
                id=mc["id"],
                target=sid(mc["target"], f"model config {mc['id']!r}"),
                algorithm=mc["algorithm"],
                hyperparameters=dict(mc.get("hyperparameters", {})),
                train_schedule=_recurrence(mc.get("train"),
                                           Recurrence(DAY_S, 2 * HOUR_S)),
                score_schedule=_recurrence(mc.get("score"), Recurrence(HOUR_S)),
            ))

        runner = DomsRunner(
            store=store,
            models=models,
            ranges=ranges,
            relational_models=rel_models,
            controllables=controllables,
            settings=settings,
        )
        inst = cls(
            directory=directory,
            config=cfg,
            db=db,
            registry=reg,
            store=store,
            models=models,
            engine=engine,
            runner=runner,
            topology=topology,
            series_ids=series_ids,
            series_keys=series_keys,
            controllables=controllables,
            settings=settings,
        )
        inst._ingest_history_once()
        return inst

    def _ingest_history_once(self):
        """Load the generated history file on first open only."""
        marker = self.db.query(
            "SELECT value FROM meta WHERE key = 'history_ingested'")
        history = self.directory / HISTORY_FILE
        if marker or not history.exists():
            return
        self.ingest_csv(history)
        with self.db.tx() as cur:
            cur.execute(
                "INSERT OR REPLACE INTO meta (key, value) VALUES "
                "('history_ingested', '1')")

    def ingest_csv(self, path):
        """Bulk-ingest a CSV keyed either by series id or by series key."""
        import csv

        from .store import DataPoint
        from .timeutil import parse_rfc3339

        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            fields = set(reader.fieldnames or ())
            if "series_id" in fields:
                return load_readings_csv(self.store, path)
            if not {"series_key", "timestamp", "value"} <= fields:
                raise ConfigError(
                    f"{path}: need series_key/timestamp/value columns")
            batches: dict[str, list] = {}
            for row in reader:
                key = row["series_key"]
                if key not in self.series_ids:
                    raise ConfigError(f"{path}: unknown series key {key!r}")
                batches.setdefault(self.series_ids[key], []).append(
                    DataPoint(parse_rfc3339(row["timestamp"]),
                              float(row["value"])))
        return {sid: self.store.ingest(sid, points)
                for sid, points in batches.items()}

    def scheduler(self, workers: int | None = None,
                  start=None) -> Scheduler:
        return Scheduler(self.engine,
                         workers=workers or self.settings.max_workers,
                         start=start)

    def job_log(self) -> JobLog:
        return JobLog(self.db)

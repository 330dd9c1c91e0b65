"""Semantic registry: signals (what is measured), entities (where), series.

All registrations are idempotent, so the registry state is a function of the
set of calls, not their order; concurrent duplicate registrations resolve to
the first writer's id.
"""

from __future__ import annotations

import sqlite3
from dataclasses import dataclass

from .store import Database, NotFoundError
from .timeutil import RESOLUTION_S

ENTITY_KINDS = ("substation", "feeder", "voltage_point", "plant", "meter", "other")


class RegistryError(ValueError):
    pass


@dataclass(frozen=True)
class Signal:
    id: str
    name: str
    unit: str


@dataclass(frozen=True)
class Entity:
    id: str
    name: str
    kind: str
    parent: str | None = None


@dataclass(frozen=True)
class SeriesInfo:
    id: str
    signal: Signal
    entity: Entity
    resolution_s: int


class Registry:
    def __init__(self, db: Database):
        self.db = db

    # -- signals ------------------------------------------------------------

    def register_signal(self, name: str, unit: str) -> str:
        if not name.strip():
            raise RegistryError("signal name must be non-empty")
        existing = self._signal_by_name(name)
        if existing is not None:
            return existing.id
        try:
            with self.db.tx() as cur:
                sid = self.db.next_id(cur, "sig")
                cur.execute(
                    "INSERT INTO signals (id, name, unit) VALUES (?, ?, ?)",
                    (sid, name, unit),
                )
            return sid
        except sqlite3.IntegrityError:
            return self._signal_by_name(name).id  # lost the race; id exists now

    def _signal_by_name(self, name: str) -> Signal | None:
        rows = self.db.query(
            "SELECT id, name, unit FROM signals WHERE lower(name) = lower(?)", (name,))
        return Signal(*rows[0]) if rows else None

    def get_signal(self, signal_id: str) -> Signal:
        rows = self.db.query(
            "SELECT id, name, unit FROM signals WHERE id = ?", (signal_id,))
        if not rows:
            raise NotFoundError(f"no signal {signal_id!r}")
        return Signal(*rows[0])

    def signals(self) -> list[Signal]:
        return [Signal(*r) for r in self.db.query(
            "SELECT id, name, unit FROM signals ORDER BY name")]

    # -- entities -----------------------------------------------------------

    def register_entity(self, name: str, kind: str, parent: str | None = None) -> str:
        if kind not in ENTITY_KINDS:
            raise RegistryError(f"unknown entity kind {kind!r} (have {ENTITY_KINDS})")
        existing = self._entity_by_name(name)
        if existing is not None:
            return existing.id
        if parent is not None:
            self.get_entity(parent)  # must exist; fresh child cannot close a cycle
        try:
            with self.db.tx() as cur:
                eid = self.db.next_id(cur, "ent")
                cur.execute(
                    "INSERT INTO entities (id, name, kind, parent) VALUES (?, ?, ?, ?)",
                    (eid, name, kind, parent),
                )
            return eid
        except sqlite3.IntegrityError:
            return self._entity_by_name(name).id

    def _entity_by_name(self, name: str) -> Entity | None:
        rows = self.db.query(
            "SELECT id, name, kind, parent FROM entities WHERE name = ?", (name,))
        return Entity(*rows[0]) if rows else None

    def get_entity(self, entity_id: str) -> Entity:
        rows = self.db.query(
            "SELECT id, name, kind, parent FROM entities WHERE id = ?", (entity_id,))
        if not rows:
            raise NotFoundError(f"no entity {entity_id!r}")
        return Entity(*rows[0])

    def entities(self, kind: str | None = None) -> list[Entity]:
        if kind is None:
            rows = self.db.query(
                "SELECT id, name, kind, parent FROM entities ORDER BY name")
        else:
            rows = self.db.query(
                "SELECT id, name, kind, parent FROM entities WHERE kind = ? "
                "ORDER BY name", (kind,))
        return [Entity(*r) for r in rows]

    def ancestors(self, entity_id: str) -> list[Entity]:
        chain = []
        seen = set()
        node = self.get_entity(entity_id)
        while node.parent is not None:
            if node.parent in seen:
                raise RegistryError(f"parent cycle at {node.parent!r}")
            seen.add(node.parent)
            node = self.get_entity(node.parent)
            chain.append(node)
        return chain

    # -- series -------------------------------------------------------------

    def declare_timeseries(self, signal_id: str, entity_id: str,
                           resolution_s: int = RESOLUTION_S) -> str:
        self.get_signal(signal_id)
        self.get_entity(entity_id)
        if resolution_s <= 0:
            raise RegistryError("resolution must be positive")
        existing = self._series_by_pair(signal_id, entity_id)
        if existing is not None:
            return existing
        try:
            with self.db.tx() as cur:
                tsid = self.db.next_id(cur, "ts")
                cur.execute(
                    "INSERT INTO series (id, signal, entity, resolution_s) "
                    "VALUES (?, ?, ?, ?)",
                    (tsid, signal_id, entity_id, resolution_s),
                )
            return tsid
        except sqlite3.IntegrityError:
            return self._series_by_pair(signal_id, entity_id)

    def _series_by_pair(self, signal_id: str, entity_id: str) -> str | None:
        rows = self.db.query(
            "SELECT id FROM series WHERE signal = ? AND entity = ?",
            (signal_id, entity_id))
        return rows[0][0] if rows else None

    def get_series(self, series_id: str) -> SeriesInfo:
        rows = self.db.query(
            "SELECT s.id, s.resolution_s, g.id, g.name, g.unit, "
            "e.id, e.name, e.kind, e.parent "
            "FROM series s JOIN signals g ON s.signal = g.id "
            "JOIN entities e ON s.entity = e.id WHERE s.id = ?",
            (series_id,))
        if not rows:
            raise NotFoundError(f"no series {series_id!r}")
        return self._series_info(rows[0])

    @staticmethod
    def _series_info(row) -> SeriesInfo:
        sid, res, gid, gname, gunit, eid, ename, ekind, eparent = row
        return SeriesInfo(
            id=sid,
            signal=Signal(gid, gname, gunit),
            entity=Entity(eid, ename, ekind, eparent),
            resolution_s=int(res),
        )

    def search_context(self, signal_fragment: str | None = None,
                       entity_kind: str | None = None,
                       parent_entity: str | None = None) -> list[SeriesInfo]:
        """Series listing filtered by signal name fragment, entity kind, or
        parent entity; stable-sorted by (entity name, signal name)."""
        sql = ("SELECT s.id, s.resolution_s, g.id, g.name, g.unit, "
               "e.id, e.name, e.kind, e.parent "
               "FROM series s JOIN signals g ON s.signal = g.id "
               "JOIN entities e ON s.entity = e.id")
        conds, params = [], []
        if signal_fragment:
            conds.append("instr(lower(g.name), lower(?)) > 0")
            params.append(signal_fragment)
        if entity_kind:
            conds.append("e.kind = ?")
            params.append(entity_kind)
        if parent_entity:
            conds.append("e.parent = ?")
            params.append(parent_entity)
        if conds:
            sql += " WHERE " + " AND ".join(conds)
        sql += " ORDER BY e.name, g.name, s.id"
        return [self._series_info(r) for r in self.db.query(sql, tuple(params))]

    def counts(self) -> dict[str, int]:
        return {
            "signals": self.db.query("SELECT count(*) FROM signals")[0][0],
            "entities": self.db.query("SELECT count(*) FROM entities")[0][0],
            "series": self.db.query("SELECT count(*) FROM series")[0][0],
        }

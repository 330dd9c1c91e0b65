"""Time helpers: RFC 3339 UTC instants and resolution-grid arithmetic.

All instants are timezone-aware UTC datetimes in the domain layer and epoch
seconds inside the store. The sampling grid is anchored at the Unix epoch, so
a timestamp is aligned to a resolution iff its epoch seconds divide evenly.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

RESOLUTION = timedelta(minutes=15)
RESOLUTION_S = 900
HORIZON_STEPS = 96
HOUR_S = 3600
DAY_S = 86400


def utc(year, month, day, hour=0, minute=0, second=0) -> datetime:
    return datetime(year, month, day, hour, minute, second, tzinfo=timezone.utc)


def to_epoch(t: datetime) -> int:
    if t.tzinfo is None:
        raise ValueError(f"naive datetime {t!r}; instants must be timezone-aware")
    return int(t.timestamp())


def from_epoch(s: int) -> datetime:
    return datetime.fromtimestamp(s, tz=timezone.utc)


def parse_rfc3339(text: str) -> datetime:
    """Parse an RFC 3339 instant; 'Z' and numeric offsets both accepted."""
    t = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if t.tzinfo is None:
        raise ValueError(f"timestamp {text!r} has no UTC offset")
    return t.astimezone(timezone.utc)


def format_rfc3339(t: datetime) -> str:
    t = t.astimezone(timezone.utc)
    return t.strftime("%Y-%m-%dT%H:%M:%SZ")


def is_aligned(t: datetime, resolution_s: int = RESOLUTION_S) -> bool:
    return to_epoch(t) % resolution_s == 0


def first_grid_after(t: datetime, resolution_s: int = RESOLUTION_S) -> datetime:
    """First grid instant strictly after t."""
    e = to_epoch(t)
    return from_epoch((e // resolution_s + 1) * resolution_s)


def horizon_times(issue_time: datetime, steps: int = HORIZON_STEPS,
                  resolution_s: int = RESOLUTION_S) -> list[datetime]:
    """The forecast step instants: `steps` grid points strictly after issue."""
    start = first_grid_after(issue_time, resolution_s)
    e = to_epoch(start)
    return [from_epoch(e + k * resolution_s) for k in range(steps)]

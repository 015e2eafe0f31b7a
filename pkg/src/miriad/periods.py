"""Half-open UTC periods and calendar slots (day, ISO week, month, year)."""
from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from typing import Iterator

PERIODICITIES = ("day", "week", "month", "year")


def as_utc(value: datetime | date | str) -> datetime:
    """Coerce a date, datetime or ISO string into an aware UTC datetime."""
    if isinstance(value, str):
        value = datetime.fromisoformat(value.strip().replace("Z", "+00:00"))
    if isinstance(value, date) and not isinstance(value, datetime):
        value = datetime(value.year, value.month, value.day)
    if value.tzinfo is None:
        return value.replace(tzinfo=timezone.utc)
    return value.astimezone(timezone.utc)


@dataclass(frozen=True)
class Period:
    start: datetime
    end: datetime

    def __post_init__(self) -> None:
        object.__setattr__(self, "start", as_utc(self.start))
        object.__setattr__(self, "end", as_utc(self.end))
        if self.start > self.end:
            raise ValueError(f"inverted period: {self.start.isoformat()} > {self.end.isoformat()}")

    def __contains__(self, ts: datetime) -> bool:
        return self.start <= ts < self.end

    @classmethod
    def year(cls, year: int) -> "Period":
        return cls(datetime(year, 1, 1), datetime(year + 1, 1, 1))

    @classmethod
    def everything(cls) -> "Period":
        return cls(datetime(1, 1, 1), datetime(9999, 12, 31))

    def label(self) -> str:
        return f"{self.start.strftime('%Y-%m-%dT%H:%M:%S')}/{self.end.strftime('%Y-%m-%dT%H:%M:%S')}"

    def to_dict(self) -> dict:
        return {"start": self.start.strftime("%Y-%m-%dT%H:%M:%S"), "end": self.end.strftime("%Y-%m-%dT%H:%M:%S")}


def slot_start(periodicity: str, ts: datetime) -> datetime:
    ts = as_utc(ts)
    day = ts.replace(hour=0, minute=0, second=0, microsecond=0)
    if periodicity == "day":
        return day
    if periodicity == "week":
        return day - timedelta(days=day.weekday())
    if periodicity == "month":
        return day.replace(day=1)
    if periodicity == "year":
        return day.replace(month=1, day=1)
    raise ValueError(f"unknown periodicity {periodicity!r}")


def next_slot(periodicity: str, start: datetime) -> datetime:
    if periodicity == "day":
        return start + timedelta(days=1)
    if periodicity == "week":
        return start + timedelta(weeks=1)
    if periodicity == "month":
        if start.month == 12:
            return start.replace(year=start.year + 1, month=1)
        return start.replace(month=start.month + 1)
    if periodicity == "year":
        return start.replace(year=start.year + 1)
    raise ValueError(f"unknown periodicity {periodicity!r}")


def is_aligned(periodicity: str, ts: datetime) -> bool:
    ts = as_utc(ts)
    return slot_start(periodicity, ts) == ts


def iter_slots(periodicity: str, period: Period) -> Iterator[Period]:
    """Consecutive slots tiling ``period``; both ends must sit on slot boundaries."""
    if periodicity not in PERIODICITIES:
        raise ValueError(f"unknown periodicity {periodicity!r}")
    for ts in (period.start, period.end):
        if not is_aligned(periodicity, ts):
            raise ValueError(f"{ts.isoformat()} is not aligned to a {periodicity} boundary")
    cur = period.start
    while cur < period.end:
        nxt = next_slot(periodicity, cur)
        yield Period(cur, nxt)
        cur = nxt

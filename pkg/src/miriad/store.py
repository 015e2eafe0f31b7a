"""File-backed stores for QUERY, DISPLAY, ORDER, BIBLIO, customers and STAT.

Every record store is an append-only JSON Lines file.  ``manifest.json`` holds
the committed line count and byte size of each file, the hashes of imported
batches, and the list of snapshots.  Readers only look at the committed prefix,
so a batch that was half-written when a writer died is never visible.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .ingest import (
    ACTIVITIES,
    UNKNOWN,
    DisplayRecord,
    LineError,
    OrderRecord,
    ParseResult,
    QueryRecord,
    format_timestamp,
    parse_activity,
    parse_timestamp,
)

log = logging.getLogger(__name__)

RECORD_STORES = ("query", "display", "order", "biblio", "customer")
TIMED_STORES = ("query", "display", "order")
MANIFEST = "manifest.json"


class StoreError(Exception):
    pass


class DuplicateKeyError(StoreError, ValueError):
    pass


class CorruptStoreError(StoreError):
    pass


@dataclass(frozen=True)
class BiblioRecord:
    record_id: str
    title: str
    authors: tuple[str, ...]
    author_countries: tuple[str, ...]
    journal_title: str
    publication_year: int
    publishing_country: str
    scientific_domain: str
    document_type: str

    def __post_init__(self) -> None:
        if not self.record_id:
            raise ValueError("missing record_id")
        max_year = datetime.now(timezone.utc).year + 1
        if not 1500 <= self.publication_year <= max_year:
            raise ValueError(f"publication_year {self.publication_year} out of range")


@dataclass(frozen=True)
class CustomerRecord:
    customer_id: str
    country: str
    activity: str

    def __post_init__(self) -> None:
        if not self.customer_id:
            raise ValueError("missing customer_id")
        if self.activity not in ACTIVITIES:
            raise ValueError(f"invalid activity {self.activity!r}")


@dataclass(frozen=True)
class EnrichedEvent:
    """A display or order event left-joined with BIBLIO and customer data."""

    event: DisplayRecord | OrderRecord
    biblio: BiblioRecord | None = None
    customer: CustomerRecord | None = None

    @property
    def join_status(self) -> str:
        return "matched" if self.biblio is not None else "unmatched"

    @property
    def timestamp(self) -> datetime:
        return self.event.timestamp

    @property
    def record_id(self) -> str:
        return self.event.record_id

    @property
    def user_id(self) -> str:
        return self.event.user_id

    @property
    def country(self) -> str:
        if isinstance(self.event, DisplayRecord):
            return self.event.country
        if self.customer is not None:
            return self.customer.country
        return self.event.customer_country

    @property
    def activity(self) -> str | None:
        if isinstance(self.event, DisplayRecord):
            return None
        if self.customer is not None:
            return self.customer.activity
        return self.event.customer_activity


@dataclass(frozen=True)
class StoreSnapshot:
    snapshot_id: str
    time_range: tuple[str, str] | None
    counts: dict[str, int]
    content_hash: str
    batch_hash: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["time_range"] = list(self.time_range) if self.time_range else None
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "StoreSnapshot":
        tr = d.get("time_range")
        return cls(
            snapshot_id=d["snapshot_id"],
            time_range=tuple(tr) if tr else None,
            counts=dict(d["counts"]),
            content_hash=d["content_hash"],
            batch_hash=d.get("batch_hash", ""),
        )


# -- record <-> JSON ------------------------------------------------------------

_TYPES = {
    "query": QueryRecord,
    "display": DisplayRecord,
    "order": OrderRecord,
    "biblio": BiblioRecord,
    "customer": CustomerRecord,
}


def store_for(record) -> str:
    for name, cls in _TYPES.items():
        if isinstance(record, cls):
            return name
    raise TypeError(f"no store for {type(record).__name__}")


def record_to_dict(record) -> dict:
    out = {}
    for key, value in asdict(record).items():
        if isinstance(value, datetime):
            value = format_timestamp(value)
        elif isinstance(value, tuple):
            value = list(value)
        out[key] = value
    return out


def record_from_dict(store: str, d: Mapping):
    cls = _TYPES[store]
    kwargs = dict(d)
    if "timestamp" in kwargs:
        kwargs["timestamp"] = parse_timestamp(kwargs["timestamp"])
    for key, value in kwargs.items():
        if isinstance(value, list):
            kwargs[key] = tuple(value)
    return cls(**kwargs)


def dumps_line(record) -> str:
    return json.dumps(record_to_dict(record), sort_keys=True, ensure_ascii=False, separators=(",", ":"))


# -- importers for the BIBLIO and customer feeds -------------------------------

_BIBLIO_FIELDS = tuple(BiblioRecord.__dataclass_fields__)


def read_biblio_jsonl(path: str | Path) -> ParseResult:
    result = ParseResult()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                if not isinstance(raw, dict):
                    raise ValueError("not a JSON object")
                missing = [f for f in _BIBLIO_FIELDS if f not in raw]
                if missing:
                    raise ValueError(f"missing fields: {', '.join(missing)}")
                raw = {k: raw[k] for k in _BIBLIO_FIELDS}
                raw["publishing_country"] = raw["publishing_country"] or UNKNOWN
                result.records.append(record_from_dict("biblio", raw))
            except (ValueError, TypeError) as exc:
                result.errors.append(LineError(line_no, str(exc), line.rstrip("\n")))
    return result


def read_customers_csv(path: str | Path) -> ParseResult:
    result = ParseResult()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            line_no = reader.line_num
            try:
                activity, known = parse_activity(row.get("activity") or "")
                rec = CustomerRecord(
                    customer_id=(row.get("customer_id") or "").strip(),
                    country=(row.get("country") or "").strip().upper() or UNKNOWN,
                    activity=activity,
                )
            except ValueError as exc:
                result.errors.append(LineError(line_no, str(exc)))
                continue
            if not known:
                result.warnings.append(LineError(line_no, f"unknown activity {row.get('activity')!r}"))
            result.records.append(rec)
    return result


# -- selection / enrichment (pure) -------------------------------------------


def select_records(
    records: Iterable,
    t0: datetime,
    t1: datetime,
    predicate: Callable[[object], bool] | None = None,
) -> list:
    """Records with ``t0 <= timestamp < t1`` passing ``predicate``, in time order.

    The sort is stable, so records sharing a timestamp keep input order.
    """
    if t0 > t1:
        raise ValueError(f"inverted interval: {t0} > {t1}")
    picked = [r for r in records if t0 <= r.timestamp < t1 and (predicate is None or predicate(r))]
    picked.sort(key=lambda r: r.timestamp)
    return picked


def enrich(
    events: Iterable[DisplayRecord | OrderRecord],
    biblio: Mapping[str, BiblioRecord],
    customers: Mapping[str, CustomerRecord] | None = None,
) -> list[EnrichedEvent]:
    customers = customers or {}
    out = []
    for ev in events:
        cust = customers.get(ev.customer_id) if isinstance(ev, OrderRecord) else None
        out.append(EnrichedEvent(ev, biblio.get(ev.record_id), cust))
    return out


# -- the store ----------------------------------------------------------------


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


class Datastore:
    """The five Miri@d stores rooted at one directory.

    Single writer per root; any number of readers.
    """

    def __init__(self, root: str | Path, verify: bool = True):
        self.root = Path(root)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StoreError(f"cannot create store root {self.root}: {exc}") from exc
        self._manifest = self._read_manifest()
        self._cache: dict[str, list] = {}
        if verify and self._manifest["snapshots"]:
            self.verify(self.latest_snapshot())

    # manifest handling

    def _read_manifest(self) -> dict:
        path = self.root / MANIFEST
        if not path.exists():
            return {
                "version": 1,
                "counts": {s: 0 for s in RECORD_STORES},
                "sizes": {s: 0 for s in RECORD_STORES},
                "batches": [],
                "snapshots": [],
            }
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    def _write_manifest(self) -> None:
        _atomic_write(self.root / MANIFEST, json.dumps(self._manifest, indent=2, sort_keys=True) + "\n")

    def _path(self, store: str) -> Path:
        return self.root / f"{store}.jsonl"

    def _committed_bytes(self, store: str) -> bytes:
        size = self._manifest["sizes"][store]
        if size == 0:
            return b""
        with open(self._path(store), "rb") as fh:
            data = fh.read(size)
        if len(data) != size:
            raise CorruptStoreError(f"{store} store is shorter than its manifest says")
        return data

    def counts(self) -> dict[str, int]:
        return dict(self._manifest["counts"])

    def snapshots(self) -> list[StoreSnapshot]:
        return [StoreSnapshot.from_dict(d) for d in self._manifest["snapshots"]]

    def latest_snapshot(self) -> StoreSnapshot | None:
        snaps = self._manifest["snapshots"]
        return StoreSnapshot.from_dict(snaps[-1]) if snaps else None

    def content_hash(self, counts: Mapping[str, int] | None = None) -> str:
        """Hash of the first ``counts[store]`` lines of every store."""
        counts = counts or self._manifest["counts"]
        h = hashlib.sha256()
        for store in RECORD_STORES:
            n = counts.get(store, 0)
            data = self._committed_bytes(store)
            if n:
                lines = data.split(b"\n")
                if len(lines) - 1 < n:
                    raise CorruptStoreError(f"{store} store has fewer than {n} lines")
                data = b"\n".join(lines[:n]) + b"\n"
            else:
                data = b""
            h.update(f"{store}:{n}\n".encode())
            h.update(data)
        return h.hexdigest()

    def verify(self, snapshot: StoreSnapshot) -> None:
        actual = self.content_hash(snapshot.counts)
        if actual != snapshot.content_hash:
            raise CorruptStoreError(f"snapshot {snapshot.snapshot_id} hash mismatch")

    # writing

    @staticmethod
    def batch_hash(batches: Mapping[str, Sequence]) -> str:
        h = hashlib.sha256()
        for store in sorted(batches):
            h.update(f"[{store}]\n".encode())
            for rec in batches[store]:
                h.update(dumps_line(rec).encode("utf-8") + b"\n")
        return h.hexdigest()

    def has_batch(self, batch_hash: str) -> bool:
        return batch_hash in self._manifest["batches"]

    def import_records(self, records: Sequence, store: str) -> StoreSnapshot:
        return self.import_many({store: records})

    def import_many(self, batches: Mapping[str, Sequence]) -> StoreSnapshot:
        """Append several store batches and commit them as one snapshot.

        A byte-identical batch seen before is skipped (the current snapshot is
        returned).  BIBLIO and customer batches are rejected as a whole if any
        key already exists.
        """
        for store, records in batches.items():
            if store not in RECORD_STORES:
                raise ValueError(f"unknown store {store!r}")
            expected = _TYPES[store]
            for rec in records:
                if not isinstance(rec, expected):
                    raise TypeError(f"{type(rec).__name__} cannot go into the {store} store")
        bh = self.batch_hash(batches)
        if self.has_batch(bh):
            log.info("batch %s already imported, skipping", bh[:12])
            latest = self.latest_snapshot()
            if latest is None:  # pragma: no cover - a batch implies a snapshot
                raise CorruptStoreError("batch recorded without snapshot")
            return latest

        for store, key in (("biblio", "record_id"), ("customer", "customer_id")):
            if batches.get(store):
                known = {getattr(r, key) for r in self.load(store)}
                for rec in batches[store]:
                    k = getattr(rec, key)
                    if k in known:
                        raise DuplicateKeyError(f"duplicate key {k!r} in {store}")
                    known.add(k)

        for store in RECORD_STORES:
            records = batches.get(store) or ()
            if not records:
                continue
            payload = "".join(dumps_line(r) + "\n" for r in records).encode("utf-8")
            path = self._path(store)
            committed = self._manifest["sizes"][store]
            try:
                with open(path, "ab") as fh:
                    fh.truncate(committed)  # drop any uncommitted tail
                    fh.write(payload)
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                raise StoreError(f"cannot write {path}: {exc}") from exc
            self._manifest["sizes"][store] = committed + len(payload)
            self._manifest["counts"][store] += len(records)
            self._cache.pop(store, None)

        counts = dict(self._manifest["counts"])
        snap = StoreSnapshot(
            snapshot_id=f"snap-{len(self._manifest['snapshots']) + 1:06d}",
            time_range=self._time_range(),
            counts=counts,
            content_hash=self.content_hash(counts),
            batch_hash=bh,
        )
        self._manifest["batches"].append(bh)
        self._manifest["snapshots"].append(snap.to_dict())
        self._write_manifest()
        return snap

    def _time_range(self) -> tuple[str, str] | None:
        stamps = [r.timestamp for s in TIMED_STORES for r in self.load(s)]
        if not stamps:
            return None
        return format_timestamp(min(stamps)), format_timestamp(max(stamps))

    # reading

    def load(self, store: str) -> list:
        if store not in RECORD_STORES:
            raise ValueError(f"unknown store {store!r}")
        if store not in self._cache:
            data = self._committed_bytes(store).decode("utf-8")
            self._cache[store] = [record_from_dict(store, json.loads(line)) for line in data.splitlines() if line]
        return list(self._cache[store])

    def biblio_index(self) -> dict[str, BiblioRecord]:
        return {r.record_id: r for r in self.load("biblio")}

    def customer_index(self) -> dict[str, CustomerRecord]:
        return {r.customer_id: r for r in self.load("customer")}

    def select(
        self,
        store: str,
        t0: datetime,
        t1: datetime,
        predicate: Callable[[object], bool] | None = None,
    ) -> list:
        if store not in TIMED_STORES:
            raise ValueError(f"store {store!r} has no timestamps")
        return select_records(self.load(store), t0, t1, predicate)

    def enrich(self, events: Iterable[DisplayRecord | OrderRecord]) -> list[EnrichedEvent]:
        return enrich(events, self.biblio_index(), self.customer_index())

    def enriched(self, store: str) -> list[EnrichedEvent]:
        if store not in ("display", "order"):
            raise ValueError(f"only display and order events can be enriched, not {store!r}")
        return self.enrich(self.load(store))

    # STAT

    @property
    def stat_dir(self) -> Path:
        return self.root / "stat"

    def write_stat(self, relpath: str, text: str) -> Path:
        path = self.stat_dir / relpath
        _atomic_write(path, text)
        return path

    def read_stat(self, relpath: str) -> str:
        return (self.stat_dir / relpath).read_text(encoding="utf-8")

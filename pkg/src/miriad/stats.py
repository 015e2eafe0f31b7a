"""Descriptive indicator board: group-by distributions, top-N, periodic STAT reports."""
from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Iterable, Sequence

from .ingest import QueryRecord
from .periods import PERIODICITIES, Period, iter_slots
from .store import Datastore, EnrichedEvent

UNMATCHED = "(unmatched)"

DATASETS = ("query", "display", "order")

DIMENSIONS: dict[str, tuple[str, ...]] = {
    "query": ("tld", "country", "title_word", "author_in_query", "keyword"),
    "display": (
        "tld", "country", "record", "scientific_domain", "publication_year",
        "author", "author_country", "journal", "publishing_country",
    ),
    "order": (
        "customer_country", "customer_activity", "record", "scientific_domain",
        "publication_year", "author", "author_country", "journal", "publishing_country",
    ),
}

BIBLIO_DIMENSIONS = frozenset(
    {"scientific_domain", "publication_year", "author", "author_country", "journal", "publishing_country"}
)


def _biblio_keys(attr: Callable) -> Callable[[EnrichedEvent], list[str]]:
    def keys(ev: EnrichedEvent) -> list[str]:
        if ev.biblio is None:
            return [UNMATCHED]
        value = attr(ev.biblio)
        if isinstance(value, tuple):
            return [str(v) for v in value]
        return [str(value)]
    return keys


def _title_words(q: QueryRecord) -> list[str]:
    return [tok.lower() for words in q.title_words for tok in words.split()]


def _authors_in_query(q: QueryRecord) -> list[str]:
    if not q.author_query:
        return []
    return [a.strip() for a in q.author_query.split("|") if a.strip()]


_EXTRACTORS: dict[tuple[str, str], Callable] = {
    ("query", "tld"): lambda q: [q.tld],
    ("query", "country"): lambda q: [q.country],
    ("query", "title_word"): _title_words,
    ("query", "author_in_query"): _authors_in_query,
    ("query", "keyword"): lambda q: list(q.keywords),
    ("display", "tld"): lambda e: [e.event.tld],
    ("display", "country"): lambda e: [e.country],
    ("order", "customer_country"): lambda e: [e.country],
    ("order", "customer_activity"): lambda e: [e.activity],
}
for _ds in ("display", "order"):
    _EXTRACTORS[(_ds, "record")] = lambda e: [e.record_id]
    _EXTRACTORS[(_ds, "scientific_domain")] = _biblio_keys(lambda b: b.scientific_domain)
    _EXTRACTORS[(_ds, "publication_year")] = _biblio_keys(lambda b: b.publication_year)
    _EXTRACTORS[(_ds, "author")] = _biblio_keys(lambda b: b.authors)
    _EXTRACTORS[(_ds, "author_country")] = _biblio_keys(lambda b: b.author_countries)
    _EXTRACTORS[(_ds, "journal")] = _biblio_keys(lambda b: b.journal_title)
    _EXTRACTORS[(_ds, "publishing_country")] = _biblio_keys(lambda b: b.publishing_country)


def valid_pairs() -> list[tuple[str, str]]:
    return [(ds, dim) for ds in DATASETS for dim in DIMENSIONS[ds]]


def check_pair(dataset: str, dimension: str) -> None:
    if dataset not in DIMENSIONS:
        raise ValueError(f"unknown dataset {dataset!r}")
    if dimension not in DIMENSIONS[dataset]:
        raise ValueError(f"dimension {dimension!r} is not available for {dataset} data")


def percent(count: int, total: int) -> float:
    """100*count/total rounded half-up to 2 decimals, computed in integers."""
    if total == 0:
        return 0.0
    hundredths = (20000 * count + total) // (2 * total)
    return hundredths / 100


@dataclass(frozen=True)
class Row:
    key: str
    count: int
    percent: float


@dataclass(frozen=True)
class Distribution:
    dataset: str
    dimension: str
    period: Period
    rows: tuple[Row, ...]
    total: int

    def counts(self) -> dict[str, int]:
        return {r.key: r.count for r in self.rows}

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "dimension": self.dimension,
            "period": self.period.to_dict(),
            "total": self.total,
            "rows": [{"key": r.key, "count": r.count, "percent": f"{r.percent:.2f}"} for r in self.rows],
        }

    def to_csv(self, decimals: int = 2) -> str:
        """``rank,key,count,percent``; fewer decimals re-round the stored 2-decimal percent."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["rank", "key", "count", "percent"])
        for rank, r in enumerate(self.rows, start=1):
            writer.writerow([rank, r.key, r.count, f"{r.percent:.{decimals}f}"])
        return buf.getvalue()


def distribution_from_counts(
    counts: dict[str, int] | Counter,
    dataset: str = "",
    dimension: str = "",
    period: Period | None = None,
) -> Distribution:
    """Rank pre-aggregated counts: count descending, key ascending on ties."""
    total = sum(counts.values())
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    rows = tuple(Row(k, c, percent(c, total)) for k, c in ordered if c > 0)
    return Distribution(dataset, dimension, period or Period.everything(), rows, total)


def distribution(
    events: Iterable,
    dataset: str,
    dimension: str,
    period: Period | None = None,
) -> Distribution:
    """Group-by count of ``events`` along one dimension.

    ``events`` are QueryRecords for the query dataset and EnrichedEvents for
    display/order.  Multi-valued fields add one count per value, so ``total``
    is the number of counted values, which can differ from the event count.
    """
    check_pair(dataset, dimension)
    extract = _EXTRACTORS[(dataset, dimension)]
    counter: Counter = Counter()
    for ev in events:
        if dataset != "query" and not isinstance(ev, EnrichedEvent):
            raise TypeError(f"{dataset} distributions need enriched events, got {type(ev).__name__}")
        if period is not None and ev.timestamp not in period:
            continue
        counter.update(extract(ev))
    return distribution_from_counts(counter, dataset, dimension, period)


def top_n(dist: Distribution, n: int) -> Distribution:
    if n < 1:
        raise ValueError("n must be >= 1")
    return Distribution(dist.dataset, dist.dimension, dist.period, dist.rows[:n], dist.total)


@dataclass(frozen=True)
class StatReport:
    periodicity: str
    period: Period
    distributions: tuple[Distribution, ...]
    generated_at: datetime

    @property
    def period_start(self) -> datetime:
        return self.period.start

    def relpath(self) -> str:
        return f"{self.periodicity}/{self.period.start.strftime('%Y-%m-%d')}.json"

    def get(self, dataset: str, dimension: str) -> Distribution:
        for d in self.distributions:
            if d.dataset == dataset and d.dimension == dimension:
                return d
        raise KeyError((dataset, dimension))

    def to_json(self) -> str:
        doc = {
            "periodicity": self.periodicity,
            "period": self.period.to_dict(),
            "generated_at": self.generated_at.strftime("%Y-%m-%dT%H:%M:%S"),
            "distributions": [d.to_dict() for d in self.distributions],
        }
        return json.dumps(doc, indent=1, ensure_ascii=False) + "\n"


class StatsEngine:
    """Distributions and STAT precomputation over one datastore."""

    def __init__(self, store: Datastore):
        self.store = store
        self._events: dict[str, list] = {}

    def events(self, dataset: str) -> list:
        if dataset not in self._events:
            if dataset == "query":
                evs = self.store.load("query")
            elif dataset in ("display", "order"):
                evs = self.store.enriched(dataset)
            else:
                raise ValueError(f"unknown dataset {dataset!r}")
            self._events[dataset] = sorted(evs, key=lambda e: e.timestamp)
        return self._events[dataset]

    def distribution(self, dataset: str, dimension: str, period: Period) -> Distribution:
        check_pair(dataset, dimension)
        return distribution(self.events(dataset), dataset, dimension, period)

    def report(
        self,
        periodicity: str,
        period: Period,
        pairs: Sequence[tuple[str, str]] | None = None,
    ) -> StatReport:
        pairs = list(pairs) if pairs is not None else valid_pairs()
        for ds, dim in pairs:
            check_pair(ds, dim)
        by_dataset: dict[str, list] = {}
        dists = []
        for ds, dim in pairs:
            if ds not in by_dataset:
                by_dataset[ds] = [e for e in self.events(ds) if e.timestamp in period]
            dists.append(distribution(by_dataset[ds], ds, dim, period))
        # the stamp is the period end so reruns are byte-identical
        return StatReport(periodicity, period, tuple(dists), period.end)

    def precompute(
        self,
        periodicity: str,
        period: Period,
        pairs: Sequence[tuple[str, str]] | None = None,
        persist: bool = True,
    ) -> list[StatReport]:
        """One report per ``periodicity`` slot of ``period``, written to STAT."""
        if periodicity not in PERIODICITIES:
            raise ValueError(f"unknown periodicity {periodicity!r}")
        reports = [self.report(periodicity, slot, pairs) for slot in iter_slots(periodicity, period)]
        if persist:
            for rep in reports:
                self.store.write_stat(rep.relpath(), rep.to_json())
        return reports

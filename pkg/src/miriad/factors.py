"""Web Usability Factor (displays) and Customer Order Factor (orders) per journal."""
from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .periods import Period
from .store import BiblioRecord, EnrichedEvent

KINDS = ("WUF", "COF")


class UndefinedFactorError(ValueError):
    """The journal (or journal/year) has no stored articles."""


def normalize_journal(title: str) -> str:
    return " ".join(title.split()).casefold()


@dataclass(frozen=True)
class FactorResult:
    journal_title: str
    period: Period
    kind: str
    numerator: int
    denominator: int
    publication_year: int | None = None

    def __post_init__(self) -> None:
        if self.denominator <= 0:
            raise UndefinedFactorError(f"{self.journal_title!r} has no stored articles")

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    def rounded(self, decimals: int) -> float:
        return round(float(self.value), decimals)


def count_events(
    events: Iterable[EnrichedEvent],
    journal: str,
    period: Period,
    publication_year: int | None = None,
) -> int:
    key = normalize_journal(journal)
    n = 0
    for ev in events:
        b = ev.biblio
        if b is None or ev.timestamp not in period:
            continue
        if normalize_journal(b.journal_title) != key:
            continue
        if publication_year is not None and b.publication_year != publication_year:
            continue
        n += 1
    return n


def stored_count(biblio: Iterable[BiblioRecord], journal: str, publication_year: int | None = None) -> int:
    """Articles of ``journal`` held in BIBLIO (optionally one publication year)."""
    key = normalize_journal(journal)
    return sum(
        1 for b in biblio
        if normalize_journal(b.journal_title) == key
        and (publication_year is None or b.publication_year == publication_year)
    )


def _factor(kind, events, journal, period, stored, publication_year=None) -> FactorResult:
    if stored is None or stored <= 0:
        what = journal if publication_year is None else f"{journal} ({publication_year})"
        raise UndefinedFactorError(f"no stored articles for {what}")
    num = count_events(events, journal, period, publication_year)
    return FactorResult(journal, period, kind, num, stored, publication_year)


def wuf(displays: Iterable[EnrichedEvent], journal: str, period: Period, stored: int) -> FactorResult:
    return _factor("WUF", displays, journal, period, stored)


def wuf_by_year(
    displays: Iterable[EnrichedEvent], journal: str, period: Period, publication_year: int, stored: int
) -> FactorResult:
    return _factor("WUF", displays, journal, period, stored, publication_year)


def cof(orders: Iterable[EnrichedEvent], journal: str, period: Period, stored: int) -> FactorResult:
    return _factor("COF", orders, journal, period, stored)


def cof_by_year(
    orders: Iterable[EnrichedEvent], journal: str, period: Period, publication_year: int, stored: int
) -> FactorResult:
    return _factor("COF", orders, journal, period, stored, publication_year)


def factor_table(
    kind: str,
    events: Sequence[EnrichedEvent],
    period: Period,
    biblio: Sequence[BiblioRecord] = (),
    journals: Sequence[str] | None = None,
    stored_counts: Mapping[str, int] | None = None,
    publication_year: int | None = None,
) -> list[FactorResult]:
    """Factor per journal, most used first (ties by normalised title).

    Without ``journals`` every journal with at least one event in the period
    gets a row.  Denominators come from ``stored_counts`` (keyed by title) when
    given, otherwise from counting ``biblio``.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown factor kind {kind!r}")
    stored_by_key = {normalize_journal(k): v for k, v in (stored_counts or {}).items()}
    numerators: Counter = Counter()
    display_title: dict[str, str] = {}
    for ev in events:
        b = ev.biblio
        if b is None or ev.timestamp not in period:
            continue
        if publication_year is not None and b.publication_year != publication_year:
            continue
        key = normalize_journal(b.journal_title)
        numerators[key] += 1
        display_title.setdefault(key, b.journal_title.strip())

    if journals is None:
        keys = list(numerators)
    else:
        keys = []
        for j in journals:
            k = normalize_journal(j)
            display_title.setdefault(k, j.strip())
            if k not in keys:
                keys.append(k)

    holdings: Counter = Counter()
    if any(k not in stored_by_key for k in keys):
        for b in biblio:
            if publication_year is None or b.publication_year == publication_year:
                holdings[normalize_journal(b.journal_title)] += 1

    rows = []
    for k in keys:
        denom = stored_by_key.get(k, holdings.get(k, 0))
        if denom <= 0:
            raise UndefinedFactorError(f"no stored articles for {display_title[k]!r}")
        rows.append(FactorResult(display_title[k], period, kind, numerators.get(k, 0), denom, publication_year))
    rows.sort(key=lambda r: (-r.numerator, normalize_journal(r.journal_title)))
    return rows


def factor_csv(rows: Sequence[FactorResult], decimals: int | None = None) -> str:
    """``rank,journal,count,factor`` table; WUF at 2 decimals, COF at 3 by default."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rank", "journal", "count", "factor"])
    for rank, r in enumerate(rows, start=1):
        d = decimals if decimals is not None else (2 if r.kind == "WUF" else 3)
        writer.writerow([rank, r.journal_title, r.numerator, f"{float(r.value):.{d}f}"])
    return buf.getvalue()

"""Co-usage matrices: documents coupled by common users, users by common documents.

Attribute vectors are binary, so a user displaying the same document twice
counts once.  Pair counts are normalised with the equivalence coefficient

    E(i, j) = C(i, j)**2 / (o(i) * o(j))
"""
from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping

from .periods import Period

DOCUMENT = "document"
USER = "user"

Pair = tuple[str, str]


def pair_key(a: str, b: str) -> Pair:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class TransactionSet:
    """user id -> set of record ids the user displayed or ordered."""

    users: Mapping[str, frozenset[str]]

    @property
    def m(self) -> int:
        return len(self.users)

    @property
    def n(self) -> int:
        return len(self.documents())

    def documents(self) -> list[str]:
        return sorted({d for docs in self.users.values() for d in docs})

    def by_document(self) -> dict[str, frozenset[str]]:
        """The inverted view: record id -> users who referred to it."""
        inv: dict[str, set[str]] = defaultdict(set)
        for u, docs in self.users.items():
            for d in docs:
                inv[d].add(u)
        return {d: frozenset(us) for d, us in sorted(inv.items())}


def build_transactions(events: Iterable, period: Period | None = None) -> TransactionSet:
    """Collapse events to per-user document sets (``user_id``/``record_id`` attributes)."""
    users: dict[str, set[str]] = defaultdict(set)
    for ev in events:
        if period is not None and ev.timestamp not in period:
            continue
        if ev.user_id and ev.record_id:
            users[ev.user_id].add(ev.record_id)
    return TransactionSet({u: frozenset(ds) for u, ds in sorted(users.items()) if ds})


@dataclass
class CooccurrenceMatrix:
    kind: str
    items: tuple[str, ...]
    occurrences: dict[str, int]
    pairs: dict[Pair, int] = field(default_factory=dict)

    def get(self, i: str, j: str) -> int:
        if i == j:
            return 0
        return self.pairs.get(pair_key(i, j), 0)


@dataclass
class AssociationMatrix:
    kind: str
    items: tuple[str, ...]
    occurrences: dict[str, int]
    values: dict[Pair, float] = field(default_factory=dict)

    def get(self, i: str, j: str) -> float:
        if i == j:
            return 0.0
        return self.values.get(pair_key(i, j), 0.0)

    def __len__(self) -> int:
        return len(self.values)

    def sorted_pairs(self) -> list[tuple[str, str, float]]:
        """Pairs by E descending, ties broken by ascending (i, j)."""
        return [(i, j, v) for (i, j), v in sorted(self.values.items(), key=lambda kv: (-kv[1], kv[0]))]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["item_i", "item_j", "value"])
        for (i, j), v in sorted(self.values.items()):
            w.writerow([i, j, repr(v)])
        return buf.getvalue()

    def occurrences_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["item", "occurrences"])
        for item in self.items:
            w.writerow([item, self.occurrences[item]])
        return buf.getvalue()


def _count_pairs(sets: Iterable[frozenset[str]]) -> dict[Pair, int]:
    counts: dict[Pair, int] = defaultdict(int)
    for s in sets:
        for a, b in combinations(sorted(s), 2):
            counts[(a, b)] += 1
    return dict(counts)


def cooccurrence(transactions: TransactionSet, kind: str) -> CooccurrenceMatrix:
    """Pair counts for documents (users in common) or users (documents in common)."""
    if kind == DOCUMENT:
        by_doc = transactions.by_document()
        occ = {d: len(us) for d, us in by_doc.items()}
        pairs = _count_pairs(transactions.users.values())
    elif kind == USER:
        occ = {u: len(ds) for u, ds in sorted(transactions.users.items())}
        pairs = _count_pairs(transactions.by_document().values())
    else:
        raise ValueError(f"unknown matrix kind {kind!r}")
    return CooccurrenceMatrix(kind, tuple(sorted(occ)), occ, pairs)


def equivalence(cooc: CooccurrenceMatrix) -> AssociationMatrix:
    values = {}
    for (i, j), c in cooc.pairs.items():
        oi, oj = cooc.occurrences[i], cooc.occurrences[j]
        if oi <= 0 or oj <= 0:
            raise AssertionError(f"zero occurrence total for pair {(i, j)}")
        if c > 0:
            values[(i, j)] = (c * c) / (oi * oj)
    return AssociationMatrix(cooc.kind, cooc.items, dict(cooc.occurrences), values)


def association_from_values(values: Mapping[Pair, float], items: Iterable[str] = (), kind: str = DOCUMENT) -> AssociationMatrix:
    """Build an AssociationMatrix directly from E values (occurrence totals unknown)."""
    vals = {}
    universe = set(items)
    for (a, b), v in values.items():
        if a == b:
            continue
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"association value {v} for {(a, b)} outside [0, 1]")
        universe.update((a, b))
        if v > 0:
            vals[pair_key(a, b)] = float(v)
    ordered = tuple(sorted(universe))
    return AssociationMatrix(kind, ordered, {i: 0 for i in ordered}, vals)

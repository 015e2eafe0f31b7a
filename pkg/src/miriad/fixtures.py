"""Synthetic Miri@d logs with planted co-usage communities.

Everything is drawn from one ``random.Random(seed)``, so a seed always yields
byte-identical files.  Community members order every document of their
community; background orders come from one-off customers on distinct
documents, so they add no co-usage pairs and the planted blocks are the only
structure the clusterer can find.
"""
from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .ingest import (
    ACTIVITY_CODES,
    DisplayRecord,
    OrderRecord,
    QueryRecord,
    default_tld_table,
    format_display,
    format_order,
    format_query,
)
from .store import BiblioRecord, dumps_line

JOURNALS = [
    ("Macromolecules", "US", "polymer science"),
    ("Journal of applied polymer science", "US", "polymer science"),
    ("Polymer", "GB", "polymer science"),
    ("Langmuir", "US", "physical chemistry"),
    ("Journal of applied physics", "US", "physics"),
    ("Physical review letters", "US", "physics"),
    ("La Presse médicale", "FR", "medicine"),
    ("Journal of colloid and interface science", "US", "physical chemistry"),
]
JOURNAL_WEIGHTS = [1.0 / (rank + 1) for rank in range(len(JOURNALS))]

TLD_MIX = [
    ("fr", 0.70), ("univ-nancy.fr", 0.05), ("ca", 0.04), ("com", 0.05), ("edu.au", 0.02),
    ("es", 0.03), ("be", 0.03), ("de", 0.02), ("ma", 0.02), ("edu", 0.02), ("jp", 0.02),
]
CUSTOMER_COUNTRIES = [("FR", 0.80), ("BE", 0.10), ("BR", 0.04), ("DE", 0.03), ("RU", 0.03)]
ACTIVITY_MIX = [("COM", 0.50), ("RES", 0.28), ("EDU", 0.12), ("OTH", 0.04), ("HOS", 0.02), ("INF", 0.02), ("PRI", 0.02)]

WORDS = (
    "polymer blend kinetics surface film thermal crystal membrane copolymer fiber "
    "adsorption colloid laser spin magnetic diffusion catalysis gel composite rheology"
).split()
AUTHORS = ["Smith", "Martin", "Bernard", "Dubois", "Garcia", "Müller", "Tanaka", "Rossi", "Roche", "Polanco"]
AUTHOR_COUNTRIES = ["FR", "US", "DE", "JP", "IT", "ES"]
LANGUAGES = ["en", "en", "en", "fr", "de"]


@dataclass(frozen=True)
class CommunitySpec:
    name: str
    users: int
    docs: int

    @classmethod
    def parse(cls, text: str) -> "CommunitySpec":
        m = re.fullmatch(r"\s*([A-Za-z0-9_-]+)\s*:\s*(\d+)\s*[x×]\s*(\d+)\s*", text)
        if not m:
            raise ValueError(f"community spec must look like NAME:USERSxDOCS, got {text!r}")
        spec = cls(m.group(1), int(m.group(2)), int(m.group(3)))
        if spec.users < 1 or spec.docs < 1:
            raise ValueError("community needs at least one user and one document")
        return spec

    def __str__(self) -> str:
        return f"{self.name}:{self.users}x{self.docs}"


DEFAULT_COMMUNITIES = (CommunitySpec("A", 5, 8), CommunitySpec("B", 5, 8))


def _pick(rng: random.Random, weighted):
    values = [v for v, _ in weighted]
    weights = [w for _, w in weighted]
    return rng.choices(values, weights=weights, k=1)[0]


def _stamp(rng: random.Random, year: int) -> datetime:
    start = datetime(year, 1, 1, tzinfo=timezone.utc)
    span = int((datetime(year + 1, 1, 1, tzinfo=timezone.utc) - start).total_seconds())
    return start + timedelta(seconds=rng.randrange(span))


def generate(
    out_dir: str | Path,
    seed: int = 42,
    size: int = 2000,
    communities: tuple[CommunitySpec, ...] | None = None,
    overlap: int = 0,
    year: int = 2002,
) -> dict:
    """Write queries.log, displays.log, orders.log, biblio.jsonl, customers.csv and manifest.json.

    ``size`` is the number of background events (roughly half queries, a third
    displays, the rest orders).  ``size=0`` produces empty files and a manifest
    without communities.
    """
    if size < 0:
        raise ValueError("size must be non-negative")
    if overlap < 0:
        raise ValueError("overlap must be non-negative")
    communities = tuple(DEFAULT_COMMUNITIES if communities is None else communities)
    for c in communities:
        if overlap >= c.docs:
            raise ValueError(f"overlap {overlap} leaves community {c.name} no own documents")
    rng = random.Random(seed)
    table = default_tld_table()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    planted = communities if size > 0 else ()
    n_queries = size // 2
    n_displays = size // 3
    n_orders = size - n_queries - n_displays
    n_community_docs = sum(c.docs for c in planted) - overlap * max(0, len(planted) - 1)
    n_articles = (n_community_docs + n_orders + max(20, size // 4)) if size > 0 else 0

    biblio = []
    for n in range(n_articles):
        jt, pub_country, domain = rng.choices(JOURNALS, weights=JOURNAL_WEIGHTS, k=1)[0]
        n_auth = rng.randint(1, 3)
        biblio.append(BiblioRecord(
            record_id=f"R{n:06d}",
            title=" ".join(rng.sample(WORDS, 4)),
            authors=tuple(rng.sample(AUTHORS, n_auth)),
            author_countries=tuple(sorted(set(rng.choices(AUTHOR_COUNTRIES, k=rng.randint(0, n_auth))))),
            journal_title=jt,
            publication_year=rng.randint(year - 7, year),
            publishing_country=pub_country,
            scientific_domain=domain,
            document_type="article",
        ))
    doc_ids = [b.record_id for b in biblio]

    # planted communities take the first documents, consecutive ones sharing `overlap`
    manifest_communities = []
    customers: dict[str, tuple[str, str]] = {}
    orders: list[OrderRecord] = []
    cursor = 0
    for idx, c in enumerate(planted):
        start = cursor if idx == 0 else cursor - overlap
        docs = doc_ids[start:start + c.docs]
        cursor = start + c.docs
        users = [f"C{c.name}{u:03d}" for u in range(1, c.users + 1)]
        for u in users:
            customers[u] = (_pick(rng, CUSTOMER_COUNTRIES), _pick(rng, ACTIVITY_MIX))
            country, activity = customers[u]
            for d in docs:
                orders.append(OrderRecord(_stamp(rng, year), u, country, ACTIVITY_CODES[activity], d))
        manifest_communities.append({"name": c.name, "users": users, "documents": docs})

    background = doc_ids[cursor:]
    for n, d in enumerate(rng.sample(background, min(n_orders, len(background)))):
        cid = f"N{n:05d}"
        customers[cid] = (_pick(rng, CUSTOMER_COUNTRIES), _pick(rng, ACTIVITY_MIX))
        country, activity = customers[cid]
        orders.append(OrderRecord(_stamp(rng, year), cid, country, ACTIVITY_CODES[activity], d))

    n_users = max(1, size // 10)
    user_tlds = [_pick(rng, TLD_MIX) for _ in range(n_users)]
    queries = []
    for _ in range(n_queries):
        u = rng.randrange(n_users)
        tld = user_tlds[u]
        year_from = rng.choice([None, rng.randint(1985, year)])
        year_to = None if year_from is None else rng.randint(year_from, year)
        explored = rng.randint(1000, 3_500_000)
        queries.append(QueryRecord(
            timestamp=_stamp(rng, year),
            user_id=f"U{u:05d}",
            tld=tld,
            country=table.resolve(tld),
            language=rng.choice(LANGUAGES),
            journal_filter=tuple(j for j, _, _ in rng.sample(JOURNALS, rng.randint(0, 2))),
            year_from=year_from,
            year_to=year_to,
            author_query=rng.choice([None, None] + AUTHORS),
            title_words=tuple(rng.sample(WORDS, rng.randint(0, 2))),
            keywords=tuple(rng.sample(WORDS, rng.randint(0, 3))),
            n_explored=explored,
            n_retrieved=rng.randint(0, min(explored, 500)),
        ))
    displays = []
    for _ in range(n_displays if doc_ids else 0):
        u = rng.randrange(n_users)
        tld = user_tlds[u]
        d = doc_ids[min(int(rng.paretovariate(1.2)) - 1, len(doc_ids) - 1)] if rng.random() < 0.5 else rng.choice(doc_ids)
        displays.append(DisplayRecord(_stamp(rng, year), f"U{u:05d}", tld, table.resolve(tld), d))

    def write_lines(name: str, lines: list[str]) -> None:
        with open(out / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(line + "\n" for line in lines)

    key = lambda r: (r.timestamp, r.user_id, getattr(r, "record_id", ""))
    write_lines("queries.log", [format_query(q) for q in sorted(queries, key=key)])
    write_lines("displays.log", [format_display(d) for d in sorted(displays, key=key)])
    write_lines("orders.log", [format_order(o) for o in sorted(orders, key=key)])
    write_lines("biblio.jsonl", [dumps_line(b) for b in biblio])
    write_lines("customers.csv", ["customer_id,country,activity"] + [
        f"{cid},{country},{activity}" for cid, (country, activity) in sorted(customers.items())
    ])

    manifest = {
        "seed": seed,
        "size": size,
        "year": year,
        "overlap": overlap,
        "community_spec": [str(c) for c in communities] if size > 0 else [],
        "communities": manifest_communities,
        "country_mix": dict(TLD_MIX) if size > 0 else {},
        "journal_skew": {j: round(w, 6) for (j, _, _), w in zip(JOURNALS, JOURNAL_WEIGHTS)} if size > 0 else {},
        "counts": {
            "queries": len(queries),
            "displays": len(displays),
            "orders": len(orders),
            "biblio": len(biblio),
            "customers": len(customers),
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return manifest

"""Parsers for the query, display and order log streams.

Each log line is tab-separated and starts with a record-type tag::

    Q  timestamp  user_id  tld  lang  journals  year_from  year_to  author  title_words  keywords  n_explored  n_retrieved
    D  timestamp  user_id  tld  record_id
    O  timestamp  customer_id  country  activity  record_id

Multi-valued fields use ``|`` as separator.  Q and D lines may carry one extra
trailing column holding the client IP; it is only used to synthesize a user id
when the user column is empty.
"""
from __future__ import annotations

import csv
import hashlib
import io
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Union

log = logging.getLogger(__name__)

UNKNOWN = "UNKNOWN"

ACTIVITIES = (
    "commercial-firm",
    "research-institution",
    "higher-education",
    "hospital",
    "information-center",
    "private-person",
    "other",
)

ACTIVITY_CODES = {
    "COM": "commercial-firm",
    "RES": "research-institution",
    "EDU": "higher-education",
    "HOS": "hospital",
    "INF": "information-center",
    "PRI": "private-person",
    "OTH": "other",
}
_ACTIVITY_TO_CODE = {v: k for k, v in ACTIVITY_CODES.items()}

GENERIC_TLDS = frozenset({"com", "net", "org", "edu", "gov", "mil", "int", "info", "biz"})

Source = Union[str, Path, Iterable[str]]


class IngestError(Exception):
    """Fatal problem with a log source (unreadable, undecodable)."""


@dataclass(frozen=True)
class QueryRecord:
    timestamp: datetime
    user_id: str
    tld: str
    country: str
    language: str | None = None
    journal_filter: tuple[str, ...] = ()
    year_from: int | None = None
    year_to: int | None = None
    author_query: str | None = None
    title_words: tuple[str, ...] = ()
    keywords: tuple[str, ...] = ()
    n_explored: int = 0
    n_retrieved: int = 0

    def __post_init__(self) -> None:
        if self.n_explored < 0 or self.n_retrieved < 0:
            raise ValueError("negative count")
        if self.n_retrieved > self.n_explored:
            raise ValueError("count inversion")
        if self.year_from is not None and self.year_to is not None and self.year_from > self.year_to:
            raise ValueError("year range inversion")
        if not self.tld:
            raise ValueError("empty tld")


@dataclass(frozen=True)
class DisplayRecord:
    timestamp: datetime
    user_id: str
    tld: str
    country: str
    record_id: str

    def __post_init__(self) -> None:
        if not self.record_id:
            raise ValueError("missing record_id")


@dataclass(frozen=True)
class OrderRecord:
    timestamp: datetime
    customer_id: str
    customer_country: str
    customer_activity: str
    record_id: str

    def __post_init__(self) -> None:
        if not self.record_id:
            raise ValueError("missing record_id")
        if not self.customer_id:
            raise ValueError("missing customer_id")
        if self.customer_activity not in ACTIVITIES:
            raise ValueError(f"invalid activity {self.customer_activity!r}")

    @property
    def user_id(self) -> str:
        return self.customer_id


@dataclass(frozen=True)
class LineError:
    line_no: int
    reason: str
    line: str = ""

    def __str__(self) -> str:
        return f"line {self.line_no}: {self.reason}"


@dataclass
class ParseResult:
    records: list = field(default_factory=list)
    errors: list[LineError] = field(default_factory=list)
    warnings: list[LineError] = field(default_factory=list)

    def __iter__(self):
        # allows ``records, errors = parse_query_log(...)``
        return iter((self.records, self.errors))


# -- country resolution -------------------------------------------------------


class TldTable:
    """Suffix → ISO country code table with longest-suffix lookup."""

    def __init__(self, mapping: Mapping[str, str]):
        self.mapping = {k.strip().lower().strip("."): v.strip().upper() for k, v in mapping.items()}

    @classmethod
    def from_csv(cls, path: str | Path) -> "TldTable":
        with open(path, newline="", encoding="utf-8") as fh:
            return cls._read(fh)

    @classmethod
    def default(cls) -> "TldTable":
        text = resources.files("miriad").joinpath("data/tld_countries.csv").read_text(encoding="utf-8")
        return cls._read(io.StringIO(text))

    @classmethod
    def _read(cls, fh) -> "TldTable":
        reader = csv.DictReader(fh)
        return cls({row["suffix"]: row["country_code"] for row in reader if row.get("suffix")})

    def resolve(self, tld: str) -> str:
        return resolve_country(tld, self.mapping)


def resolve_country(tld: str, mapping: Mapping[str, str] | TldTable) -> str:
    """Country code for a host suffix such as ``edu.au``, else ``UNKNOWN``.

    Candidate suffixes are tried longest first on label boundaries, so a
    table entry for ``edu.au`` beats one for ``au``.  Bare generic TLDs never
    resolve, even when a table lists them.
    """
    if isinstance(mapping, TldTable):
        mapping = mapping.mapping
    labels = [p for p in tld.strip().lower().strip(".").split(".") if p]
    if not labels:
        return UNKNOWN
    for start in range(len(labels)):
        suffix = ".".join(labels[start:])
        if suffix in GENERIC_TLDS:
            continue
        code = mapping.get(suffix)
        if code and code != UNKNOWN:
            return code
    return UNKNOWN


_default_table: TldTable | None = None


def default_tld_table() -> TldTable:
    global _default_table
    if _default_table is None:
        _default_table = TldTable.default()
    return _default_table


# -- field helpers ------------------------------------------------------------


def parse_timestamp(text: str) -> datetime:
    """ISO-8601 to an aware UTC datetime truncated to the second."""
    ts = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S")


def _multi(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split("|") if v.strip())


def _opt_int(text: str, name: str) -> int | None:
    text = text.strip()
    if not text:
        return None
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"{name} is not an integer: {text!r}") from None


def _count(text: str, name: str) -> int:
    value = _opt_int(text, name)
    if value is None:
        raise ValueError(f"missing {name}")
    if value < 0:
        raise ValueError(f"negative {name}")
    return value


def _user_id(user: str, tld: str, extra: list[str], anon_key: str) -> str:
    if user:
        return user
    ip = extra[0].strip() if extra else ""
    if ip:
        return f"{tld}/{hashlib.sha1(ip.encode()).hexdigest()[:12]}"
    return anon_key


# -- line parsers -------------------------------------------------------------


def _split(line: str, tag: str, n_cols: int, extra: int = 0) -> list[str]:
    cols = line.split("\t")
    if cols[0] != tag:
        raise ValueError(f"unexpected record type {cols[0]!r}, expected {tag!r}")
    if not (n_cols <= len(cols) <= n_cols + extra):
        raise ValueError(f"expected {n_cols} columns, got {len(cols)}")
    return cols


def parse_query_line(line: str, table: TldTable, anon_key: str = "anon") -> QueryRecord:
    cols = _split(line, "Q", 13, extra=1)
    tld = cols[3].strip().lower().strip(".")
    if not tld:
        raise ValueError("missing tld")
    n_explored = _count(cols[11], "n_explored")
    n_retrieved = _count(cols[12], "n_retrieved")
    if n_retrieved > n_explored:
        raise ValueError("count inversion")
    year_from = _opt_int(cols[6], "year_from")
    year_to = _opt_int(cols[7], "year_to")
    if year_from is not None and year_to is not None and year_from > year_to:
        raise ValueError("year range inversion")
    return QueryRecord(
        timestamp=parse_timestamp(cols[1]),
        user_id=_user_id(cols[2].strip(), tld, cols[13:], anon_key),
        tld=tld,
        country=table.resolve(tld),
        language=cols[4].strip() or None,
        journal_filter=_multi(cols[5]),
        year_from=year_from,
        year_to=year_to,
        author_query=cols[8].strip() or None,
        title_words=_multi(cols[9]),
        keywords=_multi(cols[10]),
        n_explored=n_explored,
        n_retrieved=n_retrieved,
    )


def parse_display_line(line: str, table: TldTable, anon_key: str = "anon") -> DisplayRecord:
    cols = _split(line, "D", 5, extra=1)
    tld = cols[3].strip().lower().strip(".")
    if not tld:
        raise ValueError("missing tld")
    record_id = cols[4].strip()
    if not record_id:
        raise ValueError("missing record_id")
    return DisplayRecord(
        timestamp=parse_timestamp(cols[1]),
        user_id=_user_id(cols[2].strip(), tld, cols[5:], anon_key),
        tld=tld,
        country=table.resolve(tld),
        record_id=record_id,
    )


def parse_activity(code: str) -> tuple[str, bool]:
    """Map an activity code (or full name) to a sector; flag unknown codes."""
    key = code.strip()
    if key.upper() in ACTIVITY_CODES:
        return ACTIVITY_CODES[key.upper()], True
    if key.lower() in ACTIVITIES:
        return key.lower(), True
    return "other", False


def parse_order_line(line: str) -> tuple[OrderRecord, str | None]:
    cols = _split(line, "O", 6)
    customer_id = cols[2].strip()
    if not customer_id:
        raise ValueError("missing customer_id")
    record_id = cols[5].strip()
    if not record_id:
        raise ValueError("missing record_id")
    activity, known = parse_activity(cols[4])
    warning = None if known else f"unknown activity code {cols[4].strip()!r}, using 'other'"
    country = cols[3].strip().upper() or UNKNOWN
    rec = OrderRecord(
        timestamp=parse_timestamp(cols[1]),
        customer_id=customer_id,
        customer_country=country,
        customer_activity=activity,
        record_id=record_id,
    )
    return rec, warning


# -- stream drivers -----------------------------------------------------------


def _lines(source: Source) -> Iterator[str]:
    if isinstance(source, (str, Path)):
        try:
            with open(source, encoding="utf-8") as fh:
                yield from fh
        except (OSError, UnicodeDecodeError) as exc:
            raise IngestError(f"cannot read {source}: {exc}") from exc
    else:
        try:
            yield from source
        except UnicodeDecodeError as exc:
            raise IngestError(f"cannot decode log stream: {exc}") from exc


def _source_name(source: Source) -> str:
    return Path(source).name if isinstance(source, (str, Path)) else "stream"


def _parse(source: Source, handler) -> ParseResult:
    result = ParseResult()
    for line_no, raw in enumerate(_lines(source), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        try:
            rec, warning = handler(line, line_no)
        except ValueError as exc:
            result.errors.append(LineError(line_no, str(exc), line))
            continue
        if warning:
            log.warning("line %d: %s", line_no, warning)
            result.warnings.append(LineError(line_no, warning, line))
        result.records.append(rec)
    return result


def parse_query_log(source: Source, table: TldTable | None = None) -> ParseResult:
    table = table or default_tld_table()
    name = _source_name(source)
    return _parse(source, lambda line, n: (parse_query_line(line, table, f"anon:{name}:{n}"), None))


def parse_display_log(source: Source, table: TldTable | None = None) -> ParseResult:
    table = table or default_tld_table()
    name = _source_name(source)
    return _parse(source, lambda line, n: (parse_display_line(line, table, f"anon:{name}:{n}"), None))


def parse_order_log(source: Source) -> ParseResult:
    return _parse(source, lambda line, n: parse_order_line(line))


def parse_log(source: Source, table: TldTable | None = None) -> dict[str, ParseResult]:
    """Parse a file that may interleave Q, D and O lines.

    Returns one ParseResult per stream (``query``, ``display``, ``order``);
    lines with an unrecognised tag are reported under ``query``.
    """
    table = table or default_tld_table()
    name = _source_name(source)
    out = {"query": ParseResult(), "display": ParseResult(), "order": ParseResult()}
    kinds = {"Q": "query", "D": "display", "O": "order"}
    for line_no, raw in enumerate(_lines(source), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        tag = line.split("\t", 1)[0]
        kind = kinds.get(tag)
        if kind is None:
            out["query"].errors.append(LineError(line_no, f"unknown record type {tag!r}", line))
            continue
        result = out[kind]
        warning = None
        try:
            if kind == "query":
                rec = parse_query_line(line, table, f"anon:{name}:{line_no}")
            elif kind == "display":
                rec = parse_display_line(line, table, f"anon:{name}:{line_no}")
            else:
                rec, warning = parse_order_line(line)
        except ValueError as exc:
            result.errors.append(LineError(line_no, str(exc), line))
            continue
        if warning:
            log.warning("line %d: %s", line_no, warning)
            result.warnings.append(LineError(line_no, warning, line))
        result.records.append(rec)
    return out


# -- serialisation (inverse of the line parsers) ------------------------------


def _opt(value) -> str:
    return "" if value is None else str(value)


def format_query(rec: QueryRecord) -> str:
    return "\t".join([
        "Q",
        format_timestamp(rec.timestamp),
        rec.user_id,
        rec.tld,
        _opt(rec.language),
        "|".join(rec.journal_filter),
        _opt(rec.year_from),
        _opt(rec.year_to),
        _opt(rec.author_query),
        "|".join(rec.title_words),
        "|".join(rec.keywords),
        str(rec.n_explored),
        str(rec.n_retrieved),
    ])


def format_display(rec: DisplayRecord) -> str:
    return "\t".join(["D", format_timestamp(rec.timestamp), rec.user_id, rec.tld, rec.record_id])


def format_order(rec: OrderRecord) -> str:
    country = "" if rec.customer_country == UNKNOWN else rec.customer_country
    return "\t".join([
        "O",
        format_timestamp(rec.timestamp),
        rec.customer_id,
        country,
        _ACTIVITY_TO_CODE[rec.customer_activity],
        rec.record_id,
    ])


def format_record(rec) -> str:
    if isinstance(rec, QueryRecord):
        return format_query(rec)
    if isinstance(rec, DisplayRecord):
        return format_display(rec)
    if isinstance(rec, OrderRecord):
        return format_order(rec)
    raise TypeError(f"not a log record: {type(rec).__name__}")

"""Command line front end: ingest, import, stats, factors, co-usage, map, fixtures.

Exit codes: 0 success, 1 data error, 2 usage error.

Options can also come from an INI file given with ``--config``; keys live in a
``[miriad]`` section and use the long option names with dashes or
underscores (``store``, ``from``, ``to``, ``out``, ``periodicity``,
``dataset``, ``min-cluster-size``, ``max-cluster-size``,
``max-internal-associations``, ``association-floor``, ``tld-table``).
Command-line flags override the file.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .clustering import ClusteringResult, ClusterParams, cluster, cluster_dot, relevance, relevance_csv
from .cousage import DOCUMENT, USER, build_transactions, cooccurrence, equivalence
from .factors import UndefinedFactorError, factor_csv, factor_table
from .fixtures import CommunitySpec, generate
from .ingest import IngestError, TldTable, default_tld_table, parse_log
from .periods import PERIODICITIES, Period, as_utc, next_slot, slot_start
from .stats import DIMENSIONS, StatsEngine, check_pair, top_n, valid_pairs
from .store import Datastore, StoreError, read_biblio_jsonl, read_customers_csv
from .strategic import build_map, export_dot, export_svg

log = logging.getLogger("miriad")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# -- configuration ------------------------------------------------------------------

DEFAULTS = {
    "store": "store",
    "out": "out",
    "periodicity": "month,year",
    "dataset": "order",
    "min_cluster_size": "3",
    "max_cluster_size": "10",
    "max_internal_associations": "20",
    "association_floor": "0",
}


def _load_config(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    if not Path(path).exists():
        raise UsageError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise UsageError(f"bad config file {path}: {exc}") from exc
    if not parser.has_section("miriad"):
        raise UsageError(f"config file {path} has no [miriad] section")
    return {k.replace("-", "_"): v for k, v in parser.items("miriad")}


def _opt(args: argparse.Namespace, cfg: dict[str, str], name: str) -> str | None:
    value = getattr(args, name, None)
    if value is not None:
        return value
    return cfg.get(name, DEFAULTS.get(name))


def _period(args, cfg) -> Period | None:
    start, end = _opt(args, cfg, "from"), _opt(args, cfg, "to")
    if start is None and end is None:
        return None
    try:
        t0 = as_utc(start) if start else Period.everything().start
        t1 = as_utc(end) if end else Period.everything().end
        return Period(t0, t1)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _int(value: str, name: str) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise UsageError(f"{name} must be an integer, got {value!r}") from None


def _cluster_params(args, cfg) -> ClusterParams:
    try:
        return ClusterParams(
            min_cluster_size=_int(_opt(args, cfg, "min_cluster_size"), "min-cluster-size"),
            max_cluster_size=_int(_opt(args, cfg, "max_cluster_size"), "max-cluster-size"),
            max_internal_associations=_int(_opt(args, cfg, "max_internal_associations"), "max-internal-associations"),
            association_floor=float(_opt(args, cfg, "association_floor")),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _store(args, cfg) -> Datastore:
    try:
        return Datastore(_opt(args, cfg, "store"))
    except StoreError as exc:
        raise DataError(str(exc)) from exc


# -- commands -----------------------------------------------------------------------


def cmd_ingest(args, cfg) -> int:
    files = [Path(f) for f in args.files]
    missing = [str(f) for f in files if not f.is_file()]
    if missing:
        raise UsageError(f"no such file: {', '.join(missing)}")
    tld_path = _opt(args, cfg, "tld_table")
    table = TldTable.from_csv(tld_path) if tld_path else default_tld_table()
    ds = _store(args, cfg)
    total_errors = 0
    for f in files:
        try:
            results = parse_log(f, table)
        except IngestError as exc:
            raise DataError(str(exc)) from exc
        errors = [e for r in results.values() for e in r.errors]
        warnings = [w for r in results.values() for w in r.warnings]
        for e in sorted(errors, key=lambda e: e.line_no):
            print(f"{f.name}: {e}", file=sys.stderr)
        total_errors += len(errors)
        batches = {k: r.records for k, r in results.items() if r.records}
        duplicate = ds.has_batch(ds.batch_hash(batches))
        snap = ds.import_many(batches)
        counts = " ".join(f"{k}={len(r.records)}" for k, r in results.items())
        note = " (already imported)" if duplicate else ""
        print(f"{f.name}: {snap.snapshot_id}{note} {counts} errors={len(errors)} warnings={len(warnings)}")
    print(f"total errors: {total_errors}")
    return 0


def _cmd_import(args, cfg, reader, store_name: str) -> int:
    path = Path(args.file)
    if not path.is_file():
        raise UsageError(f"no such file: {path}")
    try:
        result = reader(path)
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    for e in result.errors:
        print(f"{path.name}: {e}", file=sys.stderr)
    ds = _store(args, cfg)
    try:
        snap = ds.import_records(result.records, store_name)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    print(f"{path.name}: {snap.snapshot_id} {store_name}={len(result.records)} errors={len(result.errors)}")
    return 0


def cmd_import_biblio(args, cfg) -> int:
    return _cmd_import(args, cfg, read_biblio_jsonl, "biblio")


def cmd_import_customers(args, cfg) -> int:
    return _cmd_import(args, cfg, read_customers_csv, "customer")


def _stats_range(engine: StatsEngine, period: Period | None) -> Period | None:
    if period is not None:
        return period
    stamps = [e.timestamp for ds in ("query", "display", "order") for e in engine.events(ds)]
    if not stamps:
        return None
    start = slot_start("year", min(stamps))
    return Period(start, next_slot("year", slot_start("year", max(stamps))))


def cmd_stats(args, cfg) -> int:
    periodicities = [p.strip() for p in _opt(args, cfg, "periodicity").split(",") if p.strip()]
    for p in periodicities:
        if p not in PERIODICITIES:
            raise UsageError(f"unknown periodicity {p!r} (choose from {', '.join(PERIODICITIES)})")
    pairs = valid_pairs()
    if args.dataset or args.dimension:
        try:
            if args.dataset and args.dimension:
                check_pair(args.dataset, args.dimension)
                pairs = [(args.dataset, args.dimension)]
            elif args.dataset:
                check_pair(args.dataset, DIMENSIONS.get(args.dataset, ("",))[0])
                pairs = [(args.dataset, d) for d in DIMENSIONS[args.dataset]]
            else:
                pairs = [(ds, dim) for ds, dim in valid_pairs() if dim == args.dimension]
                if not pairs:
                    raise ValueError(f"unknown dimension {args.dimension!r}")
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    if args.top is not None and args.top < 1:
        raise UsageError("--top must be at least 1")

    ds = _store(args, cfg)
    engine = StatsEngine(ds)
    period = _stats_range(engine, _period(args, cfg))
    if period is None:
        print("store is empty and no --from/--to given; nothing to compute")
        return 0
    out = Path(_opt(args, cfg, "out")) / "stats"
    for periodicity in periodicities:
        try:
            reports = engine.precompute(periodicity, period, pairs)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        for rep in reports:
            slot_dir = out / periodicity / rep.period.start.strftime("%Y-%m-%d")
            for dist in rep.distributions:
                if args.top:
                    dist = top_n(dist, args.top)
                _write(slot_dir / f"{dist.dataset}-{dist.dimension}.csv", dist.to_csv())
        print(f"{periodicity}: {len(reports)} reports")
    return 0


def cmd_factors(args, cfg) -> int:
    ds = _store(args, cfg)
    period = _period(args, cfg) or Period.everything()
    out = Path(_opt(args, cfg, "out")) / "factors"
    biblio = ds.load("biblio")
    kinds = ["WUF", "COF"] if args.kind == "both" else [args.kind.upper()]
    for kind in kinds:
        events = ds.enriched("display" if kind == "WUF" else "order")
        try:
            rows = factor_table(kind, events, period, biblio, journals=args.journal or None)
            if args.top:
                rows = rows[: args.top]
            _write(out / f"{kind.lower()}.csv", factor_csv(rows))
            if args.by_year:
                years = sorted({b.publication_year for b in biblio})
                for py in years:
                    held = {b.journal_title for b in biblio if b.publication_year == py}
                    wanted = args.journal or None
                    if wanted is None:
                        py_rows = factor_table(kind, events, period, biblio, publication_year=py)
                    else:
                        wanted = [j for j in wanted if j in held]
                        py_rows = factor_table(kind, events, period, biblio, journals=wanted, publication_year=py)
                    _write(out / f"{kind.lower()}_by_year" / f"{py}.csv", factor_csv(py_rows))
        except UndefinedFactorError as exc:
            raise DataError(str(exc)) from exc
        print(f"{kind}: {len(rows)} journals")
    return 0


def _write_clustering(out: Path, result: ClusteringResult, units, title: str) -> None:
    _write(out / "clusters.json", result.to_json())
    rel_rows = []
    for cl in result.clusters:
        _write(out / "clusters" / f"cluster_{cl.id:03d}.dot", cluster_dot(cl))
        rel_rows.extend(relevance(cl, units))
    _write(out / "relevance.csv", relevance_csv(rel_rows))
    smap = build_map(result.clusters)
    _write(out / "map.svg", export_svg(smap, title=title))
    _write(out / "map.dot", export_dot(smap))
    _write(out / "map.csv", smap.to_csv())


def cmd_cousage(args, cfg) -> int:
    params = _cluster_params(args, cfg)
    dataset = _opt(args, cfg, "dataset")
    if dataset not in ("order", "display"):
        raise UsageError(f"dataset must be 'order' or 'display', got {dataset!r}")
    ds = _store(args, cfg)
    period = _period(args, cfg)
    transactions = build_transactions(ds.load(dataset), period)
    if transactions.m == 0:
        print(f"no {dataset} transactions in the selected period; nothing written", file=sys.stderr)
        return 1
    out = Path(_opt(args, cfg, "out")) / "cousage"
    sides = (
        ("documents", DOCUMENT, transactions.users),
        ("users", USER, transactions.by_document()),
    )
    for name, kind, units in sides:
        assoc = equivalence(cooccurrence(transactions, kind))
        _write(out / name / "matrix.csv", assoc.to_csv())
        _write(out / name / "occurrences.csv", assoc.occurrences_csv())
        result = cluster(assoc, params)
        _write_clustering(out / name, result, units, title=f"{name} co-usage")
        print(f"{name}: {len(assoc.items)} items, {len(assoc)} pairs, {len(result.clusters)} clusters, "
              f"{len(result.unclustered)} unclustered")
    return 0


def cmd_map(args, cfg) -> int:
    path = Path(args.clusters)
    if not path.is_file():
        raise UsageError(f"no such file: {path}")
    try:
        result = ClusteringResult.from_json(path.read_text(encoding="utf-8"))
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read clusters from {path}: {exc}") from exc
    smap = build_map(result.clusters, args.x_split, args.y_split)
    out = Path(_opt(args, cfg, "out"))
    _write(out / "map.svg", export_svg(smap))
    _write(out / "map.dot", export_dot(smap))
    _write(out / "map.csv", smap.to_csv())
    print(f"map: {len(smap.points)} clusters, {len(smap.edges)} edges")
    return 0


def cmd_fixture(args, cfg) -> int:
    try:
        communities = tuple(CommunitySpec.parse(c) for c in args.community) if args.community else None
        manifest = generate(
            _opt(args, cfg, "out"),
            seed=args.seed,
            size=args.size,
            communities=communities,
            overlap=args.overlap,
            year=args.year,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    counts = " ".join(f"{k}={v}" for k, v in manifest["counts"].items())
    print(f"fixture seed={args.seed}: {counts}")
    return 0


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--store", help="store root directory (default: ./store)")
    common.add_argument("--from", dest="from", metavar="DATE", help="period start, inclusive (ISO date/time)")
    common.add_argument("--to", dest="to", metavar="DATE", help="period end, exclusive (ISO date/time)")
    common.add_argument("--out", help="output directory (default: ./out)")
    common.add_argument("--config", help="INI config file with a [miriad] section")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="miriad", description="Web usage statistics and co-usage analysis.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse Q/D/O log files into the store")
    p.add_argument("files", nargs="+")
    p.add_argument("--tld-table", dest="tld_table", help="CSV suffix,country_code table")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("import-biblio", parents=[common], help="import BIBLIO JSON Lines")
    p.add_argument("file")
    p.set_defaults(func=cmd_import_biblio)

    p = sub.add_parser("import-customers", parents=[common], help="import customer_id,country,activity CSV")
    p.add_argument("file")
    p.set_defaults(func=cmd_import_customers)

    p = sub.add_parser("stats", parents=[common], help="precompute STAT reports and CSV tables")
    p.add_argument("--periodicity", help="comma list of day,week,month,year (default: month,year)")
    p.add_argument("--dataset", help="restrict to query, display or order")
    p.add_argument("--dimension", help="restrict to one dimension")
    p.add_argument("--top", type=int, help="keep only the first N rows of each CSV table")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("factors", parents=[common], help="WUF / COF tables per journal")
    p.add_argument("--kind", choices=["wuf", "cof", "both"], default="both")
    p.add_argument("--journal", action="append", help="journal title (repeatable)")
    p.add_argument("--by-year", action="store_true", help="also write one table per publication year")
    p.add_argument("--top", type=int)
    p.set_defaults(func=cmd_factors)

    p = sub.add_parser("cousage", parents=[common], help="co-usage matrices, clusters and maps")
    p.add_argument("--dataset", help="order (default) or display")
    p.add_argument("--min-cluster-size", dest="min_cluster_size")
    p.add_argument("--max-cluster-size", dest="max_cluster_size")
    p.add_argument("--max-internal-associations", dest="max_internal_associations")
    p.add_argument("--association-floor", dest="association_floor")
    p.set_defaults(func=cmd_cousage)

    p = sub.add_parser("map", parents=[common], help="render a strategic diagram from clusters.json")
    p.add_argument("--clusters", required=True, help="clusters.json written by cousage")
    p.add_argument("--x-split", type=float, help="centrality boundary (default: median)")
    p.add_argument("--y-split", type=float, help="density boundary (default: median)")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("fixture", parents=[common], help="write synthetic logs with planted communities")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--size", type=int, default=2000, help="number of background events")
    p.add_argument("--community", action="append", help="NAME:USERSxDOCS (repeatable; default A:5x8 and B:5x8)")
    p.add_argument("--overlap", type=int, default=0, help="documents shared by consecutive communities")
    p.add_argument("--year", type=int, default=2002)
    p.set_defaults(func=cmd_fixture)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args.config)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"miriad {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, StoreError) as exc:
        print(f"miriad {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

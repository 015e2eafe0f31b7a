"""Acceptance criteria C1-C8, each at its stated tolerance and time budget.

The terminal summary prints one PASS/FAIL line per criterion (see conftest).
"""
import os
import random
import subprocess
import sys
import time
import xml.etree.ElementTree as ET
from collections import Counter
from itertools import combinations
from pathlib import Path

import pydot

from oracles import brute_cooccurrence, connected, filter_and_count
from synth import make_events
from test_clustering import check_relevance_bounds, random_matrix, random_params, scipy_single_link
from test_factors import JOURNALS5, YEARS4, _partition_fixture
from miriad.clustering import ClusterParams, cluster
from miriad.cousage import DOCUMENT, USER, TransactionSet, association_from_values, cooccurrence, equivalence
from miriad.factors import cof, cof_by_year, stored_count, wuf, wuf_by_year
from miriad.periods import Period, iter_slots
from miriad.stats import distribution, distribution_from_counts, valid_pairs
from miriad.store import enrich
from miriad.strategic import build_map, export_dot, export_svg, quadrant

from conftest import biblio, display, order

YEAR_2002 = Period.year(2002)
GOLDEN = Path(__file__).parent / "golden"


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.2f}s, budget {self.seconds}s"


# -- C1 -------------------------------------------------------------------------------------

def test_c1_published_tables_reproduced():
    with Budget(1.0):
        counts = {
            "commercial-firm": 38333, "research-institution": 20070, "higher-education": 8996,
            "other": 1625, "hospital": 769, "information-center": 736, "private-person": 679,
        }
        published = [53.8, 28.2, 12.6, 2.3, 1.1, 1.0, 0.9]
        dist = distribution_from_counts(counts, "order", "customer_activity")
        assert dist.total == 71208
        shown = [float(line.split(",")[-1]) for line in dist.to_csv(decimals=1).splitlines()[1:]]
        for got, want in zip(shown, published):
            assert abs(got - want) <= 0.05 + 1e-9, (got, want)

        macro = {f"M{i}": biblio(f"M{i}", journal="Macromolecules") for i in range(3086)}
        r = wuf(enrich([display(k) for k in macro], macro), "Macromolecules", YEAR_2002, round(3086 / 0.16))
        assert f"{float(r.value):.2f}" == "0.16"

        title = "Journal of applied polymer science"
        japs = {f"J{i}": biblio(f"J{i}", journal=title) for i in range(366)}
        r = cof(enrich([order(k) for k in japs], japs), title, YEAR_2002, round(366 / 0.022))
        assert f"{float(r.value):.3f}" == "0.022"


# -- C2 -------------------------------------------------------------------------------------

def test_c2_statistics_match_brute_force_oracle():
    with Budget(10.0):
        data = make_events(10_000, seed=7)
        assert sum(len(data[k]) for k in ("query", "display", "order")) == 10_000
        months = list(iter_slots("month", YEAR_2002))
        for ds, dim in valid_pairs():
            yearly = distribution(data[ds], ds, dim, YEAR_2002).counts()
            assert yearly == filter_and_count(data[ds], ds, dim, YEAR_2002.start, YEAR_2002.end), (ds, dim)
            summed = Counter()
            for m in months:
                summed.update(distribution(data[ds], ds, dim, m).counts())
            assert dict(summed) == yearly, (ds, dim)


# -- C3 -------------------------------------------------------------------------------------

def test_c3_cousage_matches_brute_force_oracle():
    with Budget(5.0):
        rng = random.Random(2024)
        fixtures = [{"u1": {"d1", "d2"}, "u2": {"d1", "d2"}, "u3": {"d1"}}]
        for _ in range(30):
            n_docs, n_users = rng.randint(1, 50), rng.randint(1, 50)
            docs = [f"d{i:02d}" for i in range(n_docs)]
            p = rng.uniform(0.02, 0.3)
            sets = {f"u{u:02d}": {d for d in docs if rng.random() < p} for u in range(n_users)}
            fixtures.append({u: s for u, s in sets.items() if s})
        for user_sets in fixtures:
            tx = TransactionSet({u: frozenset(s) for u, s in user_sets.items()})
            for kind in (DOCUMENT, USER):
                cooc = cooccurrence(tx, kind)
                e = equivalence(cooc)
                items, occ, C, E = brute_cooccurrence(user_sets, kind)
                assert len(items) <= 50
                assert list(e.items) == items and cooc.occurrences == occ and cooc.pairs == C
                for a in items:
                    for b in items:
                        v = e.get(a, b)
                        assert v == e.get(b, a) and 0.0 <= v <= 1.0
                        if a < b:
                            assert abs(v - E.get((a, b), 0.0)) <= 1e-9
                            assert abs(cooc.get(a, b) - C.get((a, b), 0)) == 0


# -- C4 -------------------------------------------------------------------------------------

def test_c4_clustering_properties():
    with Budget(60.0):
        for seed in range(200):
            rng = random.Random(seed)
            matrix = random_matrix(rng)
            params = random_params(rng)
            res = cluster(matrix, params)
            for cl in res.clusters:
                assert params.min_cluster_size <= cl.size <= params.max_cluster_size
                assert cl.n_internal <= params.max_internal_associations
                assert connected(cl.internal_items, [(i, j) for i, j, _ in cl.internal_associations])
                assert sum(cl.occurrences().values()) == 2 * (cl.n_internal + cl.n_external)
                assert all(0 < w <= 1 for w in cl.item_weights.values())
                check_relevance_bounds(cl, rng, list(matrix.items))

        for seed in range(20):
            rng = random.Random(500 + seed)
            blocks = [[f"a{k}" for k in range(5)], [f"b{k}" for k in range(5)]]
            values = {}
            for items in blocks:
                for a, b in combinations(items, 2):
                    values[(a, b)] = rng.uniform(0.5, 1.0)
            for a in blocks[0]:
                for b in blocks[1]:
                    if rng.random() < 0.3:
                        values[(a, b)] = rng.uniform(0.01, 0.1)
            got = sorted(c.internal_items for c in cluster(association_from_values(values)).clusters)
            assert got == [tuple(b) for b in blocks]

        for seed in range(50):
            rng = random.Random(1000 + seed)
            matrix = random_matrix(rng, rng.randint(2, 20))
            params = ClusterParams.unconstrained(len(matrix.items), max(1, len(matrix)))
            got = sorted(c.internal_items for c in cluster(matrix, params).clusters)
            assert got == scipy_single_link(matrix)


# -- C5 -------------------------------------------------------------------------------------

def test_c5_metrics_recomputed_from_association_lists():
    for seed in range(200):
        rng = random.Random(seed)
        res = cluster(random_matrix(rng), random_params(rng))
        for cl in res.clusters:
            internal = [v for _, _, v in cl.internal_associations]
            external = [v for _, _, v in cl.external_associations]
            density = sum(internal) / len(internal)
            centrality = sum(external) / len(external) if external else 0.0
            assert abs(cl.density - density) <= 1e-12
            assert abs(cl.centrality - centrality) <= 1e-12
            assert abs(cl.structural - centrality / density) <= 1e-12
            if not external:
                assert cl.centrality == 0.0
    pairs = [(a, b, 0.5) for a, b in combinations("abcd", 2)]
    (lone,) = cluster(association_from_values({(a, b): v for a, b, v in pairs})).clusters
    assert lone.centrality == 0.0 and lone.structural == 0.0


# -- C6 -------------------------------------------------------------------------------------

def test_c6_publication_year_partition():
    bib, displays, orders = _partition_fixture()
    assert len({b.journal_title for b in bib}) == 5 and {b.publication_year for b in bib} == set(YEARS4)
    for events, whole, part in ((displays, wuf, wuf_by_year), (orders, cof, cof_by_year)):
        for j in JOURNALS5:
            overall = whole(events, j, YEAR_2002, stored_count(bib, j))
            parts = [part(events, j, YEAR_2002, py, stored_count(bib, j, py)) for py in YEARS4]
            assert sum(p.numerator for p in parts) == overall.numerator
            assert sum(p.denominator for p in parts) == overall.denominator


# -- C7 -------------------------------------------------------------------------------------

def test_c7_map_quadrants_and_grammar():
    rng = random.Random(77)
    for _ in range(20):
        res = cluster(random_matrix(rng, 30), ClusterParams(2, 5, 8))
        smap = build_map(res.clusters)
        for p in smap.points:
            assert p.type == quadrant(p.x, p.y, smap.x_split, smap.y_split)
        svg, dot = export_svg(smap), export_dot(smap)
        assert svg == export_svg(build_map(res.clusters)) and dot == export_dot(build_map(res.clusters))
        ET.fromstring(svg.encode())
        assert pydot.graph_from_dot_data(dot)
    from test_strategic import _two_linked_clusters
    smap = build_map(_two_linked_clusters())
    # frozen outputs stand in for a second platform
    assert export_svg(smap) == (GOLDEN / "map.svg").read_text(encoding="utf-8")
    assert export_dot(smap) == (GOLDEN / "map.dot").read_text(encoding="utf-8")


# -- C8 -------------------------------------------------------------------------------------

def _pipeline(work: Path) -> None:
    env = dict(os.environ, PYTHONHASHSEED="random")
    fx, store, out = work / "fixture", work / "store", work / "out"

    def run(*args):
        proc = subprocess.run([sys.executable, "-m", "miriad", *args], cwd=work, env=env,
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr

    run("fixture", "--seed", "42", "--out", str(fx))
    run("ingest", str(fx / "queries.log"), str(fx / "displays.log"), str(fx / "orders.log"), "--store", "store")
    run("import-biblio", str(fx / "biblio.jsonl"), "--store", "store")
    run("import-customers", str(fx / "customers.csv"), "--store", "store")
    run("stats", "--store", "store", "--out", "out")
    run("factors", "--store", "store", "--out", "out", "--by-year")
    run("cousage", "--store", "store", "--out", "out")
    run("map", "--clusters", str(out / "cousage" / "documents" / "clusters.json"), "--out", "out/map")
    assert store.is_dir()


def _tree(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_c8_end_to_end_determinism(tmp_path):
    with Budget(120.0):
        for name in ("run1", "run2"):
            (tmp_path / name).mkdir()
            _pipeline(tmp_path / name)
        a, b = _tree(tmp_path / "run1"), _tree(tmp_path / "run2")
        assert sorted(a) == sorted(b)
        assert [k for k in a if a[k] != b[k]] == []
        assert any(k.startswith("out/cousage/documents/clusters/") for k in a)
        assert len([k for k in a if k.startswith("out/stats/month/")]) > 0

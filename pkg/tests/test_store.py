import json
from datetime import timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import biblio, display, order, utc
from miriad.ingest import QueryRecord
from miriad.store import (
    CorruptStoreError,
    CustomerRecord,
    Datastore,
    DuplicateKeyError,
    enrich,
    read_biblio_jsonl,
    read_customers_csv,
    select_records,
)


def query(ts, user="u"):
    return QueryRecord(ts, user, "fr", "FR", n_explored=10, n_retrieved=1)


def test_import_counts_and_idempotence(tmp_path):
    ds = Datastore(tmp_path)
    batch = [query(utc(2002, 1, d)) for d in (1, 2, 3)]
    snap = ds.import_records(batch, "query")
    assert snap.counts["query"] == 3
    again = ds.import_records(batch, "query")
    assert again.counts["query"] == 3
    assert again.snapshot_id == snap.snapshot_id
    assert len(ds.load("query")) == 3


def test_duplicate_biblio_key(tmp_path):
    ds = Datastore(tmp_path)
    ds.import_records([biblio("R1")], "biblio")
    with pytest.raises(DuplicateKeyError, match="duplicate key"):
        ds.import_records([biblio("R2"), biblio("R1", journal="Langmuir")], "biblio")
    with pytest.raises(DuplicateKeyError):
        ds.import_records([biblio("R3"), biblio("R3")], "biblio")
    assert [b.record_id for b in ds.load("biblio")] == ["R1"]


def test_wrong_record_type_rejected(tmp_path):
    with pytest.raises(TypeError):
        Datastore(tmp_path).import_records([display("R1")], "order")


def test_reopen_and_verify(tmp_path):
    ds = Datastore(tmp_path)
    snap = ds.import_records([display("R1"), display("R2")], "display")
    ds2 = Datastore(tmp_path)
    assert ds2.load("display") == ds.load("display")
    assert ds2.latest_snapshot() == snap
    assert snap.time_range == ("2002-03-01T00:00:00", "2002-03-01T00:00:00")


def test_tampering_detected(tmp_path):
    ds = Datastore(tmp_path)
    ds.import_records([display("R1")], "display")
    path = tmp_path / "display.jsonl"
    path.write_text(path.read_text().replace("R1", "R9"))
    with pytest.raises(CorruptStoreError):
        Datastore(tmp_path)


def test_uncommitted_tail_is_invisible_and_overwritten(tmp_path):
    ds = Datastore(tmp_path)
    ds.import_records([display("R1")], "display")
    with open(tmp_path / "display.jsonl", "a") as fh:
        fh.write('{"half": ')  # a writer died mid-batch
    reader = Datastore(tmp_path)
    assert [d.record_id for d in reader.load("display")] == ["R1"]
    reader.import_records([display("R2")], "display")
    assert [d.record_id for d in Datastore(tmp_path).load("display")] == ["R1", "R2"]


def test_old_snapshots_still_verify(tmp_path):
    ds = Datastore(tmp_path)
    first = ds.import_records([display("R1")], "display")
    ds.import_records([display("R2")], "display")
    ds.verify(first)


def test_snapshot_hash_is_content_defined(tmp_path):
    a = Datastore(tmp_path / "a").import_records([display("R1")], "display")
    b = Datastore(tmp_path / "b").import_records([display("R1")], "display")
    assert a.content_hash == b.content_hash


# -- enrich ----------------------------------------------------------------------------


def test_enrich_join_oracle(ten_biblio):
    index = {b.record_id: b for b in ten_biblio}
    events = [display(f"R{i}") for i in (0, 3, 7, 42)] + [order("R5"), order("nope")]
    out = enrich(events, index)
    assert len(out) == len(events)
    for ev, enr in zip(events, out):
        assert enr.event is ev
        expected = next((b for b in ten_biblio if b.record_id == ev.record_id), None)
        assert enr.biblio == expected
        assert enr.join_status == ("matched" if expected else "unmatched")
    assert out[0].biblio.journal_title == "Polymer"
    assert out[0].biblio.publication_year == 1998


def test_enrich_empty():
    assert enrich([], {}) == []


def test_customer_attributes_override_order_fields():
    cust = {"c1": CustomerRecord("c1", "BE", "hospital")}
    (ev,) = enrich([order("R1", customer="c1", country="FR")], {}, cust)
    assert ev.country == "BE" and ev.activity == "hospital"
    (plain,) = enrich([order("R1", customer="c2", country="FR")], {}, cust)
    assert plain.country == "FR" and plain.activity == "commercial-firm"


# -- select ----------------------------------------------------------------------------


def test_select_half_open(tmp_path):
    ds = Datastore(tmp_path)
    recs = [display(f"R{i}", ts=utc(2002, 1, 1) + timedelta(days=i)) for i in range(5)]
    ds.import_records(recs, "display")
    assert ds.select("display", utc(2001, 1, 1), utc(2003, 1, 1)) == recs
    assert ds.select("display", utc(2002, 1, 1), utc(2002, 1, 1)) == []
    assert ds.select("display", utc(2002, 1, 2), utc(2002, 1, 3)) == [recs[1]]
    with pytest.raises(ValueError, match="inverted"):
        ds.select("display", utc(2002, 1, 3), utc(2002, 1, 2))
    with pytest.raises(ValueError):
        ds.select("biblio", utc(2002, 1, 1), utc(2003, 1, 1))


def test_select_year_on_mixed_fixture():
    recs = [display(f"R{i}", ts=utc(2000 + i % 4, 1 + i % 12, 1 + i % 28)) for i in range(60)]
    got = select_records(recs, utc(2002, 1, 1), utc(2003, 1, 1))
    oracle = sum(1 for r in recs if r.timestamp.year == 2002)
    assert len(got) == oracle == 15


def test_select_ties_keep_input_order_and_filter():
    t = utc(2002, 1, 1)
    recs = [display("R2", ts=t + timedelta(hours=1)), display("R1", ts=t), display("R3", ts=t)]
    assert [r.record_id for r in select_records(recs, t, t + timedelta(days=1))] == ["R1", "R3", "R2"]
    got = select_records(recs, t, t + timedelta(days=1), lambda r: r.record_id != "R3")
    assert [r.record_id for r in got] == ["R1", "R2"]


stamps = st.lists(st.integers(0, 1000), max_size=40)


@settings(max_examples=50)
@given(stamps, st.integers(0, 1000), st.integers(0, 1000), st.integers(0, 1000))
def test_select_adjacent_periods_partition(offsets, a, b, c):
    a, b, c = sorted((a, b, c))
    base = utc(2002, 1, 1)
    recs = [display(f"R{i}", ts=base + timedelta(hours=o)) for i, o in enumerate(offsets)]
    t = [base + timedelta(hours=x) for x in (a, b, c)]
    left = select_records(recs, t[0], t[1])
    right = select_records(recs, t[1], t[2])
    whole = select_records(recs, t[0], t[2])
    assert left + right == whole
    assert len({id(r) for r in whole}) == len(whole)


# -- feed readers --------------------------------------------------------------------


def test_read_biblio_jsonl(tmp_path):
    good = {
        "record_id": "R1", "title": "t", "authors": ["A"], "author_countries": [],
        "journal_title": "Polymer", "publication_year": 2001, "publishing_country": "GB",
        "scientific_domain": "polymer science", "document_type": "article",
    }
    path = tmp_path / "b.jsonl"
    path.write_text(json.dumps(good) + "\n" + json.dumps({**good, "publication_year": 1200}) + "\n{}\n")
    res = read_biblio_jsonl(path)
    assert [b.record_id for b in res.records] == ["R1"]
    assert [e.line_no for e in res.errors] == [2, 3]


def test_read_customers_csv(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("customer_id,country,activity\nc1,fr,COM\nc2,,XYZ\n,FR,EDU\n")
    res = read_customers_csv(path)
    assert [(c.customer_id, c.country, c.activity) for c in res.records] == [
        ("c1", "FR", "commercial-firm"), ("c2", "UNKNOWN", "other")]
    assert len(res.errors) == 1 and len(res.warnings) == 1

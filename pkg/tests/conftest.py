import sys
from datetime import datetime, timezone
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from miriad.ingest import DisplayRecord, OrderRecord  # noqa: E402
from miriad.store import BiblioRecord  # noqa: E402


def utc(*args) -> datetime:
    return datetime(*args, tzinfo=timezone.utc)


def biblio(record_id, journal="Polymer", year=2000, authors=("Smith",), countries=("FR",), domain="polymer science"):
    return BiblioRecord(
        record_id=record_id,
        title=f"title {record_id}",
        authors=tuple(authors),
        author_countries=tuple(countries),
        journal_title=journal,
        publication_year=year,
        publishing_country="GB",
        scientific_domain=domain,
        document_type="article",
    )


def display(record_id, user="u1", ts=None, tld="fr", country="FR"):
    return DisplayRecord(ts or utc(2002, 3, 1), user, tld, country, record_id)


def order(record_id, customer="c1", ts=None, country="FR", activity="commercial-firm"):
    return OrderRecord(ts or utc(2002, 3, 1), customer, country, activity, record_id)


@pytest.fixture
def ten_biblio():
    journals = ["Polymer", "Langmuir"]
    return [biblio(f"R{i}", journal=journals[i % 2], year=1998 + i % 3) for i in range(10)]


# -- acceptance summary: one PASS/FAIL line per criterion --------------------------------

_ACCEPTANCE: dict[str, list] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        crit = name.split("_")[1].upper()  # test_c1_... -> C1
        entry = _ACCEPTANCE.setdefault(crit, [True, 0.0, name])
        entry[0] = entry[0] and report.outcome == "passed"
        entry[1] += report.duration


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_ACCEPTANCE, key=lambda c: int(c[1:])):
        ok, secs, name = _ACCEPTANCE[crit]
        terminalreporter.write_line(f"{crit} {'PASS' if ok else 'FAIL'}  {name}  ({secs:.2f}s)")

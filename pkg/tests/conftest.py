import pytest

from scriptclique.corpus import CorpusWriter, EMBEDDED, DOWNLOADED
from scriptclique.synthetic import planted_five


@pytest.fixture(scope="session")
def planted(tmp_path_factory):
    return planted_five(tmp_path_factory.mktemp("planted"))


@pytest.fixture
def small_corpus(tmp_path):
    """3 pages / 7 scripts with known content."""
    w = CorpusWriter(tmp_path / "corpus")
    ids_a = [
        w.add_script("a.com", b"var alpha = beta(gamma);", EMBEDDED).id,
        w.add_script("a.com", b"track(visitor, cookie);", DOWNLOADED, "https://cdn.t.net/t.js").id,
        w.add_script("a.com", b"function lonely() { return 1; }", EMBEDDED).id,
    ]
    ids_b = [
        w.add_script("b.org", b"var alpha = beta(gamma);", EMBEDDED).id,
        w.add_script("b.org", b"track(visitor, cookie);", DOWNLOADED, "https://cdn.t.net/t.js").id,
    ]
    ids_c = [
        w.add_script("c.net", b"x = 1", EMBEDDED).id,
        w.add_script("c.net", b"console.log('c only');", EMBEDDED).id,
    ]
    w.add_page("a.com", "https://www.a.com/", b"<html></html>", ids_a, fetched_at="2026-03-01T12:00:00Z")
    w.add_page("b.org", "https://b.org/", b"<html></html>", ids_b, fetched_at="2026-03-01T12:00:01Z")
    w.add_page("c.net", "https://c.net/", b"<html></html>", ids_c, fetched_at="2026-03-01T12:00:02Z")
    w.close()
    return tmp_path / "corpus"


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import pytest

from predcode.corpus import Corpus, Document
from predcode.synthetic import planted_corpus


def make_corpus(rows, name="toy"):
    """rows: (text, relevant, split) triples."""
    docs = [Document(f"doc{i:03d}", text, "relevant" if rel else "not_relevant", split)
            for i, (text, rel, split) in enumerate(rows)]
    return Corpus(docs, name=name)


@pytest.fixture
def toy_corpus():
    rows = [
        ("the white house statement on trade", True, "training"),
        ("white house press briefing trade policy", True, "training"),
        ("quarterly earnings call transcript", False, "training"),
        ("lunch menu for friday", False, "training"),
        ("office party friday evening", False, "training"),
        ("earnings guidance and quarterly outlook", False, "training"),
        ("trade policy memo from the white house", True, "validation"),
        ("friday lunch order", False, "validation"),
        ("quarterly earnings summary", False, "validation"),
        ("house trade briefing notes", True, "validation"),
    ]
    return make_corpus(rows)


@pytest.fixture(scope="session")
def small_planted():
    return planted_corpus(n_docs=300, prevalence=0.2, seed=7, vocabulary_size=400,
                          length=(10, 20), name="small-planted")


# one line per acceptance criterion, printed after the test run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])

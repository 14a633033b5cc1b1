import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from citerec.citeparse import AuthorityRecord  # noqa: E402
from citerec.synth import generate_corpus  # noqa: E402

DEGMETICH = AuthorityRecord(8, "Vet. App.", 208, 215, "CLA#6456776", "Degmetich v. Brown")


def write_fixture_corpus(directory: Path, n_docs: int = 150, seed: int = 3) -> dict:
    """Small synthetic corpus in which every fifth document also cites Degmetich."""
    corpus = generate_corpus(n_docs=n_docs, n_topics=5, clique_size=12, seed=seed)
    clash = [
        a for a in corpus.authorities
        if (a.volume, a.reporter) == (8, "Vet. App.") and a.first_page <= 215 and a.last_page >= 208
    ]
    assert not clash, "pick another seed: generated authority overlaps the fixture case"
    for i, rec in enumerate(corpus.records):
        if i % 5 == 0:
            rec["text"] += " The claim fails. Degmetich v. Brown, 8 Vet. App. 208 (1995)."
    corpus.authorities.append(DEGMETICH)
    corpus_path, auth_path = corpus.write(directory)
    config = {
        "corpus": str(corpus_path),
        "authorities": str(auth_path),
        "artifacts": str(directory / "artifacts"),
        "min_count": 2,
        "min_df": 3,
        "fusion_candidates": 20,
        "svm_epochs": 20,
    }
    config_path = directory / "config.json"
    config_path.write_text(json.dumps(config, indent=1), encoding="utf-8")
    return {"dir": directory, "config": config_path, "corpus": corpus_path, "authorities": auth_path}


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory):
    return write_fixture_corpus(tmp_path_factory.mktemp("fixture"))


# -- acceptance summary --------------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.failed):
        status = "PASS" if report.passed else "FAIL"
        previous = _CRITERIA.get(number)
        if previous is None or previous[1] == "PASS":
            _CRITERIA[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status = _CRITERIA[number]
        terminalreporter.write_line(f"{status} criterion {number}: {title}")

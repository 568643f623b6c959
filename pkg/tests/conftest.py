import time

import pytest

from helpers import DATA
from lstm_parser.conllx import load_corpus
from lstm_parser.parser import TrainConfig, train
from lstm_parser.representations import CHARS, LOOKUP, RepresentationConfig

# Toy overfitting runs: dev is the training set itself, patience never triggers,
# and training stops once dev UAS and LAS are both perfect.
OVERFIT_LR = 0.2


class Overfit:
    def __init__(self, model, history, seconds):
        self.model, self.history, self.seconds = model, history, seconds


def _overfit(path, mode, **kw):
    corpus = load_corpus(str(DATA / path))
    kw.setdefault("max_epochs", 50)
    config = TrainConfig(patience=kw["max_epochs"], learning_rate=OVERFIT_LR,
                         representation=RepresentationConfig(mode=mode), **kw)
    history = []
    start = time.perf_counter()
    model = train(corpus, corpus, config, history=history)
    return Overfit(model, history, time.perf_counter() - start)


@pytest.fixture(scope="session")
def overfit_toy():
    """Words and Chars models overfit to the 20-sentence toy corpus."""
    return {mode: _overfit("toy_train.conll", mode) for mode in (LOOKUP, CHARS)}


@pytest.fixture(scope="session")
def overfit_nonproj():
    """Models overfit to the corpus holding the crossing-arc sentence (no lr decay)."""
    return {mode: _overfit("toy_nonproj.conll", mode, max_epochs=100, decay=0.0) for mode in (LOOKUP, CHARS)}


@pytest.fixture(scope="session")
def overfit_words_labeled():
    """A Words model trained until it also reproduces every toy label."""
    return _overfit("toy_train.conll", LOOKUP, max_epochs=150)


# --- acceptance report: one PASS/FAIL line per criterion ------------------------------

_criteria: dict[int, tuple[str, str]] = {}
DETAILS: dict[int, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        if report.skipped:
            verdict = "SKIP"
            detail = str(report.longrepr[-1]) if isinstance(report.longrepr, tuple) else ""
        else:
            verdict = "PASS" if report.passed else "FAIL"
            detail = DETAILS.get(n, "")
        _criteria[n] = (verdict, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        verdict, detail = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d}: {verdict}  {detail}".rstrip())

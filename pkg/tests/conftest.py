import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from textanon.corpus import Sentence, Token  # noqa: E402

PROTEST_ROWS = [
    ("Thousands", "NNS", "O"),
    ("of", "IN", "O"),
    ("demonstrators", "NNS", "O"),
    ("have", "VBP", "O"),
    ("marched", "VBN", "O"),
    ("through", "IN", "O"),
    ("London", "NNP", "B-geo"),
    ("to", "TO", "O"),
    ("protest", "VB", "O"),
    ("the", "DT", "O"),
    ("war", "NN", "O"),
    ("in", "IN", "O"),
    ("Iraq", "NNP", "B-geo"),
]


def protest_csv(header=True):
    lines = ["Sentence #,Word,POS,Tag"] if header else []
    for i, (w, p, t) in enumerate(PROTEST_ROWS):
        lines.append(f"{'Sentence 1' if i == 0 else ''},{w},{p},{t}")
    return "\n".join(lines) + "\n"


@pytest.fixture
def protest_text():
    return protest_csv()


@pytest.fixture
def protest_sentence():
    return Sentence("Sentence 1", tuple(Token(w, p, t) for w, p, t in PROTEST_ROWS))


TOY_SENTENCES = [
    [("Thousands", "O"), ("marched", "O"), ("through", "O"), ("London", "B-geo"), (".", "O")],
    [("The", "O"), ("war", "O"), ("in", "O"), ("Iraq", "B-geo"), ("continued", "O"), (".", "O")],
    [("Protesters", "O"), ("in", "O"), ("London", "B-geo"), ("and", "O"), ("Iraq", "B-geo"), ("met", "O"), (".", "O")],
]


def toy_corpus_csv():
    lines = ["Sentence #,Word,POS,Tag"]
    for n, sent in enumerate(TOY_SENTENCES, start=1):
        for i, (w, t) in enumerate(sent):
            lines.append(f"{f'Sentence {n}' if i == 0 else ''},{w},,{t}")
    return "\n".join(lines) + "\n"


@pytest.fixture(scope="session")
def toy_model():
    """A CRF fitted to three sentences that tags London and Iraq as geo."""
    from textanon.corpus import Corpus
    from textanon.crf import TrainConfig, train
    from textanon.features import FeatureTemplateConfig, build_feature_index, encode_sentence

    corpus = Corpus.from_sentences(
        Sentence(f"S{n}", tuple(Token(w, None, t) for w, t in sent))
        for n, sent in enumerate(TOY_SENTENCES)
    )
    cfg = FeatureTemplateConfig(window=1)
    index = build_feature_index(corpus, cfg)
    encs = [encode_sentence(s, index, cfg, with_gold=True) for s in corpus]
    return train(encs, index, TrainConfig(epochs=60, batch_size=3, learning_rate=0.5, tolerance=0.0))


# -- acceptance summary ---------------------------------------------------

_acceptance = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        status = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"{status:5} {name}")

from __future__ import annotations

import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []

from topicbench import synthetic
from topicbench.corpus import build_corpus, preprocess_all


def corpus_from_preset(spec):
    raws, truth = synthetic.generate_any(spec)
    docs, _ = preprocess_all(raws)
    return build_corpus(docs), truth


@pytest.fixture(scope="session")
def small_corpus():
    corpus, _ = corpus_from_preset(synthetic.newsgroups_like(n_docs=300, seed=5))
    return corpus


@pytest.fixture(scope="session")
def blobs():
    """Three well-separated Gaussian blobs in 50 dimensions."""
    rng = np.random.default_rng(0)
    centers = rng.normal(scale=6.0, size=(3, 50))
    labels = np.repeat(np.arange(3), [170, 170, 160])
    points = centers[labels] + rng.normal(size=(labels.size, 50))
    return points, labels


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion; echoed again in the terminal summary."""
    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

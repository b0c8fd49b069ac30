"""NPMI topic coherence, topic diversity and outlier fraction."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

import numpy as np

from .corpus import Corpus
from .errors import TopicBenchError
from .topicrep import TopicModelOutput

DEFAULT_EPS = 1e-12


class TopicTooSmall(TopicBenchError):
    def __init__(self, topic_id: int):
        super().__init__(f"topic {topic_id} has fewer than two words")
        self.topic_id = topic_id


class CooccurrenceStats:
    """Boolean document-level (or sliding-window) presence counts.

    Each term maps to a bitmask of the documents containing it; pair counts
    are popcounts of mask intersections, computed lazily and memoised.
    """

    def __init__(self, n_docs: int, masks: dict[str, int]):
        self.n_docs = n_docs
        self._masks = masks
        self._pairs: dict[tuple[str, str], int] = {}

    def doc_freq(self, term: str) -> int:
        return self._masks.get(term, 0).bit_count()

    def pair_freq(self, a: str, b: str) -> int:
        key = (a, b) if a <= b else (b, a)
        hit = self._pairs.get(key)
        if hit is None:
            hit = (self._masks.get(a, 0) & self._masks.get(b, 0)).bit_count()
            self._pairs[key] = hit
        return hit

    def p(self, term: str) -> float:
        return self.doc_freq(term) / self.n_docs

    def p_joint(self, a: str, b: str) -> float:
        return self.pair_freq(a, b) / self.n_docs


def _windows(tokens, window: int | None) -> Iterable[tuple[str, ...]]:
    if window is None or len(tokens) <= window:
        yield tuple(tokens)
        return
    for start in range(len(tokens) - window + 1):
        yield tuple(tokens[start:start + window])


def build_cooccurrence(reference: Corpus | Iterable[Iterable[str]], window: int | None = None) -> CooccurrenceStats:
    docs = reference.documents if isinstance(reference, Corpus) else reference
    buckets: dict[str, list[int]] = {}
    n = 0
    for doc in docs:
        tokens = doc.tokens if hasattr(doc, "tokens") else tuple(doc)
        for win in _windows(tokens, window):
            for t in set(win):
                buckets.setdefault(t, []).append(n)
            n += 1
    if n == 0:
        raise TopicBenchError("reference corpus is empty")
    masks = {}
    for t, idx in buckets.items():
        bits = np.zeros(n, dtype=np.uint8)
        bits[idx] = 1
        masks[t] = int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little")
    return CooccurrenceStats(n, masks)


def npmi(p_i: float, p_j: float, p_ij: float, eps: float = DEFAULT_EPS) -> float:
    if p_i == 0.0 or p_j == 0.0:
        return -1.0
    joint = p_ij + eps
    if joint >= 1.0:
        return 1.0
    value = (math.log(joint) - math.log(p_i) - math.log(p_j)) / -math.log(joint)
    return min(1.0, max(-1.0, value))


def topic_coherence(words, stats: CooccurrenceStats, eps: float = DEFAULT_EPS) -> float:
    pairs = list(combinations(words, 2))
    return sum(npmi(stats.p(a), stats.p(b), stats.p_joint(a, b), eps) for a, b in pairs) / len(pairs)


def coherence_npmi(out: TopicModelOutput, stats: CooccurrenceStats, n: int = 5,
                   eps: float = DEFAULT_EPS) -> float:
    """Mean over topics of the mean pairwise NPMI among each topic's top-n words."""
    if not out.topics:
        raise TopicBenchError("no topics to evaluate")
    scores = []
    for t in out.topics:
        words = t.words[:n]
        if len(words) < 2:
            raise TopicTooSmall(t.topic_id)
        scores.append(topic_coherence(words, stats, eps))
    return sum(scores) / len(scores)


def diversity(out: TopicModelOutput, n: int = 5) -> float:
    if not out.topics:
        raise TopicBenchError("no topics to evaluate")
    unique: set[str] = set()
    total = 0
    for t in out.topics:
        words = t.words[:n]
        unique.update(words)
        total += len(words)
    return len(unique) / total if total else 0.0


@dataclass(frozen=True)
class EvalResult:
    tc: float
    td: float
    outlier_fraction: float
    n_topics_effective: int


def evaluate(out: TopicModelOutput, stats: CooccurrenceStats, n: int = 5,
             eps: float = DEFAULT_EPS) -> EvalResult:
    return EvalResult(coherence_npmi(out, stats, n, eps), diversity(out, n),
                      out.outlier_fraction, out.n_topics)

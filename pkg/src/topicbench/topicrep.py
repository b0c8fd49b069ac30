"""Class-based TF-IDF topic representations, topic-count reduction and ward hierarchies."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import TopicBenchError

NOISE = -1


class AllNoise(TopicBenchError):
    pass


class TargetExceedsTopics(TopicBenchError):
    pass


class TooFewTopics(TopicBenchError):
    pass


@dataclass(frozen=True)
class Topic:
    topic_id: int
    top_words: tuple[tuple[str, float], ...]
    size: int

    @property
    def words(self) -> list[str]:
        return [w for w, _ in self.top_words]


@dataclass(frozen=True, eq=False)
class TopicModelOutput:
    topics: tuple[Topic, ...]
    assignment: Mapping[str, int]
    n_requested: int | None = None
    model_tag: str = ""
    n_words: int = 5
    metadata: dict = field(default_factory=dict)

    @property
    def n_topics(self) -> int:
        return len(self.topics)

    @property
    def outlier_fraction(self) -> float:
        if not self.assignment:
            return 0.0
        return sum(1 for t in self.assignment.values() if t == NOISE) / len(self.assignment)

    def to_json(self) -> dict:
        return {
            "model_tag": self.model_tag,
            "topics": [
                {"id": t.topic_id, "size": t.size, "words": [[w, s] for w, s in t.top_words]}
                for t in self.topics
            ],
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")

    def write_assignment(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["doc_id", "label"])
            for doc_id, t in self.assignment.items():
                w.writerow([doc_id, t])


def read_topics_json(path: str | Path) -> TopicModelOutput:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    topics = tuple(
        Topic(int(t["id"]), tuple((w, float(s)) for w, s in t["words"]), int(t["size"]))
        for t in obj["topics"]
    )
    n_words = max((len(t.top_words) for t in topics), default=5)
    return TopicModelOutput(topics, {}, model_tag=obj.get("model_tag", ""), n_words=n_words)


@dataclass(frozen=True, eq=False)
class ClassTermMatrix:
    """Per-class term counts with their c-TF-IDF scores.

    Row ``c`` corresponds to class label ``c``; ``doc_labels`` maps each corpus
    document to its class, or -1 for noise.
    """

    tf: np.ndarray
    f_t: np.ndarray
    avg_words: float
    scores: np.ndarray
    terms: tuple[str, ...]
    doc_ids: tuple[str, ...]
    doc_labels: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.tf.shape[0]

    @property
    def sizes(self) -> np.ndarray:
        lab = self.doc_labels[self.doc_labels >= 0]
        return np.bincount(lab, minlength=self.n_classes)


def ctfidf_scores(tf: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """W[c, t] = tf[c, t] * log(1 + A / f_t) with A the mean word count per class."""
    f_t = tf.sum(axis=0)
    avg = float(tf.sum()) / tf.shape[0]
    with np.errstate(divide="ignore"):
        idf = np.where(f_t > 0, np.log1p(avg / np.where(f_t > 0, f_t, 1.0)), 0.0)
    return tf * idf[None, :], f_t, avg


def _from_counts(tf, terms, doc_ids, doc_labels) -> ClassTermMatrix:
    scores, f_t, avg = ctfidf_scores(tf)
    return ClassTermMatrix(tf, f_t, avg, scores, terms, doc_ids, doc_labels)


def ctfidf(corpus, assign) -> ClassTermMatrix:
    """Build the class-term matrix; documents labelled -1 never contribute counts."""
    labels = np.asarray(getattr(assign, "labels", assign), dtype=np.int64)
    if labels.shape[0] != len(corpus):
        raise TopicBenchError("assignment length does not match corpus")
    if not np.any(labels >= 0):
        raise AllNoise("every document is labelled as noise")
    uniq = np.unique(labels[labels >= 0])
    if not np.array_equal(uniq, np.arange(uniq.size)):
        raise TopicBenchError("non-noise labels must be contiguous from 0")
    tf = np.zeros((uniq.size, len(corpus.terms)), dtype=np.float64)
    for i, lab in enumerate(labels):
        if lab >= 0:
            np.add.at(tf[lab], corpus.token_ids(i), 1.0)
    return _from_counts(tf, corpus.terms, tuple(corpus.ids), labels)


def extract_topics(ctm: ClassTermMatrix, n: int = 5, model_tag: str = "",
                   n_requested: int | None = None) -> TopicModelOutput:
    """Top-n terms per class by score; topics ordered by size, largest first."""
    sizes = ctm.sizes
    order = sorted(range(ctm.n_classes), key=lambda c: (-sizes[c], c))
    remap = {old: new for new, old in enumerate(order)}
    term_ids = np.arange(len(ctm.terms))
    topics = []
    for new, old in enumerate(order):
        present = np.flatnonzero(ctm.tf[old] > 0)
        ranked = present[np.lexsort((term_ids[present], -ctm.scores[old, present]))][:n]
        words = tuple((ctm.terms[t], float(ctm.scores[old, t])) for t in ranked)
        topics.append(Topic(new, words, int(sizes[old])))
    assignment = {d: (remap[int(l)] if l >= 0 else NOISE) for d, l in zip(ctm.doc_ids, ctm.doc_labels)}
    return TopicModelOutput(tuple(topics), assignment, n_requested, model_tag, n)


def _unit_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    return m / np.where(norms > 0, norms, 1.0)


def reduce_classes(ctm: ClassTermMatrix, target: int) -> ClassTermMatrix:
    """Repeatedly fold the smallest class into its most cosine-similar class."""
    if target < 1:
        raise TargetExceedsTopics("target topic count must be >= 1")
    if target > ctm.n_classes:
        raise TargetExceedsTopics(f"target {target} exceeds current topic count {ctm.n_classes}")
    tf = ctm.tf.copy()
    labels = ctm.doc_labels.copy()
    alive = list(range(ctm.n_classes))
    sizes = {c: int(s) for c, s in enumerate(ctm.sizes)}
    scores = ctm.scores
    while len(alive) > target:
        # smallest class; ties resolved toward the later (higher) label
        smallest = max(alive, key=lambda c: (-sizes[c], c))
        others = [c for c in alive if c != smallest]
        unit = _unit_rows(scores[alive])
        pos = {c: i for i, c in enumerate(alive)}
        sims = unit[[pos[c] for c in others]] @ unit[pos[smallest]]
        best = others[int(np.argmax(sims))]
        tf[best] += tf[smallest]
        tf[smallest] = 0.0
        labels[labels == smallest] = best
        sizes[best] += sizes.pop(smallest)
        alive.remove(smallest)
        full = np.zeros_like(tf)
        sub_scores, _, _ = ctfidf_scores(tf[alive])
        full[alive] = sub_scores
        scores = full
    remap = {old: new for new, old in enumerate(alive)}
    new_labels = np.array([remap[int(l)] if l >= 0 else NOISE for l in labels], dtype=np.int64)
    return _from_counts(tf[alive], ctm.terms, ctm.doc_ids, new_labels)


def reduce_topics(out: TopicModelOutput, ctm: ClassTermMatrix, target: int) -> TopicModelOutput:
    if target > out.n_topics:
        raise TargetExceedsTopics(f"target {target} exceeds current topic count {out.n_topics}")
    if target == out.n_topics:
        return out
    reduced = reduce_classes(ctm, target)
    return extract_topics(reduced, out.n_words, out.model_tag, out.n_requested)


@dataclass(frozen=True, eq=False)
class TopicHierarchy:
    merges: tuple[tuple[int, int, float, int], ...]
    metadata: dict = field(default_factory=lambda: {"topic_vectors": "ctfidf", "base_distance": "cosine",
                                                    "linkage": "ward"})

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["left", "right", "distance", "size"])
            for left, right, dist, size in self.merges:
                w.writerow([left, right, repr(float(dist)), size])

    def linkage_matrix(self) -> np.ndarray:
        return np.array(self.merges, dtype=np.float64)


def cosine_distance_matrix(vectors: np.ndarray) -> np.ndarray:
    unit = _unit_rows(vectors)
    return np.clip(1.0 - unit @ unit.T, 0.0, 2.0)


def hierarchy(ctm: ClassTermMatrix | np.ndarray) -> TopicHierarchy:
    """Ward agglomeration on cosine distances, updated with the Lance-Williams formula.

    Leaves are 0..K-1; the i-th merge creates node K + i.
    """
    vectors = ctm.scores if isinstance(ctm, ClassTermMatrix) else np.asarray(ctm, dtype=np.float64)
    k = vectors.shape[0]
    if k < 2:
        raise TooFewTopics("need at least two topics for a hierarchy")
    dist = {}
    base = cosine_distance_matrix(vectors)
    for i in range(k):
        for j in range(i + 1, k):
            dist[(i, j)] = float(base[i, j])
    size = {i: 1 for i in range(k)}
    active = list(range(k))
    merges = []
    for step in range(k - 1):
        (i, j), d = min(dist.items(), key=lambda kv: (kv[1], kv[0]))
        new = k + step
        ni, nj = size[i], size[j]
        active.remove(i)
        active.remove(j)
        for m in active:
            nm = size[m]
            dim = dist[(min(i, m), max(i, m))]
            djm = dist[(min(j, m), max(j, m))]
            dist[(m, new)] = ((ni + nm) * dim + (nj + nm) * djm - nm * d) / (ni + nj + nm)
        dist = {key: v for key, v in dist.items() if i not in key and j not in key}
        size[new] = ni + nj
        active.append(new)
        merges.append((i, j, d, ni + nj))
    return TopicHierarchy(tuple(merges))

"""Document ingestion, normalization, vocabulary building and length-band sampling."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import TopicBenchError

_NON_ALPHA = re.compile(r"[^a-z]+")
PLACEHOLDERS = frozenset({"", "-", "none", "n/a", "."})


class Rejected(TopicBenchError):
    """Raised by :func:`preprocess` when a document carries no usable text."""

    def __init__(self, reason: str, doc_id: str | None = None):
        super().__init__(f"document {doc_id!r} rejected: {reason}")
        self.reason = reason
        self.doc_id = doc_id


class EmptyCollection(TopicBenchError):
    pass


class InsufficientDocuments(TopicBenchError):
    def __init__(self, available: int, requested: int):
        super().__init__(f"only {available} documents available in band, {requested} requested")
        self.available = available
        self.requested = requested


class MalformedInput(TopicBenchError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}: line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class RawDocument:
    id: str
    text: str
    group: str | None = None


@dataclass(frozen=True)
class Document:
    id: str
    tokens: tuple[str, ...]
    group: str | None = None

    @property
    def length(self) -> int:
        return len(self.tokens)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class StopwordList:
    words: frozenset[str]
    source_name: str = "custom"

    def __contains__(self, word: str) -> bool:
        return word in self.words

    @classmethod
    def default(cls) -> StopwordList:
        text = resources.files("topicbench").joinpath("data/stopwords_en.txt").read_text("utf-8")
        return cls.from_lines(text.splitlines(), source_name="stopwords_en")

    @classmethod
    def from_file(cls, path: str | Path) -> StopwordList:
        path = Path(path)
        return cls.from_lines(path.read_text("utf-8").splitlines(), source_name=path.name)

    @classmethod
    def from_lines(cls, lines: Iterable[str], source_name: str = "custom") -> StopwordList:
        return cls(frozenset(w.strip().lower() for w in lines if w.strip()), source_name)


@dataclass(frozen=True, eq=False)
class Corpus:
    """Immutable collection of preprocessed documents with vocabulary statistics.

    Term ids follow sorted term order, so two corpora over the same token set
    share ids.
    """

    documents: tuple[Document, ...]
    vocabulary: dict[str, int]
    doc_frequency: np.ndarray
    terms: tuple[str, ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def __getitem__(self, i: int) -> Document:
        return self.documents[i]

    @property
    def ids(self) -> list[str]:
        return [d.id for d in self.documents]

    @property
    def lengths(self) -> np.ndarray:
        return np.array([d.length for d in self.documents], dtype=np.int64)

    def token_ids(self, i: int) -> np.ndarray:
        v = self.vocabulary
        return np.fromiter((v[t] for t in self.documents[i].tokens), dtype=np.int64)

    def groups(self) -> list[str]:
        return sorted({d.group for d in self.documents if d.group is not None})

    def subset(self, indices: Sequence[int]) -> Corpus:
        return build_corpus([self.documents[i] for i in indices])

    def filter_group(self, group: str) -> Corpus:
        return build_corpus([d for d in self.documents if d.group == group])


def clean_text(text: str) -> str:
    return _NON_ALPHA.sub(" ", text.lower()).strip()


def preprocess(raw: RawDocument, stopwords: StopwordList | None = None,
               remove_stopwords: bool = True) -> Document:
    """Lowercase, strip non-alphabetic runs, split and optionally drop stopwords.

    Raises :class:`Rejected` when nothing useful is left.
    """
    if raw.text is None or raw.text.strip().lower() in PLACEHOLDERS:
        raise Rejected("empty", raw.id)
    cleaned = clean_text(raw.text)
    if cleaned in PLACEHOLDERS:
        raise Rejected("empty after cleaning", raw.id)
    tokens = cleaned.split()
    if remove_stopwords:
        if stopwords is None:
            stopwords = StopwordList.default()
        tokens = [t for t in tokens if t not in stopwords.words]
    if not tokens:
        raise Rejected("no tokens after stopword removal", raw.id)
    return Document(raw.id, tuple(tokens), raw.group)


def preprocess_all(raws: Iterable[RawDocument], stopwords: StopwordList | None = None,
                   remove_stopwords: bool = True) -> tuple[list[Document], list[Rejected]]:
    if remove_stopwords and stopwords is None:
        stopwords = StopwordList.default()
    kept, rejected = [], []
    for raw in raws:
        try:
            kept.append(preprocess(raw, stopwords, remove_stopwords))
        except Rejected as exc:
            rejected.append(exc)
    return kept, rejected


def build_corpus(docs: Sequence[Document], min_df: int = 1) -> Corpus:
    if not docs:
        raise EmptyCollection("empty corpus: no documents to build from")
    seen: set[str] = set()
    for d in docs:
        if d.id in seen:
            raise TopicBenchError(f"duplicate document id {d.id!r}")
        seen.add(d.id)
    if min_df > 1:
        counts: dict[str, int] = {}
        for d in docs:
            for t in set(d.tokens):
                counts[t] = counts.get(t, 0) + 1
        keep = {t for t, c in counts.items() if c >= min_df}
        pruned = []
        for d in docs:
            toks = tuple(t for t in d.tokens if t in keep)
            if toks:
                pruned.append(Document(d.id, toks, d.group))
        if not pruned:
            raise EmptyCollection(f"empty corpus: no document survives min_df={min_df}")
        docs = pruned
    terms = tuple(sorted({t for d in docs for t in d.tokens}))
    vocabulary = {t: i for i, t in enumerate(terms)}
    df = np.zeros(len(terms), dtype=np.int64)
    for d in docs:
        for t in set(d.tokens):
            df[vocabulary[t]] += 1
    return Corpus(tuple(docs), vocabulary, df, terms)


def sample_by_length(corpus: Corpus, min_len: int, max_len: int, n: int, seed: int) -> Corpus:
    """Uniform sample without replacement of ``n`` documents whose length is in the band.

    Selected documents keep their original corpus order.
    """
    band = np.flatnonzero((corpus.lengths >= min_len) & (corpus.lengths <= max_len))
    if n > band.size:
        raise InsufficientDocuments(int(band.size), n)
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(band, size=n, replace=False))
    return corpus.subset(chosen.tolist())


# -- file formats -------------------------------------------------------------

def _read_jsonl(path: str | Path):
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedInput(path, lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict) or "id" not in obj:
                raise MalformedInput(path, lineno, "expected an object with an 'id' field")
            yield lineno, obj


def read_raw_jsonl(path: str | Path) -> list[RawDocument]:
    out = []
    for lineno, obj in _read_jsonl(path):
        text = obj.get("text")
        if text is not None and not isinstance(text, str):
            raise MalformedInput(path, lineno, "'text' must be a string")
        out.append(RawDocument(str(obj["id"]), text or "", obj.get("group")))
    return out


def write_raw_jsonl(docs: Iterable[RawDocument], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps({"id": d.id, "text": d.text, "group": d.group}, ensure_ascii=False))
            fh.write("\n")


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in corpus.documents:
            fh.write(json.dumps({"id": d.id, "tokens": list(d.tokens), "group": d.group},
                                ensure_ascii=False))
            fh.write("\n")


def read_corpus(path: str | Path) -> Corpus:
    docs = []
    for lineno, obj in _read_jsonl(path):
        toks = obj.get("tokens")
        if not isinstance(toks, list) or not toks or not all(isinstance(t, str) for t in toks):
            raise MalformedInput(path, lineno, "'tokens' must be a non-empty list of strings")
        docs.append(Document(str(obj["id"]), tuple(toks), obj.get("group")))
    return build_corpus(docs)

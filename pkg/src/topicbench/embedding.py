"""Document embeddings: file loading/saving and a hashed random-projection fallback."""

from __future__ import annotations

import csv
import hashlib
import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .corpus import Corpus
from .errors import TopicBenchError

MAGIC = b"TFE1"


class EmbeddingError(TopicBenchError):
    pass


class IdMismatch(EmbeddingError):
    def __init__(self, missing_ids: Sequence[str]):
        shown = ", ".join(list(missing_ids)[:5])
        super().__init__(f"{len(missing_ids)} corpus ids missing from embedding file ({shown}...)")
        self.missing_ids = list(missing_ids)


class MalformedFile(EmbeddingError):
    def __init__(self, offset: int, message: str):
        super().__init__(f"malformed embedding file at offset {offset}: {message}")
        self.offset = offset


class DimensionZero(EmbeddingError):
    pass


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    vectors: np.ndarray
    doc_ids: tuple[str, ...]
    provenance: str = "unknown"

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.doc_ids):
            raise EmbeddingError("row count does not match doc_ids")
        if not np.all(np.isfinite(self.vectors)):
            raise EmbeddingError("embedding contains non-finite entries")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def rows(self, indices: Sequence[int]) -> EmbeddingMatrix:
        idx = np.asarray(indices, dtype=np.int64)
        return EmbeddingMatrix(self.vectors[idx], tuple(self.doc_ids[i] for i in idx), self.provenance)

    def aligned_to(self, corpus: Corpus) -> EmbeddingMatrix:
        """Reorder (and subset) rows to follow the corpus document order."""
        index = {d: i for i, d in enumerate(self.doc_ids)}
        missing = [d for d in corpus.ids if d not in index]
        if missing:
            raise IdMismatch(missing)
        return self.rows([index[d] for d in corpus.ids])


@dataclass(frozen=True)
class FallbackEmbedderConfig:
    dim: int = 256
    seed: int = 0
    weighting: Literal["tf", "tf-idf"] = "tf-idf"

    def __post_init__(self):
        if self.dim < 2:
            raise EmbeddingError("fallback dim must be >= 2")
        if self.weighting not in ("tf", "tf-idf"):
            raise EmbeddingError(f"unknown weighting {self.weighting!r}")


@lru_cache(maxsize=200_000)
def _term_direction(term: str, seed: int, dim: int) -> np.ndarray:
    digest = hashlib.blake2b(f"{seed}\x1f{term}".encode("utf-8"), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    signs = rng.integers(0, 2, size=dim, dtype=np.int8) * 2 - 1
    out = signs.astype(np.float64) / math.sqrt(dim)
    out.flags.writeable = False
    return out


def fallback_embed(corpus: Corpus, cfg: FallbackEmbedderConfig = FallbackEmbedderConfig()) -> EmbeddingMatrix:
    """Embed each document as a unit-length sign random projection of its bag of words.

    The direction of each term depends only on (term, seed), so adding
    vocabulary never moves existing term directions.
    """
    if len(corpus) == 0:
        raise EmbeddingError("empty corpus")
    n_docs = len(corpus)
    idf = None
    if cfg.weighting == "tf-idf":
        idf = np.log((1.0 + n_docs) / (1.0 + corpus.doc_frequency)) + 1.0
    proj = np.stack([_term_direction(t, cfg.seed, cfg.dim) for t in corpus.terms])
    out = np.empty((n_docs, cfg.dim), dtype=np.float64)
    for i, doc in enumerate(corpus.documents):
        ids, counts = np.unique(corpus.token_ids(i), return_counts=True)
        w = counts.astype(np.float64)
        if idf is not None:
            w = w * idf[ids]
        v = w @ proj[ids]
        out[i] = v / np.linalg.norm(v)
    return EmbeddingMatrix(out, tuple(corpus.ids), "fallback")


# -- file formats -------------------------------------------------------------

def save_binary(emb: EmbeddingMatrix, path: str | Path) -> None:
    """Write the TFE1 binary format; the provenance tag is stored as a trailing string."""
    n, dim = emb.vectors.shape
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", n, dim))
        fh.write(np.ascontiguousarray(emb.vectors, dtype="<f4").tobytes())
        for doc_id in emb.doc_ids:
            raw = doc_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        tag = emb.provenance.encode("utf-8")
        fh.write(struct.pack("<I", len(tag)))
        fh.write(tag)


def _read_binary(path: Path) -> EmbeddingMatrix:
    buf = path.read_bytes()
    if buf[:4] != MAGIC:
        raise MalformedFile(0, "bad magic")
    if len(buf) < 12:
        raise MalformedFile(4, "truncated header")
    n, dim = struct.unpack_from("<II", buf, 4)
    if dim == 0:
        raise DimensionZero("embedding dimension is zero")
    off = 12
    end = off + 4 * n * dim
    if len(buf) < end:
        raise MalformedFile(off, "truncated payload")
    vectors = np.frombuffer(buf, dtype="<f4", count=n * dim, offset=off).reshape(n, dim).astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(vectors.ravel()))
    if bad.size:
        raise MalformedFile(off + 4 * int(bad[0]), "non-finite value")
    off = end
    ids = []
    for _ in range(n):
        if len(buf) < off + 4:
            raise MalformedFile(off, "truncated id table")
        (length,) = struct.unpack_from("<I", buf, off)
        off += 4
        if len(buf) < off + length:
            raise MalformedFile(off, "truncated id string")
        try:
            ids.append(buf[off:off + length].decode("utf-8"))
        except UnicodeDecodeError:
            raise MalformedFile(off, "id is not valid UTF-8") from None
        off += length
    provenance = path.name
    if len(buf) >= off + 4:
        (length,) = struct.unpack_from("<I", buf, off)
        if len(buf) >= off + 4 + length:
            provenance = buf[off + 4:off + 4 + length].decode("utf-8", errors="replace")
    if dim < 2:
        raise MalformedFile(8, "dimension must be at least 2")
    if len(set(ids)) != len(ids):
        raise MalformedFile(end, "duplicate ids")
    return EmbeddingMatrix(vectors, tuple(ids), provenance)


def _read_csv(path: Path) -> EmbeddingMatrix:
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "id":
            raise MalformedFile(0, "CSV header must start with 'id'")
        dim = len(header) - 1
        if dim == 0:
            raise DimensionZero("embedding dimension is zero")
        if header[1:] != [f"v{i}" for i in range(dim)]:
            raise MalformedFile(0, "CSV header must be id,v0,...,v{dim-1}")
        ids, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != dim + 1:
                raise MalformedFile(lineno, f"expected {dim + 1} fields")
            try:
                vals = [float(x) for x in row[1:]]
            except ValueError:
                raise MalformedFile(lineno, "non-numeric value") from None
            if not all(math.isfinite(v) for v in vals):
                raise MalformedFile(lineno, "non-finite value")
            ids.append(row[0])
            rows.append(vals)
    if dim < 2:
        raise MalformedFile(0, "dimension must be at least 2")
    vectors = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    return EmbeddingMatrix(vectors, tuple(ids), path.name)


def read_embeddings(path: str | Path) -> EmbeddingMatrix:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _read_csv(path)
    return _read_binary(path)


def load_embeddings(path: str | Path, corpus: Corpus) -> EmbeddingMatrix:
    """Load an embedding file and align its rows with ``corpus``.

    Ids present in the file but absent from the corpus are ignored, which lets
    one embedding file serve any sample drawn from the corpus it was built for.
    """
    return read_embeddings(path).aligned_to(corpus)


def save_csv(emb: EmbeddingMatrix, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id"] + [f"v{i}" for i in range(emb.dim)])
        for doc_id, row in zip(emb.doc_ids, emb.vectors):
            w.writerow([doc_id] + [repr(float(x)) for x in row])

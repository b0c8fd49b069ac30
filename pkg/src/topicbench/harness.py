"""Experiment orchestration: model comparison, document length, outlier sweep, non-outlier re-runs."""

from __future__ import annotations

import logging
import os
import statistics
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cluster import HdbscanParams, KMeansParams, hdbscan, kmeans
from .config import ExperimentSpec
from .corpus import Corpus, StopwordList, build_corpus, preprocess_all, read_corpus, read_raw_jsonl, sample_by_length
from .embedding import EmbeddingMatrix, FallbackEmbedderConfig, fallback_embed, load_embeddings
from .errors import TopicBenchError
from .lda import LdaParams, lda_fit
from .metrics import CooccurrenceStats, EvalResult, build_cooccurrence, evaluate
from .reduce import UmapParams, umap_reduce
from .topicrep import AllNoise, TopicModelOutput, ctfidf, extract_topics, reduce_topics

log = logging.getLogger(__name__)

ALL = "all"


@dataclass(frozen=True)
class ReportRow:
    model: str
    corpus: str
    n_topics: int | None  # None marks an aggregate row
    run_seed: int | None
    tc: float
    td: float
    outlier_fraction: float
    n_topics_effective: float
    wall_time_ms: float = field(default=0.0, compare=False)

    @property
    def is_aggregate(self) -> bool:
        return self.n_topics is None


@dataclass(frozen=True)
class FailedCell:
    model: str
    corpus: str
    n_topics: int
    run_seed: int
    error: str


@dataclass(frozen=True)
class DeltaRow:
    model: str
    tc_long: float
    tc_short: float
    td_long: float
    td_short: float

    @property
    def tc_delta(self) -> float:
        return self.tc_short - self.tc_long

    @property
    def td_delta(self) -> float:
        return self.td_short - self.td_long


@dataclass(frozen=True)
class OutlierRow:
    min_cluster_size: int
    min_samples: int
    outlier_fraction: float
    tc: float
    td: float
    n_clusters: float


@dataclass(frozen=True)
class NonOutlierRow:
    model: str
    tc_full: float
    tc_filtered: float
    td_full: float
    td_filtered: float

    @property
    def tc_delta(self) -> float:
        return self.tc_filtered - self.tc_full

    @property
    def td_delta(self) -> float:
        return self.td_filtered - self.td_full


@dataclass
class ComparisonResult:
    rows: list[ReportRow]
    failures: list[FailedCell] = field(default_factory=list)

    @property
    def cells(self) -> list[ReportRow]:
        return [r for r in self.rows if not r.is_aggregate]

    @property
    def aggregates(self) -> list[ReportRow]:
        return [r for r in self.rows if r.is_aggregate]

    def mean(self, model: str, corpus: str = ALL) -> ReportRow:
        for r in self.aggregates:
            if r.model == model and r.corpus == corpus:
                return r
        raise KeyError((model, corpus))


@dataclass
class DocLengthResult:
    deltas: list[DeltaRow]
    short: ComparisonResult
    long: ComparisonResult

    @property
    def failures(self) -> list[FailedCell]:
        return self.short.failures + self.long.failures


@dataclass
class OutlierSweepResult:
    rows: list[OutlierRow]
    failures: list[str] = field(default_factory=list)


@dataclass
class NonOutlierResult:
    deltas: list[NonOutlierRow]
    full: ComparisonResult
    filtered: ComparisonResult
    n_full: int
    n_filtered: int
    initial_outlier_fraction: float

    @property
    def failures(self) -> list[FailedCell]:
        return self.full.failures + self.filtered.failures


# -- inputs -------------------------------------------------------------------

def load_corpus(spec: ExperimentSpec) -> Corpus:
    src = spec.corpus
    stop = StopwordList.from_file(src.stopwords) if src.stopwords else StopwordList.default()
    if src.synthetic is not None:
        from . import synthetic
        try:
            preset = synthetic.PRESETS[src.synthetic]
        except KeyError:
            raise TopicBenchError(f"unknown synthetic preset {src.synthetic!r}") from None
        kwargs = {"seed": src.synthetic_seed}
        if src.synthetic_docs:
            kwargs["n_docs"] = src.synthetic_docs
        raws, _ = synthetic.generate_any(preset(**kwargs))
        docs, _ = preprocess_all(raws, stop, src.remove_stopwords)
        corpus = build_corpus(docs, src.min_df)
    else:
        corpus = _read_any_corpus(src.path, stop, src.remove_stopwords, src.min_df)
    if src.sample is not None and src.sample < len(corpus):
        rng = np.random.default_rng(src.sample_seed)
        idx = np.sort(rng.choice(len(corpus), size=src.sample, replace=False))
        corpus = corpus.subset(idx.tolist())
    return corpus


def _read_any_corpus(path, stop, remove_stopwords, min_df) -> Corpus:
    import json
    with open(path, "r", encoding="utf-8") as fh:
        first = next((line for line in fh if line.strip()), "")
    if first and "tokens" in json.loads(first):
        corpus = read_corpus(path)
        return corpus if min_df <= 1 else build_corpus(list(corpus.documents), min_df)
    docs, _ = preprocess_all(read_raw_jsonl(path), stop, remove_stopwords)
    return build_corpus(docs, min_df)


def base_embeddings(spec: ExperimentSpec, corpus: Corpus) -> EmbeddingMatrix:
    if spec.embeddings.path:
        return load_embeddings(spec.embeddings.path, corpus)
    cfg = FallbackEmbedderConfig(dim=spec.embeddings.dim, seed=spec.base_seed,
                                 weighting=spec.embeddings.weighting)
    return fallback_embed(corpus, cfg)


# -- pipeline -----------------------------------------------------------------

class Workbench:
    """Fits models on named corpora, memoising stages shared between cells.

    Shared stages (UMAP layout, the clustering before topic reduction) depend
    only on (corpus, seed, parameters), so memoisation never changes results.
    """

    def __init__(self, spec: ExperimentSpec, corpora: dict[str, Corpus],
                 embeddings: dict[str, EmbeddingMatrix]):
        self.spec = spec
        self.corpora = corpora
        self.embeddings = embeddings
        self._cache: dict = {}
        self._locks: dict = {}
        self._guard = threading.Lock()

    def _memo(self, key, fn: Callable):
        with self._guard:
            if key in self._cache:
                return self._cache[key]
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            with self._guard:
                if key in self._cache:
                    return self._cache[key]
            value = fn()
            with self._guard:
                self._cache[key] = value
            return value

    def stats(self, corpus_name: str) -> CooccurrenceStats:
        return self._memo(("stats", corpus_name),
                          lambda: build_cooccurrence(self.corpora[corpus_name], self.spec.eval.window))

    def reduced(self, corpus_name: str, seed: int) -> EmbeddingMatrix:
        u = self.spec.umap
        params = UmapParams(u.n_neighbors, u.n_components, u.min_dist, u.n_epochs, seed, u.metric)
        return self._memo(("umap", corpus_name, seed), lambda: umap_reduce(self.embeddings[corpus_name], params))

    def hdbscan_labels(self, corpus_name: str, seed: int, params: HdbscanParams) -> np.ndarray:
        return self._memo(("hdbscan", corpus_name, seed, params),
                          lambda: hdbscan(self.reduced(corpus_name, seed), params).assignment.labels)

    def kmeans_labels(self, corpus_name: str, seed: int, k: int) -> np.ndarray:
        km = self.spec.kmeans
        params = KMeansParams(k=k, max_iters=km.max_iters, tol=km.tol, seed=seed, n_init=km.n_init)
        return self._memo(("kmeans", corpus_name, seed, k),
                          lambda: kmeans(self.reduced(corpus_name, seed), params).labels)

    def _topics_from_labels(self, corpus_name, labels, n_topics, tag) -> TopicModelOutput:
        corpus = self.corpora[corpus_name]
        ctm = self._memo(("ctfidf", corpus_name, labels.tobytes()), lambda: ctfidf(corpus, labels))
        out = extract_topics(ctm, self.spec.eval.n_words, tag, n_topics)
        if n_topics < out.n_topics:
            out = reduce_topics(out, ctm, n_topics)
        return out

    def fit(self, model: str, corpus_name: str, n_topics: int, seed: int,
            hdbscan_params: HdbscanParams | None = None) -> TopicModelOutput:
        corpus = self.corpora[corpus_name]
        if model == "lda":
            lp = self.spec.lda
            return lda_fit(corpus, LdaParams(n_topics, lp.alpha, lp.beta, lp.n_iterations, seed),
                           self.spec.eval.n_words)
        if model == "bertopic-hdbscan":
            hp = hdbscan_params or HdbscanParams(self.spec.hdbscan.min_cluster_size, self.spec.hdbscan.min_samples)
            labels = self.hdbscan_labels(corpus_name, seed, hp)
            if not np.any(labels >= 0):
                raise AllNoise("HDBSCAN labelled every document as noise")
            return self._topics_from_labels(corpus_name, labels, n_topics, model)
        if model == "bertopic-kmeans":
            km = self.spec.kmeans
            k = n_topics if km.mode == "direct" else max(km.n_clusters, n_topics)
            k = min(k, len(corpus))
            labels = self.kmeans_labels(corpus_name, seed, k)
            return self._topics_from_labels(corpus_name, labels, n_topics, model)
        raise TopicBenchError(f"unknown model {model!r}")

    def evaluate(self, out: TopicModelOutput, corpus_name: str) -> EvalResult:
        ev = self.spec.eval
        if ev.reference == "non-noise" and out.outlier_fraction > 0:
            corpus = self.corpora[corpus_name]
            keep = [i for i, d in enumerate(corpus.ids) if out.assignment[d] >= 0]
            stats = build_cooccurrence(corpus.subset(keep), ev.window)
        else:
            stats = self.stats(corpus_name)
        return evaluate(out, stats, ev.n_words, ev.eps)


def _jobs(spec: ExperimentSpec) -> int:
    return max(1, spec.jobs or os.cpu_count() or 1)


def _run_cells(bench: Workbench, corpus_names: list[str]) -> ComparisonResult:
    spec = bench.spec
    tasks = [(m, c, r) for c in corpus_names for m in spec.models for r in spec.run_seeds()]

    def job(task):
        model, corpus_name, seed = task
        rows, fails = [], []
        for k in spec.topic_counts:
            start = time.perf_counter()
            try:
                out = bench.fit(model, corpus_name, int(k), seed)
                res = bench.evaluate(out, corpus_name)
            except TopicBenchError as exc:
                log.warning("cell %s/%s/k=%s/seed=%s failed: %s", model, corpus_name, k, seed, exc)
                fails.append(FailedCell(model, corpus_name, int(k), seed, str(exc)))
                continue
            ms = (time.perf_counter() - start) * 1000.0
            rows.append(ReportRow(model, corpus_name, int(k), seed, res.tc, res.td,
                                  res.outlier_fraction, res.n_topics_effective, ms))
        return rows, fails

    with ThreadPoolExecutor(max_workers=_jobs(spec)) as pool:
        results = list(pool.map(job, tasks))
    cells = [r for rows, _ in results for r in rows]
    failures = [f for _, fs in results for f in fs]
    model_rank = {m: i for i, m in enumerate(spec.models)}
    corpus_rank = {c: i for i, c in enumerate(corpus_names)}
    cells.sort(key=lambda r: (model_rank[r.model], corpus_rank[r.corpus], r.n_topics, r.run_seed))
    failures.sort(key=lambda f: (model_rank[f.model], corpus_rank[f.corpus], f.n_topics, f.run_seed))
    return ComparisonResult(cells + aggregate(cells, spec.models, corpus_names), failures)


def aggregate(cells: list[ReportRow], models: list[str], corpus_names: list[str]) -> list[ReportRow]:
    out = []
    for m in models:
        for c in corpus_names:
            group = [r for r in cells if r.model == m and r.corpus == c]
            if not group:
                continue
            out.append(ReportRow(m, c, None, None,
                                 statistics.fmean(r.tc for r in group),
                                 statistics.fmean(r.td for r in group),
                                 statistics.fmean(r.outlier_fraction for r in group),
                                 statistics.fmean(r.n_topics_effective for r in group),
                                 sum(r.wall_time_ms for r in group)))
    return out


def _named_corpora(spec: ExperimentSpec, corpus: Corpus) -> dict[str, Corpus]:
    named = {ALL: corpus}
    if spec.corpus.per_group:
        for g in corpus.groups():
            named[g] = corpus.filter_group(g)
    return named


def _embeddings_for(corpora: dict[str, Corpus], base: EmbeddingMatrix) -> dict[str, EmbeddingMatrix]:
    return {name: base.aligned_to(c) for name, c in corpora.items()}


def run_comparison(spec: ExperimentSpec, corpus: Corpus | None = None,
                   embeddings: EmbeddingMatrix | None = None) -> ComparisonResult:
    corpus = corpus if corpus is not None else load_corpus(spec)
    embeddings = embeddings if embeddings is not None else base_embeddings(spec, corpus)
    corpora = _named_corpora(spec, corpus)
    bench = Workbench(spec, corpora, _embeddings_for(corpora, embeddings))
    return _run_cells(bench, list(corpora))


def run_doc_length(spec: ExperimentSpec, corpus: Corpus | None = None,
                   embeddings: EmbeddingMatrix | None = None) -> DocLengthResult:
    corpus = corpus if corpus is not None else load_corpus(spec)
    embeddings = embeddings if embeddings is not None else base_embeddings(spec, corpus)
    dl = spec.doclen
    short = sample_by_length(corpus, dl.short_band[0], dl.short_band[1], dl.sample_n, dl.seed)
    long_ = sample_by_length(corpus, dl.long_band[0], dl.long_band[1], dl.sample_n, dl.seed)
    corpora = {"long": long_, "short": short}
    bench = Workbench(spec, corpora, _embeddings_for(corpora, embeddings))
    res_long = _run_cells(bench, ["long"])
    res_short = _run_cells(bench, ["short"])
    deltas = []
    for m in spec.models:
        try:
            lo, sh = res_long.mean(m, "long"), res_short.mean(m, "short")
        except KeyError:
            continue
        deltas.append(DeltaRow(m, lo.tc, sh.tc, lo.td, sh.td))
    return DocLengthResult(deltas, res_short, res_long)


def run_outlier_sweep(spec: ExperimentSpec, grid: list | None = None, corpus: Corpus | None = None,
                      embeddings: EmbeddingMatrix | None = None) -> OutlierSweepResult:
    grid = [list(g) for g in (grid if grid is not None else spec.outlier_grid)]
    if not grid:
        raise TopicBenchError("outlier grid is empty")
    corpus = corpus if corpus is not None else load_corpus(spec)
    embeddings = embeddings if embeddings is not None else base_embeddings(spec, corpus)
    corpora = {ALL: corpus}
    bench = Workbench(spec, corpora, _embeddings_for(corpora, embeddings))
    seeds = spec.run_seeds()

    def job(item):
        mcs, ms = int(item[0]), int(item[1])
        params = HdbscanParams(mcs, ms)
        fractions, n_clusters, tcs, tds, errors = [], [], [], [], []
        for seed in seeds:
            try:
                labels = bench.hdbscan_labels(ALL, seed, params)
            except TopicBenchError as exc:
                errors.append(f"({mcs},{ms}) seed={seed}: {exc}")
                continue
            fractions.append(float(np.mean(labels == -1)))
            n_clusters.append(int(labels.max() + 1))
            for k in spec.topic_counts:
                try:
                    out = bench.fit("bertopic-hdbscan", ALL, int(k), seed, params)
                    res = bench.evaluate(out, ALL)
                except TopicBenchError as exc:
                    errors.append(f"({mcs},{ms}) seed={seed} k={k}: {exc}")
                    continue
                tcs.append(res.tc)
                tds.append(res.td)
        if not tcs:
            return None, errors
        return OutlierRow(mcs, ms, statistics.fmean(fractions), statistics.fmean(tcs),
                          statistics.fmean(tds), statistics.fmean(n_clusters)), errors

    with ThreadPoolExecutor(max_workers=_jobs(spec)) as pool:
        results = list(pool.map(job, grid))
    rows = [r for r, _ in results if r is not None]
    errors = [e for _, es in results for e in es]
    return OutlierSweepResult(rows, errors)


def run_non_outlier(spec: ExperimentSpec, corpus: Corpus | None = None,
                    embeddings: EmbeddingMatrix | None = None) -> NonOutlierResult:
    corpus = corpus if corpus is not None else load_corpus(spec)
    embeddings = embeddings if embeddings is not None else base_embeddings(spec, corpus)
    full_corpora = {ALL: corpus}
    full_bench = Workbench(spec, full_corpora, _embeddings_for(full_corpora, embeddings))
    params = HdbscanParams(spec.hdbscan.min_cluster_size, spec.hdbscan.min_samples)
    labels = full_bench.hdbscan_labels(ALL, spec.base_seed, params)
    keep = np.flatnonzero(labels >= 0)
    if keep.size == 0:
        raise AllNoise("initial HDBSCAN fit labelled every document as noise")
    full = _run_cells(full_bench, [ALL])
    if keep.size == len(corpus):
        filtered_corpus = corpus
    else:
        filtered_corpus = corpus.subset(keep.tolist())
    filt_corpora = {ALL: filtered_corpus}
    filt_bench = Workbench(spec, filt_corpora, _embeddings_for(filt_corpora, embeddings))
    filtered = full if filtered_corpus is corpus else _run_cells(filt_bench, [ALL])
    deltas = []
    for m in spec.models:
        try:
            a, b = full.mean(m), filtered.mean(m)
        except KeyError:
            continue
        deltas.append(NonOutlierRow(m, a.tc, b.tc, a.td, b.td))
    return NonOutlierResult(deltas, full, filtered, len(corpus), len(filtered_corpus),
                            float(np.mean(labels == -1)))

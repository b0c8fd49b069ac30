"""LDA baseline fitted by collapsed Gibbs sampling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.special import gammaln

from .corpus import Corpus
from .errors import TopicBenchError
from .topicrep import Topic, TopicModelOutput


class EmptyDocument(TopicBenchError):
    def __init__(self, doc_id: str):
        super().__init__(f"document {doc_id!r} has no tokens")
        self.doc_id = doc_id


@dataclass(frozen=True)
class LdaParams:
    k_topics: int = 10
    alpha: float | None = None  # defaults to 50 / K
    beta: float = 0.01
    n_iterations: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.k_topics < 1:
            raise TopicBenchError("k_topics must be >= 1")
        if self.alpha is not None and self.alpha <= 0:
            raise TopicBenchError("alpha must be positive")
        if self.beta <= 0:
            raise TopicBenchError("beta must be positive")

    @property
    def resolved_alpha(self) -> float:
        return 50.0 / self.k_topics if self.alpha is None else self.alpha


@dataclass(eq=False)
class LdaState:
    doc: np.ndarray  # token -> document index
    word: np.ndarray  # token -> term id
    z: np.ndarray  # token -> topic
    n_dk: np.ndarray
    n_kw: np.ndarray
    n_k: np.ndarray

    def check_consistency(self) -> bool:
        n_docs, k = self.n_dk.shape
        n_dk = np.zeros_like(self.n_dk)
        np.add.at(n_dk, (self.doc, self.z), 1)
        n_kw = np.zeros_like(self.n_kw)
        np.add.at(n_kw, (self.z, self.word), 1)
        return (np.array_equal(n_dk, self.n_dk) and np.array_equal(n_kw, self.n_kw)
                and np.array_equal(self.n_kw.sum(1), self.n_k))


@dataclass(eq=False)
class LdaFit:
    phi: np.ndarray
    theta: np.ndarray
    state: LdaState
    output: TopicModelOutput
    log_likelihood: list[float] = field(default_factory=list)


@numba.njit(cache=True, nogil=True)
def _sweep(doc, word, z, n_dk, n_kw, n_k, alpha, beta, v_beta, uniforms):
    k_topics = n_k.shape[0]
    p = np.empty(k_topics)
    for i in range(doc.shape[0]):
        d = doc[i]
        w = word[i]
        t = z[i]
        n_dk[d, t] -= 1
        n_kw[t, w] -= 1
        n_k[t] -= 1
        total = 0.0
        for k in range(k_topics):
            total += (n_dk[d, k] + alpha) * (n_kw[k, w] + beta) / (n_k[k] + v_beta)
            p[k] = total
        u = uniforms[i] * total
        t = 0
        while t < k_topics - 1 and p[t] <= u:
            t += 1
        z[i] = t
        n_dk[d, t] += 1
        n_kw[t, w] += 1
        n_k[t] += 1


def log_likelihood(state: LdaState, alpha: float, beta: float) -> float:
    """Collapsed joint log p(w, z) under symmetric priors."""
    k, v = state.n_kw.shape
    n_docs = state.n_dk.shape[0]
    ll = k * (gammaln(v * beta) - v * gammaln(beta))
    ll += float(gammaln(state.n_kw + beta).sum() - gammaln(state.n_k + v * beta).sum())
    ll += n_docs * (gammaln(k * alpha) - k * gammaln(alpha))
    ll += float(gammaln(state.n_dk + alpha).sum() - gammaln(state.n_dk.sum(1) + k * alpha).sum())
    return float(ll)


def gibbs_lda(corpus: Corpus, params: LdaParams, n_words: int = 5, track_every: int = 0,
              check_every: int = 0) -> LdaFit:
    if len(corpus) == 0:
        raise TopicBenchError("empty corpus")
    for d in corpus.documents:
        if d.length == 0:
            raise EmptyDocument(d.id)
    k = params.k_topics
    alpha, beta = params.resolved_alpha, params.beta
    v = len(corpus.terms)
    lengths = corpus.lengths
    doc = np.repeat(np.arange(len(corpus), dtype=np.int64), lengths)
    word = np.concatenate([corpus.token_ids(i) for i in range(len(corpus))])
    rng = np.random.default_rng(params.seed)
    z = rng.integers(0, k, size=doc.size).astype(np.int64)
    n_dk = np.zeros((len(corpus), k), dtype=np.int64)
    np.add.at(n_dk, (doc, z), 1)
    n_kw = np.zeros((k, v), dtype=np.int64)
    np.add.at(n_kw, (z, word), 1)
    n_k = n_kw.sum(1)
    state = LdaState(doc, word, z, n_dk, n_kw, n_k)
    history = []
    for it in range(params.n_iterations):
        _sweep(doc, word, z, n_dk, n_kw, n_k, alpha, beta, v * beta, rng.random(doc.size))
        if track_every and (it % track_every == 0 or it == params.n_iterations - 1):
            history.append(log_likelihood(state, alpha, beta))
        if check_every and it % check_every == 0 and not state.check_consistency():
            raise AssertionError(f"Gibbs count bookkeeping broke at sweep {it}")
    phi = (n_kw + beta) / (n_k[:, None] + v * beta)
    theta = (n_dk + alpha) / (lengths[:, None] + k * alpha)
    output = _to_output(corpus, phi, theta, n_words, params)
    return LdaFit(phi, theta, state, output, history)


def _to_output(corpus: Corpus, phi, theta, n_words, params: LdaParams) -> TopicModelOutput:
    k = phi.shape[0]
    doc_topic = np.argmax(theta, axis=1)  # argmax returns the lowest id on ties
    sizes = np.bincount(doc_topic, minlength=k)
    order = sorted(range(k), key=lambda t: (-sizes[t], t))
    remap = {old: new for new, old in enumerate(order)}
    topics = []
    for new, old in enumerate(order):
        ranked = np.lexsort((np.arange(phi.shape[1]), -phi[old]))[:n_words]
        words = tuple((corpus.terms[w], float(phi[old, w])) for w in ranked)
        topics.append(Topic(new, words, int(sizes[old])))
    assignment = {doc_id: remap[int(t)] for doc_id, t in zip(corpus.ids, doc_topic)}
    return TopicModelOutput(tuple(topics), assignment, n_requested=params.k_topics,
                            model_tag="lda", n_words=n_words)


def lda_fit(corpus: Corpus, params: LdaParams, n_words: int = 5) -> TopicModelOutput:
    return gibbs_lda(corpus, params, n_words).output

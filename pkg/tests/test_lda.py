from __future__ import annotations

import math

import numpy as np
import pytest

from topicbench.corpus import Document, build_corpus
from topicbench.errors import TopicBenchError
from topicbench.lda import (
    EmptyDocument,
    LdaParams,
    LdaState,
    _sweep,
    gibbs_lda,
    lda_fit,
    log_likelihood,
)


def three_topic_corpus(n_docs=150, seed=0):
    rng = np.random.default_rng(seed)
    vocab = [[f"t{t}w{i}" for i in range(15)] for t in range(3)]
    docs, truth = [], []
    for d in range(n_docs):
        t = d % 3
        docs.append(Document(f"d{d}", tuple(rng.choice(vocab[t], size=20))))
        truth.append(t)
    return build_corpus(docs), vocab, truth


def reference_sweep(doc, word, z, n_dk, n_kw, n_k, alpha, beta, v, uniforms):
    """Plain-Python collapsed Gibbs sweep with inverse-CDF sampling."""
    k_topics = len(n_k)
    for i in range(len(doc)):
        d, w, t = int(doc[i]), int(word[i]), int(z[i])
        n_dk[d][t] -= 1
        n_kw[t][w] -= 1
        n_k[t] -= 1
        weights = [(n_dk[d][k] + alpha) * (n_kw[k][w] + beta) / (n_k[k] + v * beta) for k in range(k_topics)]
        u = uniforms[i] * math.fsum(weights)
        acc, t = 0.0, k_topics - 1
        for k in range(k_topics):
            acc += weights[k]
            if u < acc:
                t = k
                break
        z[i] = t
        n_dk[d][t] += 1
        n_kw[t][w] += 1
        n_k[t] += 1


def sequential_log_joint(doc, word, z, n_docs, k, v, alpha, beta):
    """log p(w, z) accumulated token by token from Polya urn predictive probabilities."""
    n_dk = np.zeros((n_docs, k))
    n_kw = np.zeros((k, v))
    n_k = np.zeros(k)
    n_d = np.zeros(n_docs)
    total = 0.0
    for d, w, t in zip(doc, word, z):
        total += math.log((n_dk[d, t] + alpha) / (n_d[d] + k * alpha))
        total += math.log((n_kw[t, w] + beta) / (n_k[t] + v * beta))
        n_dk[d, t] += 1
        n_kw[t, w] += 1
        n_k[t] += 1
        n_d[d] += 1
    return total


class TestParams:
    def test_default_alpha(self):
        assert LdaParams(k_topics=20).resolved_alpha == 2.5
        assert LdaParams(k_topics=20, alpha=0.1).resolved_alpha == 0.1

    @pytest.mark.parametrize("kwargs", [{"k_topics": 0}, {"alpha": -1.0}, {"beta": 0.0}])
    def test_invalid(self, kwargs):
        with pytest.raises(TopicBenchError):
            LdaParams(**kwargs)


class TestSampler:
    def test_sweep_matches_reference(self):
        corpus, _, _ = three_topic_corpus(30)
        fit = gibbs_lda(corpus, LdaParams(k_topics=4, n_iterations=1, seed=2))
        s = fit.state
        z0 = s.z.copy()
        py = dict(n_dk=s.n_dk.tolist(), n_kw=s.n_kw.tolist(), n_k=s.n_k.tolist(), z=z0.tolist())
        u = np.random.default_rng(7).random(s.z.size)
        alpha, beta, v = 12.5, 0.01, len(corpus.terms)
        _sweep(s.doc, s.word, s.z, s.n_dk, s.n_kw, s.n_k, alpha, beta, v * beta, u)
        reference_sweep(s.doc, s.word, py["z"], py["n_dk"], py["n_kw"], py["n_k"], alpha, beta, v, u)
        np.testing.assert_array_equal(s.z, py["z"])
        np.testing.assert_array_equal(s.n_kw, py["n_kw"])

    def test_counts_consistent_every_sweep(self):
        corpus, _, _ = three_topic_corpus(60)
        fit = gibbs_lda(corpus, LdaParams(k_topics=5, n_iterations=30), check_every=1)
        assert fit.state.check_consistency()
        assert fit.state.n_k.sum() == corpus.lengths.sum()

    def test_consistency_detects_corruption(self):
        corpus, _, _ = three_topic_corpus(30)
        s = gibbs_lda(corpus, LdaParams(k_topics=3, n_iterations=2)).state
        broken = LdaState(s.doc, s.word, s.z, s.n_dk.copy(), s.n_kw, s.n_k)
        broken.n_dk[0, 0] += 1
        assert not broken.check_consistency()

    def test_log_likelihood_matches_sequential_oracle(self):
        corpus, _, _ = three_topic_corpus(24)
        fit = gibbs_lda(corpus, LdaParams(k_topics=3, n_iterations=5, seed=1))
        s = fit.state
        expected = sequential_log_joint(s.doc, s.word, s.z, len(corpus), 3, len(corpus.terms), 50 / 3, 0.01)
        assert log_likelihood(s, 50 / 3, 0.01) == pytest.approx(expected, rel=1e-10)

    def test_log_likelihood_trend(self):
        corpus, _, _ = three_topic_corpus(90)
        hist = gibbs_lda(corpus, LdaParams(k_topics=3, n_iterations=200, seed=4), track_every=1).log_likelihood
        tenth = len(hist) // 10
        assert np.mean(hist[-tenth:]) > np.mean(hist[:tenth])


class TestFit:
    def test_recovers_disjoint_topics(self):
        corpus, vocab, _ = three_topic_corpus()
        out = lda_fit(corpus, LdaParams(k_topics=3, alpha=0.1, n_iterations=200, seed=3))
        owner = {w: t for t, words in enumerate(vocab) for w in words}
        purities = []
        for topic in out.topics:
            counts = np.bincount([owner[w] for w in topic.words], minlength=3)
            purities.append(counts.max() / counts.sum())
        assert min(purities) >= 0.9
        assert sorted({owner[t.words[0]] for t in out.topics}) == [0, 1, 2]

    def test_single_topic_is_smoothed_unigram(self):
        corpus, _, _ = three_topic_corpus(30)
        fit = gibbs_lda(corpus, LdaParams(k_topics=1, n_iterations=3))
        counts = np.bincount(np.concatenate([corpus.token_ids(i) for i in range(len(corpus))]),
                             minlength=len(corpus.terms))
        expected = (counts + 0.01) / (counts.sum() + 0.01 * len(corpus.terms))
        np.testing.assert_allclose(fit.phi[0], expected, rtol=1e-12)

    def test_rows_normalised(self):
        corpus, _, _ = three_topic_corpus(60)
        fit = gibbs_lda(corpus, LdaParams(k_topics=7, n_iterations=20))
        np.testing.assert_allclose(fit.phi.sum(1), 1.0, atol=1e-9)
        np.testing.assert_allclose(fit.theta.sum(1), 1.0, atol=1e-9)

    def test_top_words_follow_phi(self):
        corpus, _, _ = three_topic_corpus(60)
        fit = gibbs_lda(corpus, LdaParams(k_topics=3, n_iterations=20), n_words=5)
        for topic in fit.output.topics:
            weights = [w for _, w in topic.top_words]
            assert weights == sorted(weights, reverse=True)
        assert fit.output.outlier_fraction == 0.0
        assert set(fit.output.assignment) == set(corpus.ids)

    def test_deterministic(self):
        corpus, _, _ = three_topic_corpus(60)
        a = gibbs_lda(corpus, LdaParams(k_topics=4, n_iterations=15, seed=8))
        b = gibbs_lda(corpus, LdaParams(k_topics=4, n_iterations=15, seed=8))
        np.testing.assert_array_equal(a.state.z, b.state.z)
        assert a.output.to_json() == b.output.to_json()

    def test_empty_document(self):
        corpus = build_corpus([Document("a", ("x",)), Document("b", ())])
        with pytest.raises(EmptyDocument, match="'b'"):
            lda_fit(corpus, LdaParams(k_topics=2, n_iterations=1))

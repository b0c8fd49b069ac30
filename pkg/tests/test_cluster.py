from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from sklearn.metrics import adjusted_rand_score

from topicbench.cluster import (
    NOISE,
    ClusterAssignment,
    HdbscanParams,
    KExceedsPoints,
    KMeansParams,
    TooFewPoints,
    canonicalize,
    hdbscan,
    kmeans,
    kmeans_fit,
    outlier_fraction,
    read_assignment,
    write_assignment,
)
from topicbench.cluster.hdbscan import core_distances, mutual_reachability_mst

from oracles import best_partition_inertia, kruskal_weight


def two_blobs(seed=0, n=100, sep=10.0):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal(size=(n, 2)), rng.normal(size=(n, 2)) + [sep, 0.0]])
    return x, np.repeat([0, 1], n)


class TestOutlierFraction:
    @pytest.mark.parametrize("labels, expected", [([-1, -1], 1.0), ([0, 1, 1], 0.0), ([0, -1, 1, -1], 0.5)])
    def test_examples(self, labels, expected):
        assert outlier_fraction(np.array(labels)) == expected
        assert ClusterAssignment(np.array(labels)).outlier_fraction == expected

    def test_canonical_order(self):
        np.testing.assert_array_equal(canonicalize(np.array([5, 5, -1, 2, 2, 2, 7])), [1, 1, -1, 0, 0, 0, 2])
        # equal sizes: the cluster whose first member comes first gets the lower label
        np.testing.assert_array_equal(canonicalize(np.array([3, 1, 3, 1])), [0, 1, 0, 1])

    def test_assignment_csv_round_trip(self, tmp_path):
        p = tmp_path / "a.csv"
        write_assignment(["a", "b", "c"], np.array([0, -1, 1]), p)
        assert p.read_text().splitlines()[0] == "doc_id,label"
        ids, labels = read_assignment(p)
        assert ids == ["a", "b", "c"]
        np.testing.assert_array_equal(labels, [0, -1, 1])


class TestHdbscanPieces:
    def test_triangle_core_distances(self):
        x = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])
        core = core_distances(x, 1)
        np.testing.assert_allclose(core, 1.0)
        mst = mutual_reachability_mst(x, core)
        np.testing.assert_allclose(mst[:, 2], 1.0)

    def test_core_distance_oracle(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(50, 3))
        for ms in (1, 2, 5):
            expected = [sorted(np.linalg.norm(x - x[i], axis=1)[np.arange(50) != i])[ms - 1] for i in range(50)]
            np.testing.assert_allclose(core_distances(x, ms), expected, rtol=1e-12)

    @pytest.mark.parametrize("seed", range(6))
    def test_mst_matches_kruskal_exactly(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(20, 301))
        x = rng.integers(-40, 41, size=(n, 3)).astype(np.float64)
        ms = int(rng.integers(1, 8))
        mst = mutual_reachability_mst(x, core_distances(x, ms))
        assert math.fsum(mst[:, 2]) == kruskal_weight(x, ms)

    def test_mst_spans_all_points(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(60, 4))
        mst = mutual_reachability_mst(x, core_distances(x, 3))
        assert mst.shape == (59, 3)
        assert set(mst[:, :2].astype(int).ravel()) == set(range(60))

    def test_mutual_reachability_bounds(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(40, 2))
        core = core_distances(x, 4)
        mst = mutual_reachability_mst(x, core)
        for a, b, w in mst:
            a, b = int(a), int(b)
            assert w >= np.linalg.norm(x[a] - x[b]) - 1e-15
            assert w >= max(core[a], core[b])


class TestHdbscan:
    def test_two_blobs(self):
        x, truth = two_blobs()
        res = hdbscan(x, HdbscanParams(15, 5))
        labels = res.assignment.labels
        assert res.assignment.n_clusters == 2
        assert res.assignment.outlier_fraction < 0.15
        keep = labels != NOISE
        assert adjusted_rand_score(truth[keep], labels[keep]) >= 0.95

    @pytest.mark.parametrize("seed", range(5))
    def test_uniform_noise_size_bound(self, seed):
        x = np.random.default_rng(seed).uniform(size=(120, 2))
        assert hdbscan(x, HdbscanParams(60)).assignment.n_clusters <= 1

    def test_too_few_points(self):
        with pytest.raises(TooFewPoints):
            hdbscan(np.zeros((5, 2)), HdbscanParams(10))

    def test_condensed_tree_invariants(self):
        rng = np.random.default_rng(8)
        x = np.vstack([rng.normal(size=(80, 2)), rng.normal(size=(60, 2)) + 6, rng.uniform(-4, 10, size=(30, 2))])
        res = hdbscan(x, HdbscanParams(10, 3))
        t = res.tree
        n = len(x)
        assert np.all(t.child_size >= 1)
        assert all(s >= 0 for s in t.stabilities.values())
        birth = {int(c): float(l) for c, l in zip(t.child, t.lambda_val) if c >= n}
        birth[n] = 0.0
        for p, l in zip(t.parent, t.lambda_val):
            assert l >= birth[int(p)]
        # selected clusters are never nested
        up = {int(c): int(p) for p, c in zip(t.parent, t.child)}
        for c in t.selected:
            node = up.get(c)
            while node is not None:
                assert node not in t.selected
                node = up.get(node)
        sizes = res.assignment.sizes()
        assert sizes.sum() == np.count_nonzero(res.assignment.labels != NOISE)
        assert np.all(sizes >= 10)

    def test_matches_reference_implementation(self):
        from sklearn.cluster import HDBSCAN
        rng = np.random.default_rng(11)
        x = np.vstack([rng.normal(size=(150, 3)) * s + c for s, c in [(1.0, 0), (0.5, 5), (1.5, -6)]]
                      + [rng.uniform(-10, 10, size=(60, 3))])
        ours = hdbscan(x, HdbscanParams(15, 5)).assignment.labels
        # the reference counts the point itself among its min_samples neighbours
        ref = HDBSCAN(min_cluster_size=15, min_samples=6).fit(x).labels_
        assert adjusted_rand_score(ref, ours) > 0.99
        np.testing.assert_array_equal(ref == -1, ours == NOISE)

    def test_deterministic_and_dump(self, tmp_path):
        x, _ = two_blobs(1)
        a = hdbscan(x, HdbscanParams(15))
        b = hdbscan(x, HdbscanParams(15))
        np.testing.assert_array_equal(a.assignment.labels, b.assignment.labels)
        a.tree.write_csv(tmp_path / "a.csv")
        b.tree.write_csv(tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (tmp_path / "a.csv").read_text().startswith("parent,child,lambda,size")

    def test_default_min_samples(self):
        assert HdbscanParams(15).resolved_min_samples == 15
        assert HdbscanParams(15, 4).resolved_min_samples == 4


class TestKMeans:
    def test_k_equals_n(self):
        x = np.random.default_rng(0).normal(size=(7, 3))
        res = kmeans_fit(x, KMeansParams(k=7))
        assert res.assignment.inertia == pytest.approx(0.0, abs=1e-20)
        assert sorted(res.assignment.labels) == list(range(7))

    @pytest.mark.parametrize("seed", range(10))
    def test_square_corners(self, seed):
        side = 2.0
        x = np.array([[0, 0], [side, 0], [0, side], [side, side]], dtype=float)
        res = kmeans_fit(x, KMeansParams(k=2, seed=seed))
        assert res.assignment.inertia == pytest.approx(2 * (side / 2) ** 2 * 2)
        assert res.assignment.inertia == pytest.approx(best_partition_inertia(x, 2))
        labels = res.assignment.labels
        assert labels[0] != labels[3] and labels[1] != labels[2]

    @pytest.mark.parametrize("seed", range(5))
    def test_two_groups_match_exhaustive_optimum(self, seed):
        rng = np.random.default_rng(seed)
        x = np.vstack([rng.normal(size=(5, 2)), rng.normal(size=(5, 2)) + 4.0])
        res = kmeans_fit(x, KMeansParams(k=2, seed=seed))
        assert res.assignment.inertia == pytest.approx(best_partition_inertia(x, 2), rel=1e-12)

    def test_inertia_non_increasing(self):
        x = np.random.default_rng(2).normal(size=(400, 5))
        hist = kmeans_fit(x, KMeansParams(k=12, seed=1)).inertia_history
        assert len(hist) > 2
        assert all(b <= a * (1 + 1e-12) for a, b in zip(hist, hist[1:]))

    def test_empty_cluster_reseeded(self):
        # five identical points and one outlier: k-means++ must place centres on duplicates
        x = np.array([[0.0, 0.0]] * 5 + [[10.0, 0.0]] * 2 + [[20.0, 0.0]])
        res = kmeans_fit(x, KMeansParams(k=3, seed=0))
        assert res.assignment.n_clusters == 3
        assert np.all(res.assignment.sizes() > 0)

    def test_k_exceeds_points(self):
        with pytest.raises(KExceedsPoints):
            kmeans(np.zeros((3, 2)), KMeansParams(k=4))

    def test_seed_determinism(self):
        x = np.random.default_rng(3).normal(size=(200, 4))
        a = kmeans(x, KMeansParams(k=6, seed=9)).labels
        b = kmeans(x, KMeansParams(k=6, seed=9)).labels
        np.testing.assert_array_equal(a, b)

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(3, 40), st.integers(1, 4)),
                  elements=st.floats(-100, 100, allow_nan=False)),
           st.integers(1, 3), st.integers(0, 2**31))
    def test_never_noise(self, x, k, seed):
        k = min(k, x.shape[0])
        labels = kmeans(x, KMeansParams(k=k, seed=seed)).labels
        assert labels.min() >= 0
        assert outlier_fraction(labels) == 0.0
        used = np.unique(labels)
        np.testing.assert_array_equal(used, np.arange(used.size))

"""UMAP dimensionality reduction with exact nearest neighbours and a single-threaded SGD layout."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .embedding import EmbeddingMatrix
from .errors import TopicBenchError

Metric = Literal["cosine", "euclidean"]

SIGMA_MIN, SIGMA_MAX = 1e-8, 1e8
SIGMA_ITERS = 64
NEGATIVE_SAMPLE_RATE = 5
DENSE_EIGEN_LIMIT = 2500


class KTooLarge(TopicBenchError):
    pass


@dataclass(frozen=True)
class UmapParams:
    n_neighbors: int = 15
    n_components: int = 5
    min_dist: float = 0.1
    n_epochs: int = 200
    seed: int = 33
    metric: Metric = "cosine"
    spread: float = 1.0

    def __post_init__(self):
        if self.n_neighbors < 2:
            raise TopicBenchError("n_neighbors must be >= 2")
        if self.n_components < 2:
            raise TopicBenchError("n_components must be >= 2")
        if not 0.0 <= self.min_dist < 1.0:
            raise TopicBenchError("min_dist must lie in [0, 1)")
        if self.n_epochs < 0:
            raise TopicBenchError("n_epochs must be >= 0")
        if self.metric not in ("cosine", "euclidean"):
            raise TopicBenchError(f"unknown metric {self.metric!r}")


@dataclass(frozen=True, eq=False)
class KnnGraph:
    indices: np.ndarray  # (n, k) int64
    distances: np.ndarray  # (n, k) float64, ascending per row

    @property
    def k(self) -> int:
        return self.indices.shape[1]

    @property
    def n(self) -> int:
        return self.indices.shape[0]


@dataclass(frozen=True, eq=False)
class FuzzyGraph:
    edges: sp.csr_matrix
    rho: np.ndarray
    sigma: np.ndarray


def pairwise_distances(x: np.ndarray, y: np.ndarray, metric: Metric) -> np.ndarray:
    if metric == "cosine":
        xn = x / np.maximum(np.linalg.norm(x, axis=1, keepdims=True), 1e-300)
        yn = y / np.maximum(np.linalg.norm(y, axis=1, keepdims=True), 1e-300)
        return np.clip(1.0 - xn @ yn.T, 0.0, 2.0)
    sq = (x * x).sum(1)[:, None] + (y * y).sum(1)[None, :] - 2.0 * (x @ y.T)
    return np.sqrt(np.maximum(sq, 0.0))


def knn(emb: EmbeddingMatrix | np.ndarray, k: int, metric: Metric = "cosine",
        chunk: int = 512) -> KnnGraph:
    """Exact k nearest neighbours by brute force; ties go to the lower index."""
    x = emb.vectors if isinstance(emb, EmbeddingMatrix) else np.asarray(emb, dtype=np.float64)
    n = x.shape[0]
    if k >= n:
        raise KTooLarge(f"k={k} must be smaller than the number of points ({n})")
    if k < 1:
        raise KTooLarge("k must be >= 1")
    indices = np.empty((n, k), dtype=np.int64)
    distances = np.empty((n, k), dtype=np.float64)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d = pairwise_distances(x[start:stop], x, metric)
        rows = np.arange(stop - start)
        d[rows, rows + start] = np.inf
        order = np.argsort(d, axis=1, kind="stable")[:, :k]
        indices[start:stop] = order
        distances[start:stop] = np.take_along_axis(d, order, axis=1)
    return KnnGraph(indices, distances)


def smooth_knn_dist(distances: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-point (rho, sigma) with sum_j exp(-max(0, d_ij - rho_i) / sigma_i) = log2(k).

    Bisection in log-space over [1e-8, 1e8], vectorised over points.
    """
    n, k = distances.shape
    target = np.log2(k)
    rho = distances[:, 0].copy()
    shifted = np.maximum(distances - rho[:, None], 0.0)
    lo = np.full(n, np.log(SIGMA_MIN))
    hi = np.full(n, np.log(SIGMA_MAX))
    for _ in range(SIGMA_ITERS):
        mid = 0.5 * (lo + hi)
        total = np.exp(-shifted / np.exp(mid)[:, None]).sum(axis=1)
        too_big = total > target
        hi = np.where(too_big, mid, hi)
        lo = np.where(too_big, lo, mid)
    return rho, np.exp(0.5 * (lo + hi))


def directed_strengths(g: KnnGraph, rho: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    return np.exp(-np.maximum(g.distances - rho[:, None], 0.0) / sigma[:, None])


def fuzzy_simplicial_set(g: KnnGraph) -> FuzzyGraph:
    rho, sigma = smooth_knn_dist(g.distances)
    w = directed_strengths(g, rho, sigma)
    n, k = g.indices.shape
    rows = np.repeat(np.arange(n), k)
    p = sp.csr_matrix((w.ravel(), (rows, g.indices.ravel())), shape=(n, n))
    pt = p.T.tocsr()
    union = (p + pt - p.multiply(pt)).tocsr()
    union.eliminate_zeros()
    union.sort_indices()
    return FuzzyGraph(union, rho, sigma)


def find_ab_params(min_dist: float, spread: float = 1.0, n_samples: int = 300,
                   max_iter: int = 100) -> tuple[float, float]:
    """Fit 1 / (1 + a x^(2b)) to the offset-exponential target curve by Levenberg-Marquardt."""
    x = np.linspace(0.0, 3.0 * spread, n_samples)
    y = np.where(x < min_dist, 1.0, np.exp(-(x - min_dist) / spread))
    xs = x[1:]  # x = 0 contributes a constant residual with zero gradient
    ys = y[1:]
    logx = np.log(xs)

    def residual(a, b):
        return 1.0 / (1.0 + a * xs ** (2 * b)) - ys

    def jacobian(a, b):
        p = xs ** (2 * b)
        den = (1.0 + a * p) ** 2
        return np.column_stack([-p / den, -a * p * 2.0 * logx / den])

    a, b, lam = 1.0, 1.0, 1e-3
    r = residual(a, b)
    cost = r @ r
    for _ in range(max_iter):
        J = jacobian(a, b)
        JtJ = J.T @ J
        g = J.T @ r
        while True:
            step = np.linalg.solve(JtJ + lam * np.diag(np.diag(JtJ)), -g)
            na, nb = a + step[0], b + step[1]
            if na > 0 and nb > 0:
                nr = residual(na, nb)
                ncost = nr @ nr
                if ncost < cost:
                    break
            lam *= 10.0
            if lam > 1e12:
                return float(a), float(b)
        converged = cost - ncost < 1e-15 * max(cost, 1e-300)
        a, b, r, cost = na, nb, nr, ncost
        lam = max(lam / 10.0, 1e-12)
        if converged:
            break
    return float(a), float(b)


def spectral_layout(graph: sp.csr_matrix, dim: int) -> np.ndarray:
    """Eigenvectors of the normalised adjacency for the largest eigenvalues after the trivial one."""
    n = graph.shape[0]
    deg = np.asarray(graph.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(np.maximum(deg, 1e-300))
    d = sp.diags(inv_sqrt)
    m = (d @ graph @ d).tocsr()
    if n <= DENSE_EIGEN_LIMIT:
        vals, vecs = np.linalg.eigh(m.toarray())
        order = np.argsort(-vals, kind="stable")
        vecs = vecs[:, order]
    else:
        vals, vecs = eigsh(m, k=dim + 1, which="LA", v0=np.ones(n), tol=1e-4, maxiter=n * 5)
        vecs = vecs[:, np.argsort(-vals, kind="stable")]
    return vecs[:, 1:dim + 1]


def _scale_init(coords: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    span = np.abs(coords).max()
    if not np.isfinite(span) or span == 0:
        raise FloatingPointError("degenerate spectral layout")
    coords = 10.0 * coords / span
    return coords + rng.normal(scale=1e-4, size=coords.shape)


def initialize(fg: FuzzyGraph, n_components: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = fg.edges.shape[0]
    try:
        if n <= n_components + 1:
            raise FloatingPointError("too few points for spectral layout")
        coords = spectral_layout(fg.edges, n_components)
        if coords.shape[1] < n_components or not np.all(np.isfinite(coords)):
            raise FloatingPointError("spectral layout failed")
        return _scale_init(coords, rng)
    except (FloatingPointError, np.linalg.LinAlgError, RuntimeError):
        return rng.uniform(-10.0, 10.0, size=(n, n_components))


def epochs_per_sample(weights: np.ndarray, n_epochs: int) -> np.ndarray:
    out = np.full(weights.shape[0], -1.0)
    n_samples = n_epochs * (weights / weights.max())
    pos = n_samples > 0
    out[pos] = float(n_epochs) / n_samples[pos]
    return out


@numba.njit(cache=True)
def _next_rand(state):
    # xorshift64*, state is a 1-element uint64 array
    x = state[0]
    x ^= x >> numba.uint64(12)
    x ^= x << numba.uint64(25)
    x ^= x >> numba.uint64(27)
    state[0] = x
    return x * numba.uint64(2685821657736338717)


@numba.njit(cache=True)
def _clip(v):
    if v > 4.0:
        return 4.0
    if v < -4.0:
        return -4.0
    return v


@numba.njit(cache=True, nogil=True)
def _sgd(emb, head, tail, eps, n_epochs, a, b, seed, neg_rate):
    n_points, dim = emb.shape
    n_edges = head.shape[0]
    state = np.empty(1, dtype=np.uint64)
    state[0] = numba.uint64(seed) * numba.uint64(6364136223846793005) + numba.uint64(1442695040888963407)
    if state[0] == 0:
        state[0] = numba.uint64(88172645463325252)
    eps_neg = eps / neg_rate
    next_pos = eps.copy()
    next_neg = eps_neg.copy()
    for epoch in range(n_epochs):
        alpha = 1.0 - epoch / n_epochs
        for e in range(n_edges):
            if eps[e] <= 0 or next_pos[e] > epoch:
                continue
            j = head[e]
            k = tail[e]
            d2 = 0.0
            for c in range(dim):
                diff = emb[j, c] - emb[k, c]
                d2 += diff * diff
            if d2 > 0.0:
                coef = -2.0 * a * b * d2 ** (b - 1.0) / (a * d2 ** b + 1.0)
            else:
                coef = 0.0
            for c in range(dim):
                g = _clip(coef * (emb[j, c] - emb[k, c])) * alpha
                emb[j, c] += g
                emb[k, c] -= g
            next_pos[e] += eps[e]
            n_neg = int((epoch - next_neg[e]) / eps_neg[e])
            for _ in range(n_neg):
                r = _next_rand(state)
                k = int(r % numba.uint64(n_points))
                if k == j:
                    continue
                d2 = 0.0
                for c in range(dim):
                    diff = emb[j, c] - emb[k, c]
                    d2 += diff * diff
                if d2 > 0.0:
                    coef = 2.0 * b / ((0.001 + d2) * (a * d2 ** b + 1.0))
                    for c in range(dim):
                        emb[j, c] += _clip(coef * (emb[j, c] - emb[k, c])) * alpha
                else:
                    for c in range(dim):
                        emb[j, c] += 4.0 * alpha
            next_neg[e] += n_neg * eps_neg[e]
    return emb


def optimize_layout(fg: FuzzyGraph, params: UmapParams, doc_ids=None) -> EmbeddingMatrix:
    """Spectral initialisation followed by attractive/repulsive SGD over graph edges."""
    n = fg.edges.shape[0]
    init = initialize(fg, params.n_components, params.seed)
    a, b = find_ab_params(params.min_dist, params.spread)
    coo = fg.edges.tocoo()
    weights = coo.data.astype(np.float64)
    keep = weights >= weights.max() / max(params.n_epochs, 1)
    head = coo.row[keep].astype(np.int64)
    tail = coo.col[keep].astype(np.int64)
    eps = epochs_per_sample(weights[keep], max(params.n_epochs, 1))
    emb = np.ascontiguousarray(init, dtype=np.float64)
    if params.n_epochs > 0:
        emb = _sgd(emb, head, tail, eps, params.n_epochs, a, b,
                   np.uint64(params.seed & 0xFFFFFFFFFFFFFFFF), float(NEGATIVE_SAMPLE_RATE))
    ids = tuple(doc_ids) if doc_ids is not None else tuple(str(i) for i in range(n))
    return EmbeddingMatrix(emb, ids, f"umap(seed={params.seed})")


def umap_reduce(emb: EmbeddingMatrix, params: UmapParams = UmapParams()) -> EmbeddingMatrix:
    n = len(emb)
    k = min(params.n_neighbors, n - 1)
    graph = knn(emb, k, params.metric)
    fg = fuzzy_simplicial_set(graph)
    return optimize_layout(fg, params, emb.doc_ids)

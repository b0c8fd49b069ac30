"""k-Means with k-means++ seeding and Lloyd iterations; never produces noise labels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..embedding import EmbeddingMatrix
from ..errors import TopicBenchError
from .common import ClusterAssignment, canonicalize


class KExceedsPoints(TopicBenchError):
    pass


@dataclass(frozen=True)
class KMeansParams:
    k: int = 50
    max_iters: int = 300
    tol: float = 1e-4
    seed: int = 0
    n_init: int = 10
    init: str = "kmeans++"

    def __post_init__(self):
        if self.k < 1:
            raise TopicBenchError("k must be >= 1")
        if self.tol <= 0:
            raise TopicBenchError("tol must be positive")
        if self.n_init < 1:
            raise TopicBenchError("n_init must be >= 1")
        if self.init != "kmeans++":
            raise TopicBenchError("only kmeans++ initialisation is supported")


@dataclass(frozen=True, eq=False)
class KMeansResult:
    assignment: ClusterAssignment
    centroids: np.ndarray
    inertia_history: list[float] = field(default_factory=list)
    n_iter: int = 0


def sq_distances(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d = (x * x).sum(1)[:, None] + (c * c).sum(1)[None, :] - 2.0 * x @ c.T
    return np.maximum(d, 0.0)


def kmeans_plusplus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    closest = ((x - x[chosen[0]]) ** 2).sum(1)
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            free = np.setdiff1d(np.arange(n), chosen)
            idx = int(free[rng.integers(free.size)])
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        chosen.append(idx)
        closest = np.minimum(closest, ((x - x[idx]) ** 2).sum(1))
    return x[chosen].copy()


def _inertia(x: np.ndarray, centroids: np.ndarray, labels: np.ndarray) -> float:
    return float(((x - centroids[labels]) ** 2).sum())


def _lloyd(x: np.ndarray, params: KMeansParams, rng: np.random.Generator):
    n = x.shape[0]
    centroids = kmeans_plusplus(x, params.k, rng)
    history = []
    labels = np.argmin(sq_distances(x, centroids), axis=1)
    it = 0
    for it in range(1, params.max_iters + 1):
        history.append(_inertia(x, centroids, labels))
        new = np.zeros_like(centroids)
        np.add.at(new, labels, x)
        counts = np.bincount(labels, minlength=params.k)
        nonempty = counts > 0
        new[nonempty] /= counts[nonempty, None]
        if not nonempty.all():
            # reseed each empty cluster on the point farthest from its own centroid
            far = ((x - new[labels]) ** 2).sum(1) if nonempty.any() else np.zeros(n)
            taken = set()
            for c in np.flatnonzero(~nonempty):
                order = np.argsort(-far, kind="stable")
                pick = next(int(i) for i in order if int(i) not in taken)
                taken.add(pick)
                new[c] = x[pick]
                far[pick] = -1.0
        shift = np.sqrt(((new - centroids) ** 2).sum(1)).max()
        centroids = new
        labels = np.argmin(sq_distances(x, centroids), axis=1)
        if shift < params.tol:
            break
    history.append(_inertia(x, centroids, labels))
    return labels, centroids, history, it


def kmeans_fit(points, params: KMeansParams) -> KMeansResult:
    """Best of ``n_init`` k-means++/Lloyd runs drawn from one seeded stream; ties keep the earlier run."""
    x = points.vectors if isinstance(points, EmbeddingMatrix) else np.asarray(points, dtype=np.float64)
    n = x.shape[0]
    if params.k > n:
        raise KExceedsPoints(f"k={params.k} exceeds number of points ({n})")
    rng = np.random.default_rng(params.seed)
    best = None
    for _ in range(params.n_init):
        run = _lloyd(x, params, rng)
        if best is None or run[2][-1] < best[2][-1]:
            best = run
    labels, centroids, history, it = best
    return KMeansResult(ClusterAssignment(canonicalize(labels), inertia=history[-1]),
                        centroids, history, it)


def kmeans(points, params: KMeansParams) -> ClusterAssignment:
    return kmeans_fit(points, params).assignment

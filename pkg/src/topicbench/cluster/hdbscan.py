"""HDBSCAN over euclidean mutual-reachability distances with excess-of-mass selection."""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.cluster.hierarchy import DisjointSet

from ..embedding import EmbeddingMatrix
from ..errors import TopicBenchError
from .common import NOISE, ClusterAssignment, canonicalize


class TooFewPoints(TopicBenchError):
    pass


@dataclass(frozen=True)
class HdbscanParams:
    min_cluster_size: int = 15
    min_samples: int | None = None
    cluster_selection: str = "excess_of_mass"

    def __post_init__(self):
        if self.min_cluster_size < 2:
            raise TopicBenchError("min_cluster_size must be >= 2")
        if self.min_samples is not None and self.min_samples < 1:
            raise TopicBenchError("min_samples must be >= 1")
        if self.cluster_selection != "excess_of_mass":
            raise TopicBenchError("only excess_of_mass cluster selection is supported")

    @property
    def resolved_min_samples(self) -> int:
        return self.min_cluster_size if self.min_samples is None else self.min_samples


@dataclass(frozen=True, eq=False)
class CondensedTree:
    parent: np.ndarray
    child: np.ndarray
    lambda_val: np.ndarray
    child_size: np.ndarray
    stabilities: dict[int, float]
    selected: tuple[int, ...]

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["parent", "child", "lambda", "size"])
            for row in zip(self.parent, self.child, self.lambda_val, self.child_size):
                w.writerow([int(row[0]), int(row[1]), repr(float(row[2])), int(row[3])])


@dataclass(frozen=True, eq=False)
class HdbscanResult:
    assignment: ClusterAssignment
    tree: CondensedTree
    core_distances: np.ndarray
    mst: np.ndarray  # (n-1, 3): a, b, mutual-reachability weight

    def __iter__(self):
        return iter((self.assignment, self.tree))


def _as_array(points) -> np.ndarray:
    if isinstance(points, EmbeddingMatrix):
        return points.vectors
    return np.asarray(points, dtype=np.float64)


def row_distances(x: np.ndarray, i: int) -> np.ndarray:
    return np.sqrt(((x - x[i]) ** 2).sum(axis=1))


def core_distances(x: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance from each point to its ``min_samples``-th nearest other point."""
    n = x.shape[0]
    if min_samples >= n:
        raise TooFewPoints(f"min_samples={min_samples} needs more than {n} points")
    out = np.empty(n)
    for i in range(n):
        d = row_distances(x, i)
        d[i] = np.inf
        out[i] = np.partition(d, min_samples - 1)[min_samples - 1]
    return out


def mutual_reachability_mst(x: np.ndarray, core: np.ndarray) -> np.ndarray:
    """Exact Prim's MST over the dense mutual-reachability graph, O(n^2) time, O(n) memory."""
    n = x.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    best_from = np.zeros(n, dtype=np.int64)
    edges = np.empty((n - 1, 3))
    current = 0
    in_tree[0] = True
    for step in range(n - 1):
        d = np.maximum(row_distances(x, current), np.maximum(core, core[current]))
        better = (d < best) & ~in_tree
        best[better] = d[better]
        best_from[better] = current
        cand = np.where(in_tree, np.inf, best)
        nxt = int(np.argmin(cand))
        edges[step] = (best_from[nxt], nxt, best[nxt])
        in_tree[nxt] = True
        current = nxt
    return edges


def single_linkage(mst: np.ndarray, n: int) -> np.ndarray:
    """Scipy-style linkage matrix (left, right, distance, size) from MST edges."""
    order = np.argsort(mst[:, 2], kind="stable")
    ds = DisjointSet(range(n))
    node_of = {i: i for i in range(n)}
    size_of = {i: 1 for i in range(n)}
    z = np.empty((n - 1, 4))
    for step, e in enumerate(order):
        a, b, w = int(mst[e, 0]), int(mst[e, 1]), mst[e, 2]
        ra, rb = ds[a], ds[b]
        na, nb = node_of[ra], node_of[rb]
        ds.merge(ra, rb)
        root = ds[a]
        new = n + step
        size = size_of[na] + size_of[nb]
        z[step] = (min(na, nb), max(na, nb), w, size)
        node_of[root] = new
        size_of[new] = size
    return z


def condense_tree(z: np.ndarray, min_cluster_size: int):
    """Collapse the single-linkage hierarchy into clusters of at least ``min_cluster_size``.

    Returns parallel arrays (parent, child, lambda, child_size); cluster labels start at n.
    """
    n = z.shape[0] + 1
    root = 2 * n - 2
    positive = z[:, 2][z[:, 2] > 0]
    floor = positive.min() * 1e-3 if positive.size else 1e-12

    def size(node):
        return 1 if node < n else int(z[node - n, 3])

    def leaves(node):
        out, stack = [], [node]
        while stack:
            v = stack.pop()
            if v < n:
                out.append(v)
            else:
                stack.append(int(z[v - n, 1]))
                stack.append(int(z[v - n, 0]))
        return out

    relabel = {root: n}
    next_label = n + 1
    rows = []
    queue = deque([root])
    while queue:
        node = queue.popleft()
        if node < n or node not in relabel:
            continue
        left, right, dist = int(z[node - n, 0]), int(z[node - n, 1]), z[node - n, 2]
        lam = 1.0 / max(dist, floor)
        parent = relabel[node]
        ls, rs = size(left), size(right)
        if ls >= min_cluster_size and rs >= min_cluster_size:
            for ch, cs in ((left, ls), (right, rs)):
                relabel[ch] = next_label
                rows.append((parent, next_label, lam, cs))
                next_label += 1
                queue.append(ch)
        elif ls < min_cluster_size and rs < min_cluster_size:
            for ch in (left, right):
                for p in leaves(ch):
                    rows.append((parent, p, lam, 1))
        else:
            small, big = (left, right) if ls < min_cluster_size else (right, left)
            for p in leaves(small):
                rows.append((parent, p, lam, 1))
            relabel[big] = parent
            queue.append(big)
    arr = np.array(rows, dtype=np.float64).reshape(-1, 4)
    return (arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2], arr[:, 3].astype(np.int64))


def compute_stability(parent, child, lam, child_size, n: int) -> dict[int, float]:
    clusters = np.unique(parent)
    birth = {int(n): 0.0}
    for p, c, l in zip(parent, child, lam):
        if c >= n:
            birth[int(c)] = float(l)
    stability = {int(c): 0.0 for c in clusters}
    for p, l, s in zip(parent, lam, child_size):
        stability[int(p)] += (float(l) - birth[int(p)]) * int(s)
    return stability


def select_clusters_eom(parent, child, child_size, stability: dict[int, float], n: int) -> list[int]:
    cluster_children: dict[int, list[int]] = {}
    for p, c in zip(parent, child):
        if c >= n:
            cluster_children.setdefault(int(p), []).append(int(c))
    nodes = sorted(stability)  # children carry larger labels than their parents
    is_selected = {c: True for c in nodes}
    subtree_stab = dict(stability)
    for c in reversed(nodes):
        if c == n:
            continue
        kids = cluster_children.get(c, [])
        child_sum = sum(subtree_stab[k] for k in kids)
        if child_sum > stability[c]:
            is_selected[c] = False
            subtree_stab[c] = child_sum
        else:
            stack = list(kids)
            while stack:
                v = stack.pop()
                is_selected[v] = False
                stack.extend(cluster_children.get(v, []))
    is_selected[n] = False
    return sorted(c for c, sel in is_selected.items() if sel)


def label_points(parent, child, selected: list[int], n: int) -> np.ndarray:
    up = {int(c): int(p) for p, c in zip(parent, child)}
    selected_set = set(selected)
    labels = np.full(n, NOISE, dtype=np.int64)
    for point in range(n):
        node = up.get(point)
        while node is not None:
            if node in selected_set:
                labels[point] = node
                break
            node = up.get(node)
    return labels


def hdbscan(points, params: HdbscanParams = HdbscanParams()) -> HdbscanResult:
    x = _as_array(points)
    n = x.shape[0]
    if n < params.min_cluster_size or n < 2:
        raise TooFewPoints(f"{n} points but min_cluster_size={params.min_cluster_size}")
    core = core_distances(x, params.resolved_min_samples)
    mst = mutual_reachability_mst(x, core)
    z = single_linkage(mst, n)
    parent, child, lam, csize = condense_tree(z, params.min_cluster_size)
    stability = compute_stability(parent, child, lam, csize, n)
    selected = select_clusters_eom(parent, child, csize, stability, n)
    raw = label_points(parent, child, selected, n)
    tree = CondensedTree(parent, child, lam, csize, stability, tuple(selected))
    return HdbscanResult(ClusterAssignment(canonicalize(raw)), tree, core, mst)

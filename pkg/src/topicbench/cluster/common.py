from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

NOISE = -1


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    labels: np.ndarray
    inertia: float | None = None

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max() + 1) if self.labels.size and self.labels.max() >= 0 else 0

    @property
    def outlier_fraction(self) -> float:
        return outlier_fraction(self)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels[self.labels >= 0], minlength=self.n_clusters)


def outlier_fraction(assign: ClusterAssignment | np.ndarray) -> float:
    labels = assign.labels if isinstance(assign, ClusterAssignment) else np.asarray(assign)
    if labels.size == 0:
        return 0.0
    return float(np.count_nonzero(labels == NOISE)) / labels.size


def canonicalize(labels: np.ndarray) -> np.ndarray:
    """Renumber clusters by decreasing size, ties broken by smallest member index."""
    labels = np.asarray(labels, dtype=np.int64)
    out = np.full_like(labels, NOISE)
    uniq = [c for c in np.unique(labels) if c != NOISE]
    if not uniq:
        return out
    keyed = []
    for c in uniq:
        members = np.flatnonzero(labels == c)
        keyed.append((-members.size, int(members[0]), c))
    keyed.sort()
    for new, (_, _, old) in enumerate(keyed):
        out[labels == old] = new
    return out


def write_assignment(doc_ids: Sequence[str], labels: np.ndarray, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["doc_id", "label"])
        for doc_id, lab in zip(doc_ids, labels):
            w.writerow([doc_id, int(lab)])


def read_assignment(path: str | Path) -> tuple[list[str], np.ndarray]:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [r["doc_id"] for r in rows], np.array([int(r["label"]) for r in rows], dtype=np.int64)

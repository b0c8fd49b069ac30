"""Experiment specification: loading, validation and resolved defaults."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from .errors import TopicBenchError

MODELS = ("lda", "bertopic-hdbscan", "bertopic-kmeans")

# reference configuration of the original study
DEFAULT_TOPIC_COUNTS = [5, 10, 15, 20, 25, 30]
DEFAULT_OUTLIER_GRID = [[5, 5], [10, 2], [40, 2], [80, 2], [120, 1]]


class SpecError(TopicBenchError):
    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


@dataclass
class CorpusSource:
    path: str | None = None
    synthetic: str | None = None  # preset name from topicbench.synthetic.PRESETS
    synthetic_docs: int | None = None
    synthetic_seed: int = 0
    sample: int | None = None  # random subset of this many documents
    sample_seed: int = 0
    remove_stopwords: bool = True
    stopwords: str | None = None
    min_df: int = 1
    per_group: bool = False


@dataclass
class EmbeddingSource:
    path: str | None = None
    dim: int = 256
    weighting: str = "tf-idf"


@dataclass
class UmapSection:
    n_neighbors: int = 15
    n_components: int = 5
    min_dist: float = 0.1
    n_epochs: int = 200
    metric: str = "cosine"


@dataclass
class HdbscanSection:
    min_cluster_size: int = 15
    min_samples: int | None = None


@dataclass
class KMeansSection:
    mode: str = "reference"  # "reference": k = max(n_clusters, requested) then reduce; "direct": k = requested
    n_clusters: int = 50
    max_iters: int = 300
    tol: float = 1e-4
    n_init: int = 10


@dataclass
class LdaSection:
    alpha: float | None = None
    beta: float = 0.01
    n_iterations: int = 500


@dataclass
class EvalSection:
    n_words: int = 5
    eps: float = 1e-12
    window: int | None = None
    reference: str = "full"  # "full" or "non-noise"


@dataclass
class DocLengthSection:
    short_band: list[int] = field(default_factory=lambda: [10, 25])
    long_band: list[int] = field(default_factory=lambda: [60, 100])
    sample_n: int = 1680
    seed: int = 0


@dataclass
class ExperimentSpec:
    name: str = "experiment"
    corpus: CorpusSource = field(default_factory=CorpusSource)
    embeddings: EmbeddingSource = field(default_factory=EmbeddingSource)
    models: list[str] = field(default_factory=lambda: list(MODELS))
    topic_counts: list[int] = field(default_factory=lambda: list(DEFAULT_TOPIC_COUNTS))
    runs: int = 3
    base_seed: int = 33
    umap: UmapSection = field(default_factory=UmapSection)
    hdbscan: HdbscanSection = field(default_factory=HdbscanSection)
    kmeans: KMeansSection = field(default_factory=KMeansSection)
    lda: LdaSection = field(default_factory=LdaSection)
    eval: EvalSection = field(default_factory=EvalSection)
    doclen: DocLengthSection = field(default_factory=DocLengthSection)
    outlier_grid: list[list[int]] = field(default_factory=lambda: copy.deepcopy(DEFAULT_OUTLIER_GRID))
    jobs: int | None = None

    def validate(self) -> ExperimentSpec:
        if not self.topic_counts:
            raise SpecError("topic_counts must be non-empty", "topic_counts")
        if any(int(k) < 1 for k in self.topic_counts):
            raise SpecError("topic counts must be positive", "topic_counts")
        if self.runs < 1:
            raise SpecError("runs must be >= 1", "runs")
        bad = [m for m in self.models if m not in MODELS]
        if bad or not self.models:
            raise SpecError(f"unknown model(s) {bad}; choose from {list(MODELS)}", "models")
        if self.kmeans.mode not in ("reference", "direct"):
            raise SpecError("kmeans.mode must be 'reference' or 'direct'", "kmeans.mode")
        if self.eval.reference not in ("full", "non-noise"):
            raise SpecError("eval.reference must be 'full' or 'non-noise'", "eval.reference")
        if self.corpus.path is None and self.corpus.synthetic is None:
            raise SpecError("corpus.path or corpus.synthetic is required", "corpus")
        for item in self.outlier_grid:
            if len(item) != 2:
                raise SpecError("outlier_grid entries are [min_cluster_size, min_samples]", "outlier_grid")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        payload = self.to_dict()
        payload.pop("jobs", None)  # parallelism never changes results
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def run_seeds(self) -> list[int]:
        return [self.base_seed + r for r in range(self.runs)]


def _build(cls, data: Any, prefix: str):
    if not isinstance(data, dict):
        raise SpecError(f"section {prefix or 'root'!r} must be a mapping", prefix or None)
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in known:
            raise SpecError(f"unknown spec key {path!r}", path)
        default = known[key].default_factory() if callable(known[key].default_factory) else known[key].default
        if hasattr(default, "__dataclass_fields__"):
            kwargs[key] = _build(type(default), value or {}, path)
        else:
            kwargs[key] = value
    return cls(**kwargs)


def spec_from_dict(data: dict) -> ExperimentSpec:
    return _build(ExperimentSpec, data or {}, "").validate()


def load_spec(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise SpecError(f"cannot parse spec file {path}: {exc}") from None
    spec = spec_from_dict(data or {})
    if spec.corpus.path is not None and not Path(spec.corpus.path).is_absolute():
        spec.corpus.path = str((path.parent / spec.corpus.path).resolve())
    if spec.embeddings.path is not None and not Path(spec.embeddings.path).is_absolute():
        spec.embeddings.path = str((path.parent / spec.embeddings.path).resolve())
    return spec


def apply_overrides(spec: ExperimentSpec, overrides: list[str]) -> ExperimentSpec:
    """Apply flat ``section.key=value`` overrides; values are parsed as YAML scalars."""
    data = spec.to_dict()
    for item in overrides:
        if "=" not in item:
            raise SpecError(f"override {item!r} must look like key=value", item)
        key, raw = item.split("=", 1)
        node = data
        parts = key.strip().split(".")
        for part in parts[:-1]:
            if not isinstance(node, dict) or part not in node or not isinstance(node[part], dict):
                raise SpecError(f"unknown spec key {key!r}", key)
            node = node[part]
        if parts[-1] not in node:
            raise SpecError(f"unknown spec key {key!r}", key)
        node[parts[-1]] = yaml.safe_load(raw)
    return spec_from_dict(data)

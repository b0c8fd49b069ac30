"""Deterministic report files for harness results.

Everything written here is a pure function of the results and the resolved
spec.  Wall-clock times go to a separate ``timings.csv`` so that the report
files themselves stay byte-identical across reruns.
"""

from __future__ import annotations

import csv
import json
import statistics
from pathlib import Path

from . import __version__
from .config import ExperimentSpec
from .harness import (ComparisonResult, DocLengthResult, NonOutlierResult, OutlierSweepResult, ReportRow)

ROW_FIELDS = ["kind", "model", "corpus", "n_topics", "run_seed", "tc", "td", "outlier_fraction",
              "n_topics_effective"]


def _f(x: float) -> str:
    return repr(float(x))


def _row_record(r: ReportRow) -> list:
    return ["aggregate" if r.is_aggregate else "cell", r.model, r.corpus,
            "" if r.n_topics is None else r.n_topics, "" if r.run_seed is None else r.run_seed,
            _f(r.tc), _f(r.td), _f(r.outlier_fraction), _f(r.n_topics_effective)]


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def resolved_defaults(spec: ExperimentSpec) -> dict:
    """Values that are derived per cell rather than stated in the spec."""
    counts = [int(k) for k in spec.topic_counts]
    km = spec.kmeans
    return {
        "hdbscan.min_samples": (spec.hdbscan.min_samples if spec.hdbscan.min_samples is not None
                                else spec.hdbscan.min_cluster_size),
        "lda.alpha": {str(k): (50.0 / k if spec.lda.alpha is None else spec.lda.alpha) for k in counts},
        "kmeans.k": {str(k): (k if km.mode == "direct" else max(km.n_clusters, k)) for k in counts},
        "run_seeds": spec.run_seeds(),
        "embedding_seed": spec.base_seed,
    }


def write_metadata(out_dir: Path, spec: ExperimentSpec, experiment: str, extra: dict | None = None) -> None:
    meta = {"experiment": experiment, "spec_sha256": spec.digest(), "package_version": __version__,
            "resolved_spec": spec.to_dict(), "resolved_defaults": resolved_defaults(spec)}
    meta["resolved_spec"].pop("jobs", None)
    if extra:
        meta.update(extra)
    (out_dir / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _header(spec: ExperimentSpec, title: str) -> list[str]:
    return [f"# {title}", "", f"spec `{spec.name}` sha256 `{spec.digest()}`", ""]


def write_comparison(res: ComparisonResult, spec: ExperimentSpec, out_dir: Path,
                     prefix: str = "", title: str = "Model comparison") -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    p = out_dir / f"{prefix}report.csv"
    _write_csv(p, ROW_FIELDS, [_row_record(r) for r in res.rows])
    paths.append(p)

    corpora = list(dict.fromkeys(r.corpus for r in res.aggregates))
    lines = _header(spec, title)
    lines.append("| Model | " + " | ".join(f"{c} TC | {c} TD" for c in corpora) + " |")
    lines.append("|---|" + "---|---|" * len(corpora))
    for m in spec.models:
        cells = []
        for c in corpora:
            try:
                a = res.mean(m, c)
                cells += [f"{a.tc:.3f}", f"{a.td:.3f}"]
            except KeyError:
                cells += ["n/a", "n/a"]
        lines.append(f"| {m} | " + " | ".join(cells) + " |")
    lines.append("")
    lines.append("Means over all topic counts and runs; outlier fraction and effective topic counts:")
    lines.append("")
    lines.append("| Model | Corpus | Outlier fraction | Effective topics |")
    lines.append("|---|---|---|---|")
    for a in res.aggregates:
        lines.append(f"| {a.model} | {a.corpus} | {a.outlier_fraction:.3f} | {a.n_topics_effective:.2f} |")
    if res.failures:
        lines += ["", f"{len(res.failures)} cell(s) failed:", ""]
        lines += [f"- {f.model} / {f.corpus} / k={f.n_topics} / seed={f.run_seed}: {f.error}" for f in res.failures]
    p = out_dir / f"{prefix}report.md"
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    paths.append(p)

    for metric in ("tc", "td"):
        rows = []
        for m in spec.models:
            for c in corpora:
                for k in sorted({r.n_topics for r in res.cells if r.model == m and r.corpus == c}):
                    vals = [getattr(r, metric) for r in res.cells if r.model == m and r.corpus == c and r.n_topics == k]
                    sd = statistics.pstdev(vals) if len(vals) > 1 else 0.0
                    rows.append([m, c, k, _f(statistics.fmean(vals)), _f(sd)])
        p = out_dir / f"{prefix}plot_{metric}.csv"
        _write_csv(p, ["model", "corpus", "n_topics", "mean", "std"], rows)
        paths.append(p)

    if res.failures:
        p = out_dir / f"{prefix}failures.csv"
        _write_csv(p, ["model", "corpus", "n_topics", "run_seed", "error"],
                   [[f.model, f.corpus, f.n_topics, f.run_seed, f.error] for f in res.failures])
        paths.append(p)

    p = out_dir / f"{prefix}timings.csv"
    _write_csv(p, ["model", "corpus", "n_topics", "run_seed", "wall_time_ms"],
               [[r.model, r.corpus, r.n_topics, r.run_seed, f"{r.wall_time_ms:.1f}"] for r in res.cells])
    return paths


def write_doc_length(res: DocLengthResult, spec: ExperimentSpec, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_comparison(res.long, spec, out_dir, "long_", "Long documents")
    write_comparison(res.short, spec, out_dir, "short_", "Short documents")
    _write_csv(out_dir / "report.csv",
               ["model", "tc_long", "tc_short", "tc_delta", "td_long", "td_short", "td_delta"],
               [[d.model, _f(d.tc_long), _f(d.tc_short), _f(d.tc_delta), _f(d.td_long), _f(d.td_short),
                 _f(d.td_delta)] for d in res.deltas])
    lines = _header(spec, "Document length")
    lines.append(f"short band {spec.doclen.short_band}, long band {spec.doclen.long_band}, "
                 f"{spec.doclen.sample_n} documents each")
    lines += ["", "| Model | TC long | TC short | TC δ | TD long | TD short | TD δ |", "|---|---|---|---|---|---|---|"]
    for d in res.deltas:
        lines.append(f"| {d.model} | {d.tc_long:.3f} | {d.tc_short:.3f} | {d.tc_delta:+.3f} | "
                     f"{d.td_long:.3f} | {d.td_short:.3f} | {d.td_delta:+.3f} |")
    (out_dir / "report.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_metadata(out_dir, spec, "doclen")


def write_outlier_sweep(res: OutlierSweepResult, spec: ExperimentSpec, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    header = ["min_cluster_size", "min_samples", "outlier_fraction", "tc", "td", "n_clusters"]
    records = [[r.min_cluster_size, r.min_samples, _f(r.outlier_fraction), _f(r.tc), _f(r.td), _f(r.n_clusters)]
               for r in res.rows]
    _write_csv(out_dir / "report.csv", header, records)
    _write_csv(out_dir / "plot_outliers.csv", ["outlier_fraction", "tc", "td"],
               [[_f(r.outlier_fraction), _f(r.tc), _f(r.td)] for r in res.rows])
    lines = _header(spec, "HDBSCAN outlier sweep")
    lines += ["| min_cluster_size | min_samples | Outlier fraction | Clusters | TC | TD |", "|---|---|---|---|---|---|"]
    for r in res.rows:
        lines.append(f"| {r.min_cluster_size} | {r.min_samples} | {r.outlier_fraction:.3f} | "
                     f"{r.n_clusters:.1f} | {r.tc:.3f} | {r.td:.3f} |")
    if res.failures:
        lines += ["", "Failures:", ""] + [f"- {e}" for e in res.failures]
    (out_dir / "report.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_metadata(out_dir, spec, "outliers")


def write_non_outlier(res: NonOutlierResult, spec: ExperimentSpec, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_comparison(res.full, spec, out_dir, "full_", "Full corpus")
    write_comparison(res.filtered, spec, out_dir, "filtered_", "Non-outlier corpus")
    _write_csv(out_dir / "report.csv",
               ["model", "tc_full", "tc_filtered", "tc_delta", "td_full", "td_filtered", "td_delta"],
               [[d.model, _f(d.tc_full), _f(d.tc_filtered), _f(d.tc_delta), _f(d.td_full), _f(d.td_filtered),
                 _f(d.td_delta)] for d in res.deltas])
    lines = _header(spec, "Non-outlier corpus")
    lines.append(f"initial HDBSCAN outlier fraction {res.initial_outlier_fraction:.3f}; "
                 f"{res.n_filtered} of {res.n_full} documents kept")
    lines += ["", "| Model | TC full | TC filtered | TC δ | TD full | TD filtered | TD δ |",
              "|---|---|---|---|---|---|---|"]
    for d in res.deltas:
        lines.append(f"| {d.model} | {d.tc_full:.3f} | {d.tc_filtered:.3f} | {d.tc_delta:+.3f} | "
                     f"{d.td_full:.3f} | {d.td_filtered:.3f} | {d.td_delta:+.3f} |")
    (out_dir / "report.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_metadata(out_dir, spec, "non-outlier",
                   {"n_full": res.n_full, "n_filtered": res.n_filtered,
                    "initial_outlier_fraction": res.initial_outlier_fraction})

"""Command-line entry point: ``topicbench <command> ...``.

Exit codes: 0 success, 1 fatal error, 2 partial (some cells failed), 3 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import yaml

from . import __version__
from .config import MODELS, ExperimentSpec, SpecError, apply_overrides, load_spec, spec_from_dict
from .errors import TopicBenchError

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2, 3

# sections exposed as individual ``fit`` flags
FIT_SECTIONS = ("embeddings", "umap", "hdbscan", "kmeans", "lda", "eval")
# defaults taken from the reference study configuration
REFERENCE = {
    "umap.n_neighbors", "umap.n_components", "umap.min_dist", "umap.metric",
    "hdbscan.min_cluster_size", "kmeans.n_clusters", "kmeans.mode",
    "lda.alpha", "lda.beta", "eval.n_words", "topic_counts", "runs", "outlier_grid",
    "doclen.short_band", "doclen.long_band", "doclen.sample_n",
}
NOT_FLAGS = {"embeddings.path"}


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


class HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    def _get_help_string(self, action):
        if action.default is None or "default:" in (action.help or ""):
            return action.help
        return super()._get_help_string(action)


def _scalar(raw: str):
    return yaml.safe_load(raw)


def _ref(key: str) -> str:
    return " [reference setting]" if key in REFERENCE else ""


def _add_section_flags(p: argparse.ArgumentParser) -> None:
    base = ExperimentSpec()
    for section in FIT_SECTIONS:
        group = p.add_argument_group(f"{section} parameters")
        for f in fields(getattr(base, section)):
            key = f"{section}.{f.name}"
            if key in NOT_FLAGS:
                continue
            default = getattr(getattr(base, section), f.name)
            group.add_argument(f"--{section}-{f.name}".replace("_", "-"), dest=key, type=_scalar,
                               default=None, metavar="V", help=f"default: {default!r}{_ref(key)}")


def build_parser() -> Parser:
    parser = Parser(prog="topicbench", description="Topic model benchmarking: LDA and embedding-cluster pipelines.")
    parser.add_argument("--version", action="version", version=f"topicbench {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="repeat for more logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)
    fmt = HelpFormatter

    p = sub.add_parser("preprocess", help="clean raw JSONL into a corpus file", formatter_class=fmt)
    p.add_argument("input", help="raw JSONL with id, text and optional group")
    p.add_argument("output", help="corpus JSONL to write")
    p.add_argument("--stopwords", default=None, help="stopword file, one word per line (default: bundled English list)")
    p.add_argument("--keep-stopwords", action="store_true", help="skip stopword removal")
    p.add_argument("--min-df", type=int, default=1, help="drop terms in fewer documents")

    p = sub.add_parser("synth", help="write a seeded synthetic raw corpus", formatter_class=fmt)
    p.add_argument("preset", choices=["newsgroups", "course-evaluations"])
    p.add_argument("output", help="raw JSONL to write")
    p.add_argument("--n-docs", type=int, default=None, help="document count (default: preset size)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth", default=None, help="also write generating categories as CSV")

    p = sub.add_parser("embed", help="compute fallback document embeddings", formatter_class=fmt)
    p.add_argument("corpus", help="corpus or raw JSONL")
    p.add_argument("output", help=".bin (binary) or .csv")
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--weighting", choices=["tf-idf", "tf"], default="tf-idf")
    p.add_argument("--seed", type=int, default=33)

    p = sub.add_parser("fit", help="fit one model once and dump topics", formatter_class=fmt)
    p.add_argument("corpus", help="corpus or raw JSONL")
    p.add_argument("--model", choices=MODELS, required=True)
    p.add_argument("--n-topics", type=int, required=True)
    p.add_argument("--embeddings", default=None, help="embedding file (default: fallback embedder)")
    p.add_argument("--out-dir", default=".", help="where topics.json and assignment.csv go")
    p.add_argument("--seed", type=int, default=33, help="seed for every stochastic stage [reference setting]")
    _add_section_flags(p)

    p = sub.add_parser("eval", help="score a topic dump against a reference corpus", formatter_class=fmt)
    p.add_argument("topics", help="topics.json written by fit")
    p.add_argument("reference", help="reference corpus for co-occurrence counts")
    p.add_argument("--assignment", default=None, help="assignment CSV, for the outlier fraction")
    p.add_argument("--n-words", type=int, default=5, help="top words per topic [reference setting]")
    p.add_argument("--eps", type=float, default=1e-12)
    p.add_argument("--window", type=int, default=None, help="sliding window size (default: whole document)")

    p = sub.add_parser("experiment", help="run an experiment spec and write reports", formatter_class=fmt)
    p.add_argument("spec", help="YAML experiment spec")
    p.add_argument("which", choices=["comparison", "doclen", "outliers", "non-outlier"])
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None, help="overrides base_seed (spec default 33)")
    p.add_argument("--jobs", type=int, default=None, help="worker threads (default: available cores)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a spec key, e.g. hdbscan.min_cluster_size=10")
    return parser


def _print_params(obj) -> None:
    print("resolved parameters:")
    print(json.dumps(obj, indent=2, sort_keys=True))


def _read_corpus_any(path: str, stopwords=None, remove_stopwords=True, min_df=1):
    from .harness import _read_any_corpus
    from .corpus import StopwordList
    stop = StopwordList.from_file(stopwords) if stopwords else StopwordList.default()
    return _read_any_corpus(path, stop, remove_stopwords, min_df)


def cmd_preprocess(args) -> int:
    from .corpus import StopwordList, build_corpus, preprocess_all, read_raw_jsonl, write_corpus
    stop = StopwordList.from_file(args.stopwords) if args.stopwords else StopwordList.default()
    _print_params({"input": args.input, "stopwords": stop.source_name,
                   "remove_stopwords": not args.keep_stopwords, "min_df": args.min_df})
    raws = read_raw_jsonl(args.input)
    kept, rejected = preprocess_all(raws, stop, not args.keep_stopwords)
    print(f"kept {len(kept)} documents, rejected {len(rejected)}")
    corpus = build_corpus(kept, args.min_df)
    write_corpus(corpus, args.output)
    print(f"wrote {args.output}: {len(corpus)} documents, {len(corpus.terms)} terms")
    return EXIT_OK


def cmd_synth(args) -> int:
    from . import synthetic
    from .corpus import write_raw_jsonl
    kwargs = {"seed": args.seed}
    if args.n_docs:
        kwargs["n_docs"] = args.n_docs
    spec = synthetic.PRESETS[args.preset](**kwargs)
    _print_params(spec.__dict__)
    docs, truth = synthetic.generate_any(spec)
    write_raw_jsonl(docs, args.output)
    if args.truth:
        with open(args.truth, "w", encoding="utf-8") as fh:
            fh.write("doc_id,category\n")
            fh.writelines(f"{d.id},{int(t)}\n" for d, t in zip(docs, truth))
    print(f"wrote {len(docs)} documents to {args.output}")
    return EXIT_OK


def cmd_embed(args) -> int:
    from .embedding import FallbackEmbedderConfig, fallback_embed, save_binary, save_csv
    corpus = _read_corpus_any(args.corpus)
    cfg = FallbackEmbedderConfig(dim=args.dim, seed=args.seed, weighting=args.weighting)
    _print_params({"corpus": args.corpus, "dim": cfg.dim, "seed": cfg.seed, "weighting": cfg.weighting})
    emb = fallback_embed(corpus, cfg)
    (save_csv if args.output.endswith(".csv") else save_binary)(emb, args.output)
    print(f"wrote {len(emb)} x {emb.dim} embeddings to {args.output}")
    return EXIT_OK


def cmd_fit(args) -> int:
    from .harness import ALL, Workbench, base_embeddings
    data = ExperimentSpec().to_dict()
    data["corpus"]["path"] = args.corpus
    data["models"] = [args.model]
    data["topic_counts"] = [args.n_topics]
    data["runs"] = 1
    data["base_seed"] = args.seed
    data["embeddings"]["path"] = args.embeddings
    for key, value in vars(args).items():
        if "." in key and value is not None:
            section, name = key.split(".", 1)
            data[section][name] = value
    spec = spec_from_dict(data)
    _print_params({k: v for k, v in spec.to_dict().items() if k in FIT_SECTIONS or k in ("corpus", "base_seed")}
                  | {"model": args.model, "n_topics": args.n_topics})
    corpus = _read_corpus_any(args.corpus, spec.corpus.stopwords, spec.corpus.remove_stopwords, spec.corpus.min_df)
    emb = None if args.model == "lda" else base_embeddings(spec, corpus)
    bench = Workbench(spec, {ALL: corpus}, {ALL: emb})
    out = bench.fit(args.model, ALL, args.n_topics, args.seed)
    res = bench.evaluate(out, ALL)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out.write_json(out_dir / "topics.json")
    out.write_assignment(out_dir / "assignment.csv")
    print(f"model={args.model} n_topics={out.n_topics} tc={res.tc:.6f} td={res.td:.6f} "
          f"outlier_fraction={res.outlier_fraction:.6f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .cluster import read_assignment
    from .metrics import build_cooccurrence, coherence_npmi, diversity
    from .topicrep import read_topics_json
    _print_params({"topics": args.topics, "reference": args.reference, "n_words": args.n_words,
                   "eps": args.eps, "window": args.window})
    out = read_topics_json(args.topics)
    stats = build_cooccurrence(_read_corpus_any(args.reference), args.window)
    tc = coherence_npmi(out, stats, args.n_words, args.eps)
    td = diversity(out, args.n_words)
    line = f"n_topics={out.n_topics} tc={tc:.6f} td={td:.6f}"
    if args.assignment:
        _, labels = read_assignment(args.assignment)
        frac = float((labels == -1).mean()) if len(labels) else 0.0
        line += f" outlier_fraction={frac:.6f}"
    print(line)
    return EXIT_OK


def cmd_experiment(args) -> int:
    from . import harness, report
    spec = load_spec(args.spec)
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"base_seed={args.seed}")
    if args.jobs is not None:
        overrides.append(f"jobs={args.jobs}")
    if overrides:
        spec = apply_overrides(spec, overrides)
    _print_params(spec.to_dict())
    out_dir = Path(args.out_dir)
    failed = 0
    if args.which == "comparison":
        res = harness.run_comparison(spec)
        report.write_comparison(res, spec, out_dir)
        report.write_metadata(out_dir, spec, "comparison")
        failed = len(res.failures)
    elif args.which == "doclen":
        res = harness.run_doc_length(spec)
        report.write_doc_length(res, spec, out_dir)
        failed = len(res.failures)
    elif args.which == "outliers":
        res = harness.run_outlier_sweep(spec)
        report.write_outlier_sweep(res, spec, out_dir)
        failed = len(res.failures)
    else:
        res = harness.run_non_outlier(spec)
        report.write_non_outlier(res, spec, out_dir)
        failed = len(res.failures)
    print((out_dir / "report.md").read_text(encoding="utf-8"))
    if failed:
        print(f"warning: {failed} cell(s) failed; see report", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


COMMANDS = {"preprocess": cmd_preprocess, "synth": cmd_synth, "embed": cmd_embed, "fit": cmd_fit,
            "eval": cmd_eval, "experiment": cmd_experiment}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE if exc.key else EXIT_FATAL
    except (TopicBenchError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())

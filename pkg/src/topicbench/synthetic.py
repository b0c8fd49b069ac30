"""Seeded synthetic corpora for experiments when a real benchmark corpus is unavailable.

Each generator draws documents from a mixture of category-specific vocabularies
and a shared Zipfian background vocabulary.  A configurable share of documents
is "diffuse": its category words are scattered across every category, which
gives density-based clustering something to call noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import RawDocument

_ONSETS = ["b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z",
           "br", "cl", "dr", "fl", "gr", "pl", "pr", "sk", "sl", "st", "tr", "sh", "ch", "th"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ea", "oo", "ou", "ie"]
_CODAS = ["", "", "n", "r", "s", "t", "l", "m", "nd", "st", "rk", "x"]


def pseudo_words(n: int, rng: np.random.Generator, exclude: set[str] | None = None) -> list[str]:
    """``n`` distinct lowercase alphabetic pseudo-words of two or three syllables."""
    seen = set(exclude or ())
    out = []
    while len(out) < n:
        syll = int(rng.integers(2, 4))
        w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))]
                    for _ in range(syll)) + _CODAS[rng.integers(len(_CODAS))]
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


def _zipf(n: int, exponent: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** exponent
    return w / w.sum()


@dataclass(frozen=True)
class SyntheticSpec:
    n_docs: int = 11096
    n_categories: int = 20
    words_per_category: int = 80
    background_words: int = 3000
    median_length: float = 45.0
    length_sigma: float = 0.9
    min_length: int = 5
    max_length: int = 400
    topical_share: float = 0.45  # mean fraction of tokens drawn from the category vocabulary
    diffuse_share: float = 0.2
    n_groups: int = 0
    group_synonym_share: float = 0.0
    seed: int = 0
    id_prefix: str = "doc"


def generate(spec: SyntheticSpec) -> tuple[list[RawDocument], np.ndarray]:
    """Return raw documents and their generating category (-1 for diffuse documents)."""
    rng = np.random.default_rng(spec.seed)
    vocab = pseudo_words(spec.background_words + spec.n_categories * spec.words_per_category, rng)
    background = vocab[:spec.background_words]
    cat_vocab = [vocab[spec.background_words + c * spec.words_per_category:
                       spec.background_words + (c + 1) * spec.words_per_category]
                 for c in range(spec.n_categories)]
    bg_p = _zipf(len(background), 1.05)
    cat_p = _zipf(spec.words_per_category, 0.8)
    # group-specific synonyms for the most frequent category words (vocabulary shift across groups)
    n_syn = int(round(spec.group_synonym_share * spec.words_per_category))
    synonyms = {}
    if spec.n_groups and n_syn:
        extra = pseudo_words(spec.n_groups * spec.n_categories * n_syn, rng, exclude=set(vocab))
        it = iter(extra)
        for g in range(spec.n_groups):
            for c in range(spec.n_categories):
                synonyms[(g, c)] = [next(it) for _ in range(n_syn)]
    all_cat_words = [w for ws in cat_vocab for w in ws]
    all_cat_p = np.concatenate([cat_p for _ in range(spec.n_categories)]) / spec.n_categories

    docs, truth = [], np.empty(spec.n_docs, dtype=np.int64)
    width = len(str(spec.n_docs - 1))
    for i in range(spec.n_docs):
        length = int(np.clip(round(rng.lognormal(np.log(spec.median_length), spec.length_sigma)),
                             spec.min_length, spec.max_length))
        share = rng.beta(4.0 * spec.topical_share, 4.0 * (1.0 - spec.topical_share))
        n_topical = int(rng.binomial(length, share))
        cat = int(rng.integers(spec.n_categories))
        group = int(rng.integers(spec.n_groups)) if spec.n_groups else None
        diffuse = rng.random() < spec.diffuse_share
        if diffuse:
            idx = rng.choice(len(all_cat_words), size=n_topical, p=all_cat_p)
            topical = [all_cat_words[j] for j in idx]
            truth[i] = -1
        else:
            idx = rng.choice(spec.words_per_category, size=n_topical, p=cat_p)
            words = cat_vocab[cat]
            if group is not None and (group, cat) in synonyms:
                syn = synonyms[(group, cat)]
                topical = [syn[j] if j < len(syn) else words[j] for j in idx]
            else:
                topical = [words[j] for j in idx]
            truth[i] = cat
        bg = [background[j] for j in rng.choice(len(background), size=length - n_topical, p=bg_p)]
        tokens = topical + bg
        order = rng.permutation(len(tokens))
        text = " ".join(tokens[j] for j in order)
        gname = f"group{group + 1}" if group is not None else None
        docs.append(RawDocument(f"{spec.id_prefix}{i:0{width}d}", text, gname))
    return docs, truth


@dataclass(frozen=True)
class NestedSpec:
    """Categories split into subtopics, which in turn contain near-duplicate response templates.

    Density therefore varies on three scales, plus category-level "vague"
    documents and a global haze of off-topic remarks built from a shared
    generic vocabulary.
    """

    n_docs: int = 3000
    n_categories: int = 5
    subtopics: int = 6
    templates: int = 4
    category_words: int = 60
    subtopic_words: int = 12
    template_words: int = 4
    generic_words: int = 50
    background_words: int = 1500
    median_length: float = 16.0
    length_sigma: float = 0.55
    min_length: int = 4
    max_length: int = 120
    template_docs: float = 0.3
    subtopic_docs: float = 0.35
    category_docs: float = 0.35  # the remainder is haze
    size_concentration: float = 6.0  # Dirichlet concentration of subtopic and template sizes
    category_zipf: float = 0.3
    category_share: float = 0.35  # token shares for the non-background part of a document
    subtopic_share: float = 0.3
    generic_share: float = 0.15
    haze_generic_share: float = 0.2
    n_groups: int = 5
    seed: int = 0
    id_prefix: str = "doc"


def _draw(rng, words, p, n):
    return [words[j] for j in rng.choice(len(words), size=n, p=p)] if n > 0 else []


def generate_nested(spec: NestedSpec) -> tuple[list[RawDocument], np.ndarray]:
    """Return raw documents and their category (-1 for haze documents)."""
    rng = np.random.default_rng(spec.seed)
    n_cat, n_sub, n_tpl = spec.n_categories, spec.subtopics, spec.templates
    sizes = [spec.background_words, spec.generic_words, n_cat * spec.category_words,
             n_cat * n_sub * spec.subtopic_words, n_cat * n_sub * n_tpl * spec.template_words]
    vocab = pseudo_words(sum(sizes), rng)
    cuts = np.cumsum([0] + sizes)
    background, generic = vocab[cuts[0]:cuts[1]], vocab[cuts[1]:cuts[2]]

    def chunks(block, width):
        words = vocab[cuts[block]:cuts[block + 1]]
        return [words[i:i + width] for i in range(0, len(words), width)]

    cat_vocab = chunks(2, spec.category_words)
    sub_vocab = chunks(3, spec.subtopic_words)
    tpl_vocab = chunks(4, spec.template_words)
    bg_p, gen_p = _zipf(len(background), 1.05), _zipf(len(generic), 1.0)
    cat_p, sub_p = _zipf(spec.category_words, spec.category_zipf), _zipf(spec.subtopic_words, 0.6)
    cat_weights = rng.dirichlet(np.full(n_cat, 8.0))
    sub_weights = rng.dirichlet(np.full(n_sub, spec.size_concentration), size=n_cat)
    tpl_weights = rng.dirichlet(np.full(n_tpl, spec.size_concentration), size=(n_cat, n_sub))
    kinds = np.array([spec.template_docs, spec.subtopic_docs, spec.category_docs,
                      max(0.0, 1.0 - spec.template_docs - spec.subtopic_docs - spec.category_docs)])
    kinds = kinds / kinds.sum()

    docs, truth = [], np.empty(spec.n_docs, dtype=np.int64)
    width = len(str(spec.n_docs - 1))
    for i in range(spec.n_docs):
        length = int(np.clip(round(rng.lognormal(np.log(spec.median_length), spec.length_sigma)),
                             spec.min_length, spec.max_length))
        kind = int(rng.choice(4, p=kinds))
        cat = int(rng.choice(n_cat, p=cat_weights))
        sub = int(rng.choice(n_sub, p=sub_weights[cat]))
        tpl = int(rng.choice(n_tpl, p=tpl_weights[cat, sub]))
        sub_words = sub_vocab[cat * n_sub + sub]
        cat_words = cat_vocab[cat]
        if kind == 0:  # template: the full template phrase on top of a subtopic document
            tokens = list(tpl_vocab[(cat * n_sub + sub) * n_tpl + tpl])
            rest = max(0, length - len(tokens))
            n_c = int(rng.binomial(rest, spec.category_share))
            tokens += _draw(rng, cat_words, cat_p, n_c)
            tokens += _draw(rng, sub_words, sub_p, int(rng.binomial(rest - n_c, spec.subtopic_share)))
        elif kind == 1:
            n_c = int(rng.binomial(length, spec.category_share))
            tokens = _draw(rng, cat_words, cat_p, n_c)
            tokens += _draw(rng, sub_words, sub_p, int(rng.binomial(length - n_c, spec.subtopic_share)))
        elif kind == 2:
            n_c = int(rng.binomial(length, spec.category_share))
            tokens = _draw(rng, cat_words, cat_p, n_c)
            tokens += _draw(rng, generic, gen_p, int(rng.binomial(length - n_c, spec.generic_share)))
        else:
            n_g = int(rng.binomial(length, spec.haze_generic_share))
            tokens = _draw(rng, generic, gen_p, n_g)
            tokens += _draw(rng, cat_vocab[int(rng.integers(n_cat))], cat_p, int(rng.binomial(length - n_g, 0.1)))
            cat = -1
        tokens += _draw(rng, background, bg_p, length - len(tokens))
        order = rng.permutation(len(tokens))
        group = f"group{int(rng.integers(spec.n_groups)) + 1}" if spec.n_groups else None
        docs.append(RawDocument(f"{spec.id_prefix}{i:0{width}d}", " ".join(tokens[j] for j in order), group))
        truth[i] = cat
    return docs, truth


def newsgroups_like(n_docs: int = 11096, seed: int = 0) -> SyntheticSpec:
    """Twenty categories with a broad length distribution (covers 10-25 and 60-100 word bands)."""
    return SyntheticSpec(n_docs=n_docs, seed=seed, id_prefix="ng")


def course_evaluations_like(n_docs: int = 3000, seed: int = 0) -> NestedSpec:
    """Short responses (median 16 words) with nested density: categories, subtopics, templates."""
    return NestedSpec(n_docs=n_docs, seed=seed, id_prefix="cer")


def generate_any(spec: SyntheticSpec | NestedSpec) -> tuple[list[RawDocument], np.ndarray]:
    return generate_nested(spec) if isinstance(spec, NestedSpec) else generate(spec)


PRESETS = {"newsgroups": newsgroups_like, "course-evaluations": course_evaluations_like}

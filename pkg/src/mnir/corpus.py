"""Text to token counts: cleaning, n-gram tokenization, pruning, and lift tables."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy import sparse

from .porter import stem as porter_stem


class EmptyVocabularyError(ValueError):
    """No token survived document-frequency pruning."""


def default_stopwords() -> frozenset[str]:
    text = resources.files("mnir").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(w for w in text.split() if w)


@dataclass(frozen=True)
class TokenizerConfig:
    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    stem: bool = True
    ngram_min: int = 1
    ngram_max: int = 1
    min_doc_count: int = 1
    ngram_across_sentences: bool = True

    def __post_init__(self):
        if not (1 <= self.ngram_min <= self.ngram_max):
            raise ValueError("need 1 <= ngram_min <= ngram_max")
        if self.min_doc_count < 1:
            raise ValueError("min_doc_count must be >= 1")


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]
    index: dict[str, int] = field(repr=False, default=None)

    def __post_init__(self):
        if self.index is None:
            object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.tokens)


class SparseCounts:
    """Document-by-token count matrix with cached row totals.

    Rows are documents, columns are vocabulary entries.  Stored CSR with
    strictly positive integer counts; ``doc_ids`` names the surviving rows.
    """

    def __init__(self, matrix: sparse.spmatrix, doc_ids: list[str] | None = None):
        m = sparse.csr_matrix(matrix, dtype=np.float64)
        m.eliminate_zeros()
        if m.nnz and m.data.min() <= 0:
            raise ValueError("counts must be strictly positive")
        self.matrix = m
        self.n, self.p = m.shape
        self.doc_ids = list(doc_ids) if doc_ids is not None else [str(i) for i in range(self.n)]
        if len(self.doc_ids) != self.n:
            raise ValueError("doc_ids length must match row count")
        self.row_totals = np.asarray(m.sum(axis=1)).ravel()

    def frequencies(self) -> sparse.csr_matrix:
        """Row-normalized counts f_i = x_i / m_i."""
        if np.any(self.row_totals <= 0):
            bad = [self.doc_ids[i] for i in np.where(self.row_totals <= 0)[0]]
            raise ValueError(f"documents with zero total count: {bad[:10]}")
        inv = sparse.diags(1.0 / self.row_totals)
        return (inv @ self.matrix).tocsr()

    def entries(self):
        """Iterate (doc index, token index, count) triplets."""
        coo = self.matrix.tocoo()
        return zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())


_PUNCT_RE = re.compile(r"[^\w\s']", flags=re.UNICODE)
_SENTENCE_RE = re.compile(r"[.!?]+")


def _clean_words(text: str, config: TokenizerConfig) -> list[str]:
    text = _PUNCT_RE.sub(" ", text.lower()).replace("_", " ")
    words = []
    for raw in text.split():
        w = raw.strip("'")
        if not w or w in config.stopwords:
            continue
        if config.stem:
            w = porter_stem(w)
        if w:
            words.append(w)
    return words


def tokenize(text: str, config: TokenizerConfig | None = None) -> list[str]:
    """Clean text and emit n-gram tokens, components joined by '.'."""
    config = config or TokenizerConfig()
    if config.ngram_across_sentences:
        chunks = [text]
    else:
        chunks = _SENTENCE_RE.split(text)
    out = []
    for n in range(config.ngram_min, config.ngram_max + 1):
        for chunk in chunks:
            words = _clean_words(chunk, config)
            for i in range(len(words) - n + 1):
                out.append(".".join(words[i : i + n]))
    return out


def count(
    docs: list[list[str]],
    config: TokenizerConfig | None = None,
    doc_ids: list[str] | None = None,
) -> tuple[SparseCounts, Vocabulary]:
    """Tally token lists into a pruned count matrix.

    A token is kept iff it appears in at least ``min_doc_count`` documents;
    documents left with no surviving tokens are dropped (the returned
    ``SparseCounts.doc_ids`` identifies the survivors).
    """
    if not docs:
        raise ValueError("docs must be nonempty")
    config = config or TokenizerConfig()
    if doc_ids is None:
        doc_ids = [str(i) for i in range(len(docs))]

    doc_freq: dict[str, int] = {}
    for toks in docs:
        for t in set(toks):
            doc_freq[t] = doc_freq.get(t, 0) + 1
    kept = sorted(t for t, c in doc_freq.items() if c >= config.min_doc_count)
    if not kept:
        raise EmptyVocabularyError(
            f"empty vocabulary: no token appears in >= {config.min_doc_count} documents"
        )
    vocab = Vocabulary(tuple(kept))

    rows, cols, vals = [], [], []
    surviving = []
    r = 0
    for di, toks in enumerate(docs):
        tally: dict[int, int] = {}
        for t in toks:
            j = vocab.index.get(t)
            if j is not None:
                tally[j] = tally.get(j, 0) + 1
        if not tally:
            continue
        surviving.append(doc_ids[di])
        for j, c in sorted(tally.items()):
            rows.append(r)
            cols.append(j)
            vals.append(c)
        r += 1
    mat = sparse.csr_matrix(
        (np.array(vals, dtype=float), (rows, cols)), shape=(r, len(vocab))
    )
    return SparseCounts(mat, surviving), vocab


def frequency_lift(counts: SparseCounts, groups) -> dict:
    """Per-group token lift: mean within-group frequency over corpus-wide mean.

    ``groups`` is a sequence of labels aligned with ``counts`` rows.  Tokens
    whose corpus-wide mean frequency is zero are reported as NaN.
    """
    labels = np.asarray(list(groups))
    if labels.size != counts.n:
        raise ValueError("groups must label every document")
    F = counts.frequencies()
    fbar = np.asarray(F.mean(axis=0)).ravel()
    out = {}
    for g in np.unique(labels):
        sel = labels == g
        if not sel.any():
            raise ValueError(f"empty group: {g!r}")
        fbar_g = np.asarray(F[sel].mean(axis=0)).ravel()
        with np.errstate(invalid="ignore", divide="ignore"):
            out[g] = np.where(fbar > 0, fbar_g / fbar, np.nan)
    return out


def top_lift(
    counts: SparseCounts,
    vocab: Vocabulary,
    groups,
    group,
    k: int = 5,
) -> list[tuple[str, float]]:
    """Top-k lift tokens for one group, among tokens used both inside and
    outside the group."""
    labels = np.asarray(list(groups))
    lifts = frequency_lift(counts, labels)[group]
    sel = labels == group
    used_in = np.asarray((counts.matrix[sel] > 0).sum(axis=0)).ravel() > 0
    used_out = np.asarray((counts.matrix[~sel] > 0).sum(axis=0)).ravel() > 0
    eligible = used_in & used_out & np.isfinite(lifts)
    ranked = np.argsort(-np.where(eligible, lifts, -np.inf), kind="stable")[:k]
    return [(vocab.tokens[j], float(lifts[j])) for j in ranked if eligible[j]]

"""Bundled benchmark corpora.

Two corpora ship with the package as TSV fixtures: a year of congressional
speech counted over 1000 partisan phrases per speaker (with party, state,
chamber, and constituency vote-share), and 6166 we8there restaurant reviews
counted over 2640 bigrams (with five aspect ratings).
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .corpus import SparseCounts, Vocabulary
from .io import read_counts_tsv, read_table_tsv


def _data_path(name: str):
    return resources.files("mnir").joinpath(f"data/{name}")


def load_congress() -> tuple[SparseCounts, Vocabulary, dict]:
    """Congressional speech counts and speaker ideology.

    Returns (counts, vocabulary, meta) where meta holds aligned arrays:
    party ('D'/'R'/'I'), state, chamber, repshare (two-party Bush
    vote-share fraction), cs1, cs2, plus derived bushvote (percentage) and
    gop (1.0 for Republicans).
    """
    with resources.as_file(_data_path("congress_counts.tsv")) as p:
        counts, vocab = read_counts_tsv(p)
    with resources.as_file(_data_path("congress_ideology.tsv")) as p:
        doc_ids, _, cols = read_table_tsv(p)
    if doc_ids != counts.doc_ids:
        raise RuntimeError("bundled congress fixtures out of sync")
    meta = dict(cols)
    meta["bushvote"] = meta["repshare"] * 100.0
    meta["gop"] = (meta["party"] == "R").astype(float)
    return counts, vocab, meta


def load_we8there() -> tuple[SparseCounts, Vocabulary, dict]:
    """Restaurant review bigram counts and five-aspect ratings.

    Returns (counts, vocabulary, ratings) with ratings columns food,
    service, value, atmosphere, overall on a 1..5 scale.
    """
    with resources.as_file(_data_path("we8there_counts.tsv")) as p:
        counts, vocab = read_counts_tsv(p)
    with resources.as_file(_data_path("we8there_ratings.tsv")) as p:
        doc_ids, _, cols = read_table_tsv(p)
    if doc_ids != counts.doc_ids:
        raise RuntimeError("bundled we8there fixtures out of sync")
    return counts, vocab, dict(cols)


def congress_votediff(meta: dict) -> np.ndarray:
    """Vote-share centered within party lines and rounded to whole points.

    The two independents caucus with the Democrats, so centering uses the
    two-party split.
    """
    gop = meta["gop"]
    bushvote = meta["bushvote"]
    centered = bushvote.copy()
    for g in (0.0, 1.0):
        centered[gop == g] -= bushvote[gop == g].mean()
    return np.sign(centered) * np.floor(np.abs(centered) + 0.5)

"""Sufficient-reduction scores: project token frequencies onto fitted loadings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .corpus import SparseCounts, Vocabulary
from .solver import MnirFit


@dataclass
class SrScores:
    """Per-document score matrix z_i = phi' f_i (n x K).

    When standardized, ``normalization`` holds the training (mean, sd) per
    column so the same transform can be reapplied to new documents.
    """

    z: np.ndarray
    doc_ids: list[str]
    normalization: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def K(self):
        return self.z.shape[1]


def _project(phi: np.ndarray, counts: SparseCounts, vocabulary=None,
             fit_vocab=None) -> np.ndarray:
    """phi' x_i / m_i with out-of-vocabulary tokens dropped from both the
    numerator and the row total."""
    if vocabulary is None or fit_vocab is None or tuple(vocabulary.tokens) == tuple(fit_vocab):
        mat = counts.matrix
        totals = counts.row_totals
    else:
        cols = [vocabulary.index[t] for t in fit_vocab if t in vocabulary.index]
        keep = [t for t in fit_vocab if t in vocabulary.index]
        sub = counts.matrix[:, cols]
        rows = {t: i for i, t in enumerate(fit_vocab)}
        expand = sparse.csr_matrix(
            (np.ones(len(keep)), (range(len(keep)), [rows[t] for t in keep])),
            shape=(len(keep), len(fit_vocab)),
        )
        mat = sub @ expand
        totals = np.asarray(mat.sum(axis=1)).ravel()
    if np.any(totals <= 0):
        bad = [counts.doc_ids[i] for i in np.where(totals <= 0)[0]]
        raise ValueError(
            f"documents with no in-vocabulary tokens: {bad[:10]}"
            + ("..." if len(bad) > 10 else ""))
    z = np.asarray(mat @ phi)
    return z / totals[:, None]


def sr_scores(fit: MnirFit, counts: SparseCounts, standardize: bool = False,
              vocabulary: Vocabulary | None = None,
              normalization=None) -> SrScores:
    """Score documents with a fitted model.

    ``vocabulary`` names the columns of ``counts``; it must be supplied when
    scoring documents counted against a different vocabulary than the fit
    (unseen tokens contribute zero, and row totals are recomputed over the
    modeled vocabulary).  Pass ``normalization`` from a training
    ``SrScores`` to reuse frozen standardization parameters.
    """
    if fit.vocabulary is not None and vocabulary is not None:
        if tuple(vocabulary.tokens) != tuple(fit.vocabulary):
            z = _project(fit.phi, counts, vocabulary, fit.vocabulary)
        else:
            z = _project(fit.phi, counts)
    else:
        if fit.phi.shape[0] != counts.p:
            raise ValueError(
                f"vocabulary mismatch: fit has {fit.phi.shape[0]} tokens, "
                f"counts have {counts.p}")
        z = _project(fit.phi, counts)

    if normalization is not None:
        mean, sd = normalization
        return SrScores((z - mean) / sd, counts.doc_ids, (mean, sd))
    if standardize:
        mean = z.mean(axis=0)
        sd = z.std(axis=0)
        if np.any(sd == 0):
            raise ValueError("cannot standardize a zero-variance score column")
        return SrScores((z - mean) / sd, counts.doc_ids, (mean, sd))
    return SrScores(z, counts.doc_ids, None)

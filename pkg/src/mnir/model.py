"""Multinomial inverse-regression likelihood objects.

Token counts x_i for document i are modeled multinomial with logit
probabilities q_ij driven by eta_ij = alpha_j + u_ij + v_i' phi_j.
Documents sharing a response-factor level can be pooled into a single
pseudo-observation without changing the likelihood (up to a constant),
which is how every large fit here is run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .corpus import SparseCounts


def round_half_away(values, grid: float = 1.0):
    """Round to the nearest grid multiple, ties away from zero."""
    v = np.asarray(values, dtype=float) / grid
    return np.sign(v) * np.floor(np.abs(v) + 0.5) * grid


class FactorMatrix:
    """n x K response factors with a level index for collapsing.

    Levels are the distinct rows of ``values``; every document belongs to
    exactly one level.
    """

    def __init__(self, values, doc_ids: list[str] | None = None,
                 names: list[str] | None = None):
        v = np.atleast_2d(np.asarray(values, dtype=float))
        if v.shape[0] == 1 and v.size > 1 and np.asarray(values).ndim == 1:
            v = v.T
        self.values = v
        self.n, self.K = v.shape
        if self.K < 1:
            raise ValueError("need K >= 1 factor columns")
        self.doc_ids = list(doc_ids) if doc_ids is not None else [str(i) for i in range(self.n)]
        self.names = list(names) if names is not None else [f"f{k+1}" for k in range(self.K)]
        self._levels = None

    @property
    def levels(self) -> dict[tuple, list[int]]:
        """Distinct row vector -> document indices, in lexicographic order."""
        if self._levels is None:
            lev: dict[tuple, list[int]] = {}
            for i, row in enumerate(self.values):
                lev.setdefault(tuple(row), []).append(i)
            self._levels = dict(sorted(lev.items()))
        return self._levels

    def standardized(self) -> "FactorMatrix":
        """Columns rescaled to mean zero, standard deviation one."""
        sd = self.values.std(axis=0)
        if np.any(sd == 0):
            bad = [self.names[k] for k in np.where(sd == 0)[0]]
            raise ValueError(f"zero-variance factor columns: {bad}")
        out = FactorMatrix((self.values - self.values.mean(axis=0)) / sd,
                           self.doc_ids, self.names)
        return out

    def rounded(self, grid: float = 1.0, columns=None) -> "FactorMatrix":
        vals = self.values.copy()
        cols = range(self.K) if columns is None else columns
        for k in cols:
            vals[:, k] = round_half_away(vals[:, k], grid)
        return FactorMatrix(vals, self.doc_ids, self.names)


@dataclass(frozen=True)
class PriorSpec:
    """Gamma-lasso hyperprior plus intercept and random-effect settings."""

    s: float = 1.0
    r: float = 0.5
    sigma_alpha: float = 1.0
    random_effects: str = "none"  # "none" | "collapsed"

    def __post_init__(self):
        if self.s <= 0 or self.r <= 0 or self.sigma_alpha <= 0:
            raise ValueError("s, r, sigma_alpha must be positive")
        if self.random_effects not in ("none", "collapsed"):
            raise ValueError("random_effects must be 'none' or 'collapsed'")


@dataclass
class CollapsedData:
    """Counts pooled by response-factor level.

    x: d x p summed counts (sparse CSR); m: per-level totals; n_v: number of
    pooled documents per level; V: d x K level values.
    """

    x: sparse.csr_matrix
    m: np.ndarray
    n_v: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        self.d, self.p = self.x.shape
        self.K = self.V.shape[1]

    def validate(self, counts: SparseCounts):
        assert np.isclose(self.m.sum(), counts.row_totals.sum())
        assert np.allclose(
            np.asarray(self.x.sum(axis=0)).ravel(),
            np.asarray(counts.matrix.sum(axis=0)).ravel(),
        )
        assert int(self.n_v.sum()) == counts.n


def collapse(counts: SparseCounts, factors: FactorMatrix) -> CollapsedData:
    """Pool documents that share a factor level into one pseudo-observation."""
    if factors.n != counts.n:
        raise ValueError("factors must cover all documents")
    levels = factors.levels
    d = len(levels)
    V = np.array(list(levels.keys()), dtype=float)
    rows = np.empty(counts.n, dtype=np.int64)
    n_v = np.empty(d)
    m = np.zeros(d)
    for li, (lev, idx) in enumerate(levels.items()):
        rows[idx] = li
        n_v[li] = len(idx)
        m[li] = counts.row_totals[idx].sum()
    coo = counts.matrix.tocoo()
    x = sparse.csr_matrix(
        (coo.data, (rows[coo.row], coo.col)), shape=(d, counts.p)
    )
    x.sum_duplicates()
    return CollapsedData(x=x, m=m, n_v=n_v, V=V)


def per_document(counts: SparseCounts, factors: FactorMatrix) -> CollapsedData:
    """One pseudo-observation per document (no pooling)."""
    if factors.n != counts.n:
        raise ValueError("factors must cover all documents")
    return CollapsedData(
        x=counts.matrix.tocsr(),
        m=counts.row_totals.copy(),
        n_v=np.ones(counts.n),
        V=factors.values.copy(),
    )


def collapsed_re_prior(n_v) -> tuple[np.ndarray, np.ndarray]:
    """Normal prior (mean, variance) for pooled random effects u_vj.

    Pooling n_v unit-rate gamma multipliers gives a Ga(n_v, 1) total whose
    log is approximated N(log n_v - var/2, var) with
    var = log(n_v + 1) - log(n_v).
    """
    n_v = np.asarray(n_v, dtype=float)
    if np.any(n_v < 1):
        raise ValueError("level sizes must be >= 1")
    var = np.log(n_v + 1.0) - np.log(n_v)
    mean = np.log(n_v) - 0.5 * var
    return mean, var


class MnirParams:
    """Parameter state with a consistent linear-predictor cache.

    eta is dense d x p; lse holds per-row log-sum-exp of eta.  The cache is
    refreshed from scratch via ``recompute_eta`` and must stay within 1e-8
    of that recomputation at all times.
    """

    def __init__(self, alpha, phi, V, u=None):
        self.alpha = np.asarray(alpha, dtype=float)
        self.phi = np.atleast_2d(np.asarray(phi, dtype=float))
        self.V = np.atleast_2d(np.asarray(V, dtype=float))
        self.p = self.alpha.shape[0]
        self.d, self.K = self.V.shape
        if self.phi.shape != (self.p, self.K):
            raise ValueError("phi must be p x K")
        self.u = None if u is None else np.asarray(u, dtype=float)
        self.eta = None
        self.lse = None
        self.recompute_eta()

    def recompute_eta(self):
        eta = self.alpha[None, :] + self.V @ self.phi.T
        if self.u is not None:
            eta = eta + self.u
        self.eta = eta
        M = eta.max(axis=1)
        self.lse = M + np.log(np.exp(eta - M[:, None]).sum(axis=1))

    def probabilities(self) -> np.ndarray:
        """Row-stochastic q_ij, d x p."""
        return np.exp(self.eta - self.lse[:, None])

    def cache_consistent(self, tol: float = 1e-8) -> bool:
        eta = self.alpha[None, :] + self.V @ self.phi.T
        if self.u is not None:
            eta = eta + self.u
        return bool(np.abs(eta - self.eta).max() <= tol)


def neg_log_lik(params: MnirParams, x, m) -> float:
    """Negative multinomial log likelihood, dropping the count coefficient.

    l = -sum_i [ x_i' eta_i - m_i * logsumexp(eta_i) ], computed with
    max-subtracted log-sum-exp.
    """
    if not np.all(np.isfinite(params.eta)):
        raise FloatingPointError("non-finite linear predictor")
    m = np.asarray(m, dtype=float)
    if sparse.issparse(x):
        xdote = float(np.sum(x.multiply(params.eta)))
    else:
        xdote = float(np.sum(np.asarray(x) * params.eta))
    return -(xdote - float(m @ params.lse))

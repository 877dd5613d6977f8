"""Slant index and stagewise inverse-regression partial least squares.

The slant index loads token frequencies by their per-token least-squares
slope against the response; its correlation-normalized variant is the first
PLS direction.  The PLS routine residualizes the response factor stage by
stage and finishes with OLS on the collected directions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse


def _col_stats(F):
    """Column means and population standard deviations, sparse-aware."""
    if sparse.issparse(F):
        mean = np.asarray(F.mean(axis=0)).ravel()
        msq = np.asarray(F.multiply(F).mean(axis=0)).ravel()
        sd = np.sqrt(np.maximum(msq - mean ** 2, 0.0))
    else:
        mean = F.mean(axis=0)
        sd = F.std(axis=0)
    return mean, sd


def slant_index(F, y) -> tuple[np.ndarray, np.ndarray]:
    """Per-document slant scores in both standard forms.

    Returns (gs, normalized): the least-squares form
    sum_j b_j (f_ij - a_j) / sum_j b_j^2 on raw frequencies, and the
    correlation-loaded form sum_j f_ij * cor(f_j, y).  Zero-variance columns
    are dropped with a warning.
    """
    y = np.asarray(y, dtype=float)
    n = F.shape[0]
    if len(y) != n:
        raise ValueError("y must align with rows of F")
    sd_y = y.std()
    if sd_y == 0:
        raise ValueError("constant response: slant is undefined")
    mean, sd = _col_stats(F)
    keep = sd > 0
    if not keep.all():
        warnings.warn(f"dropping {int((~keep).sum())} zero-variance columns",
                      stacklevel=2)

    yc = y - y.mean()
    # per-column OLS slope of f_j on y: cov(f_j, y)/var(y); yc is centered
    # so F.T @ yc needs no mean correction
    cov = np.asarray(F.T @ yc).ravel() / n
    b = np.where(keep, cov / y.var(), 0.0)
    a = np.where(keep, mean - b * y.mean(), 0.0)
    denom = float(b @ b)
    if denom == 0:
        gs = np.zeros(n)
    else:
        gs = (np.asarray(F @ b).ravel() - float(a @ b)) / denom
    cor = np.where(keep, cov / np.where(keep, sd * sd_y, 1.0), 0.0)
    normalized = np.asarray(F @ cor).ravel()
    return gs, normalized


@dataclass
class PlsFit:
    """Stagewise PLS state: loadings and directions per stage plus the
    final OLS coefficients on [1, Z]."""

    K: int
    loadings: np.ndarray          # p x K correlations
    directions: np.ndarray        # n x K
    coef: np.ndarray              # intercept + K slopes
    col_mean: np.ndarray
    col_sd: np.ndarray
    keep: np.ndarray
    r2: float

    def fitted(self) -> np.ndarray:
        return self.coef[0] + self.directions @ self.coef[1:]

    def project(self, F) -> np.ndarray:
        """Directions for new rows under the training normalization."""
        Z = np.empty((F.shape[0], self.K))
        for k in range(self.K):
            w = np.where(self.keep, self.loadings[:, k] / np.where(self.keep, self.col_sd, 1.0), 0.0)
            Z[:, k] = np.asarray(F @ w).ravel() - float(self.col_mean @ w)
        return Z


def pls_fit(F, y, K: int = 1) -> PlsFit:
    """Stagewise inverse-regression PLS with correlation loadings.

    Columns of F are normalized to mean zero, variance one internally; the
    response factor starts at y and is residualized against each direction
    in turn.
    """
    if K < 1:
        raise ValueError("need K >= 1")
    y = np.asarray(y, dtype=float)
    n, p = F.shape
    mean, sd = _col_stats(F)
    keep = sd > 0
    if not keep.all():
        warnings.warn(f"dropping {int((~keep).sum())} zero-variance columns",
                      stacklevel=2)
    safe_sd = np.where(keep, sd, 1.0)

    v = y.copy()
    loadings = np.zeros((p, K))
    Z = np.empty((n, K))
    for k in range(K):
        vc = v - v.mean()
        sd_v = v.std()
        if sd_v == 0:
            raise ZeroDivisionError(f"response factor collapsed at stage {k + 1}")
        # cor(fhat_j, v) over normalized columns equals cor(f_j, v);
        # vc is centered so no mean correction is needed
        cov = np.asarray(F.T @ vc).ravel() / n
        phi = np.where(keep, cov / (safe_sd * sd_v), 0.0)
        loadings[:, k] = phi
        w = np.where(keep, phi / safe_sd, 0.0)
        z = np.asarray(F @ w).ravel() - float(mean @ w)
        zz = float(z @ z)
        if zz == 0:
            raise ZeroDivisionError(f"direction collapsed at stage {k + 1}")
        Z[:, k] = z
        v = v - (float(z @ v) / zz) * z

    X = np.column_stack([np.ones(n), Z])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return PlsFit(K=K, loadings=loadings, directions=Z, coef=coef,
                  col_mean=mean, col_sd=sd, keep=keep, r2=r2)

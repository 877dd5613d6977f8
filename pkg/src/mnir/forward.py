"""Forward regressions of sentiment on sufficient-reduction scores.

Plain maximum likelihood throughout: OLS for linear and quadratic means,
Newton-Raphson for the binary logit and the proportional-odds model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SeparationError(RuntimeError):
    """Perfect separation: the logistic MLE diverges.

    Refit with ``allow_ridge=True`` to apply a weak quadratic penalty.
    """


@dataclass
class ForwardFit:
    kind: str  # linear | quadratic | logistic | polr | linear-interaction
    coef: np.ndarray
    intercept: float | None = None
    cutpoints: np.ndarray | None = None
    r2: float | None = None
    rmse: float | None = None
    misclass: float | None = None
    n_levels: int | None = None
    levels: np.ndarray | None = None
    design: dict = field(default_factory=dict)


def _as_columns(z) -> np.ndarray:
    arr = np.asarray(z, dtype=float)
    if arr.ndim == 1:
        return arr[:, None]
    if arr.ndim != 2:
        raise ValueError("scores must be a vector or matrix")
    return arr


def _as_design(z: np.ndarray, degree: int, interaction: bool) -> np.ndarray:
    z = _as_columns(z)
    cols = [z]
    if degree == 2:
        cols.append(z ** 2)
    if interaction:
        K = z.shape[1]
        prods = [z[:, a] * z[:, b] for a in range(K) for b in range(a + 1, K)]
        if not prods:
            raise ValueError("interaction requires at least two score columns")
        cols.append(np.column_stack(prods))
    return np.column_stack(cols)


def fit_linear(z, y, degree: int = 1, interaction: bool = False) -> ForwardFit:
    """OLS of y on [1, z(, z^2)(, pairwise products)]; reports R^2."""
    if degree not in (1, 2):
        raise ValueError("degree must be 1 or 2")
    y = np.asarray(y, dtype=float)
    D = _as_design(z, degree, interaction)
    n, q = D.shape
    if n <= q + 1:
        raise ValueError("need more observations than coefficients")
    X = np.column_stack([np.ones(n), D])
    xtx = X.T @ X
    if np.linalg.cond(xtx) > 1e12:
        raise np.linalg.LinAlgError("singular design")
    beta = np.linalg.solve(xtx, X.T @ y)
    resid = y - X @ beta
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    kind = "linear-interaction" if interaction else ("quadratic" if degree == 2 else "linear")
    return ForwardFit(
        kind=kind,
        coef=beta[1:],
        intercept=float(beta[0]),
        r2=1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0,
        rmse=float(np.sqrt(ss_res / n)),
        design={"degree": degree, "interaction": interaction},
    )


def studentized_residuals(z, y, degree: int = 1, interaction: bool = False):
    """Internally studentized OLS residuals."""
    y = np.asarray(y, dtype=float)
    D = _as_design(z, degree, interaction)
    n = D.shape[0]
    X = np.column_stack([np.ones(n), D])
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    hat = np.einsum("ij,jk,ik->i", X, np.linalg.inv(X.T @ X), X)
    s2 = float(resid @ resid) / (n - X.shape[1])
    return resid / np.sqrt(s2 * (1.0 - hat))


def _sigmoid(t):
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def fit_logistic(z, y, max_iter: int = 100, tol: float = 1e-10,
                 allow_ridge: bool = False) -> ForwardFit:
    """Newton-fitted binary logit; classification at probability 0.5."""
    y = np.asarray(y, dtype=float)
    classes = np.unique(y)
    if len(classes) != 2:
        raise ValueError("y must take exactly two values")
    yb = (y == classes[1]).astype(float)
    D = _as_columns(z)
    n = D.shape[0]
    X = np.column_stack([np.ones(n), D])
    q = X.shape[1]
    ridge = 1e-6 if allow_ridge else 0.0
    beta = np.zeros(q)
    for _ in range(max_iter):
        pr = _sigmoid(X @ beta)
        grad = X.T @ (pr - yb) + ridge * beta
        W = pr * (1.0 - pr)
        H = X.T @ (X * W[:, None]) + ridge * np.eye(q)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            raise SeparationError(
                "singular logistic Hessian; data may be separated — "
                "retry with allow_ridge=True")
        beta -= step
        if np.abs(step).max() < tol:
            break
    pr = _sigmoid(X @ beta)
    if not allow_ridge and (np.abs(beta).max() > 30.0
                            or np.all((pr > 0.5) == (yb == 1))
                            and np.minimum(pr, 1 - pr).max() < 1e-8):
        raise SeparationError(
            "complete separation: logistic MLE diverges — "
            "retry with allow_ridge=True for a weakly penalized fit")
    mis = float(np.mean((pr > 0.5) != (yb == 1)))
    return ForwardFit(
        kind="logistic",
        coef=beta[1:],
        intercept=float(beta[0]),
        misclass=mis,
        levels=classes,
    )


def fit_polr(z, y, max_iter: int = 100, tol: float = 1e-8) -> ForwardFit:
    """Proportional-odds logit p(y <= c) = sigmoid(a_c - beta'z).

    Exact Newton on (a_1, log gaps, beta); the log-gap reparametrization
    keeps the cutpoints strictly increasing.  Converged when the score
    equations vanish.
    """
    y = np.asarray(y)
    levels = np.unique(y)
    C = len(levels)
    if C < 2:
        raise ValueError("need at least two response levels")
    codes = np.searchsorted(levels, y)
    D = _as_columns(z)
    n, K = D.shape
    Kc = C - 1

    cum = np.array([(codes <= c).mean() for c in range(Kc)])
    cum = np.clip(cum, 1.0 / (2 * n), 1.0 - 1.0 / (2 * n))
    a0 = np.log(cum / (1.0 - cum))
    theta = np.concatenate([[a0[0]], np.log(np.maximum(np.diff(a0), 1e-3)),
                            np.zeros(K)])

    # per-observation designs for the upper and lower cut arguments:
    # hi_i = a_{c_i} - x_i'beta, lo_i = a_{c_i - 1} - x_i'beta
    upper = codes < Kc
    lower = codes > 0
    G_hi = np.zeros((n, Kc + K))
    G_lo = np.zeros((n, Kc + K))
    G_hi[np.arange(n)[upper], codes[upper]] = 1.0
    G_lo[np.arange(n)[lower], codes[lower] - 1] = 1.0
    G_hi[:, Kc:] = -D
    G_lo[:, Kc:] = -D
    G_hi[~upper] = 0.0
    G_lo[~lower] = 0.0

    def unpack(th):
        gaps = np.exp(th[1:Kc])
        cuts = np.concatenate([[th[0]], th[0] + np.cumsum(gaps)])
        return cuts, th[Kc:]

    def jacobian(th):
        """d(cuts, beta)/d(theta): cut c depends on a_1 and gaps up to c."""
        J = np.zeros((Kc + K, Kc + K))
        J[:Kc, 0] = 1.0
        for c in range(1, Kc):
            J[c, 1:c + 1] = np.exp(th[1:c + 1])
        J[Kc:, Kc:] = np.eye(K)
        return J

    def nll_only(th):
        cuts, beta = unpack(th)
        xb = D @ beta
        F_hi = np.where(upper, _sigmoid(cuts[np.minimum(codes, Kc - 1)] - xb), 1.0)
        F_lo = np.where(lower, _sigmoid(cuts[np.maximum(codes - 1, 0)] - xb), 0.0)
        pr = F_hi - F_lo
        if np.any(pr <= 0):
            return np.inf
        return -float(np.log(pr).sum())

    def nll_grad_hess(th):
        cuts, beta = unpack(th)
        xb = D @ beta
        F_hi = np.where(upper, _sigmoid(cuts[np.minimum(codes, Kc - 1)] - xb), 1.0)
        F_lo = np.where(lower, _sigmoid(cuts[np.maximum(codes - 1, 0)] - xb), 0.0)
        pr = np.clip(F_hi - F_lo, 1e-300, None)
        nll = -float(np.log(pr).sum())
        f_hi = np.where(upper, F_hi * (1.0 - F_hi), 0.0)
        f_lo = np.where(lower, F_lo * (1.0 - F_lo), 0.0)
        # scores dlogP/dlin and exact Hessian via f'(t) = f(t)(1 - 2F(t))
        s = (f_hi / pr)[:, None] * G_hi - (f_lo / pr)[:, None] * G_lo
        grad_lin = -s.sum(axis=0)
        fp_hi = f_hi * (1.0 - 2.0 * F_hi)
        fp_lo = f_lo * (1.0 - 2.0 * F_lo)
        H_lin = (s.T @ s
                 - (G_hi * (fp_hi / pr)[:, None]).T @ G_hi
                 + (G_lo * (fp_lo / pr)[:, None]).T @ G_lo)
        J = jacobian(th)
        grad = J.T @ grad_lin
        H = J.T @ H_lin @ J
        # curvature of the reparametrization: cut c adds e^{g_j} for j <= c
        for jg in range(1, Kc):
            H[jg, jg] += grad_lin[jg:Kc].sum() * np.exp(th[jg])
        return nll, grad, H

    for it in range(max_iter):
        nll, grad, H = nll_grad_hess(theta)
        if np.abs(grad).max() < tol:
            break
        try:
            step = np.linalg.solve(H + 1e-12 * np.eye(len(theta)), grad)
        except np.linalg.LinAlgError:
            raise RuntimeError(
                f"polr Newton failed at iteration {it}: singular Hessian")
        t = 1.0
        while t > 1e-8 and nll_only(theta - t * step) > nll + 1e-12:
            t /= 2.0
        theta = theta - t * step
    else:
        raise RuntimeError(
            f"polr did not converge in {max_iter} iterations; "
            f"last gradient norm {np.abs(grad).max():.3e}, nll {nll:.6f}")
    cuts, beta = unpack(theta)
    return ForwardFit(
        kind="polr",
        coef=beta,
        cutpoints=cuts,
        n_levels=C,
        levels=levels,
    )


def predict(fit: ForwardFit, z):
    """Deterministic prediction from a forward fit.

    linear/quadratic: conditional mean; logistic: (probability of the upper
    class, predicted class); polr: (level probabilities, modal level).
    """
    if fit.kind in ("linear", "quadratic", "linear-interaction"):
        D = _as_design(z, fit.design.get("degree", 1),
                       fit.design.get("interaction", False))
        if D.shape[1] != len(fit.coef):
            raise ValueError("score dimension does not match fit")
        return fit.intercept + D @ fit.coef
    D = _as_columns(z)
    if D.shape[1] != len(fit.coef):
        raise ValueError("score dimension does not match fit")
    if fit.kind == "logistic":
        pr = _sigmoid(fit.intercept + D @ fit.coef)
        cls = np.where(pr > 0.5, fit.levels[1], fit.levels[0])
        return pr, cls
    if fit.kind == "polr":
        xb = D @ fit.coef
        cum = _sigmoid(fit.cutpoints[None, :] - xb[:, None])
        cum = np.column_stack([np.zeros(len(xb)), cum, np.ones(len(xb))])
        probs = np.diff(cum, axis=1)
        modal = fit.levels[np.argmax(probs, axis=1)]
        return probs, modal
    raise ValueError(f"unknown fit kind {fit.kind!r}")

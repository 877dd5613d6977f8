"""Independent oracles shared by the unit and acceptance suites.

Everything here checks solver output by brute force (grids, finite
differences, direct enumeration) and never calls back into the code paths
under test.
"""

import numpy as np
from scipy import sparse

from mnir.corpus import SparseCounts
from mnir.model import FactorMatrix, MnirParams, neg_log_lik


def gl_bound_value(t, phi, g, H, s, r):
    """B(t) = g (t - phi) + H (t - phi)^2 / 2 + s log(1 + |t|/r)."""
    return g * (t - phi) + 0.5 * (t - phi) ** 2 * H + s * np.log1p(np.abs(t) / r)


def gl_admissible_grid(phi, delta, points):
    """Grid over the sign-restricted trust region.

    The spike at zero is admissible only when it is reachable within the
    region; otherwise moves truncate toward it.
    """
    lo, hi = phi - delta, phi + delta
    if phi > 0:
        lo = max(lo, 0.0)
    elif phi < 0:
        hi = min(hi, 0.0)
    grid = np.linspace(lo, hi, points)
    extra = [phi] if abs(phi) > delta else [phi, 0.0]
    return np.unique(np.concatenate([grid, extra]))


def gl_grid_minimum(phi, g, H, s, r, delta, points=100_000):
    grid = gl_admissible_grid(phi, delta, points)
    vals = gl_bound_value(grid, phi, g, H, s, r)
    return grid[np.argmin(vals)], vals.min()


def normal_bound_value(t, theta, g, H, mu, sigma2):
    return (g * (t - theta) + 0.5 * (t - theta) ** 2 * H
            + 0.5 * (t - mu) ** 2 / sigma2)


def normal_grid_minimum(theta, g, H, mu, sigma2, delta, points=200_001):
    grid = np.linspace(theta - delta, theta + delta, points)
    vals = normal_bound_value(grid, theta, g, H, mu, sigma2)
    return grid[np.argmin(vals)], vals.min()


def random_problem(rng, n=25, p=8, K=1, signal=0.6, m_range=(15, 60)):
    """Multinomial draws from a sparse true model, collapsed on v levels."""
    v = rng.integers(1, 5, size=(n, K)).astype(float)
    phi = np.where(rng.random((p, K)) < 0.4,
                   rng.normal(0.0, signal, (p, K)), 0.0)
    alpha = rng.normal(0.0, 1.0, p)
    eta = alpha + v @ phi.T
    q = np.exp(eta - eta.max(axis=1, keepdims=True))
    q /= q.sum(axis=1, keepdims=True)
    m = rng.integers(*m_range, size=n)
    x = np.vstack([rng.multinomial(m[i], q[i]) for i in range(n)])
    counts = SparseCounts(sparse.csr_matrix(x.astype(float)))
    factors = FactorMatrix(v)
    return counts, factors


def random_state(rng, data):
    """Random parameter state on collapsed data."""
    p = data.p
    alpha = rng.normal(0.0, 0.8, p)
    phi = np.where(rng.random((p, data.K)) < 0.5,
                   rng.normal(0.0, 0.5, (p, data.K)), 0.0)
    return MnirParams(alpha, phi, data.V)


def restricted_nll(params, x, m, coord, t):
    """Negative log likelihood as a function of one coordinate set to t."""
    alpha = params.alpha.copy()
    phi = params.phi.copy()
    u = None if params.u is None else params.u.copy()
    kind = coord[0]
    if kind == "alpha":
        alpha[coord[1]] = t
    elif kind == "phi":
        phi[coord[1], coord[2]] = t
    else:
        u[coord[1], coord[2]] = t
    moved = MnirParams(alpha, phi, params.V, u)
    return neg_log_lik(moved, x, m)


def fd_gradient(params, x, m, coord, h=1e-5):
    """Central finite difference of the nll along one coordinate."""
    kind = coord[0]
    if kind == "alpha":
        t0 = params.alpha[coord[1]]
    elif kind == "phi":
        t0 = params.phi[coord[1], coord[2]]
    else:
        t0 = params.u[coord[1], coord[2]]
    f_plus = restricted_nll(params, x, m, coord, t0 + h)
    f_minus = restricted_nll(params, x, m, coord, t0 - h)
    return (f_plus - f_minus) / (2.0 * h)


def brute_force_max_curvature(params, x, m, coord, delta, points=41):
    """Max exact curvature h over a grid of coordinate values in +/- delta.

    Probabilities are recomputed from scratch at every grid point; h is
    assembled directly as sum_v m_v w_v^2 q_vj (1 - q_vj).
    """
    m = np.asarray(m, dtype=float)
    kind = coord[0]
    j = coord[1] if kind != "u" else coord[2]
    if kind == "phi":
        w = params.V[:, coord[2]]
        t0 = params.phi[coord[1], coord[2]]
        j = coord[1]
    elif kind == "alpha":
        w = np.ones(params.d)
        t0 = params.alpha[coord[1]]
    else:
        w = np.zeros(params.d)
        w[coord[1]] = 1.0
        t0 = params.u[coord[1], coord[2]]
    eta0 = params.alpha[None, :] + params.V @ params.phi.T
    if params.u is not None:
        eta0 = eta0 + params.u
    worst = -np.inf
    for t in np.linspace(t0 - delta, t0 + delta, points):
        eta = eta0.copy()
        eta[:, j] += w * (t - t0)
        q = np.exp(eta - eta.max(axis=1, keepdims=True))
        q /= q.sum(axis=1, keepdims=True)
        h = float((m * w * w * q[:, j] * (1.0 - q[:, j])).sum())
        worst = max(worst, h)
    return worst

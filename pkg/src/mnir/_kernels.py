"""Coordinate-descent hot loops.

Two interchangeable backends:

* ``numba`` -- the scalar-loop kernels below compiled with ``@njit``;
* ``numpy`` -- vectorized-over-observations re-implementations.

Selection is via the ``MNIR_BACKEND`` environment variable (``numba`` or
``numpy``), defaulting to numba when importable.  Both backends mutate the
same state arrays in place: ``eta`` (d x p linear predictors), ``M`` (per-row
max used for scaling), ``S`` (per-row sum of exp(eta - M)), the parameter
vectors, and the per-coordinate trust-region half-widths.

All kernels keep ``S`` incrementally and fall back to an exact row
recomputation whenever scaling degrades; callers additionally refresh the
cache once per sweep.
"""

from __future__ import annotations

import math
import os

import numpy as np

_ETA_RESCALE = 30.0  # recompute a row when eta - M drifts above this


def gl_penalty(phi, s, r):
    return s * math.log1p(abs(phi) / r)


def solve_normal(theta, g, H, mu, sigma2, delta):
    """Quadratic-bound coordinate move under a normal prior, truncated."""
    dth = (g + (theta - mu) / sigma2) / (H + 1.0 / sigma2)
    step = abs(dth)
    if step > delta:
        step = delta
    if dth > 0.0:
        return theta - step
    return theta + step


def _gl_bound(t, phi, g, H, s, r):
    """Penalized quadratic bound relative to the current phi."""
    return (g * (t - phi) + 0.5 * (t - phi) * (t - phi) * H
            + s * math.log1p(abs(t) / r))


def _gl_root(phi, g, H, s, r, sgn):
    """Minimizing root of the bound derivative on one sign branch (the root
    with positive bound curvature); nan when none exists."""
    phit = phi - g / H
    disc = (sgn * r + phit) * (sgn * r + phit) - 4.0 * s / H
    if disc < 0.0:
        return math.nan
    sq = math.sqrt(disc)
    base = phit - sgn * r
    for root in ((base + sq) / 2.0, (base - sq) / 2.0):
        if root == 0.0 or (root > 0.0) != (sgn > 0.0):
            continue
        if H > s / ((r + abs(root)) * (r + abs(root))):
            return root
    return math.nan


def solve_gl(phi, g, H, s, r, delta):
    """Gamma-lasso coordinate move: exact minimizer of the penalized bound
    over the sign-restricted trust region.

    The minimum sits at the spike (when zero is reachable), a region
    endpoint, or the interior root of the bound derivative; all are
    evaluated and ties prefer zero, then the candidate nearest zero.  From
    phi == 0 both sign branches are tried; at most one admits a nonzero
    improvement.
    """
    if phi == 0.0:
        best_t = 0.0
        best_b = 0.0
        lo1, hi1, sgn1 = 0.0, delta, 1.0
        lo2, hi2, sgn2 = -delta, 0.0, -1.0
    else:
        sgn1 = 1.0 if phi > 0.0 else -1.0
        if sgn1 > 0.0:
            lo1 = phi - delta if phi - delta > 0.0 else 0.0
            hi1 = phi + delta
        else:
            lo1 = phi - delta
            hi1 = phi + delta if phi + delta < 0.0 else 0.0
        lo2, hi2, sgn2 = 1.0, -1.0, 0.0  # empty second branch
        if lo1 <= 0.0 <= hi1:
            best_t = 0.0
            best_b = _gl_bound(0.0, phi, g, H, s, r)
        else:
            best_t = phi
            best_b = _gl_bound(phi, phi, g, H, s, r)
    for branch in range(2):
        lo = lo1 if branch == 0 else lo2
        hi = hi1 if branch == 0 else hi2
        sgn = sgn1 if branch == 0 else sgn2
        if lo > hi:
            continue
        root = _gl_root(phi, g, H, s, r, sgn)
        for cand in range(3):
            t = lo if cand == 0 else (hi if cand == 1 else root)
            if math.isnan(t) or t < lo or t > hi or t == 0.0:
                continue
            b = _gl_bound(t, phi, g, H, s, r)
            if b < best_b or (b == best_b and abs(t) < abs(best_t)):
                best_b = b
                best_t = t
    # moving nowhere is always admissible; keep it unless a candidate wins
    if best_b > _gl_bound(phi, phi, g, H, s, r):
        return phi
    return best_t


def _recompute_row(eta, M, S, v):
    p = eta.shape[1]
    mx = eta[v, 0]
    for j in range(1, p):
        if eta[v, j] > mx:
            mx = eta[v, j]
    acc = 0.0
    for j in range(p):
        acc += math.exp(eta[v, j] - mx)
    M[v] = mx
    S[v] = acc


def _shift_entry(eta, M, S, v, j, move):
    old = math.exp(eta[v, j] - M[v])
    eta[v, j] += move
    new = math.exp(eta[v, j] - M[v])
    S[v] += new - old
    if eta[v, j] - M[v] > _ETA_RESCALE or S[v] <= new * 1e-12 or S[v] <= 0.0:
        _recompute_row(eta, M, S, v)


def _curv_term(eta_vj, M_v, S_v, m_v, w, delta):
    """One observation's contribution to the trust-region curvature bound."""
    rem = S_v - math.exp(eta_vj - M_v)
    if rem <= 0.0:
        return 0.0
    logE = M_v + math.log(rem)
    lo = eta_vj - abs(w) * delta
    hi = eta_vj + abs(w) * delta
    dlog = 0.0
    if logE < lo:
        dlog = lo - logE
    elif logE > hi:
        dlog = hi - logE
    F = math.exp(dlog) + math.exp(-dlog) + 2.0
    return m_v * w * w / F


def sweep_alpha(xsum, m, eta, M, S, alpha, dal, sigma_a2, dfloor, order):
    d, p = eta.shape
    for jj in range(p):
        j = order[jj]
        g = -xsum[j]
        H = 0.0
        for v in range(d):
            g += m[v] * math.exp(eta[v, j] - M[v]) / S[v]
            H += _curv_term(eta[v, j], M[v], S[v], m[v], 1.0, dal[j])
        if H <= 0.0:
            continue
        new = solve_normal(alpha[j], g, H, 0.0, sigma_a2, dal[j])
        move = new - alpha[j]
        if move != 0.0:
            alpha[j] = new
            for v in range(d):
                _shift_entry(eta, M, S, v, j, move)
        nd = 2.0 * abs(move)
        half = dal[j] / 2.0
        if half > nd:
            nd = half
        if nd < dfloor:
            nd = dfloor
        dal[j] = nd


def sweep_phi(xv, m, V, eta, M, S, phi, dph, s, r, dfloor, order):
    d, p = eta.shape
    K = V.shape[1]
    for k in range(K):
        for jj in range(p):
            j = order[jj]
            g = -xv[j, k]
            H = 0.0
            for v in range(d):
                w = V[v, k]
                q = math.exp(eta[v, j] - M[v]) / S[v]
                g += w * m[v] * q
                H += _curv_term(eta[v, j], M[v], S[v], m[v], w, dph[j, k])
            if H > 0.0:
                new = solve_gl(phi[j, k], g, H, s, r, dph[j, k])
                move = new - phi[j, k]
            else:
                move = 0.0
            if move != 0.0:
                phi[j, k] = phi[j, k] + move
                for v in range(d):
                    _shift_entry(eta, M, S, v, j, V[v, k] * move)
            nd = 2.0 * abs(move)
            half = dph[j, k] / 2.0
            if half > nd:
                nd = half
            if nd < dfloor:
                nd = dfloor
            dph[j, k] = nd


def sweep_u(x_indptr, x_indices, x_data, m, eta, M, S, u, du, umean, uvar,
            dfloor, order):
    """Random-effect updates; x arrives in CSC layout (columns are tokens)."""
    d, p = eta.shape
    xcol = np.zeros(d)
    for jj in range(p):
        j = order[jj]
        for idx in range(x_indptr[j], x_indptr[j + 1]):
            xcol[x_indices[idx]] = x_data[idx]
        for v in range(d):
            q = math.exp(eta[v, j] - M[v]) / S[v]
            g = -(xcol[v] - m[v] * q)
            H = _curv_term(eta[v, j], M[v], S[v], m[v], 1.0, du[v, j])
            new = solve_normal(u[v, j], g, H, umean[v], uvar[v], du[v, j])
            move = new - u[v, j]
            if move != 0.0:
                u[v, j] = new
                _shift_entry(eta, M, S, v, j, move)
            nd = 2.0 * abs(move)
            half = du[v, j] / 2.0
            if half > nd:
                nd = half
            if nd < dfloor:
                nd = dfloor
            du[v, j] = nd
        for idx in range(x_indptr[j], x_indptr[j + 1]):
            xcol[x_indices[idx]] = 0.0


# ---------------------------------------------------------------------------
# Vectorized numpy fallback: same math, observation loops replaced by array
# operations.  Row-independent u updates for a fixed token are performed
# simultaneously, which is exact coordinate descent since they touch
# disjoint observations.
# ---------------------------------------------------------------------------

def _np_fix_rows(eta, M, S, bad):
    if bad.any():
        idx = np.where(bad)[0]
        M[idx] = eta[idx].max(axis=1)
        S[idx] = np.exp(eta[idx] - M[idx, None]).sum(axis=1)


def _np_shift_col(eta, M, S, j, moves):
    old = np.exp(eta[:, j] - M)
    eta[:, j] += moves
    new = np.exp(eta[:, j] - M)
    S += new - old
    _np_fix_rows(eta, M, S, (eta[:, j] - M > _ETA_RESCALE)
                 | (S <= new * 1e-12) | (S <= 0.0))


def _np_curv_col(eta, M, S, m, j, w, delta):
    rem = S - np.exp(eta[:, j] - M)
    ok = rem > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        logE = M + np.log(np.where(ok, rem, 1.0))
    lo = eta[:, j] - np.abs(w) * delta
    hi = eta[:, j] + np.abs(w) * delta
    dlog = np.clip(logE, lo, hi) - logE
    F = np.exp(dlog) + np.exp(-dlog) + 2.0
    return np.where(ok, m * w * w / F, 0.0)


def _np_sweep_alpha(xsum, m, eta, M, S, alpha, dal, sigma_a2, dfloor, order):
    d, p = eta.shape
    for j in order:
        q = np.exp(eta[:, j] - M) / S
        g = -xsum[j] + float(m @ q)
        H = float(_np_curv_col(eta, M, S, m, j, 1.0, dal[j]).sum())
        if H <= 0.0:
            continue
        new = solve_normal(alpha[j], g, H, 0.0, sigma_a2, dal[j])
        move = new - alpha[j]
        if move != 0.0:
            alpha[j] = new
            _np_shift_col(eta, M, S, j, move)
        dal[j] = max(max(dal[j] / 2.0, 2.0 * abs(move)), dfloor)


def _np_sweep_phi(xv, m, V, eta, M, S, phi, dph, s, r, dfloor, order):
    d, p = eta.shape
    K = V.shape[1]
    for k in range(K):
        w = V[:, k]
        for j in order:
            q = np.exp(eta[:, j] - M) / S
            g = -xv[j, k] + float((w * m) @ q)
            H = float(_np_curv_col(eta, M, S, m, j, w, dph[j, k]).sum())
            if H > 0.0:
                new = solve_gl(phi[j, k], g, H, s, r, dph[j, k])
                move = new - phi[j, k]
            else:
                move = 0.0
            if move != 0.0:
                phi[j, k] = phi[j, k] + move
                _np_shift_col(eta, M, S, j, w * move)
            dph[j, k] = max(max(dph[j, k] / 2.0, 2.0 * abs(move)), dfloor)


def _np_sweep_u(x_indptr, x_indices, x_data, m, eta, M, S, u, du, umean,
                uvar, dfloor, order):
    d, p = eta.shape
    xcol = np.zeros(d)
    for j in order:
        sl = slice(x_indptr[j], x_indptr[j + 1])
        xcol[x_indices[sl]] = x_data[sl]
        q = np.exp(eta[:, j] - M) / S
        g = -(xcol - m * q)
        H = _np_curv_col(eta, M, S, m, j, 1.0, du[:, j])
        dth = (g + (u[:, j] - umean) / uvar) / (H + 1.0 / uvar)
        moves = -np.sign(dth) * np.minimum(np.abs(dth), du[:, j])
        u[:, j] += moves
        _np_shift_col(eta, M, S, j, moves)
        du[:, j] = np.maximum(np.maximum(du[:, j] / 2.0, 2.0 * np.abs(moves)),
                              dfloor)
        xcol[x_indices[sl]] = 0.0


def _pick_backend() -> str:
    choice = os.environ.get("MNIR_BACKEND", "").strip().lower()
    if choice not in ("", "numba", "numpy"):
        raise ValueError(f"MNIR_BACKEND must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise
        return "numpy"
    return "numba"


BACKEND = _pick_backend()

if BACKEND == "numba":
    from numba import njit

    _jit = njit(cache=True)
    gl_penalty = _jit(gl_penalty)
    solve_normal = _jit(solve_normal)
    _gl_bound = _jit(_gl_bound)
    _gl_root = _jit(_gl_root)
    solve_gl = _jit(solve_gl)
    _recompute_row = _jit(_recompute_row)
    _shift_entry = _jit(_shift_entry)
    _curv_term = _jit(_curv_term)
    sweep_alpha = _jit(sweep_alpha)
    sweep_phi = _jit(sweep_phi)
    sweep_u = _jit(sweep_u)
else:
    sweep_alpha = _np_sweep_alpha
    sweep_phi = _np_sweep_phi
    sweep_u = _np_sweep_u

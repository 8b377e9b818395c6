"""Exterior-point simplex for linear quantile regression.

Minimises ``sum_i rho_tau(y_i - x_i'b)`` by walking between basic solutions
(``b`` interpolates ``k`` observations). At each vertex the ``2k`` edge
directions are obtained by releasing one basic observation above or below the
fit; the steepest descent edge is followed to the minimiser of the convex
piecewise-linear objective along it (a weighted-median line search), where a
new observation enters the basis. Starting from the previous solution makes a
sweep over a quantile grid cost a handful of pivots per quantile.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _descend(X, y, tau, basis, max_iter):
    n, k = X.shape
    scale = 1.0
    for i in range(n):
        if abs(y[i]) > scale:
            scale = abs(y[i])
    zero_tol = 1e-12 * scale
    in_basis = np.zeros(n, dtype=np.bool_)
    for j in range(k):
        in_basis[basis[j]] = True

    Xh = np.empty((k, k))
    yh = np.empty(k)
    r = np.empty(n)
    w = np.empty(n)
    tbreak = np.empty(n)
    idx = np.empty(n, dtype=np.int64)

    for it in range(max_iter):
        for j in range(k):
            Xh[j, :] = X[basis[j], :]
            yh[j] = y[basis[j]]
        Hinv = np.linalg.inv(Xh)
        beta = Hinv @ yh
        for i in range(n):
            acc = y[i]
            for c in range(k):
                acc -= X[i, c] * beta[c]
            r[i] = acc
        for j in range(k):
            r[basis[j]] = 0.0
        Z = X @ Hinv

        best_g = -1e-11
        best_j = -1
        best_sign = 0.0
        for j in range(k):
            gp = 1.0 - tau  # release basic point j below the fit
            gm = tau  # release it above the fit
            for i in range(n):
                if in_basis[i]:
                    continue
                z = Z[i, j]
                ri = r[i]
                if ri > zero_tol:
                    gp -= tau * z
                    gm += tau * z
                elif ri < -zero_tol:
                    gp += (1.0 - tau) * z
                    gm -= (1.0 - tau) * z
                else:
                    gp += max(-tau * z, (1.0 - tau) * z)
                    gm += max(tau * z, -(1.0 - tau) * z)
            if gp < best_g:
                best_g, best_j, best_sign = gp, j, 1.0
            if gm < best_g:
                best_g, best_j, best_sign = gm, j, -1.0
        if best_j < 0:
            return beta, basis, it, True

        m = 0
        for i in range(n):
            if in_basis[i]:
                continue
            wi = best_sign * Z[i, best_j]
            if abs(wi) <= 1e-13:
                continue
            ri = r[i]
            if abs(ri) <= zero_tol:
                continue
            t = ri / wi
            if t > 0.0:
                w[m] = abs(wi)
                tbreak[m] = t
                idx[m] = i
                m += 1
        if m == 0:
            return beta, basis, it, False
        order = np.argsort(tbreak[:m])
        slope = best_g
        enter = -1
        for q in range(m):
            o = order[q]
            slope += w[o]
            if slope >= 0.0:
                enter = idx[o]
                break
        if enter < 0:
            return beta, basis, it, False
        in_basis[basis[best_j]] = False
        basis[best_j] = enter
        in_basis[enter] = True
    for j in range(k):
        Xh[j, :] = X[basis[j], :]
        yh[j] = y[basis[j]]
    beta = np.linalg.solve(Xh, yh)
    return beta, basis, max_iter, False


@njit(cache=True)
def _sweep(X, y, taus, basis, max_iter):
    m = taus.shape[0]
    k = X.shape[1]
    coef = np.empty((m, k))
    ok = np.ones(m, dtype=np.bool_)
    bases = np.empty((m, k), dtype=np.int64)
    b = basis.copy()
    for q in range(m):
        beta, b, _, conv = _descend(X, y, taus[q], b, max_iter)
        coef[q, :] = beta
        ok[q] = conv
        bases[q, :] = b
    return coef, ok, bases


def initial_basis(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Rows closest to the least-squares fit that span the column space."""
    n, k = X.shape
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    order = np.argsort(np.abs(y - X @ beta), kind="stable")
    chosen: list[int] = []
    Q = np.zeros((0, k))
    for i in order:
        v = X[i].astype(float)
        resid = v - Q.T @ (Q @ v) if len(chosen) else v
        norm = np.linalg.norm(resid)
        if norm > 1e-8 * max(1.0, np.linalg.norm(v)):
            chosen.append(int(i))
            Q = np.vstack([Q, resid / norm])
            if len(chosen) == k:
                break
    if len(chosen) < k:
        raise np.linalg.LinAlgError("design matrix is rank deficient")
    return np.asarray(chosen, dtype=np.int64)

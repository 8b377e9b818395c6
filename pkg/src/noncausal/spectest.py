"""Specification tests of the linear conditional-quantile model.

Both tests integrate the squared residual-marked empirical process
``T^-1/2 sum_t Psi_tau(e_t) w(X_t, x)`` over instruments ``x`` and quantile
levels (a Cramer-von Mises norm), with ``Psi_tau(u) = 1{u <= 0} - tau``.

* EV: exponential instruments ``exp(i x'X_t)`` weighted by a standard normal
  law, which integrates in closed form to a Gaussian kernel; critical values
  by subsampling overlapping blocks.
* EG: indicator instruments ``1{X_t <= x}`` projected orthogonally to the
  density-weighted regressors, integrated over the empirical law of ``X_t``;
  critical values by a multiplier bootstrap that reuses the fitted pieces.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import quantreg as qr
from .rng import make_rng

__all__ = [
    "SpecTestResult",
    "psi_matrix",
    "ev_statistic",
    "ev_subsample_size",
    "ev_test",
    "ev_test_design",
    "kernel_cond_density",
    "cond_density_matrix",
    "eg_components",
    "eg_statistic",
    "multiplier_sample",
    "eg_test",
    "eg_test_design",
    "GOLDEN",
]

GOLDEN = (np.sqrt(5.0) + 1.0) / 2.0
DEFAULT_LEVELS = (0.01, 0.05, 0.10)


@dataclass(frozen=True)
class SpecTestResult:
    method: str
    statistic: float
    critical_values: dict
    resample_distribution: np.ndarray = field(repr=False)
    tuning: dict = field(default_factory=dict)

    @property
    def decision(self) -> dict:
        return {a: bool(self.statistic > c) for a, c in self.critical_values.items()}

    def reject(self, level: float = 0.05) -> bool:
        return self.decision[level]

    @property
    def p_value(self) -> float:
        d = np.asarray(self.resample_distribution)
        return float((1 + np.sum(d >= self.statistic)) / (1 + d.size))


def psi_matrix(fit: qr.QarFit) -> np.ndarray:
    """``Psi[q, t] = 1{e_t(tau_q) <= 0} - tau_q``; interpolated points count as zero."""
    e = fit.residuals
    tol = 1e-9 * max(1.0, float(np.abs(fit.y).max()))
    return (e <= tol).astype(float) - fit.tau_grid[:, None]


def _tau_weights(m: int) -> np.ndarray:
    return np.full(m, 1.0 / m)


# ---------------------------------------------------------------- EV


def _studentize(X: np.ndarray) -> np.ndarray:
    Z = X.astype(float).copy()
    sd = Z.std(axis=0)
    keep = sd > 1e-12 * np.maximum(1.0, np.abs(Z).max(axis=0))
    Z[:, keep] = (Z[:, keep] - Z[:, keep].mean(axis=0)) / sd[keep]
    Z[:, ~keep] = 0.0  # constant columns drop out of the kernel
    return Z


def _gauss_kernel(Z: np.ndarray) -> np.ndarray:
    sq = (Z * Z).sum(axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * Z @ Z.T, 0.0)
    return np.exp(-0.5 * d2)


def _ev_from(Psi: np.ndarray, X: np.ndarray, standardize: bool, weights=None) -> float:
    n = X.shape[0]
    K = _gauss_kernel(_studentize(X) if standardize else X)
    w = _tau_weights(Psi.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    quad = np.einsum("qt,qt->q", Psi @ K, Psi)
    return float(w @ quad / n)


def ev_statistic(fit: qr.QarFit, standardize: bool = True, weights=None) -> float:
    """Closed-form CvM norm of the EV process.

    ``T^-1 sum_tau w_tau sum_{t,s} Psi_t Psi_s exp(-|X_t - X_s|^2 / 2)``,
    the standard-normal integral of ``|T^-1/2 sum Psi_t exp(i x'X_t)|^2``.
    """
    return _ev_from(psi_matrix(fit), fit.X, standardize, weights)


def ev_subsample_size(T: int, k: float = 4.0) -> int:
    return int(np.floor(k * T**0.4))


def _center(stats: np.ndarray, full: float, b: int, n: int, centering: str) -> np.ndarray:
    if centering == "none":
        return stats
    if centering == "sqrt":
        return stats - np.sqrt(b / n) * full
    if centering == "linear":
        return stats - (b / n) * full
    raise ValueError(f"unknown centering {centering!r}")


def ev_test_design(
    y,
    X,
    tau_grid=None,
    b: int | None = None,
    k: float = 4.0,
    levels=DEFAULT_LEVELS,
    standardize: bool = True,
    centering: str = "none",
) -> SpecTestResult:
    """EV test on an arbitrary design with subsampling critical values.

    Every block of ``b`` consecutive design rows is refitted and its statistic
    recomputed. The subsample statistics are used as they are by default
    (``centering="none"``) or centered by ``(b/T)`` or ``(b/T)^1/2`` times the
    full-sample statistic (``"linear"``, ``"sqrt"``).
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n, kx = X.shape
    grid = qr.default_grid() if tau_grid is None else np.asarray(tau_grid, dtype=float)
    b = ev_subsample_size(n, k) if b is None else int(b)
    if b <= 3 * kx:
        raise ValueError(f"subsample size {b} is too small for {kx} regressors")
    if b >= n:
        raise ValueError("subsample size must be below the sample size")
    fit = qr.fit_design(y, X, grid)
    full = ev_statistic(fit, standardize)
    stats = []
    for start in range(n - b + 1):
        sl = slice(start, start + b)
        try:
            coef = qr.fit_qr_grid(y[sl], X[sl], grid)
        except np.linalg.LinAlgError:
            continue
        e = y[sl][None, :] - coef @ X[sl].T
        tol = 1e-9 * max(1.0, float(np.abs(y[sl]).max()))
        Psi = (e <= tol).astype(float) - grid[:, None]
        stats.append(_ev_from(Psi, X[sl], standardize))
    if not stats:
        raise np.linalg.LinAlgError("no subsample admitted a fit")
    dist = _center(np.asarray(stats), full, b, n, centering)
    cvs = {a: float(np.quantile(dist, 1.0 - a)) for a in levels}
    tuning = {"b": b, "k": k, "standardize": standardize, "centering": centering, "grid_size": grid.size}
    return SpecTestResult("EV", full, cvs, dist, tuning)


def ev_test(series, p: int, tau_grid=None, b=None, k: float = 4.0, levels=DEFAULT_LEVELS, **kwargs) -> SpecTestResult:
    """EV specification test of the QAR(p) model."""
    y, X = qr.lag_design(np.asarray(series, dtype=float), p)
    return ev_test_design(y, X, tau_grid, b, k, levels, **kwargs)


# ---------------------------------------------------------------- EG


def _cond_bandwidth(fit: qr.QarFit, Q: np.ndarray, rule: str) -> np.ndarray:
    """Kernel bandwidth ``1.06 sd M^-1/5`` per row of the design.

    ``rule="common"`` measures the spread on the fitted quantile path at the
    mean design row and shares it across rows; ``rule="row"`` uses the spread
    of each row's own fitted quantiles.
    """
    M = Q.shape[0]
    if rule == "common":
        sd = np.full(Q.shape[1], (fit.coef_at(fit.tau_grid) @ fit.xbar).std())
    elif rule == "row":
        sd = Q.std(axis=0)
    else:
        raise ValueError(f"unknown bandwidth rule {rule!r}")
    return np.maximum(1.06 * sd * M ** (-0.2), 1e-4)


def kernel_cond_density(
    fit: qr.QarFit,
    t: int,
    tau: float,
    M: int | None = None,
    h: float | None = None,
    seed: int = 0,
    rule: str = "common",
) -> float:
    """Conditional density of ``Y_t`` given ``X_t`` at its fitted ``tau``-quantile.

    A Gaussian kernel estimate over the fitted quantiles ``X_t'theta(tau_j)``,
    which for ``tau_j`` uniform on the grid behave like draws from the
    conditional law. With ``M`` equal to the grid size (the default) the grid
    itself is used; otherwise ``M`` levels are drawn from it with ``seed``.
    """
    grid = fit.tau_grid
    M = grid.size if M is None else int(M)
    if M == grid.size:
        taus_j = grid
    else:
        taus_j = make_rng(seed).choice(grid, size=M, replace=True)
    xt = fit.X[t]
    Qj = fit.coef_at(taus_j) @ xt
    q0 = float(fit.coef_at([tau])[0] @ xt)
    if h is None:
        h = float(_cond_bandwidth(fit, Qj[:, None], rule)[0])
    z = (q0 - Qj) / h
    val = np.exp(-0.5 * z * z).sum() / (M * h * np.sqrt(2.0 * np.pi))
    return max(float(val), 1e-6)


def cond_density_matrix(fit: qr.QarFit, rule: str = "common") -> np.ndarray:
    """``F[q, t]``: the kernel conditional density at every grid level and row."""
    Q = fit.coef @ fit.X.T  # (m, n)
    M = Q.shape[0]
    h = _cond_bandwidth(fit, Q, rule)  # (n,)
    out = np.empty_like(Q)
    c = 1.0 / (M * h * np.sqrt(2.0 * np.pi))
    for q in range(M):
        z = (Q[q][None, :] - Q) / h[None, :]
        out[q] = np.exp(-0.5 * z * z).sum(axis=0) * c
    return np.maximum(out, 1e-6)


def _indicator_matrix(X: np.ndarray) -> np.ndarray:
    # Ind[t, j] = 1{X_t <= X_j componentwise}
    return np.all(X[:, None, :] <= X[None, :, :], axis=2).astype(float)


@dataclass(frozen=True)
class _EgPieces:
    Psi: np.ndarray  # (m, n)
    dens: np.ndarray  # (m, n)
    X: np.ndarray  # (n, k)
    Ind: np.ndarray  # (n, n)
    proj: np.ndarray  # (m, k, n): (delta'delta)^-1 delta' Ind per level


def eg_components(fit: qr.QarFit, density=None, ridge: float = 1e-8, rule: str = "common") -> _EgPieces:
    X = fit.X
    Psi = psi_matrix(fit)
    dens = cond_density_matrix(fit, rule) if density is None else np.asarray(density, dtype=float)
    Ind = _indicator_matrix(X)
    m, (n, k) = Psi.shape[0], X.shape
    proj = np.empty((m, k, n))
    for q in range(m):
        delta = dens[q][:, None] * X
        A = delta.T @ delta
        A = A + ridge * np.trace(A) / k * np.eye(k)
        try:
            proj[q] = np.linalg.solve(A, delta.T @ Ind)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("projection matrix is singular") from exc
    return _EgPieces(Psi, dens, X, Ind, proj)


def _eg_from_marks(marks: np.ndarray, pieces: _EgPieces) -> np.ndarray:
    """CvM values for mark arrays of shape ``(B, m, n)``.

    ``marks[b, q, t]`` multiplies ``(I - H_q) Ind`` row ``t``; with marks equal
    to ``Psi`` this is the statistic itself.
    """
    B, m, n = marks.shape
    raw = (marks.reshape(B * m, n) @ pieces.Ind).reshape(B, m, n)
    dx = marks * pieces.dens[None]  # marks times density
    md = np.einsum("bqt,tk->bqk", dx, pieces.X)  # (B, m, k)
    raw -= np.einsum("bqk,qkn->bqn", md, pieces.proj)
    R2 = (raw * raw).sum(axis=2) / n  # (B, m): sum_j R_j^2 with R = raw / sqrt(T)
    return (R2 @ _tau_weights(m)) / n


def eg_statistic(fit: qr.QarFit, density=None, return_process: bool = False):
    """CvM norm of the projected indicator process.

    ``T^-1 sum_tau w_tau sum_j R_tau(X_j)^2`` with
    ``R_tau(x) = T^-1/2 sum_t Psi_tau(e_t) [(I - H_tau) 1{X <= x}]_t`` and
    ``H_tau`` the projection on ``delta_t = f(X_t'theta(tau) | X_t) X_t``.
    """
    pieces = eg_components(fit, density)
    stat = float(_eg_from_marks(pieces.Psi[None], pieces)[0])
    if not return_process:
        return stat
    raw = pieces.Psi @ pieces.Ind - np.einsum("qk,qkn->qn", (pieces.Psi * pieces.dens) @ pieces.X, pieces.proj)
    return stat, raw / np.sqrt(fit.n)


def multiplier_sample(n, seed: int | np.random.Generator) -> np.ndarray:
    """Two-point multipliers: ``1 - w`` with probability ``w / sqrt 5``, else ``w``."""
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    low = rng.random(n) < GOLDEN / np.sqrt(5.0)
    return np.where(low, 1.0 - GOLDEN, GOLDEN)


def eg_test_design(
    y,
    X,
    tau_grid=None,
    B: int = 500,
    levels=DEFAULT_LEVELS,
    seed: int = 0,
    batch: int = 100,
    rule: str = "common",
) -> SpecTestResult:
    """EG test on an arbitrary design with multiplier-bootstrap critical values."""
    if B < 1:
        raise ValueError("B must be positive")
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    grid = qr.default_grid() if tau_grid is None else np.asarray(tau_grid, dtype=float)
    fit = qr.fit_design(y, X, grid)
    pieces = eg_components(fit, rule=rule)
    stat = float(_eg_from_marks(pieces.Psi[None], pieces)[0])
    rng = make_rng(seed)
    W = multiplier_sample((B, fit.n), rng)
    boot = np.concatenate(
        [_eg_from_marks(W[i : i + batch, None, :] * pieces.Psi[None], pieces) for i in range(0, B, batch)]
    )
    cvs = {a: float(np.quantile(boot, 1.0 - a)) for a in levels}
    tuning = {"B": B, "M": grid.size, "bandwidth_rule": rule, "grid_size": grid.size}
    return SpecTestResult("EG", stat, cvs, boot, tuning)


def eg_test(series, p: int, tau_grid=None, B: int = 500, levels=DEFAULT_LEVELS, seed: int = 0, **kwargs) -> SpecTestResult:
    """EG specification test of the QAR(p) model."""
    y, X = qr.lag_design(np.asarray(series, dtype=float), p)
    return eg_test_design(y, X, tau_grid, B, levels, seed, **kwargs)

"""Linear quantile regression and quantile autoregression (QAR).

``fit_qr`` solves a single check-loss problem exactly; ``fit_qar`` sweeps a
quantile grid over the lagged design ``X_t = (1, Y_{t-1}, ..., Y_{t-p})``.
Sparsity (the derivative of the quantile function) is estimated with the
Hall-Sheather difference quotient of the fitted quantile line evaluated at the
mean design row, after monotone rearrangement.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from ._simplex import _sweep, initial_basis

__all__ = [
    "QarFit",
    "check_loss",
    "fit_qr",
    "fit_qr_grid",
    "lag_design",
    "fit_qar",
    "default_grid",
    "hall_sheather_bandwidth",
    "quantile_line",
    "sparsity",
    "density_quantile",
    "covariance",
    "pacf",
    "select_order",
    "ols",
]

DENSITY_FLOOR = 1e-6


def default_grid(lo: float = 0.01, hi: float = 0.99, step: float = 0.01) -> np.ndarray:
    n = int(round((hi - lo) / step)) + 1
    return np.round(lo + step * np.arange(n), 10)


def check_loss(u, tau: float):
    u = np.asarray(u, dtype=float)
    return u * (tau - (u < 0))


def _validate_tau(taus: np.ndarray) -> None:
    if np.any((taus <= 0) | (taus >= 1)):
        raise ValueError("quantile levels must lie strictly inside (0, 1)")


def _linprog_fit(X: np.ndarray, y: np.ndarray, tau: float) -> np.ndarray:
    # fallback: min tau 1'u+ + (1-tau) 1'u-  s.t.  X b + u+ - u- = y
    n, k = X.shape
    c = np.r_[np.zeros(k), np.full(n, tau), np.full(n, 1.0 - tau)]
    A = np.hstack([X, np.eye(n), -np.eye(n)])
    bounds = [(None, None)] * k + [(0, None)] * (2 * n)
    res = optimize.linprog(c, A_eq=A, b_eq=y, bounds=bounds, method="highs-ds")
    if not res.success:  # pragma: no cover
        raise RuntimeError(f"linear program failed: {res.message}")
    return res.x[:k]


def fit_qr_grid(y, X, taus, basis: np.ndarray | None = None, return_basis: bool = False):
    """Quantile regression coefficients for each level in ``taus``.

    The levels are visited in the order given and each solve starts from the
    previous basis, so pass them sorted.
    """
    y = np.ascontiguousarray(y, dtype=float)
    X = np.ascontiguousarray(X, dtype=float)
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    _validate_tau(taus)
    n, k = X.shape
    if y.shape != (n,):
        raise ValueError("y and X have inconsistent shapes")
    if n < k or np.linalg.matrix_rank(X) < k:
        raise np.linalg.LinAlgError("design matrix is rank deficient")
    if basis is None:
        basis = initial_basis(X, y)
    coef, ok, bases = _sweep(X, y, taus, np.asarray(basis, dtype=np.int64), 50 * n + 100)
    for q in np.flatnonzero(~ok):
        coef[q] = _linprog_fit(X, y, taus[q])
    if return_basis:
        return coef, bases
    return coef


def fit_qr(y, X, tau: float) -> np.ndarray:
    """Exact minimiser of ``sum rho_tau(y - X b)`` (a basic solution)."""
    return fit_qr_grid(y, X, [tau])[0]


def lag_design(series, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Response ``Y_t`` and rows ``(1, Y_{t-1}, ..., Y_{t-p})`` for ``t > p``."""
    y = np.asarray(series, dtype=float)
    T = y.size
    X = np.ones((T - p, p + 1))
    for j in range(1, p + 1):
        X[:, j] = y[p - j : T - j]
    return y[p:].copy(), X


def ols(y, X) -> np.ndarray:
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    return beta


@dataclass(frozen=True, eq=False)
class QarFit:
    """Quantile process of a linear quantile regression.

    ``coef[q]`` holds ``theta(tau_grid[q])`` with the intercept first.
    ``y`` and ``X`` are the (already lagged) response and design.
    """

    p: int
    tau_grid: np.ndarray
    coef: np.ndarray
    y: np.ndarray
    X: np.ndarray
    sigma0: np.ndarray
    _bases: np.ndarray = field(repr=False, default=None)
    _cache: dict = field(repr=False, default_factory=dict)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def residuals(self) -> np.ndarray:
        """``residuals[q, t] = y_t - X_t' theta(tau_q)``."""
        return self.y[None, :] - self.coef @ self.X.T

    @property
    def slopes(self) -> np.ndarray:
        return self.coef[:, 1:]

    @property
    def xbar(self) -> np.ndarray:
        return self.X.mean(axis=0)

    def coef_at(self, taus) -> np.ndarray:
        """Coefficients at arbitrary levels (grid values are reused)."""
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        out = np.empty((taus.size, self.X.shape[1]))
        missing = []
        for i, t in enumerate(taus):
            hit = np.flatnonzero(np.isclose(self.tau_grid, t, rtol=0, atol=1e-12))
            if hit.size:
                out[i] = self.coef[hit[0]]
            elif float(t) in self._cache:
                out[i] = self._cache[float(t)]
            else:
                missing.append(i)
        if missing:
            miss = np.asarray(missing)
            order = miss[np.argsort(taus[miss])]
            start = self._nearest_basis(taus[order[0]])
            fitted = fit_qr_grid(self.y, self.X, taus[order], basis=start)
            for i, row in zip(order, fitted):
                out[i] = row
                self._cache[float(taus[i])] = row
        return out

    def _nearest_basis(self, tau: float):
        if self._bases is None:
            return None
        return self._bases[int(np.argmin(np.abs(self.tau_grid - tau)))].copy()


def fit_qar(series, p: int, tau_grid=None) -> QarFit:
    """Fit the QAR(p) quantile process on ``tau_grid`` (default 0.01..0.99)."""
    series = np.asarray(series, dtype=float)
    if p < 0:
        raise ValueError("lag order must be nonnegative")
    if series.size <= 3 * (p + 1):
        raise ValueError(f"series too short for a QAR({p}) fit")
    grid = default_grid() if tau_grid is None else np.asarray(tau_grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("tau grid must be strictly increasing")
    y, X = lag_design(series, p)
    return fit_design(y, X, grid, p=p)


def fit_design(y, X, tau_grid, p: int | None = None) -> QarFit:
    """QarFit for an arbitrary design (used for augmented regressions)."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    grid = np.asarray(tau_grid, dtype=float)
    coef, bases = fit_qr_grid(y, X, grid, return_basis=True)
    sigma0 = X.T @ X / y.size
    return QarFit(
        p=X.shape[1] - 1 if p is None else p,
        tau_grid=grid,
        coef=coef,
        y=y,
        X=X,
        sigma0=sigma0,
        _bases=bases,
    )


def hall_sheather_bandwidth(tau, T: int, alpha: float = 0.05):
    """Hall-Sheather bandwidth, shrunk when needed so that tau +/- h stays in (0, 1)."""
    tau = np.asarray(tau, dtype=float)
    x0 = stats.norm.ppf(tau)
    f0 = stats.norm.pdf(x0)
    h = T ** (-1.0 / 3.0) * stats.norm.ppf(1.0 - alpha / 2.0) ** (2.0 / 3.0) * (
        1.5 * f0**2 / (2.0 * x0**2 + 1.0)
    ) ** (1.0 / 3.0)
    h = np.minimum(h, 0.99 * np.minimum(tau, 1.0 - tau))
    return float(h) if h.ndim == 0 else h


def quantile_line(fit: QarFit, taus, at=None) -> np.ndarray:
    """Fitted conditional quantile ``x' theta(tau)`` (``x`` defaults to the mean row)."""
    x = fit.xbar if at is None else np.asarray(at, dtype=float)
    return fit.coef_at(taus) @ x


def sparsity(fit: QarFit, tau, alpha: float = 0.05) -> np.ndarray | float:
    """Difference-quotient estimate of ``1 / f(F^{-1}(tau))``.

    Uses the quantile line at the mean design row. The fitted values at all
    ``tau +/- h`` are monotonically rearranged before differencing, which keeps
    the estimate nonnegative when quantile lines cross.
    """
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    h = np.atleast_1d(hall_sheather_bandwidth(taus, fit.n, alpha))
    lo, hi = taus - h, taus + h
    pts = np.concatenate([lo, hi])
    order = np.argsort(pts, kind="stable")
    vals = quantile_line(fit, pts[order])
    rearranged = np.empty_like(vals)
    rearranged[order] = np.sort(vals)
    m = taus.size
    s = (rearranged[m:] - rearranged[:m]) / (2.0 * h)
    s = np.minimum(np.maximum(s, 0.0), 1.0 / DENSITY_FLOOR)
    return float(s[0]) if np.ndim(tau) == 0 else s


def density_quantile(fit: QarFit, tau, alpha: float = 0.05):
    """``f(F^{-1}(tau))`` as the reciprocal sparsity, floored at 1e-6."""
    s = np.asarray(sparsity(fit, tau, alpha))
    with np.errstate(divide="ignore"):
        f = np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), 1.0 / DENSITY_FLOOR)
    f = np.maximum(f, DENSITY_FLOOR)
    return float(f) if f.ndim == 0 else f


def covariance(fit: QarFit, tau, alpha: float = 0.05, density: float | None = None) -> np.ndarray:
    """Asymptotic covariance ``Sigma_1^-1 Sigma_0 Sigma_1^-1`` under the location model.

    With ``Sigma_1 = f Sigma_0`` this is ``f^-2 Sigma_0^-1``.
    """
    f = density_quantile(fit, tau, alpha) if density is None else float(density)
    try:
        inv = np.linalg.inv(fit.sigma0)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("Sigma_0 is singular") from exc
    if np.linalg.cond(fit.sigma0) > 1e14:
        raise np.linalg.LinAlgError("Sigma_0 is singular")
    cov = inv / (f * f)
    return (cov + cov.T) / 2.0


def pacf(series, max_lag: int) -> np.ndarray:
    """Durbin-Levinson partial autocorrelations at lags ``1..max_lag``."""
    x = np.asarray(series, dtype=float)
    T = x.size
    if max_lag < 1:
        raise ValueError("max_lag must be at least 1")
    if max_lag >= T / 4:
        raise ValueError("max_lag must be below a quarter of the sample size")
    x = x - x.mean()
    c0 = x @ x / T
    if c0 <= 1e-300 * max(1.0, np.abs(x).max()):
        raise ValueError("series is constant")
    r = np.array([x[: T - h] @ x[h:] / T for h in range(max_lag + 1)]) / c0
    out = np.empty(max_lag)
    a = np.zeros(0)
    v = 1.0
    for k in range(1, max_lag + 1):
        num = r[k] - a @ r[k - 1 : 0 : -1] if k > 1 else r[1]
        kappa = num / v
        a = np.r_[a - kappa * a[::-1], kappa]
        v *= 1.0 - kappa * kappa
        out[k - 1] = kappa
    return out


def select_order(series, max_lag: int = 10, rule: str = "cutoff", z: float = 1.96) -> int:
    """Lag order from the PACF and the ``z / sqrt(T)`` band.

    ``rule="cutoff"`` returns the last lag before the first insignificant
    partial autocorrelation; ``rule="largest"`` returns the largest significant
    lag up to ``max_lag``.
    """
    x = np.asarray(series, dtype=float)
    max_lag = min(max_lag, int(np.ceil(x.size / 4)) - 1)
    pa = pacf(x, max_lag)
    sig = np.abs(pa) > z / np.sqrt(x.size)
    if rule == "largest":
        hits = np.flatnonzero(sig)
        return int(hits[-1] + 1) if hits.size else 0
    if rule == "cutoff":
        misses = np.flatnonzero(~sig)
        return int(misses[0]) if misses.size else max_lag
    raise ValueError(f"unknown order-selection rule {rule!r}")

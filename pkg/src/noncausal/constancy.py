"""Kolmogorov-Smirnov test of slope constancy across quantiles.

Under a causal autoregression with iid innovations the QAR slopes do not move
with the quantile level. The standardized slope process ``V`` is compared with
a pilot estimate of the common slopes (the median regression by default);
estimating the nuisance slopes and the density adds a drift
which the Khmaladze martingale transform removes, leaving a vector Brownian
motion whose sup-norm has tabulated (simulated) quantiles.
"""
from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import quantreg as qr
from .rng import make_rng

__all__ = [
    "ConstancyResult",
    "DEFAULT_INTERVAL",
    "INTERVAL_PRESETS",
    "v_process",
    "score_estimates",
    "khmaladze_transform",
    "sup_norm",
    "critical_value",
    "critical_values",
    "constancy_test",
    "constancy_test_design",
]

DEFAULT_INTERVAL = (0.05, 0.95)
INTERVAL_PRESETS = {"0.05": (0.05, 0.95), "0.10": (0.10, 0.90), "0.15": (0.15, 0.85)}
DEFAULT_LEVELS = (0.01, 0.05, 0.10)
CV_REPS = 50_000
CV_STEPS = 2_000
CV_SEED = 20240101


def _grid_on(interval, step: float) -> np.ndarray:
    lo, hi = interval
    if not 0 < lo < hi < 1:
        raise ValueError("interval must satisfy 0 < lo < hi < 1")
    n = int(round((hi - lo) / step)) + 1
    return np.round(lo + step * np.arange(n), 10)


def _sym_sqrt(A: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh((A + A.T) / 2.0)
    if w.min() <= 1e-12 * max(1.0, abs(w.max())):
        raise np.linalg.LinAlgError("standardizing matrix is singular")
    return (U * np.sqrt(w)) @ U.T


def _slope_precision(fit: qr.QarFit, restrict, scale=None) -> np.ndarray:
    """``[R S1^-1 S0 S1^-1 R']^-1`` with the density factor taken out.

    ``S1 = mean(X X' / sigma_t)`` (``sigma_t = 1`` in the location model), so
    the location case reduces to ``[R S0^-1 R']^-1``.
    """
    X = fit.X
    S0 = fit.sigma0
    if scale is None:
        S1 = S0
    else:
        S1 = (X / np.asarray(scale, dtype=float)[:, None]).T @ X / fit.n
    S1inv = np.linalg.inv(S1)
    R = np.eye(X.shape[1])[list(restrict)]
    return np.linalg.inv(R @ S1inv @ S0 @ S1inv @ R.T)


def v_process(
    fit: qr.QarFit,
    phi_hat,
    interval=DEFAULT_INTERVAL,
    restrict=None,
    scale=None,
    density=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Standardized slope process on the fit grid restricted to ``interval``.

    Returns ``(taus, V)`` with ``V`` of shape ``(len(taus), q)``. ``restrict``
    lists the coefficient columns being tested (all slopes by default) and
    ``phi_hat`` holds their hypothesized common value. ``scale`` is a known
    conditional scale ``sigma_t`` for location-scale designs. ``density``
    overrides the estimated ``f(F^-1(tau))`` on the returned grid.
    """
    lo, hi = interval
    restrict = list(range(1, fit.X.shape[1])) if restrict is None else list(restrict)
    mask = (fit.tau_grid >= lo - 1e-9) & (fit.tau_grid <= hi + 1e-9)
    taus = fit.tau_grid[mask]
    if taus.size < 2:
        raise ValueError("fit grid does not cover the interval")
    if density is None:
        f = np.atleast_1d(qr.density_quantile(fit, taus))
        if scale is not None:
            f = f * float(np.mean(scale))
    else:
        f = np.broadcast_to(np.asarray(density, dtype=float), taus.shape)
    root = _sym_sqrt(_slope_precision(fit, restrict, scale))
    dev = fit.coef[mask][:, restrict] - np.asarray(phi_hat, dtype=float)[None, :]
    V = np.sqrt(fit.n) * f[:, None] * (dev @ root.T)
    return taus, V


def local_linear(x, y, bandwidth: float) -> np.ndarray:
    """Gaussian-weighted local linear smoother evaluated at the design points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x[None, :] - x[:, None]
    w = np.exp(-0.5 * (d / bandwidth) ** 2)
    s0 = w.sum(axis=1)
    s1 = (w * d).sum(axis=1)
    s2 = (w * d * d).sum(axis=1)
    t0 = w @ y
    t1 = (w * d) @ y
    return (s2 * t0 - s1 * t1) / (s0 * s2 - s1 * s1)


def score_estimates(fit: qr.QarFit, taus, bandwidth: float = 0.06, scale=None):
    """Smoothed density path, score vectors and tail Gram matrices.

    ``f(F^-1(tau))`` is the Hall-Sheather estimate smoothed over ``tau`` by a
    local linear fit. Because ``d/dtau f(F^-1(tau)) = f'/f`` at
    ``F^-1(tau)``, the score ``g = (1, f'/f)`` is taken as the forward
    difference of that same path. Returns ``(f, g, C)`` with ``C[k]`` the sum
    of ``g g' dtau`` over ``taus[k:-1]``.
    """
    taus = np.asarray(taus, dtype=float)
    raw = np.atleast_1d(qr.density_quantile(fit, taus))
    if scale is not None:
        raw = raw * float(np.mean(scale))
    f = np.maximum(local_linear(taus, raw, bandwidth), qr.DENSITY_FLOOR)
    step = np.diff(taus)
    slope = np.diff(f) / step
    g = np.column_stack([np.ones_like(taus), np.r_[slope, slope[-1:]]])
    outer = g[:-1, :, None] * g[:-1, None, :] * step[:, None, None]
    C = np.cumsum(outer[::-1], axis=0)[::-1]
    return f, g, C


def khmaladze_transform(V: np.ndarray, g: np.ndarray, taus) -> np.ndarray:
    """Martingale transform of a process sampled on ``taus``.

    ``Vt[i] = V[i] - sum_{k<i} g_k' C_k^+ (sum_{j>=k} g_j dV_j) d_k`` with
    ``C_k = sum_{j>=k} g_j g_j' d_j``. Any path of the form
    ``V[0] + a' int g`` is mapped to the constant ``V[0]``.
    """
    V = np.asarray(V, dtype=float)
    squeeze = V.ndim == 1
    if squeeze:
        V = V[:, None]
    taus = np.asarray(taus, dtype=float)
    n = V.shape[0]
    out = V.copy()
    if n < 2:
        return out[:, 0] if squeeze else out
    d = np.diff(taus)
    dV = np.diff(V, axis=0)  # (n-1, q)
    gk = g[:-1]
    inner = np.cumsum((gk[:, :, None] * dV[:, None, :])[::-1], axis=0)[::-1]  # (n-1, r, q)
    C = np.cumsum((gk[:, :, None] * gk[:, None, :] * d[:, None, None])[::-1], axis=0)[::-1]
    drift = np.empty_like(dV)
    for k in range(n - 1):
        Ck = C[k]
        tr = np.trace(Ck)
        if np.linalg.cond(Ck) < 1e10:
            sol = np.linalg.solve(Ck, inner[k])
        else:
            sol = np.linalg.pinv(Ck, rcond=1e-10) @ inner[k] if tr > 0 else np.zeros_like(inner[k])
        drift[k] = gk[k] @ sol * d[k]
    out[1:] -= np.cumsum(drift, axis=0)
    return out[:, 0] if squeeze else out


def sup_norm(V: np.ndarray, norm: str = "l1") -> float:
    """``sup_tau ||V(tau)||`` for ``norm`` in ``{"l1", "l2", "linf"}``."""
    V = np.atleast_2d(np.asarray(V, dtype=float).T).T
    if norm == "l1":
        pointwise = np.abs(V).sum(axis=1)
    elif norm == "l2":
        pointwise = np.sqrt((V * V).sum(axis=1))
    elif norm == "linf":
        pointwise = np.abs(V).max(axis=1)
    else:
        raise ValueError(f"unknown norm {norm!r}")
    return float(pointwise.max())


# ---------------------------------------------------------------- critical values

_CACHE_LOCK = threading.Lock()


def _cache_path() -> Path:
    env = os.environ.get("NONCAUSAL_CACHE_DIR")
    base = Path(env) if env else Path.home() / ".cache" / "noncausal"
    return base / "critical_values.txt"


def _cache_key(p, interval, level, steps, reps, seed, norm) -> str:
    lo, hi = interval
    return f"p={p} lo={lo:.4f} hi={hi:.4f} level={level:.4f} steps={steps} reps={reps} seed={seed} norm={norm}"


def _read_cache(path: Path) -> dict[str, float]:
    if not path.exists():
        return {}
    out = {}
    for line in path.read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, _, value = line.rpartition(" value=")
        try:
            out[key] = float(value)
        except ValueError:
            continue
    return out


def _write_cache(path: Path, entries: dict[str, float]) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with _CACHE_LOCK, path.open("a") as fh:
            for key, value in entries.items():
                fh.write(f"{key} value={value!r}\n")
    except OSError:
        pass


def simulate_sup_norms(p: int, interval, reps: int, steps: int, seed: int, norm: str = "l1") -> np.ndarray:
    """Draws of ``sup_{tau in interval} ||W_p(tau)||`` from Gaussian random walks.

    Component ``c`` of chunk ``b`` always comes from the stream ``(seed, b, c)``,
    so draws for dimension ``p`` and ``p + 1`` share their first ``p``
    components and the simulated quantiles are monotone in ``p``.
    """
    lo, hi = interval
    i0, i1 = int(np.ceil(lo * steps - 1e-9)), int(np.floor(hi * steps + 1e-9))
    chunk = 1000
    out = np.empty(reps)
    for b, start in enumerate(range(0, reps, chunk)):
        n = min(chunk, reps - start)
        acc = np.zeros((n, i1 - i0 + 1))
        for c in range(p):
            rng = make_rng(seed, b, c)
            W = np.cumsum(rng.standard_normal((n, i1)), axis=1) / np.sqrt(steps)
            W = np.concatenate([np.zeros((n, 1)), W], axis=1)[:, i0 : i1 + 1]
            if norm == "l1":
                acc += np.abs(W)
            elif norm == "l2":
                acc += W * W
            elif norm == "linf":
                np.maximum(acc, np.abs(W), out=acc)
            else:
                raise ValueError(f"unknown norm {norm!r}")
        if norm == "l2":
            acc = np.sqrt(acc)
        out[start : start + n] = acc.max(axis=1)
    return out


def critical_values(
    p: int,
    interval=DEFAULT_INTERVAL,
    levels=DEFAULT_LEVELS,
    reps: int = CV_REPS,
    steps: int = CV_STEPS,
    seed: int = CV_SEED,
    norm: str = "l1",
    use_cache: bool = True,
) -> dict[float, float]:
    """Upper quantiles of the sup-norm of a ``p``-dimensional Brownian motion."""
    if p < 1:
        raise ValueError("dimension must be at least 1")
    levels = tuple(float(a) for a in levels)
    if any(not 0 < a < 1 for a in levels):
        raise ValueError("levels must lie in (0, 1)")
    interval = (float(interval[0]), float(interval[1]))
    keys = {a: _cache_key(p, interval, a, steps, reps, seed, norm) for a in levels}
    path = _cache_path()
    cached = _read_cache(path) if use_cache else {}
    if all(k in cached for k in keys.values()):
        return {a: cached[keys[a]] for a in levels}
    draws = simulate_sup_norms(p, interval, reps, steps, seed, norm)
    values = {a: float(np.quantile(draws, 1.0 - a)) for a in levels}
    if use_cache:
        _write_cache(path, {keys[a]: values[a] for a in levels})
    return values


def critical_value(p: int, interval=DEFAULT_INTERVAL, level: float = 0.05, **kwargs) -> float:
    return critical_values(p, interval, (level,), **kwargs)[level]


# ---------------------------------------------------------------- the test


@dataclass(frozen=True)
class ConstancyResult:
    ks_raw: float
    ks_transformed: float
    critical_values: dict
    interval: tuple
    phi_hat: np.ndarray
    norm: str = "l1"
    taus: np.ndarray = field(repr=False, default=None)
    v: np.ndarray = field(repr=False, default=None)
    v_transformed: np.ndarray = field(repr=False, default=None)

    @property
    def statistic(self) -> float:
        return self.ks_transformed

    @property
    def decision(self) -> dict:
        """Level -> reject flag."""
        return {a: bool(self.ks_transformed > c) for a, c in self.critical_values.items()}

    def reject(self, level: float = 0.05) -> bool:
        return self.decision[level]


def constancy_test_design(
    y,
    X,
    restrict=None,
    interval=DEFAULT_INTERVAL,
    levels=DEFAULT_LEVELS,
    scale=None,
    step: float = 0.01,
    norm: str = "l1",
    smoothing: float = 0.06,
    nuisance: str = "median",
    cv_kwargs: dict | None = None,
) -> ConstancyResult:
    """Constancy test for the columns ``restrict`` of an arbitrary design.

    ``scale`` supplies a known conditional scale ``sigma_t`` (one per row);
    the slope covariance then uses ``E[X X' / sigma_t]`` and the density refers
    to the standardized innovation. ``nuisance`` picks the pilot estimate of
    the common slopes: ``"median"`` (the quantile regression at 0.5) or
    ``"ols"``.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    restrict = list(range(1, X.shape[1])) if restrict is None else list(restrict)
    if not restrict:
        raise ValueError("no coefficients to test")
    grid = _grid_on(interval, step)
    fit = qr.fit_design(y, X, grid)
    if nuisance == "median":
        phi_hat = qr.fit_qr(y, X, 0.5)[restrict]
    elif nuisance == "ols":
        phi_hat = qr.ols(y, X)[restrict]
    else:
        raise ValueError(f"unknown nuisance estimator {nuisance!r}")
    taus = grid[(grid >= interval[0] - 1e-9) & (grid <= interval[1] + 1e-9)]
    f, g, _ = score_estimates(fit, taus, smoothing, scale)
    taus, V = v_process(fit, phi_hat, interval, restrict=restrict, scale=scale, density=f)
    Vt = khmaladze_transform(V, g, taus)
    cvs = critical_values(len(restrict), interval, levels, norm=norm, **(cv_kwargs or {}))
    return ConstancyResult(
        ks_raw=sup_norm(V, norm),
        ks_transformed=sup_norm(Vt, norm),
        critical_values=cvs,
        interval=tuple(interval),
        phi_hat=phi_hat,
        norm=norm,
        taus=taus,
        v=V,
        v_transformed=Vt,
    )


def constancy_test(
    series,
    p: int,
    interval=DEFAULT_INTERVAL,
    levels=DEFAULT_LEVELS,
    step: float = 0.01,
    norm: str = "l1",
    smoothing: float = 0.06,
    nuisance: str = "median",
    cv_kwargs: dict | None = None,
) -> ConstancyResult:
    """Test that all QAR(p) slopes are constant over ``interval``."""
    series = np.asarray(series, dtype=float)
    if p < 1:
        raise ValueError("the constancy test needs p >= 1")
    if series.size < 50:
        raise ValueError("the constancy test needs at least 50 observations")
    y, X = qr.lag_design(series, p)
    return constancy_test_design(
        y, X, None, interval, levels, step=step, norm=norm, smoothing=smoothing, nuisance=nuisance,
        cv_kwargs=cv_kwargs,
    )

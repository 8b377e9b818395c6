"""Second- and higher-order moments of MAR and all-pass processes.

The autocovariance of a mixed causal/non-causal autoregression only depends
on the modulus of its lag polynomial on the unit circle, so non-causal roots
can be folded onto the causal side without changing it. All-pass filtered
noise is white but not independent; the functions below give the implied
squared-value autocorrelation and the third-order dependence of the cubes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Mapping

import numpy as np

from . import distributions as dist
from .simulate import MarModel, allpass_weights, two_sided_weights

__all__ = [
    "AllpassMoments",
    "acgf",
    "allpass_sq_acf",
    "allpass_skewness_factor",
    "allpass_cube_cov",
    "allpass_cube_cov_lag1",
    "cube_cov_alphas",
    "printed_cube_cov_alphas",
    "joint_cumulant_moment",
    "moments_to_cumulants",
]

WEIGHT_TOL = 1e-14


def _causal_equivalent(model: MarModel) -> MarModel:
    # phi(z) psi(z) has the same modulus on |z| = 1 as phi(z) psi(1/z)
    poly = np.polynomial.polynomial.polymul(np.r_[1.0, -np.asarray(model.phi)], np.r_[1.0, -np.asarray(model.psi)])
    return MarModel(phi=tuple(-poly[1:]), innovation=model.innovation)


def acgf(model: MarModel, h: int) -> float:
    """Autocovariance of a stationary MAR process at lag ``h``."""
    sigma2 = dist.variance(model.innovation)
    w = two_sided_weights(_causal_equivalent(model), tol=WEIGHT_TOL)
    lags = np.array(sorted(w))
    rho = np.array([w[k] for k in lags])
    h = abs(int(h))
    if h >= rho.size:
        return 0.0
    return float(sigma2 * np.dot(rho[: rho.size - h], rho[h:]))


def _weight_array(psi: float) -> np.ndarray:
    w = allpass_weights(psi, tol=WEIGHT_TOL)
    lo = min(w)
    out = np.zeros(max(w) - lo + 1)
    for k, v in w.items():
        out[k - lo] = v
    return out


def _shifted(rho: np.ndarray, h: int) -> tuple[np.ndarray, np.ndarray]:
    """``rho`` and its lead by ``h`` on a common, zero-padded support."""
    h = abs(int(h))
    a = np.r_[rho, np.zeros(h)]
    b = np.r_[np.zeros(h), rho]
    # weight on u_{t+k} in the lead-h term is rho_{k-h}
    return a, b


@dataclass(frozen=True)
class AllpassMoments:
    """All-pass weights together with the innovation moments they act on.

    ``moments`` maps the order (2..6) to the central moment of ``u``; orders
    that do not exist for the innovation law are simply absent.
    """

    psi: float
    moments: Mapping[int, float] = field(default_factory=dict)
    rho: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (abs(self.psi) < 1.0 and self.psi != 0.0):
            raise ValueError("psi must satisfy 0 < |psi| < 1")
        object.__setattr__(self, "moments", {int(k): float(v) for k, v in self.moments.items()})
        object.__setattr__(self, "rho", _weight_array(self.psi))

    @classmethod
    def from_innovation(cls, psi: float, innovation: dist.InnovationSpec) -> "AllpassMoments":
        moments = {}
        for k in range(2, 7):
            try:
                moments[k] = dist.central_moment(innovation, k)
            except dist.MomentNotFiniteError:
                break
        return cls(psi, moments)

    def _need(self, k: int) -> float:
        if k not in self.moments:
            raise dist.MomentNotFiniteError(f"moment of order {k} of the innovation is not available")
        return self.moments[k]

    @property
    def sigma2(self) -> float:
        return self._need(2)

    @property
    def Eu3(self) -> float:
        return self._need(3)

    @property
    def kappa4(self) -> float:
        return self._need(4) - 3.0 * self._need(2) ** 2

    def sq_acf(self, h: int) -> float:
        return allpass_sq_acf(self.psi, self.kappa4, self.sigma2, h)

    def third_moment(self) -> float:
        return float(np.sum(self.rho**3)) * self.Eu3

    def cube_cov(self, h: int = 1) -> float:
        return allpass_cube_cov(self.psi, self.moments, h)


def allpass_sq_acf(psi: float, kappa4: float, sigma2: float, h: int) -> float:
    """Autocorrelation of the squared all-pass series at lag ``h``."""
    if kappa4 is None or not np.isfinite(kappa4):
        raise dist.MomentNotFiniteError("the fourth cumulant is required")
    rho = _weight_array(psi)
    a, b = _shifted(rho, h)
    s22 = float(np.sum(a * a * b * b))
    cross = float(np.sum(a * b)) if h else 1.0
    num = kappa4 * s22 + 2.0 * sigma2**2 * cross**2
    den = kappa4 * float(np.sum(rho**4)) + 2.0 * sigma2**2
    return num / den


def allpass_skewness_factor(psi: float) -> float:
    """Ratio of the third moment of the all-pass output to that of its input."""
    if abs(psi) >= 1.0:
        raise ValueError("psi must lie inside (-1, 1)")
    p2 = psi * psi
    return 1.0 - 3.0 * p2 * (psi + 1.0) / (p2 + psi + 1.0)


def moments_to_cumulants(m: Mapping[int, float]) -> dict[int, float]:
    """Cumulants of a mean-zero variable from its central moments (orders 2..4 required)."""
    k = {2: m[2], 3: m[3], 4: m[4] - 3.0 * m[2] ** 2}
    if 5 in m:
        k[5] = m[5] - 10.0 * m[3] * m[2]
    if 6 in m:
        k[6] = m[6] - 15.0 * m[4] * m[2] - 10.0 * m[3] ** 2 + 30.0 * m[2] ** 3
    return k


def _set_partitions(items: tuple[int, ...]):
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    # choose the companions of the first element, recurse on the remainder
    for size in range(len(rest) + 1):
        for mates in combinations(rest, size):
            remaining = tuple(i for i in rest if i not in mates)
            for tail in _set_partitions(remaining):
                yield ((first, *mates),) + tail


@lru_cache(maxsize=None)
def _partitions_without_singletons(n: int) -> tuple:
    return tuple(p for p in _set_partitions(tuple(range(n))) if all(len(b) > 1 for b in p))


def joint_cumulant_moment(weights, cumulants: Mapping[int, float]) -> float:
    """``E[prod_i X_i]`` for linear forms ``X_i = sum_j w_ij u_j`` of iid mean-zero ``u``.

    ``weights`` is an ``(n, J)`` array on a common support. Each set partition
    of the factors into blocks of size two or more contributes the product of
    cumulants times the summed weight products within each block.
    """
    W = np.asarray(weights, dtype=float)
    total = 0.0
    for part in _partitions_without_singletons(W.shape[0]):
        term = 1.0
        for block in part:
            term *= cumulants[len(block)] * float(np.sum(np.prod(W[list(block)], axis=0)))
        total += term
    return total


def allpass_cube_cov(psi: float, moments: Mapping[int, float], h: int = 1) -> float:
    """``Cov(u~_t^3, u~_{t+h}^3)`` for all-pass filtered iid noise, any lag."""
    missing = [k for k in (2, 3, 4, 6) if k not in moments]
    if missing:
        raise dist.MomentNotFiniteError(f"central moments {missing} of the innovation are required")
    kap = moments_to_cumulants(moments)
    a, b = _shifted(_weight_array(psi), h)
    joint = joint_cumulant_moment(np.vstack([a, a, a, b, b, b]), kap)
    return joint - kap[3] ** 2 * float(np.sum(a**3)) * float(np.sum(b**3))


def cube_cov_alphas(psi: float, h: int = 1) -> tuple[float, float, float, float]:
    """Coefficients on ``E u^6``, ``E u^4 E u^2``, ``E^2 u^3`` and ``E^3 u^2``.

    The lag-``h`` cube covariance is linear in these four moment products;
    each coefficient is read off by evaluating the exact expansion at a unit
    vector in that basis.
    """
    # the expansion is a polynomial identity in m2..m6, so the coefficients
    # can be read off at arbitrary (not necessarily attainable) moment values
    base = {2: 0.0, 3: 0.0, 4: 0.0, 6: 0.0}
    c6 = allpass_cube_cov(psi, {**base, 6: 1.0}, h)
    c33 = allpass_cube_cov(psi, {**base, 3: 1.0}, h)
    # with m2 = 1 and m3 = m6 = 0 the value is c42 * m4 + c222
    v0 = allpass_cube_cov(psi, {**base, 2: 1.0}, h)
    v1 = allpass_cube_cov(psi, {**base, 2: 1.0, 4: 1.0}, h)
    c42 = v1 - v0
    return c6, c42, c33, v0


def printed_cube_cov_alphas(psi: float) -> tuple[float, float, float, float]:
    """Closed-form lag-one coefficients in their commonly printed form.

    Ordered as ``(alpha1, alpha2, alpha3, alpha4)`` multiplying ``E u^6``,
    ``E u^4 E u^2``, ``E^2 u^3`` and ``E^3 u^2``. They disagree with the exact
    expansion and with simulation; kept for comparison only.
    """
    q = (1.0 - psi * psi) ** 3
    d = psi**4 + psi**2 + 1.0
    a1 = -3.0 * psi**5 * q / d
    a2 = -3.0 * psi**3 * q + 45.0 * psi**5 * q / d
    a3 = 30.0 * psi**5 * q / d - 9.0 * q * (2.0 * psi + 1.0) * psi**2 / (psi**2 + psi + 1.0) ** 2
    a4 = 45.0 * psi**5 * q / d
    return a1, a2, a3, a4


def allpass_cube_cov_lag1(psi: float, moments: Mapping[int, float], closed_form: str = "exact") -> float:
    """Lag-one covariance of the cubed all-pass series.

    ``closed_form="exact"`` uses coefficients from the full cumulant
    expansion; ``"printed"`` evaluates the commonly printed closed-form alphas.
    """
    missing = [k for k in (2, 3, 4, 6) if k not in moments]
    if missing:
        raise dist.MomentNotFiniteError(f"central moments {missing} of the innovation are required")
    if closed_form == "exact":
        a1, a2, a3, a4 = cube_cov_alphas(psi, 1)
    elif closed_form == "printed":
        a1, a2, a3, a4 = printed_cube_cov_alphas(psi)
    else:
        raise ValueError("closed_form must be 'exact' or 'printed'")
    m2, m3, m4, m6 = (moments[k] for k in (2, 3, 4, 6))
    return a1 * m6 + (a2 * m4 + a4 * m2 * m2) * m2 + a3 * m3 * m3

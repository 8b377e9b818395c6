"""Centered innovation families.

Each family is an ordinary scipy distribution shifted by its mean so that the
innovations have mean zero. Families without a finite mean are not offered;
the Cauchy enters only in truncated form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Mapping

import numpy as np
from scipy import stats

from .rng import make_rng

__all__ = [
    "FAMILIES",
    "InnovationSpec",
    "MomentNotFiniteError",
    "sample",
    "quantile",
    "density",
    "cdf",
    "central_moment",
    "variance",
    "fourth_cumulant",
]


class MomentNotFiniteError(ValueError):
    """Requested moment does not exist for the family."""


class _TruncatedCauchy(stats.rv_continuous):
    # standard Cauchy restricted to [-bound, bound]
    def _argcheck(self, bound):
        return bound > 0

    def _get_support(self, bound):
        return -bound, bound

    def _mass(self, bound):
        return 2.0 * np.arctan(bound) / np.pi

    def _pdf(self, x, bound):
        return 1.0 / (np.pi * (1.0 + x * x)) / self._mass(bound)

    def _cdf(self, x, bound):
        return (np.arctan(x) + np.arctan(bound)) / (2.0 * np.arctan(bound))

    def _ppf(self, q, bound):
        return np.tan((2.0 * q - 1.0) * np.arctan(bound))

    def _munp(self, n, bound):
        if n % 2 == 1:
            return 0.0
        # int_0^b x^n / (1 + x^2) = b^(n-1) / (n-1) - (same integral for n-2)
        val = np.arctan(bound)
        for m in range(2, int(n) + 1, 2):
            val = bound ** (m - 1) / (m - 1) - val
        return 2.0 * val / np.pi / self._mass(bound)


_trunc_cauchy = _TruncatedCauchy(name="trunccauchy")

# family -> default params
_DEFAULTS: dict[str, dict[str, float]] = {
    "gaussian": {"scale": 1.0},
    "exponential": {"scale": 1.0},
    "gamma": {"shape": 1.0, "scale": 1.0},
    "beta": {"a": 5.0, "b": 1.0},
    "f": {"dfn": 5.0, "dfd": 5.0},
    "chisq": {"df": 5.0},
    "skewnormal": {"shape": 5.0, "scale": 1.0},
    "trunccauchy": {"bound": 100.0},
    "lognormal": {"sigma": 2.0},
    "t": {"df": 3.0},
    "uniform": {"width": 1.0},
    "laplace": {"scale": 1.0},
}

_ALIASES = {
    "normal": "gaussian",
    "exp": "exponential",
    "chisq5": "chisq",
    "chi2": "chisq",
    "skew_normal": "skewnormal",
    "truncated_cauchy": "trunccauchy",
    "log_normal": "lognormal",
    "t3": "t",
    "student_t": "t",
}

FAMILIES = tuple(_DEFAULTS)


@dataclass(frozen=True)
class InnovationSpec:
    """A centered innovation law.

    ``family`` is one of :data:`FAMILIES` (a few aliases such as ``"t3"`` or
    ``"chisq5"`` are accepted); ``params`` overrides the family defaults.
    With ``standardized=True`` the centered variable is also rescaled to unit
    variance.
    """

    family: str = "gaussian"
    params: Mapping[str, float] = field(default_factory=dict)
    standardized: bool = False

    def __post_init__(self):
        name = _ALIASES.get(self.family.lower(), self.family.lower())
        if name not in _DEFAULTS:
            raise ValueError(f"unknown innovation family {self.family!r}")
        unknown = set(self.params) - set(_DEFAULTS[name])
        if unknown:
            raise ValueError(f"unknown parameters for {name}: {sorted(unknown)}")
        merged = {**_DEFAULTS[name], **{k: float(v) for k, v in self.params.items()}}
        object.__setattr__(self, "family", name)
        object.__setattr__(self, "params", merged)
        _validate(name, merged)
        if self.standardized and not _moment_exists(self, 2):
            raise MomentNotFiniteError(f"{name} has no finite variance to standardize by")

    @property
    def centering(self) -> float:
        return _base(self)[1]

    @property
    def scale_factor(self) -> float:
        """Multiplier applied after centering (1 unless standardized)."""
        if not self.standardized:
            return 1.0
        return 1.0 / np.sqrt(_raw_central_moment(self, 2))

    def label(self) -> str:
        return self.family

    def frozen(self):
        """The uncentered scipy distribution."""
        return _base(self)[0]


def _validate(name: str, p: Mapping[str, float]) -> None:
    positive = {
        "gaussian": ["scale"],
        "exponential": ["scale"],
        "gamma": ["shape", "scale"],
        "beta": ["a", "b"],
        "f": ["dfn", "dfd"],
        "chisq": ["df"],
        "skewnormal": ["scale"],
        "trunccauchy": ["bound"],
        "lognormal": ["sigma"],
        "t": ["df"],
        "uniform": ["width"],
        "laplace": ["scale"],
    }[name]
    for key in positive:
        if not p[key] > 0:
            raise ValueError(f"{name}: parameter {key} must be positive, got {p[key]}")
    if name == "f" and p["dfd"] <= 2:
        raise ValueError("f: dfd must exceed 2 for the mean to exist")
    if name == "t" and p["df"] <= 1:
        raise ValueError("t: df must exceed 1 for the mean to exist")


def _base(spec: InnovationSpec):
    p = spec.params
    name = spec.family
    if name == "gaussian":
        return stats.norm(scale=p["scale"]), 0.0
    if name == "exponential":
        return stats.expon(scale=p["scale"]), p["scale"]
    if name == "gamma":
        return stats.gamma(p["shape"], scale=p["scale"]), p["shape"] * p["scale"]
    if name == "beta":
        return stats.beta(p["a"], p["b"]), p["a"] / (p["a"] + p["b"])
    if name == "f":
        return stats.f(p["dfn"], p["dfd"]), p["dfd"] / (p["dfd"] - 2.0)
    if name == "chisq":
        return stats.chi2(p["df"]), p["df"]
    if name == "skewnormal":
        a, s = p["shape"], p["scale"]
        delta = a / np.sqrt(1.0 + a * a)
        return stats.skewnorm(a, scale=s), s * delta * np.sqrt(2.0 / np.pi)
    if name == "trunccauchy":
        return _trunc_cauchy(p["bound"]), 0.0
    if name == "lognormal":
        s = p["sigma"]
        return stats.lognorm(s), float(np.exp(s * s / 2.0))
    if name == "t":
        return stats.t(p["df"]), 0.0
    if name == "uniform":
        return stats.uniform(scale=p["width"]), p["width"] / 2.0
    if name == "laplace":
        return stats.laplace(scale=p["scale"]), 0.0
    raise ValueError(f"unknown innovation family {name!r}")  # pragma: no cover


def sample(spec: InnovationSpec, n: int, seed: int | np.random.Generator) -> np.ndarray:
    """Draw ``n`` iid centered innovations."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    dist, c = _base(spec)
    x = np.asarray(dist.rvs(size=n, random_state=rng), dtype=float) - c
    return x * spec.scale_factor if spec.standardized else x


def quantile(spec: InnovationSpec, tau):
    """Exact quantile function of the centered law."""
    t = np.asarray(tau, dtype=float)
    if np.any((t <= 0) | (t >= 1)):
        raise ValueError("tau must lie strictly inside (0, 1)")
    dist, c = _base(spec)
    out = (dist.ppf(t) - c) * spec.scale_factor
    return float(out) if out.ndim == 0 else out


def density(spec: InnovationSpec, u):
    dist, c = _base(spec)
    k = spec.scale_factor
    out = dist.pdf(np.asarray(u, dtype=float) / k + c) / k
    return float(out) if np.ndim(out) == 0 else out


def cdf(spec: InnovationSpec, u):
    dist, c = _base(spec)
    out = dist.cdf(np.asarray(u, dtype=float) / spec.scale_factor + c)
    return float(out) if np.ndim(out) == 0 else out


def _moment_exists(spec: InnovationSpec, k: int) -> bool:
    if spec.family == "t":
        return k < spec.params["df"]
    if spec.family == "f":
        return spec.params["dfd"] > 2 * k
    return True


def central_moment(spec: InnovationSpec, k: int) -> float:
    """k-th central moment, k = 2..6."""
    if not 2 <= k <= 6:
        raise ValueError("k must be between 2 and 6")
    if not _moment_exists(spec, k):
        raise MomentNotFiniteError(f"moment of order {k} is not finite for {spec.family}")
    return _raw_central_moment(spec, k) * spec.scale_factor**k


def _raw_central_moment(spec: InnovationSpec, k: int) -> float:
    dist, c = _base(spec)
    if spec.family == "lognormal":
        # numerical integration fails for the high lognormal moments
        s = spec.params["sigma"]
        raw = [float(np.exp(j * j * s * s / 2.0)) for j in range(k + 1)]
    else:
        raw = [1.0] + [float(dist.moment(j)) for j in range(1, k + 1)]
    mu = raw[1]
    return float(sum(comb(k, j) * raw[j] * (-mu) ** (k - j) for j in range(k + 1)))


def variance(spec: InnovationSpec) -> float:
    return central_moment(spec, 2)


def fourth_cumulant(spec: InnovationSpec) -> float:
    m2 = central_moment(spec, 2)
    return central_moment(spec, 4) - 3.0 * m2 * m2

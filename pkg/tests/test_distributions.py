import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from noncausal import distributions as dist
from noncausal.distributions import FAMILIES, InnovationSpec, MomentNotFiniteError


def _finite_variance(family):
    return family not in ("t",)


@pytest.mark.parametrize("family", FAMILIES)
def test_sample_mean_is_zero(family):
    spec = InnovationSpec(family)
    x = dist.sample(spec, 10**6, seed=11)
    if _finite_variance(family):
        se = np.sqrt(dist.variance(spec) / x.size)
    else:
        se = x.std() / np.sqrt(x.size)
    assert abs(x.mean()) < 4 * se


def test_exponential_mean_example():
    x = dist.sample(InnovationSpec("exponential"), 10**6, seed=1)
    assert abs(x.mean()) < 0.004


def test_beta_support():
    x = dist.sample(InnovationSpec("beta"), 10**6, seed=2)
    assert x.min() > -5 / 6 and x.max() < 1 / 6


def test_truncated_cauchy_support_and_variance():
    spec = InnovationSpec("trunccauchy")
    x = dist.sample(spec, 10**6, seed=3)
    assert np.abs(x).max() <= 100.0
    # variance of the standard Cauchy restricted to [-100, 100]
    mass = 2 * np.arctan(100) / np.pi
    var = integrate.quad(lambda u: u * u / (np.pi * (1 + u * u)), -100, 100, limit=200)[0] / mass
    assert dist.variance(spec) == pytest.approx(var, rel=1e-8)
    assert np.var(x) == pytest.approx(var, rel=0.05)


def test_sampling_is_deterministic():
    spec = InnovationSpec("lognormal")
    assert np.array_equal(dist.sample(spec, 100, 5), dist.sample(spec, 100, 5))
    assert not np.array_equal(dist.sample(spec, 100, 5), dist.sample(spec, 100, 6))


def test_quantile_examples():
    assert dist.quantile(InnovationSpec("exponential"), 0.5) == pytest.approx(np.log(2) - 1)
    assert dist.quantile(InnovationSpec("uniform"), 0.25) == pytest.approx(-0.25)
    z = stats.norm.ppf(0.9)
    assert dist.quantile(InnovationSpec("lognormal"), 0.9) == pytest.approx(np.exp(2 * z) - np.exp(2))


def test_density_examples():
    assert dist.density(InnovationSpec("laplace"), 0.0) == pytest.approx(0.5)
    assert dist.density(InnovationSpec("exponential"), -1.0) == pytest.approx(1.0)
    assert dist.density(InnovationSpec("exponential"), -1.5) == 0.0


@pytest.mark.parametrize("family", FAMILIES)
def test_density_integrates_to_one(family):
    spec = InnovationSpec(family)
    lo, hi = dist.quantile(spec, 1e-12), dist.quantile(spec, 1 - 1e-12)
    inner = np.linspace(lo, hi, 41)
    total = sum(integrate.quad(lambda u: dist.density(spec, u), a, b, limit=200)[0] for a, b in zip(inner[:-1], inner[1:]))
    tails = dist.cdf(spec, lo) + 1 - dist.cdf(spec, hi)
    assert total + tails == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("family", FAMILIES)
def test_dkw_band(family):
    spec = InnovationSpec(family)
    n = 10**5
    x = np.sort(dist.sample(spec, n, seed=21))
    taus = np.arange(1, 100) / 100
    ecdf = np.searchsorted(x, dist.quantile(spec, taus), side="right") / n
    eps = np.sqrt(np.log(2 / 0.001) / (2 * n))
    assert np.all(np.abs(ecdf - taus) < eps)


@pytest.mark.parametrize("family", FAMILIES)
@given(a=st.floats(0.001, 0.998), b=st.floats(0.001, 0.998))
@settings(max_examples=25, deadline=None)
def test_quantile_monotone_with_positive_density(family, a, b):
    spec = InnovationSpec(family)
    lo, hi = sorted((a, b))
    assert dist.quantile(spec, lo) <= dist.quantile(spec, hi)
    assert dist.density(spec, dist.quantile(spec, lo)) > 0
    assert dist.cdf(spec, dist.quantile(spec, lo)) == pytest.approx(lo, abs=1e-6)


def test_central_moment_examples():
    exp = InnovationSpec("exponential")
    assert dist.central_moment(exp, 3) == pytest.approx(2.0)
    assert dist.central_moment(exp, 4) == pytest.approx(9.0)
    assert dist.central_moment(exp, 6) == pytest.approx(265.0)
    assert dist.central_moment(InnovationSpec("gaussian"), 3) == pytest.approx(0.0, abs=1e-12)


def test_chisq_fourth_moment_by_quadrature_and_cumulants():
    spec = InnovationSpec("chisq")
    quad = integrate.quad(lambda u: (u - 5) ** 4 * stats.chi2.pdf(u, 5), 0, np.inf)[0]
    # cumulants of chi2_k: 2^(n-1) (n-1)! k
    k2, k4 = 2 * 5, 8 * 6 * 5
    assert dist.central_moment(spec, 4) == pytest.approx(quad, rel=1e-8)
    assert dist.central_moment(spec, 4) == pytest.approx(3 * k2**2 + k4)
    assert dist.central_moment(spec, 4) == pytest.approx(540.0)


@pytest.mark.parametrize("family", [f for f in FAMILIES if f != "t"])
def test_variance_matches_sample(family):
    spec = InnovationSpec(family)
    x = dist.sample(spec, 10**6, seed=31)
    v = dist.variance(spec)
    m4 = dist.central_moment(spec, 4) if family != "f" else np.mean((x - x.mean()) ** 4)
    se = np.sqrt((m4 - v * v) / x.size)
    assert abs(x.var() - v) < 4 * se


def test_missing_moments_raise():
    with pytest.raises(MomentNotFiniteError):
        dist.central_moment(InnovationSpec("t"), 3)
    with pytest.raises(MomentNotFiniteError):
        dist.central_moment(InnovationSpec("f"), 3)
    assert dist.central_moment(InnovationSpec("f"), 2) > 0


def test_standardized_has_unit_variance():
    for family in ("exponential", "laplace", "t"):
        spec = InnovationSpec(family, standardized=True)
        assert dist.variance(spec) == pytest.approx(1.0)
        x = dist.sample(spec, 200_000, seed=4)
        assert abs(x.mean()) < 0.02


def test_invalid_specs():
    with pytest.raises(ValueError):
        InnovationSpec("cauchy")
    with pytest.raises(ValueError):
        InnovationSpec("gamma", {"shape": -1.0})
    with pytest.raises(ValueError):
        InnovationSpec("gamma", {"rate": 1.0})
    with pytest.raises(ValueError):
        dist.quantile(InnovationSpec(), 1.0)
    with pytest.raises(ValueError):
        dist.sample(InnovationSpec(), 0, 1)


def test_aliases_and_defaults():
    assert InnovationSpec("t3").family == "t"
    assert InnovationSpec("chisq5").params["df"] == 5.0
    assert InnovationSpec("lognormal").params["sigma"] == 2.0
    assert InnovationSpec("skewnormal").params["shape"] == 5.0


def test_lognormal_high_moments_closed_form():
    spec = InnovationSpec("lognormal")
    raw = [np.exp(j * j * 2.0) for j in range(7)]
    mu = raw[1]
    m6 = sum(math.comb(6, j) * raw[j] * (-mu) ** (6 - j) for j in range(7))
    assert dist.central_moment(spec, 6) == pytest.approx(m6, rel=1e-9)
    assert dist.central_moment(spec, 2) == pytest.approx(np.exp(4) * (np.exp(4) - 1), rel=1e-12)

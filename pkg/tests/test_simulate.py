import numpy as np
import pytest

from noncausal import moments
from noncausal.distributions import InnovationSpec
from noncausal.simulate import (
    ArchSpec,
    MarModel,
    NonStationaryError,
    allpass_weights,
    simulate_allpass,
    simulate_ar_arch,
    simulate_mar,
    two_sided_weights,
)


def _acf(x, h):
    x = x - x.mean()
    return float(x[:-h] @ x[h:] / (x @ x))


def test_one_sided_weights():
    w = two_sided_weights(MarModel(psi=[0.6]))
    assert w[0] == pytest.approx(1.0)
    assert w[-1] == pytest.approx(0.6)
    assert w[-5] == pytest.approx(0.6**5)
    assert all(k <= 0 for k in w)
    w = two_sided_weights(MarModel(phi=[0.6]))
    assert w[3] == pytest.approx(0.6**3)
    assert all(k >= 0 for k in w)


def test_two_sided_weights_match_long_division():
    # Y_t = sum_j rho_j u_{t-j}; (1 - 0.3 L)(1 - 0.5 L^-1) Y_t = u_t
    w = two_sided_weights(MarModel(phi=[0.3], psi=[0.5]), tol=1e-15)
    # product of the two geometric series, summed directly
    for lag in range(-20, 21):
        direct = sum(0.3**i * 0.5**j for i in range(80) for j in range(80) if i - j == lag)
        assert w.get(lag, 0.0) == pytest.approx(direct, abs=1e-12)


def test_identity_filter():
    spec = InnovationSpec("exponential")
    y = simulate_mar(MarModel(innovation=spec), 50, 3)
    y2 = simulate_mar(MarModel(innovation=spec), 50, 3)
    assert np.array_equal(y, y2)
    assert abs(y.mean()) < 1.0


def test_nonstationary_rejected():
    with pytest.raises(NonStationaryError):
        MarModel(psi=[1.2])
    with pytest.raises(NonStationaryError):
        MarModel(phi=[1.0])
    MarModel(phi=[0.6], psi=[0.6])  # common reciprocal roots are allowed


def test_noncausal_recursion_holds():
    y = simulate_mar(MarModel(psi=[0.6], innovation=InnovationSpec("exponential")), 400, 8)
    u = y[:-1] - 0.6 * y[1:]
    assert u.min() > -1.0 - 1e-9  # centered Exp(1) innovations
    assert abs(u.mean()) < 0.2


def test_noncausal_lag1_autocorrelation():
    y = simulate_mar(MarModel(psi=[0.6]), 10**5, 1)
    assert _acf(y, 1) == pytest.approx(0.6, abs=0.01)


def test_acgf_equivalence_in_samples():
    T = 10**5
    c = simulate_mar(MarModel(phi=[0.5]), T, 4)
    nc = simulate_mar(MarModel(psi=[0.5]), T, 5)
    for h in range(6):
        g = moments.acgf(MarModel(phi=[0.5]), h)
        gc = np.mean((c[: T - h] - c.mean()) * (c[h:] - c.mean()))
        gn = np.mean((nc[: T - h] - nc.mean()) * (nc[h:] - nc.mean()))
        # long-run variance of the product series is bounded by 8 gamma0^2 / (1-phi^2)
        se = np.sqrt(8 * moments.acgf(MarModel(phi=[0.5]), 0) ** 2 / 0.75 / T)
        assert abs(gc - g) < 3 * se and abs(gn - g) < 3 * se


def test_truncation_is_negligible():
    m = MarModel(phi=[0.5], psi=[0.95])
    a = simulate_mar(m, 200, 9)
    b = simulate_mar(m, 200, 9, tol=1e-14)
    # the core innovations are shared; only the padding length differs
    J1 = len(a)
    assert J1 == 200
    assert np.max(np.abs(a - b)) < 1e-8 * max(1.0, np.abs(a).max())


def test_allpass_weights_example():
    w = allpass_weights(0.5)
    assert [w[-1], w[0], w[1], w[2]] == pytest.approx([-0.5, 0.75, 0.375, 0.1875])
    rho = np.array([w[k] for k in sorted(w)])
    assert np.sum(rho**2) == pytest.approx(1.0, abs=1e-12)


def test_allpass_white_but_dependent():
    x = simulate_allpass(0.6, InnovationSpec("lognormal"), 10**5, 2)
    for h in range(1, 6):
        assert abs(_acf(x, h)) < 0.02
    sq = _acf(x**2, 1)
    assert sq > 0


def test_allpass_rejects_bad_psi():
    with pytest.raises(ValueError):
        simulate_allpass(1.0, InnovationSpec(), 10, 1)
    with pytest.raises(ValueError):
        allpass_weights(0.0)


def test_arch_zero_noise_fixed_point():
    m = MarModel(phi=[0.7])
    J = 200
    T = 50
    d = simulate_ar_arch(m, ArchSpec(), T, 0, innovations=np.zeros(T + 2 * J))
    assert np.allclose(d["sigma"], 0.2)
    assert np.allclose(d["y"], 0.0)


def test_arch_absolute_innovations_dependent():
    d = simulate_ar_arch(MarModel(phi=[0.7], innovation=InnovationSpec("laplace", standardized=True)), ArchSpec(), 10**5, 3)
    assert _acf(np.abs(d["v"]), 1) > 0.05
    assert np.allclose(d["sigma"][1:], 0.2 + 0.8 * np.abs(d["v"][:-1]))


def test_arch_noncausal_autocorrelation():
    spec = InnovationSpec("gaussian", standardized=True)
    d = simulate_ar_arch(MarModel(psi=[0.7], innovation=spec), ArchSpec(), 10**5, 4)
    y = d["y"]
    # heavy ARCH tails slow the convergence of the sample autocorrelation
    assert _acf(y, 1) == pytest.approx(0.7, abs=0.05)
    # Y_t = 0.7 Y_{t+1} - 0.7 v_{t+1}
    assert np.allclose(y[:-1], 0.7 * y[1:] - 0.7 * d["v"][1:], atol=1e-9)


def test_arch_unsupported_orders():
    with pytest.raises(ValueError):
        simulate_ar_arch(MarModel(phi=[0.3, 0.2]), ArchSpec(), 10, 1)
    with pytest.raises(ValueError):
        simulate_ar_arch(MarModel(phi=[0.3]), ArchSpec((0.2, 0.3, 0.1)), 10, 1)
    with pytest.raises(ValueError):
        ArchSpec((0.0, 0.5))

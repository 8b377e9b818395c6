"""Trajectories of mixed causal/non-causal autoregressions.

A MAR(r, s) process solves ``phi(L) psi(L^-1) Y_t = u_t``. The non-causal
factor is inverted by a backward recursion from a zero terminal state, the
causal factor by a forward recursion from a zero initial state, both on a
horizon padded by ``J`` periods on each side. ``J`` is chosen so that the
weight mass lost at the window edges is below ``tol``.

Innovations are drawn in three independent streams (the window, the left
padding read outward, the right padding read outward). Changing ``J`` therefore
never changes the innovations that fall inside the window.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from . import distributions as dist
from .distributions import InnovationSpec
from .rng import seed_sequence

__all__ = [
    "MarModel",
    "ArchSpec",
    "NonStationaryError",
    "two_sided_weights",
    "simulate_mar",
    "simulate_allpass",
    "allpass_weights",
    "simulate_ar_arch",
    "padding_length",
]


class NonStationaryError(ValueError):
    """A lag polynomial has a root on or inside the unit circle."""


def _max_inverse_root(coefs: np.ndarray) -> float:
    """Largest modulus among reciprocal roots of ``1 - c1 z - ... - ck z^k``."""
    if coefs.size == 0 or not np.any(coefs):
        return 0.0
    # reciprocal roots are the eigenvalues of the companion matrix
    k = coefs.size
    comp = np.zeros((k, k))
    comp[0] = coefs
    comp[1:, :-1] = np.eye(k - 1)
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


@dataclass(frozen=True)
class MarModel:
    """``phi(L) psi(L^-1) Y_t = u_t`` with ``phi(z) = 1 - phi_1 z - ...``."""

    phi: Sequence[float] = ()
    psi: Sequence[float] = ()
    innovation: InnovationSpec = field(default_factory=InnovationSpec)

    def __post_init__(self):
        phi = tuple(float(c) for c in np.atleast_1d(np.asarray(self.phi, dtype=float)))
        psi = tuple(float(c) for c in np.atleast_1d(np.asarray(self.psi, dtype=float)))
        # trailing zeros carry no information about the order
        while phi and phi[-1] == 0.0:
            phi = phi[:-1]
        while psi and psi[-1] == 0.0:
            psi = psi[:-1]
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)
        for name, c in (("phi", phi), ("psi", psi)):
            if _max_inverse_root(np.asarray(c)) >= 1.0 - 1e-12:
                raise NonStationaryError(f"{name} polynomial has a root inside or on the unit circle")

    @property
    def r(self) -> int:
        return len(self.phi)

    @property
    def s(self) -> int:
        return len(self.psi)

    @property
    def p(self) -> int:
        return self.r + self.s

    @property
    def max_inverse_root(self) -> float:
        return max(_max_inverse_root(np.asarray(self.phi)), _max_inverse_root(np.asarray(self.psi)))


@dataclass(frozen=True)
class ArchSpec:
    """Linear ARCH scale ``sigma_t = g0 + g1 |v_{t-1}| + ... + gq |v_{t-q}|``."""

    gamma: Sequence[float] = (0.2, 0.8)

    def __post_init__(self):
        g = tuple(float(x) for x in self.gamma)
        if len(g) < 1 or g[0] <= 0 or any(x < 0 for x in g[1:]):
            raise ValueError("ARCH coefficients need gamma_0 > 0 and gamma_j >= 0")
        object.__setattr__(self, "gamma", g)

    @property
    def q(self) -> int:
        return len(self.gamma) - 1


def padding_length(rho: float, tol: float = 1e-12) -> int:
    """Smallest J with ``rho**J < tol * (1 - rho)``."""
    if rho <= 0.0:
        return 0
    return int(np.ceil(np.log(tol * (1.0 - rho)) / np.log(rho)))


def _impulse(coefs: Sequence[float], n: int) -> np.ndarray:
    x = np.zeros(n)
    x[0] = 1.0
    return lfilter([1.0], np.r_[1.0, -np.asarray(coefs, dtype=float)], x)


def two_sided_weights(model: MarModel, tol: float = 1e-12) -> dict[int, float]:
    """Weights of ``Y_t = sum_j rho_j u_{t-j}``, truncated once the tails are below ``tol``."""
    ja = padding_length(_max_inverse_root(np.asarray(model.phi)), tol) + 1
    jb = padding_length(_max_inverse_root(np.asarray(model.psi)), tol) + 1
    a = _impulse(model.phi, ja + model.r + 1)  # causal: lags 0, 1, ...
    b = _impulse(model.psi, jb + model.s + 1)  # non-causal: leads 0, 1, ...
    rho = np.convolve(b[::-1], a)  # index i <-> lag i - (len(b) - 1)
    lags = np.arange(rho.size) - (b.size - 1)
    keep = np.abs(rho) > tol * 1e-3
    lo, hi = np.argmax(keep), rho.size - np.argmax(keep[::-1])
    return {int(k): float(w) for k, w in zip(lags[lo:hi], rho[lo:hi])}


def _padded_innovations(innovation: InnovationSpec, T: int, J: int, seed: int) -> np.ndarray:
    core_ss, left_ss, right_ss = seed_sequence(seed).spawn(3)
    gen = lambda ss: np.random.Generator(np.random.Philox(ss))  # noqa: E731
    core = dist.sample(innovation, T, gen(core_ss))
    if J == 0:
        return core
    left = dist.sample(innovation, J, gen(left_ss))[::-1]
    right = dist.sample(innovation, J, gen(right_ss))
    return np.concatenate([left, core, right])


def _filter_mar(phi, psi, u: np.ndarray) -> np.ndarray:
    x = u
    if len(psi):
        x = lfilter([1.0], np.r_[1.0, -np.asarray(psi)], x[::-1])[::-1]
    if len(phi):
        x = lfilter([1.0], np.r_[1.0, -np.asarray(phi)], x)
    return x


def simulate_mar(model: MarModel, T: int, seed: int, tol: float = 1e-12, pad: int | None = None) -> np.ndarray:
    """Length-``T`` window of a stationary MAR(r, s) trajectory."""
    if T < 1:
        raise ValueError("T must be at least 1")
    J = padding_length(model.max_inverse_root, tol) if pad is None else int(pad)
    J = J + model.p if J else 0
    u = _padded_innovations(model.innovation, T, J, seed)
    y = _filter_mar(model.phi, model.psi, u)
    return y[J : J + T].copy()


def allpass_weights(psi: float, tol: float = 1e-14) -> dict[int, float]:
    """Weights of ``(1 - psi L) / (1 - psi L^-1) u_t = sum_j rho_j u_{t+j}``."""
    if not (abs(psi) < 1.0 and psi != 0.0):
        raise ValueError("psi must satisfy 0 < |psi| < 1")
    J = padding_length(abs(psi), tol) + 2
    j = np.arange(J + 1)
    w = {-1: -psi}
    w.update({int(k): float(v) for k, v in zip(j, psi**j - psi ** (j + 2))})
    return w


def simulate_allpass(psi: float, innovation: InnovationSpec, T: int, seed: int, tol: float = 1e-12) -> np.ndarray:
    """All-pass filtered innovations ``(1 - psi L) / (1 - psi L^-1) u_t``."""
    if not (abs(psi) < 1.0 and psi != 0.0):
        raise ValueError("psi must satisfy 0 < |psi| < 1")
    if T < 1:
        raise ValueError("T must be at least 1")
    J = padding_length(abs(psi), tol) + 2
    u = _padded_innovations(innovation, T, J, seed)
    w = lfilter([1.0], [1.0, -psi], u[::-1])[::-1]  # sum_k psi^k u_{t+k}
    out = w.copy()
    out[1:] -= psi * w[:-1]
    return out[J : J + T].copy()


def simulate_ar_arch(
    model: MarModel,
    arch: ArchSpec,
    T: int,
    seed: int,
    tol: float = 1e-12,
    innovations: np.ndarray | None = None,
) -> dict[str, np.ndarray]:
    """AR(1)-ARCH(1) trajectory, causal or purely non-causal.

    Returns the observed series ``y``, the scaled innovations ``v`` and the
    scale ``sigma``. The causal case runs ``Y_t = phi Y_{t-1} + v_t``; the
    non-causal case runs ``Y_t = psi Y_{t+1} - psi v_{t+1}`` backward, so that
    ``Y_t = Y_{t-1} / psi + v_t``. ``innovations`` replaces the random draw
    of ``u`` (length ``T + 2 J``) and is meant for deterministic checks.
    """
    if model.p != 1:
        raise ValueError("AR-ARCH simulation supports MAR(1,0) and MAR(0,1) only")
    if arch.q != 1:
        raise ValueError("AR-ARCH simulation supports ARCH order 1 only")
    coef = model.phi[0] if model.r else model.psi[0]
    J = max(padding_length(abs(coef), tol), 200)
    if innovations is None:
        u = _padded_innovations(model.innovation, T, J, seed)
    else:
        u = np.asarray(innovations, dtype=float)
        if u.size != T + 2 * J:
            raise ValueError(f"innovations must have length T + 2J = {T + 2 * J}")
    g0, g1 = arch.gamma
    v, sigma = _arch_recursion(u, g0, g1)
    if model.r:
        y = lfilter([1.0], [1.0, -coef], v)
    else:
        # Y_t = psi Y_{t+1} - psi v_{t+1}
        shifted = np.r_[v[1:], 0.0]
        y = lfilter([-coef], [1.0, -coef], shifted[::-1])[::-1]
    sl = slice(J, J + T)
    return {"y": y[sl].copy(), "v": v[sl].copy(), "sigma": sigma[sl].copy()}


def _arch_recursion(u: np.ndarray, g0: float, g1: float):
    v = np.empty_like(u)
    sigma = np.empty_like(u)
    prev = 0.0
    for t in range(u.size):
        s = g0 + g1 * abs(prev)
        sigma[t] = s
        prev = s * u[t]
        v[t] = prev
    return v, sigma

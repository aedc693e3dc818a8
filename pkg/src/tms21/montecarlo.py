"""Seeded Monte-Carlo estimates of six-dimensional momentum integrals.

Both momenta are drawn from the three-dimensional Student-t law with one degree
of freedom, density ``(1 + |p|^2)^-2 / pi^2``, whose tails dominate ``D^-2``
and keep every estimator below with finite variance.
"""
from __future__ import annotations

import math
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.special import sph_harm_y

CHUNK = 1_000_000


class Estimate(NamedTuple):
    mean: float
    stderr: float


def _draw(rng: np.random.Generator, n: int):
    z = rng.standard_normal((n, 3))
    g = np.abs(rng.standard_normal(n))
    p = z / g[:, None]
    r2 = np.einsum("ij,ij->i", p, p)
    return p, math.pi**2 * (1.0 + r2) ** 2


def sector_field(profile: Callable, ell: int, n: int) -> Callable:
    """``p -> profile(|p|) Y_{ell n}(p/|p|)`` on arrays of shape ``(N, 3)``."""
    def field(p):
        r = np.sqrt(np.einsum("ij,ij->i", p, p))
        theta = np.arccos(np.clip(p[:, 2] / r, -1.0, 1.0))
        phi = np.arctan2(p[:, 1], p[:, 0])
        return profile(r) * sph_harm_y(ell, n, theta, phi)
    return field


def integrate6(integrand: Callable, samples: int, seed: int) -> Estimate:
    """``int int integrand(p1, p2) dp1 dp2`` (integrand vectorized over rows)."""
    rng = np.random.default_rng(seed)
    total, total_sq, done = 0.0, 0.0, 0
    while done < samples:
        n = min(CHUNK, samples - done)
        p1, w1 = _draw(rng, n)
        p2, w2 = _draw(rng, n)
        v = np.real(integrand(p1, p2)) * w1 * w2
        total += float(v.sum())
        total_sq += float(np.dot(v, v))
        done += n
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return Estimate(mean, math.sqrt(var / samples))


def denominator(p1, p2, mu: float, lam: float):
    return (np.einsum("ij,ij->i", p1, p1) + np.einsum("ij,ij->i", p2, p2)
            + mu * np.einsum("ij,ij->i", p1, p2) + lam)


def u_norm_sq_mc(xi: Callable, mu: float, lam: float, samples: int = 10**7, seed: int = 0) -> Estimate:
    """``||u_xi||^2`` for a field ``xi(p)``."""
    def f(p1, p2):
        d = denominator(p1, p2, mu, lam)
        return np.abs(xi(p1) - xi(p2)) ** 2 / d**2
    return integrate6(f, samples, seed)


def form_mc(phi: Callable, psi: Callable, xi: Optional[Callable], mu: float, lam: float,
            samples: int = 10**7, seed: int = 0) -> Estimate:
    """``int int [lam |F|^2 - lam |F + u_xi|^2 + (p1^2 + p2^2 + mu p1.p2) |F|^2]``
    with ``F(p1, p2) = phi(p1) psi(p2) - phi(p2) psi(p1)``."""
    def f(p1, p2):
        d = denominator(p1, p2, mu, lam)
        big_f = phi(p1) * psi(p2) - phi(p2) * psi(p1)
        u = 0.0 if xi is None else (xi(p1) - xi(p2)) / d
        kin = d - lam
        return lam * np.abs(big_f) ** 2 - lam * np.abs(big_f + u) ** 2 + kin * np.abs(big_f) ** 2
    return integrate6(f, samples, seed)

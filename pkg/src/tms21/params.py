"""Model parameters and the mass-threshold equations.

The three thresholds are roots of two transcendental equations: the
stability function ``Lambda(m) = 1`` and the exponent equation
``C(s, m) = 0`` at ``s = 0, 1/2, 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import DomainError, NumericError

LAMBDA_TOL = 1e-10
C_TOL = 1e-8
BRACKET = (1e-3, 1.0)


@dataclass(frozen=True)
class ModelParams:
    m: float
    mu: float
    nu: float
    lam: float
    alpha: float = 0.0


def derive_params(m: float, lam: float = 1.0, alpha: float = 0.0) -> ModelParams:
    """Couplings ``mu = 2/(m+1)`` and ``nu = m(m+2)/(m+1)^2`` for mass ratio ``m``."""
    if not m > 0:
        raise DomainError(f"mass ratio must be positive, got {m}")
    if not lam > 0:
        raise DomainError(f"spectral shift must be positive, got {lam}")
    mu = 2.0 / (m + 1.0)
    # m(m+2)/(m+1)^2 avoids the cancellation in 1 - mu^2/4 at large m
    nu = m * (m + 2.0) / (m + 1.0) ** 2
    return ModelParams(m=float(m), mu=mu, nu=nu, lam=float(lam), alpha=float(alpha))


def efimov_lambda(m: float) -> float:
    """Stability function; equals 1 exactly at the Efimov threshold."""
    if not m > 0:
        raise DomainError(f"mass ratio must be positive, got {m}")
    mp1 = m + 1.0
    return (2.0 / math.pi) * mp1**2 * (1.0 / math.sqrt(m * (m + 2.0)) - math.asin(1.0 / mp1))


# ---------------------------------------------------------------------------
# the s-integral equation


def g1(r, mu):
    """Closed form of ``int_{-1}^{1} y / (r^2 + 1 + mu r y) dy``."""
    r = np.asarray(r, dtype=float)
    a = r * r + 1.0
    b = mu * r
    x = b / a
    out = np.empty_like(r)
    # the closed form loses ~eps/x^2 to cancellation, so small x takes the series
    small = x < 0.05
    if np.any(small):
        xs = x[small]
        # -(2/A) sum_j x^(2j+1)/(2j+3), six terms are exact to double precision for x < 0.05
        acc = np.zeros_like(xs)
        for j in range(5, -1, -1):
            acc = acc * xs * xs + 1.0 / (2 * j + 3)
        out[small] = -(2.0 / a[small]) * xs * acc
    big = ~small
    if np.any(big):
        ab, bb = a[big], b[big]
        out[big] = 2.0 / bb - 2.0 * ab / bb**2 * np.arctanh(bb / ab)
    return out


_GRADED_DEPTH = 40
_GRADED_EDGES = np.concatenate(([0.0], np.geomspace(2.0**-_GRADED_DEPTH, 1.0, _GRADED_DEPTH + 1)))


def graded_rule(n_nodes: int):
    """Gauss nodes/weights on (0, 1] with panels [2^-(k+1), 2^-k] and a last panel at 0."""
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    lo, hi = _GRADED_EDGES[:-1, None], _GRADED_EDGES[1:, None]
    half = 0.5 * (hi - lo)
    return (half * x + 0.5 * (hi + lo)).ravel(), (half * w).ravel()


def graded_integral(f, rtol=1e-9, max_doublings=8):
    """Integrate ``f`` over ``(0, 1]`` with panels graded toward 0, doubling to ``rtol``.

    Used for integrands that vanish like a power at 0, where the geometric
    grading keeps the Gauss rule spectral on every panel.
    """
    prev = None
    n = 6
    for _ in range(max_doublings):
        x, w = graded_rule(n)
        total = float(np.dot(f(x), w))
        if prev is not None and abs(total - prev) <= rtol * abs(total) + 1e-15:
            return total
        prev = total
        n *= 2
    raise NumericError(f"graded quadrature did not reach rtol={rtol}", estimate=prev)


def _tail_integrand(s, mu):
    # r -> 1/t on (1, inf) together with G1(1/t) = t^2 G1(t) gives t^(-s) G1(t)
    return lambda t: t ** (-s) * g1(t, mu)


def _scaled(f, c):
    # int_0^c f = c int_0^1 f(c u) du
    return lambda u: c * f(c * u)


def r_integral(s: float, mu: float, lower: float = 0.0, rtol: float = 1e-9) -> float:
    """``int_lower^inf r^s G1(r; mu) dr`` split at 1 and folded onto (0, 1]."""
    if lower < 0:
        raise DomainError("lower limit must be non-negative")
    head = lambda r: r**s * g1(r, mu)
    tail = _tail_integrand(s, mu)
    if lower >= 1.0:
        return graded_integral(_scaled(tail, 1.0 / lower), rtol)
    total = graded_integral(head, rtol) + graded_integral(tail, rtol)
    if lower > 0:
        total -= graded_integral(_scaled(head, lower), rtol)
    return total


def cancellation_C(s: float, m: float, rtol: float = 1e-9) -> float:
    """``C(s, m) = pi sqrt(nu) + int_0^inf r^s G1(r; mu) dr``."""
    if not 0.0 <= s <= 1.0:
        raise DomainError(f"s must lie in [0, 1], got {s}")
    p = derive_params(m)
    return math.pi * math.sqrt(p.nu) + r_integral(s, p.mu, rtol=rtol)


# ---------------------------------------------------------------------------
# root finding


@dataclass(frozen=True)
class Root:
    value: float
    residual: float
    iterations: int


def _bracketed_root(f, lo, hi, ftol, name) -> Root:
    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise DomainError(f"{name}: root not bracketed on [{lo}, {hi}] (f={flo:.3g}, {fhi:.3g})")
    x, info = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                              maxiter=200, full_output=True)
    res = abs(f(x))
    if not info.converged or res > ftol:
        raise NumericError(f"{name}: residual {res:.3g} above tolerance {ftol:.1g}", estimate=x)
    return Root(float(x), float(res), int(info.iterations))


# the C(s, m) quadrature is reliable to about 1e-11 relative near the bracket ends
C_QUAD_FLOOR = 1e-11


def _quad_rtol(tol: float) -> float:
    return min(1e-9, max(tol, C_QUAD_FLOOR))


def solve_m_star(tol: float = LAMBDA_TOL) -> Root:
    return _bracketed_root(lambda m: efimov_lambda(m) - 1.0, *BRACKET, tol, "Lambda(m)=1")


def solve_m_of_s_root(s: float, tol: float = C_TOL) -> Root:
    if not 0.0 <= s <= 1.0:
        raise DomainError(f"s must lie in [0, 1], got {s}")
    rtol = _quad_rtol(tol)
    return _bracketed_root(lambda m: cancellation_C(s, m, rtol), *BRACKET, tol, f"C({s}, m)=0")


def solve_m_of_s(s: float, tol: float = C_TOL) -> float:
    """Mass ratio at which the zero-mode exponent equals ``s``."""
    return solve_m_of_s_root(s, tol).value


def solve_s_of_m(m: float, tol: float = C_TOL) -> float:
    """Inverse of :func:`solve_m_of_s`; defined strictly between the outer thresholds."""
    if not m > 0:
        raise DomainError(f"mass ratio must be positive, got {m}")
    c0, c1 = cancellation_C(0.0, m), cancellation_C(1.0, m)
    if c0 <= 0 or c1 >= 0:
        raise DomainError(
            f"m={m} outside the exponent range: C(0,m)={c0:.3g} and C(1,m)={c1:.3g} "
            "must bracket a root on s in [0, 1]")
    rtol = _quad_rtol(tol)
    return _bracketed_root(lambda s: cancellation_C(s, m, rtol), 0.0, 1.0, tol, f"C(s, {m})=0").value


@dataclass(frozen=True)
class ThresholdReport:
    m_star: float
    m_star_star: float
    m_minlos: float
    m_of_zero: float
    residuals: dict = field(default_factory=dict)
    iterations: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "m_star": self.m_star,
            "m_star_star": self.m_star_star,
            "m_minlos": self.m_minlos,
            "m_of_zero": self.m_of_zero,
            "residuals": dict(self.residuals),
            "iterations": dict(self.iterations),
        }


def thresholds(lambda_tol: float = LAMBDA_TOL, c_tol: float = C_TOL) -> ThresholdReport:
    star = solve_m_star(lambda_tol)
    zero = solve_m_of_s_root(0.0, c_tol)
    half = solve_m_of_s_root(0.5, c_tol)
    one = solve_m_of_s_root(1.0, c_tol)
    if abs(zero.value - star.value) > 1e-4 * star.value:
        raise NumericError(
            f"m(0)={zero.value} disagrees with the Lambda root {star.value}", estimate=zero.value)
    roots = {"m_star": star, "m_of_zero": zero, "m_minlos": half, "m_star_star": one}
    return ThresholdReport(
        m_star=star.value,
        m_star_star=one.value,
        m_minlos=half.value,
        m_of_zero=zero.value,
        residuals={k: r.residual for k, r in roots.items()},
        iterations={k: r.iterations for k, r in roots.items()},
    )

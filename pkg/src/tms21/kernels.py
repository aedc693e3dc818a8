"""Radial kernels of the sector operators T and W after the Legendre reduction.

For ``A = r^2 + r'^2 + lambda`` and ``B = mu r r'``:

    int_{-1}^{1} P_l(y) / (A + B y)   dy = (-1)^l     (2/B)   Q_l(A/B)
    int_{-1}^{1} P_l(y) / (A + B y)^2 dy = (-1)^(l+1) (2/B^2) Q_l'(A/B)

the second being minus the A-derivative of the first.  For ``B/A < 1e-3``
both are summed from the moment series in ``B/A`` instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .numerics import Charge, build_grid, legendre_moment, legendre_Q, legendre_Q_deriv
from .params import derive_params

SERIES_BELOW = 1e-3
_SERIES_TERMS = 12
TWO_PI = 2.0 * math.pi
TWO_PI2 = 2.0 * math.pi**2


@dataclass(frozen=True)
class KernelSpec:
    """Sector data for the kernels: angular momentum, shift and couplings.

    ``lam`` may be 0 here (scale-invariant kernels); operator-level code
    requires ``lam > 0``.
    """

    ell: int
    lam: float
    mu: float
    nu: float
    alpha: float = 0.0

    def __post_init__(self):
        if not (isinstance(self.ell, (int, np.integer)) and 0 <= self.ell <= 8):
            raise DomainError(f"ell must be an integer in [0, 8], got {self.ell}")
        if self.lam < 0:
            raise DomainError(f"lambda must be non-negative, got {self.lam}")
        if not 0 < self.mu < 2:
            raise DomainError(f"mu must lie in (0, 2), got {self.mu}")
        if abs(self.nu - (1.0 - self.mu**2 / 4.0)) > 1e-12:
            raise DomainError("mu and nu do not come from the same mass ratio")

    @classmethod
    def from_mass(cls, m: float, lam: float = 1.0, alpha: float = 0.0, ell: int = 1) -> "KernelSpec":
        if lam == 0:
            p = derive_params(m, 1.0, alpha)
        else:
            p = derive_params(m, lam, alpha)
        return cls(int(ell), float(lam), p.mu, p.nu, float(alpha))

    @property
    def m(self) -> float:
        return 2.0 / self.mu - 1.0

    def replace(self, **kw) -> "KernelSpec":
        fields = dict(ell=self.ell, lam=self.lam, mu=self.mu, nu=self.nu, alpha=self.alpha)
        if "m" in kw:
            m = kw.pop("m")
            p = derive_params(m)
            fields.update(mu=p.mu, nu=p.nu)
        fields.update(kw)
        return KernelSpec(**fields)


def y_integral(ell: int, a, b, power: int = 1):
    """``int_{-1}^{1} P_ell(y) (a + b y)^(-power) dy`` for ``a > |b|``, ``power`` in {1, 2}."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    x = b / a
    out = np.empty(a.shape)
    small = x < SERIES_BELOW
    if np.any(small):
        xs, As = x[small], a[small]
        acc = np.zeros_like(xs)
        for k in range(ell + _SERIES_TERMS, ell - 1, -1):
            coef = legendre_moment(ell, k) * (k + 1 if power == 2 else 1)
            acc = acc * (-xs) + coef
        out[small] = acc * (-xs) ** ell / As**power
    big = ~small
    if np.any(big):
        ab, bb = a[big], b[big]
        z = ab / bb
        sign = -1.0 if ell % 2 else 1.0
        if power == 1:
            out[big] = sign * (2.0 / bb) * legendre_Q(ell, z)
        else:
            out[big] = -sign * (2.0 / bb**2) * legendre_Q_deriv(ell, z)
    return out


def _ab(spec: KernelSpec, r, rp):
    r = np.asarray(r, dtype=float)
    rp = np.asarray(rp, dtype=float)
    if np.any(r <= 0) or np.any(rp <= 0):
        raise DomainError("kernel radii must be positive")
    return r * r + rp * rp + spec.lam, spec.mu * r * rp, rp


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def kernel_T(spec: KernelSpec, r, r_prime):
    """Integral part of ``T^(ell)`` against ``dr'`` (the ``r'^2`` Jacobian included)."""
    a, b, rp = _ab(spec, r, r_prime)
    return _scalar(TWO_PI * rp * rp * y_integral(spec.ell, a, b, 1))


def kernel_W(spec: KernelSpec, r, r_prime):
    """Integral part of ``W^(ell)`` against ``dr'`` (the ``r'^2`` Jacobian included)."""
    a, b, rp = _ab(spec, r, r_prime)
    return _scalar(-2.0 * TWO_PI * rp * rp * y_integral(spec.ell, a, b, 2))


def diag_T(spec: KernelSpec, r):
    """Multiplicative part of ``T + alpha``."""
    r = np.asarray(r, dtype=float)
    return _scalar(TWO_PI2 * np.sqrt(spec.nu * r * r + spec.lam) + spec.alpha)


def diag_W(spec: KernelSpec, r):
    r = np.asarray(r, dtype=float)
    return _scalar(TWO_PI2 / np.sqrt(spec.nu * r * r + spec.lam))


# ---------------------------------------------------------------------------
# truncated-ball integrals


def ball_rule(R: float, p1: float, n_nodes: int = 16, decades: int = 10, per_decade: int = 6):
    """Gauss rule on ``[0, R]`` graded toward 0, with a breakpoint at ``p1``."""
    edges = np.geomspace(R * 10.0**-decades, R, decades * per_decade + 1)
    if 0 < p1 < R:
        edges = np.union1d(edges, [p1])
    edges = np.concatenate(([0.0], edges))
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    return (half * x + 0.5 * (hi + lo)).ravel(), (half * w).ravel()


def ball_integrals(spec: KernelSpec, p1: float, R: float, charge: Charge | None = None,
                   squared: bool = False):
    """Truncated-ball integrals at fixed ``|p1|`` with ``D = p1^2 + q^2 + mu p1.q + lam``.

    Returns ``(free, charged)`` where ``free = int_{|q|<R} D^-k dq`` and
    ``charged = int_{|q|<R} f(|q|) Y(q) D^-k dq / Y(p1)``, ``k = 2 if squared else 1``.
    """
    if not (p1 > 0 and R > 0):
        raise DomainError("p1 and R must be positive")
    power = 2 if squared else 1
    q, w = ball_rule(R, p1)
    a = p1 * p1 + q * q + spec.lam
    b = spec.mu * p1 * q
    jac = TWO_PI * q * q * w
    free = float(np.dot(jac, y_integral(0, a, b, power)))
    charged = 0.0
    if charge is not None:
        if R > charge.grid.r_max * (1 + 1e-12):
            raise DomainError(f"charge grid ends at {charge.grid.r_max}, below R={R}")
        if charge.ell != spec.ell:
            raise DomainError("charge sector does not match the kernel sector")
        vals = charge.at(q)
        charged = np.dot(jac * y_integral(spec.ell, a, b, power), vals)
        charged = charged.item() if np.iscomplexobj(charged) else float(charged)
    return free, charged

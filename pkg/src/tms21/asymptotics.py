"""Singular functions ``u_xi`` and the large-momentum asymptotics of ``g = u_eta/D + u_xi``.

With ``D = p1^2 + p2^2 + mu p1.p2 + lam`` and ``xi(p) = f(|p|) Y_ln(p/|p|)``:

    ||u_xi||^2 = 2 int |xi|^2 int dp2 / D^2  -  2 Re int int conj(xi(p1)) xi(p2) / D^2

The first (diagonal) piece is angle free; the second reduces by the addition
theorem to ``2 pi int P_l(y) (A + B y)^-2 dy`` with ``A = r1^2 + r2^2 + lam``,
``B = mu r1 r2``.  Both are evaluated here by direct quadrature (Gauss-Legendre
in ``y``) so the comparison with the assembled ``W`` is not circular.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import linalg

from .errors import DomainError, NumericError
from .kernels import KernelSpec, ball_integrals, diag_W, kernel_W
from .numerics import Charge, build_grid, legendre_P
from .operators import assemble

FOUR_PI = 4.0 * math.pi
Y_NODES = 96
SMOOTHNESS_EPS = 0.05


@dataclass(frozen=True)
class GSpec:
    """Charges of ``g = u_eta / D + u_xi`` (regular part taken to be zero)."""

    xi: Charge
    eta: Optional[Charge] = None

    def __post_init__(self):
        if self.eta is not None:
            if self.eta.grid != self.xi.grid:
                raise DomainError("xi and eta live on different grids")
            if (self.eta.ell, self.eta.n) != (self.xi.ell, self.xi.n):
                raise DomainError("xi and eta live in different sectors")


# ---------------------------------------------------------------------------
# ||u_xi||^2


def _diag_factor(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    """``int_R3 dq / D(p, q)^2`` at ``|p| = r`` by radial quadrature of ``4 pi q^2 / (A^2 - B^2)``."""
    top = 1e8 * max(1.0, float(r.max()))
    rule = build_grid(6 * 14, 12, top * 1e-14, top, origin_panel=True)
    q, w = rule.nodes, rule.weights
    a = r[:, None] ** 2 + q[None, :] ** 2 + spec.lam
    b = spec.mu * r[:, None] * q[None, :]
    body = (FOUR_PI * q * q * w / ((a - b) * (a + b))).sum(axis=1)
    return body + FOUR_PI / top


def _cross_matrix(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    """``2 pi int P_l(y) / (A + B y)^2 dy`` on the node pairs."""
    y, wy = np.polynomial.legendre.leggauss(Y_NODES)
    pl = legendre_P(spec.ell, y)
    a = r[:, None] ** 2 + r[None, :] ** 2 + spec.lam
    b = spec.mu * r[:, None] * r[None, :]
    out = np.zeros_like(a)
    for yk, wk in zip(y, wy * pl):
        out += wk / (a + b * yk) ** 2
    return 2.0 * math.pi * out


def u_norm_sq(xi: Charge, spec: KernelSpec) -> float:
    """``||u_xi||^2`` over R^6 for a grid-supported charge (the tail beyond ``r_max`` is dropped)."""
    if xi.ell != spec.ell:
        raise DomainError("charge sector does not match the kernel sector")
    g = xi.grid
    r, w = g.nodes, g.weights
    f = xi.values
    jac = w * r * r
    diag = 2.0 * float(np.dot(jac * np.abs(f) ** 2, _diag_factor(spec, r)))
    h = jac * f
    cross = np.real(np.conj(h) @ _cross_matrix(spec, r) @ h)
    val = diag - 2.0 * float(cross)
    if not np.isfinite(val):
        raise NumericError("non-finite u_xi norm")
    return val


def u_inner(xi: Charge, eta: Charge, spec: KernelSpec) -> complex:
    """``<u_xi, u_eta>`` by polarization of :func:`u_norm_sq` (antilinear in ``xi``)."""
    n = lambda c: u_norm_sq(xi + eta.scaled(c), spec)
    val = 0.25 * (n(1.0) - n(-1.0) - 1j * n(1j) + 1j * n(-1j))
    return complex(val)


# ---------------------------------------------------------------------------
# truncated p2 integrals


def _check_smooth(ch: Charge):
    # T xi is finite pointwise only above H^{-1/2}: tail exponent > 1 + eps
    if ch.tail is not None and ch.tail[1] != 0 and ch.tail[0] <= 1.0 + SMOOTHNESS_EPS:
        raise DomainError(f"tail exponent {ch.tail[0]} too slow for a pointwise T xi")


def partial_integral(g: GSpec, spec: KernelSpec, p1: float, R: float) -> float:
    """``int_{|p2|<R} g(p1, p2) dp2 / Y(p1)`` for ``g = u_eta / D + u_xi``."""
    if R > g.xi.grid.r_max * (1 + 1e-12):
        raise DomainError(f"R={R} beyond grid coverage r_max={g.xi.grid.r_max}")
    _check_smooth(g.xi)
    free1, ch1 = ball_integrals(spec, p1, R, g.xi, squared=False)
    val = g.xi.at(np.array([p1]))[0] * free1 - ch1
    if g.eta is not None:
        free2, ch2 = ball_integrals(spec, p1, R, g.eta, squared=True)
        val = val + g.eta.at(np.array([p1]))[0] * free2 - ch2
    return val.item() if isinstance(val, np.generic) else val


def drift_exponent(g: GSpec) -> float:
    """Decay rate ``kappa`` of the ``o(1)`` remainder, ``R^-kappa``.

    The cut ball leaves ``O(1/R)`` from the free integral; a declared tail
    ``r^-e`` in ``xi`` adds ``R^(1 - e - ell)`` from the charged integral.
    """
    kappa = 1.0
    t = g.xi.tail
    if t is not None and t[1] != 0:
        kappa = min(kappa, t[0] - 1.0 + g.xi.ell)
    return kappa


class TMSFit(NamedTuple):
    slope: float
    intercept: float
    residual: float


def extract_tms(g: GSpec, spec: KernelSpec, p1: float, R_list: Sequence[float]) -> TMSFit:
    """Least-squares fit of ``a + b R + c R^-kappa`` to :func:`partial_integral` over ``R_list``."""
    R = np.asarray(R_list, dtype=float)
    if R.size < 4 or np.any(np.diff(R) <= 0) or R[-1] / R[0] < 10.0 * (1 - 1e-12):
        raise DomainError("need at least 4 increasing R values spanning a decade")
    vals = np.array([partial_integral(g, spec, p1, x) for x in R])
    if np.iscomplexobj(vals):
        raise DomainError("complex charges are not supported by the fit")
    kappa = drift_exponent(g)
    design = np.column_stack([np.ones_like(R), R, R ** (-kappa)])
    coef, *_ = np.linalg.lstsq(design, vals, rcond=None)
    if not np.all(np.isfinite(coef)):
        raise NumericError("degenerate TMS fit")
    resid = float(np.max(np.abs(design @ coef - vals)))
    return TMSFit(float(coef[1]), float(coef[0]), resid)


def tms_pair(xi: Charge, spec: KernelSpec) -> Charge:
    """``eta`` with ``W eta / 2 = (T + alpha) xi`` on the grid of ``xi``.

    Off the grid ``eta`` is continued by the Nystrom identity of ``W``.
    """
    if xi.tail is not None and xi.tail[1] != 0 and xi.tail[0] <= 2.0:
        raise DomainError("tms_pair needs a tail exponent above 2")
    grid = xi.grid
    t_op = assemble(spec, grid, "TplusAlpha")
    w_op = assemble(spec, grid, "W")
    rhs = 2.0 * grid.density("L2") * t_op.apply(xi.values)
    try:
        eta = linalg.cho_solve(linalg.cho_factor(w_op.pairing_matrix()), rhs)
    except linalg.LinAlgError as exc:
        raise NumericError(f"W solve failed: {exc}") from exc

    def profile(p, eta=eta):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        src = 2.0 * t_op.at(p, xi)
        kern = kernel_W(spec, p[:, None], grid.nodes[None, :]) * grid.weights[None, :]
        return (src - kern @ eta) / diag_W(spec, p)

    return Charge(xi.ell, xi.n, eta, grid, None, profile)

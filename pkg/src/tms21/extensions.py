"""Quadratic forms of the extension family in the ``ell = 1`` sector.

Charges with several angular components are passed as a mapping ``{n: Charge}``
(or a sequence of charges, keyed by their ``n``); a single :class:`Charge` is
one component.  All pairings are the discrete radial L2 pairing of the grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from scipy import linalg
from scipy.special import sph_harm_y

from .asymptotics import u_norm_sq
from .errors import DomainError, NumericError
from .kernels import KernelSpec, y_integral
from .numerics import Charge, RadialGrid, tail_is_integrable
from .operators import assemble, form_phi, w_inner
from .zeromode import smallest_singular

NS = (-1, 0, 1)
WEIGHT_NORM = 2.0

ChargeSet = Union[Charge, Mapping[int, Charge], Sequence[Charge]]


def _by_n(x: Optional[ChargeSet]) -> dict:
    if x is None:
        return {}
    if isinstance(x, Charge):
        return {x.n: x}
    if isinstance(x, Mapping):
        return dict(x)
    out = {}
    for c in x:
        if c.n in out:
            raise DomainError(f"two components with n={c.n}")
        out[c.n] = c
    return out


def _is_inf(b) -> bool:
    return math.isinf(b) and b > 0


@dataclass(frozen=True)
class BetaParams:
    """``beta_n`` in ``(-inf, inf]`` (``inf`` marks a Friedrichs direction) and ``q_n`` in C."""

    beta: tuple = (math.inf, math.inf, math.inf)
    q: tuple = (0j, 0j, 0j)

    def __post_init__(self):
        beta = tuple(float(b) for b in self.beta)
        q = tuple(complex(z) for z in self.q)
        if len(beta) != 3 or len(q) != 3:
            raise DomainError("beta and q need three entries (n = -1, 0, 1)")
        if any(math.isnan(b) or (math.isinf(b) and b < 0) for b in beta):
            raise DomainError("beta entries must lie in (-inf, inf]")
        for b, z in zip(beta, q):
            if _is_inf(b) and z != 0:
                raise DomainError("q must vanish in a Friedrichs (beta = inf) direction")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "q", q)

    def beta_q(self) -> dict:
        """``{n: beta_n q_n}`` with ``inf * 0`` taken as 0."""
        return {n: (0j if _is_inf(b) else b * z) for n, b, z in zip(NS, self.beta, self.q)}

    def beta_q2(self) -> dict:
        return {n: (0.0 if _is_inf(b) else b * abs(z) ** 2) for n, b, z in zip(NS, self.beta, self.q)}


@dataclass(frozen=True)
class SingularBasis:
    """One radial profile shared by ``n = -1, 0, 1``, scaled to ``<Xi, W Xi> = normalization``."""

    xi_vectors: tuple
    normalization: float

    def __post_init__(self):
        if len(self.xi_vectors) != 3 or tuple(c.n for c in self.xi_vectors) != NS:
            raise DomainError("basis needs one charge per n = -1, 0, 1, in that order")

    def __getitem__(self, n: int) -> Charge:
        return self.xi_vectors[n + 1]

    @property
    def grid(self) -> RadialGrid:
        return self.xi_vectors[0].grid


def singular_basis(spec: KernelSpec, grid: RadialGrid, tail="auto",
                   normalization: float = WEIGHT_NORM) -> SingularBasis:
    """Near-null vector of ``T + alpha`` used as the singular charge, W-normalized on the grid."""
    if spec.ell != 1:
        raise DomainError("the singular basis lives in the ell = 1 sector")
    vec = smallest_singular(spec, grid, tail).vector
    w_op = assemble(spec, vec.grid, "W")
    c = math.sqrt(normalization / w_inner(w_op, vec, vec))
    vals = c * vec.values
    tail_decl = None if vec.tail is None else (vec.tail[0], c * vec.tail[1])
    charges = tuple(Charge(1, n, vals, vec.grid, tail_decl) for n in NS)
    return SingularBasis(charges, float(normalization))


# ---------------------------------------------------------------------------
# forms


def friedrichs_form(xi: Charge, spec: KernelSpec) -> float:
    """``2 <xi, (T + alpha) xi>``."""
    if not tail_is_integrable(xi.tail, "Hplus12"):
        raise DomainError("friedrichs_form needs an H^{1/2} charge (tail exponent above 2)")
    return 2.0 * form_phi(assemble(spec, xi.grid, "TplusAlpha"), xi)


def beta_form(xi_reg: Optional[ChargeSet], bp: BetaParams, basis: Optional[SingularBasis],
              spec: KernelSpec) -> float:
    """``sum_n 2 <xi_n, (T + alpha) xi_n> + sum_n beta_n |q_n|^2 ||Xi||_W^2``."""
    if spec.ell != 1:
        raise DomainError("beta_form lives in the ell = 1 sector")
    regular = sum(friedrichs_form(c, spec) for c in _by_n(xi_reg).values())
    if all(z == 0 for z in bp.q):
        return float(regular)
    if basis is None:
        raise DomainError("nonzero q needs a singular basis")
    return float(regular + basis.normalization * sum(bp.beta_q2().values()))


def _t_matrix(spec, grid):
    return assemble(spec, grid, "TplusAlpha").matrix


def solve_regular_from_singular(bp: BetaParams, basis: SingularBasis, spec: KernelSpec) -> dict:
    """``{n: xi2_n}`` with ``(T + alpha) xi2_n = W (beta_n q_n Xi_n) / 2``."""
    grid = basis.grid
    m_t = _t_matrix(spec, grid)
    m_w = assemble(spec, grid, "W").matrix
    try:
        lu = linalg.lu_factor(m_t, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"T + alpha factorization failed: {exc}") from exc
    if np.min(np.abs(np.diag(lu[0]))) == 0:
        raise NumericError("T + alpha is singular on this grid")
    out = {}
    for n, bq in bp.beta_q().items():
        rhs = 0.5 * (m_w @ (bq * basis[n].values))
        sol = linalg.lu_solve(lu, rhs)
        if not np.isrealobj(sol) and np.all(np.imag(sol) == 0):
            sol = np.real(sol)
        out[n] = Charge(1, n, sol, grid)
    return out


def core_component(xi: Charge, basis: SingularBasis, spec: KernelSpec) -> Charge:
    """Part of ``xi`` with ``<Xi_n, (T + alpha) xi> = 0``: the L2-orthogonal projection off ``(T + alpha) Xi_n``."""
    grid = basis.grid
    v = _t_matrix(spec, grid) @ basis[xi.n].values
    d = grid.density("L2")
    c = np.dot(d * v, xi.values) / np.dot(d * v, v)
    return xi.with_values(xi.values - c * v)


@dataclass(frozen=True)
class BC2Sides:
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def residuals(self) -> np.ndarray:
        return np.abs(self.lhs - self.rhs)


def bc2_sides(xi_reg: ChargeSet, bp: BetaParams, basis: SingularBasis, spec: KernelSpec,
              reading: str = "linear") -> BC2Sides:
    """Both sides of the three-body condition for ``n = -1, 0, 1``.

    ``reading="linear"``:  ``2 <Xi_n, (T+alpha) xi_reg> = beta_n q_n ||Xi_n||_W^2``.
    ``reading="printed"``: ``<q_n Xi_n, (T+alpha) xi_reg> = beta_n |q_n|^2``, i.e. the
    pairing taken against the singular component; it equals ``conj(q_n)/2`` times
    the linear one once ``||Xi||_W^2 = 2``.
    """
    if reading not in ("linear", "printed"):
        raise DomainError(f"unknown reading {reading!r}")
    comps = _by_n(xi_reg)
    grid = basis.grid
    m_t = _t_matrix(spec, grid)
    d = grid.density("L2")
    lhs, rhs = np.zeros(3, complex), np.zeros(3, complex)
    bq, bq2 = bp.beta_q(), bp.beta_q2()
    for i, n in enumerate(NS):
        c = comps.get(n)
        pair = 0.0 if c is None else np.dot(d * np.conj(basis[n].values), m_t @ c.values)
        if reading == "linear":
            lhs[i], rhs[i] = 2.0 * pair, bq[n] * basis.normalization
        else:
            lhs[i], rhs[i] = np.conj(bp.q[i]) * pair, bq2[n]
    return BC2Sides(lhs, rhs)


def check_bc2(xi_reg: ChargeSet, bp: BetaParams, basis: SingularBasis, spec: KernelSpec,
              reading: str = "linear") -> np.ndarray:
    """``|LHS - RHS|`` per ``n`` (see :func:`bc2_sides`)."""
    return bc2_sides(xi_reg, bp, basis, spec, reading).residuals


# ---------------------------------------------------------------------------
# the three-body form on antisymmetrized separable states


_ANG_X, _ANG_W = np.polynomial.legendre.leggauss(24)
_PHI = np.linspace(0.0, 2.0 * math.pi, 48, endpoint=False)


def _sphere_rule():
    theta = np.arccos(_ANG_X)
    th, ph = np.meshgrid(theta, _PHI, indexing="ij")
    w = np.outer(_ANG_W, np.full(_PHI.size, 2.0 * math.pi / _PHI.size))
    return th.ravel(), ph.ravel(), w.ravel()


def _ylm(ell, n, th, ph):
    return sph_harm_y(ell, n, th, ph)


def angular_triple(a: tuple, b: tuple, c: tuple) -> complex:
    """``int conj(Y_a) conj(Y_b) Y_c dOmega`` for sectors ``(ell, n)``."""
    th, ph, w = _sphere_rule()
    v = np.conj(_ylm(*a, th, ph)) * np.conj(_ylm(*b, th, ph)) * _ylm(*c, th, ph)
    return complex(np.dot(w, v))


def angular_dipole(a: tuple, b: tuple) -> np.ndarray:
    """``int p_hat conj(Y_a) Y_b dOmega`` as a Cartesian 3-vector."""
    th, ph, w = _sphere_rule()
    unit = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
    v = np.conj(_ylm(*a, th, ph)) * _ylm(*b, th, ph)
    return unit @ (w * v)


@dataclass(frozen=True)
class HForm:
    norm_F: float
    norm_u: float
    re_F_u: float
    h_free: float
    charge_term: float

    @property
    def norm_F_plus_u(self) -> float:
        return self.norm_F + 2.0 * self.re_F_u + self.norm_u

    def value(self, lam: float) -> float:
        return lam * self.norm_F - lam * self.norm_F_plus_u + self.h_free + self.charge_term


def _radial(a: Charge, b: Charge, power: int):
    g = a.grid
    return np.dot(g.weights * g.nodes ** (2 + power), np.conj(a.values) * b.values)


def _free_terms(phi: Charge, psi: Charge, mu: float):
    sa, sb = (phi.ell, phi.n), (psi.ell, psi.n)
    same = sa == sb
    nphi, npsi = _radial(phi, phi, 0).real, _radial(psi, psi, 0).real
    overlap = _radial(phi, psi, 0) if same else 0.0
    norm_F = 2.0 * (nphi * npsi - abs(overlap) ** 2)
    k_phi, k_psi = _radial(phi, phi, 2).real, _radial(psi, psi, 2).real
    k_cross = _radial(phi, psi, 2) if same else 0.0
    v = _radial(phi, psi, 1) * angular_dipole(sa, sb)
    h_free = (2.0 * (k_phi * npsi + nphi * k_psi)
              - 4.0 * np.real(k_cross * np.conj(overlap))
              - 2.0 * mu * float(np.sum(np.abs(v) ** 2)))
    return float(norm_F), float(h_free)


def _pair_integral(spec: KernelSpec, a: Charge, b: Charge, xi: Charge) -> complex:
    """``int int conj(a(p1)) xi(p1) conj(b(p2)) / D dp1 dp2``."""
    ang = angular_triple((a.ell, a.n), (b.ell, b.n), (xi.ell, xi.n))
    if abs(ang) < 1e-14:
        return 0j
    g = a.grid
    r, w = g.nodes, g.weights
    big_a = r[:, None] ** 2 + r[None, :] ** 2 + spec.lam
    big_b = spec.mu * r[:, None] * r[None, :]
    lam_l = 2.0 * math.pi * y_integral(b.ell, big_a, big_b, 1)
    left = w * r * r * np.conj(a.values) * xi.values
    right = w * r * r * np.conj(b.values)
    return ang * complex(left @ lam_l @ right)


def h_form_separable(phi: Charge, psi: Charge, xi_reg: Optional[ChargeSet], bp: BetaParams,
                     basis: Optional[SingularBasis], spec: KernelSpec) -> HForm:
    """Terms of the three-body form at ``F = phi x psi - psi x phi`` and charge ``xi_reg + sum q_n Xi_n``.

    ``value(lam)`` gives ``lam||F||^2 - lam||F + u_xi||^2 + H_free[F] + 2(<xi_reg,(T+alpha)xi_reg> + sum beta|q|^2)``.
    """
    if spec.ell != 1:
        raise DomainError("the charge lives in the ell = 1 sector")
    if phi.grid != psi.grid:
        raise DomainError("phi and psi live on different grids")
    reg = _by_n(xi_reg)
    full = dict(reg)
    if any(z != 0 for z in bp.q):
        if basis is None:
            raise DomainError("nonzero q needs a singular basis")
        for n, z in zip(NS, bp.q):
            if z != 0:
                s = basis[n].scaled(z)
                s = s.with_values(s.values)  # drop the tail; grid-supported pairing
                full[n] = s if n not in full else full[n] + s
    for c in full.values():
        if c.grid != phi.grid:
            raise DomainError("charge and F live on different grids")
    norm_F, h_free = _free_terms(phi, psi, spec.mu)
    norm_u = sum(u_norm_sq(c, spec) for c in full.values())
    f_u = 0j
    for c in full.values():
        f_u += 2.0 * (_pair_integral(spec, phi, psi, c) - _pair_integral(spec, psi, phi, c))
    charge = beta_form(reg or None, bp, basis, spec)
    return HForm(norm_F, float(norm_u), float(f_u.real), h_free, charge)

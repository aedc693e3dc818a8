"""Nystrom discretization of the sector operators ``T + alpha`` and ``W``.

``(M f)_i = d(r_i) f_i + sum_j w_j K(r_i, r_j) f_j`` with the multiplicative
part ``d`` and kernel ``K`` from :mod:`kernels`.  Since ``K(r, r') = r'^2 k(r, r')``
with ``k`` symmetric, ``diag(w r^2) M`` is a symmetric matrix.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg

from .errors import DomainError, NumericError
from .kernels import KernelSpec, diag_T, diag_W, kernel_T, kernel_W
from .numerics import Charge, RadialGrid
from .params import efimov_lambda

KINDS = ("TplusAlpha", "W")
TWO_PI2 = 2.0 * math.pi**2


class NonPositiveBottomWarning(RuntimeWarning):
    """The discrete bottom came out non-positive (lambda too small for this alpha)."""


@dataclass(frozen=True, eq=False)
class SectorOperator:
    matrix: np.ndarray
    grid: RadialGrid
    kind: str
    spec: KernelSpec

    def apply(self, values) -> np.ndarray:
        return self.matrix @ values

    def pairing_matrix(self) -> np.ndarray:
        """``diag(w r^2) M``: the bilinear form in the L2 radial pairing, symmetrized."""
        d = self.grid.density("L2")
        a = d[:, None] * self.matrix
        return 0.5 * (a + a.T)

    def conjugated(self, measure: str | None = None) -> np.ndarray:
        """``D^{1/2} M D^{-1/2}`` with ``D = diag(w_i rho(r_i))``."""
        d = np.sqrt(self.grid.density(measure or "L2"))
        return d[:, None] * self.matrix / d[None, :]

    def at(self, points, charge: Charge) -> np.ndarray:
        """Nystrom interpolant of ``(M f)(p)`` at arbitrary radii ``p``."""
        _check_charge(self, charge)
        points = np.asarray(points, dtype=float)
        interp, d = _nystrom(self.spec, self.kind, self.grid, charge.values, points)
        return d * charge.at(points) + interp


def _check_charge(op: SectorOperator, charge: Charge):
    if charge.grid != op.grid:
        raise DomainError("charge and operator live on different grids")
    if charge.ell != op.spec.ell:
        raise DomainError(f"charge sector ell={charge.ell} but operator ell={op.spec.ell}")


def _nystrom(spec, kind, grid, values, points):
    if kind == "W":
        d, k = diag_W(spec, points), kernel_W
    else:
        d, k = diag_T(spec, points), kernel_T
    kern = k(spec, points[:, None], grid.nodes[None, :])
    interp = (kern * grid.weights[None, :]) @ values
    return interp, d


@lru_cache(maxsize=32)
def _assemble_cached(spec: KernelSpec, grid: RadialGrid, kind: str) -> SectorOperator:
    r = grid.nodes
    if kind == "W":
        kern, d = kernel_W(spec, r[:, None], r[None, :]), diag_W(spec, r)
    else:
        kern, d = kernel_T(spec, r[:, None], r[None, :]), diag_T(spec, r)
    mat = kern * grid.weights[None, :]
    mat[np.diag_indices_from(mat)] += d
    mat.flags.writeable = False
    return SectorOperator(mat, grid, kind, spec)


def assemble(spec: KernelSpec, grid: RadialGrid, kind: str) -> SectorOperator:
    """Dense Nystrom matrix of ``T + alpha`` (``kind='TplusAlpha'``) or ``W``."""
    if kind not in KINDS:
        raise DomainError(f"kind must be one of {KINDS}, got {kind!r}")
    if not spec.lam > 0:
        raise DomainError("operator assembly needs lambda > 0")
    return _assemble_cached(spec, grid, kind)


def _l2_pair(grid: RadialGrid, a: np.ndarray, b: np.ndarray):
    v = np.dot(grid.density("L2") * np.conj(a), b)
    return v


def form_phi(T_op: SectorOperator, xi: Charge) -> float:
    """``<xi, (T + alpha) xi>`` in the radial L2 pairing."""
    if T_op.kind != "TplusAlpha":
        raise DomainError("form_phi needs a TplusAlpha operator")
    _check_charge(T_op, xi)
    return float(np.real(_l2_pair(T_op.grid, xi.values, T_op.apply(xi.values))))


def w_inner(W_op: SectorOperator, xi: Charge, eta: Charge):
    """``<xi, W eta>``, antilinear in the first slot."""
    if W_op.kind != "W":
        raise DomainError("w_inner needs a W operator")
    _check_charge(W_op, xi)
    _check_charge(W_op, eta)
    v = _l2_pair(W_op.grid, xi.values, W_op.apply(eta.values))
    return complex(v) if np.iscomplexobj(v) else float(v)


def generalized_eigs(a: np.ndarray, b: np.ndarray, k: int = 5) -> np.ndarray:
    """Smallest ``k`` eigenvalues of ``a v = t b v`` (``b`` positive definite, Cholesky based)."""
    try:
        return linalg.eigh(a, b, eigvals_only=True, subset_by_index=[0, min(k, a.shape[0]) - 1])
    except linalg.LinAlgError as exc:
        raise NumericError(f"generalized eigenproblem failed: {exc}") from exc


def bottom_spectrum(spec: KernelSpec, grid: RadialGrid, k: int = 5) -> np.ndarray:
    """Smallest ``k`` generalized Rayleigh quotients of ``2(T + alpha)`` against ``W``."""
    t = assemble(spec, grid, "TplusAlpha").pairing_matrix()
    w = assemble(spec, grid, "W").pairing_matrix()
    return generalized_eigs(2.0 * t, w, k)


def bottom(spec: KernelSpec, grid: RadialGrid) -> float:
    """Discrete bottom of the charge-space operator ``2 W^{-1} (T + alpha)``."""
    val = float(bottom_spectrum(spec, grid, 1)[0])
    if val <= 0:
        warnings.warn(f"non-positive bottom {val:.4g} at {spec}", NonPositiveBottomWarning,
                      stacklevel=2)
    return val


def positivity_margin(spec: KernelSpec, grid: RadialGrid) -> float:
    """``min <f, T f> / int sqrt(nu r^2 + lam) |f|^2 r^2 dr  -  2 pi^2 (1 - Lambda(m))``."""
    m = spec.m
    t_op = assemble(spec.replace(alpha=0.0), grid, "TplusAlpha")
    t = t_op.pairing_matrix()
    r = grid.nodes
    b = np.diag(grid.density("L2") * np.sqrt(spec.nu * r * r + spec.lam))
    q = float(generalized_eigs(t, b, 1)[0])
    return q - TWO_PI2 * (1.0 - efimov_lambda(m))


def operator_norm(op: SectorOperator, measure_in: str, measure_out: str) -> float:
    """Spectral norm of ``M`` from the ``measure_in`` to the ``measure_out`` weighted space."""
    din = np.sqrt(op.grid.density(measure_in))
    dout = np.sqrt(op.grid.density(measure_out))
    return float(np.linalg.norm(dout[:, None] * op.matrix / din[None, :], 2))

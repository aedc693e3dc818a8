"""Schur-test bounds for the weighted kernel

    K_l(r, r') = (r r')^(l+1) (1 + r'^2)^(1/4) / ((1 + r^2)^(3/4) (r^2 + r'^2 + 1)^(l+1))

Row integrals ``int K dr'`` and column integrals ``int K dr`` are computed on
the grid plus the exterior ``(r_max, inf)`` mapped by ``r = r_max / u^2``.
Both increase toward the scale-invariant limits

    row: int_0^inf t^(l+3/2) / (1+t^2)^(l+1) dt,   col: int_0^inf t^(l-1/2) / (1+t^2)^(l+1) dt

so the supremum is reported as the larger of the grid maximum and that limit.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import beta as beta_fn

from .errors import DomainError
from .numerics import RadialGrid, build_grid
from .params import graded_rule

_TAIL_NODES = 16


def schur_kernel(ell: int, r, r_prime):
    r = np.asarray(r, dtype=float)
    rp = np.asarray(r_prime, dtype=float)
    ratio = r * rp / (r * r + rp * rp + 1.0)
    return ratio ** (ell + 1) * (1.0 + rp * rp) ** 0.25 / (1.0 + r * r) ** 0.75


def _power_moment(a: float, b: float) -> float:
    # int_0^inf t^a / (1 + t^2)^b dt
    return 0.5 * float(beta_fn((a + 1.0) / 2.0, b - (a + 1.0) / 2.0))


def row_limit(ell: int) -> float:
    return _power_moment(ell + 1.5, ell + 1.0)


def col_limit(ell: int) -> float:
    return _power_moment(ell - 0.5, ell + 1.0)


def _full_line_rule(grid: RadialGrid):
    u, wu = graded_rule(_TAIL_NODES)
    q = grid.r_max / (u * u)
    wq = 2.0 * grid.r_max * wu / u**3
    return np.concatenate([grid.nodes, q]), np.concatenate([grid.weights, wq])


def row_integrals(ell: int, grid: RadialGrid, points=None) -> np.ndarray:
    """``int_0^inf K(r, r') dr'`` at ``points`` (default: the grid nodes)."""
    x, w = _full_line_rule(grid)
    r = grid.nodes if points is None else np.asarray(points, dtype=float)
    return schur_kernel(ell, r[:, None], x[None, :]) @ w


def col_integrals(ell: int, grid: RadialGrid, points=None) -> np.ndarray:
    """``int_0^inf K(r, r') dr`` at ``points`` (default: the grid nodes)."""
    x, w = _full_line_rule(grid)
    rp = grid.nodes if points is None else np.asarray(points, dtype=float)
    return w @ schur_kernel(ell, x[:, None], rp[None, :])


@dataclass(frozen=True)
class SchurReport:
    ell: int
    sup_row: float
    sup_col: float
    argmax_r: float           # inf when the supremum is the large-r limit
    argmax_r_col: float
    refinement_delta: float
    grid_max_row: float
    grid_max_col: float
    row_limit: float
    col_limit: float
    grid_id: str

    @property
    def interior_sup(self) -> bool:
        return math.isfinite(self.argmax_r) and math.isfinite(self.argmax_r_col)

    def as_dict(self) -> dict:
        return asdict(self)


def _sup(values, nodes, limit):
    i = int(np.argmax(values))
    if values[i] >= limit:
        return float(values[i]), float(nodes[i]), float(values[i])
    return float(limit), math.inf, float(values[i])


def refined(grid: RadialGrid) -> RadialGrid:
    """Twice the panels, four more nodes per panel, same span."""
    return build_grid(2 * grid.n_panels, grid.nodes_per_panel + 4, grid.r_min, grid.r_max,
                      grid.measure, grid.origin_panel)


def schur_bounds(ell: int, grid: RadialGrid) -> SchurReport:
    if not (isinstance(ell, (int, np.integer)) and ell >= 1):
        raise DomainError("Schur bounds need ell >= 1")
    rl, cl = row_limit(ell), col_limit(ell)

    def sups(g):
        row = row_integrals(ell, g)
        col = col_integrals(ell, g)
        return _sup(row, g.nodes, rl), _sup(col, g.nodes, cl)

    (sr, ar, gr), (sc, ac, gc) = sups(grid)
    (sr2, _, gr2), (sc2, _, gc2) = sups(refined(grid))
    delta = max(abs(sr2 - sr) / sr, abs(sc2 - sc) / sc, abs(gr2 - gr) / gr, abs(gc2 - gc) / gc)
    return SchurReport(int(ell), sr, sc, ar, ac, float(delta), gr, gc, rl, cl, grid.grid_id)

"""Radial quadrature grids, charges, and Legendre functions of both kinds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import eval_legendre

from .errors import DomainError

MEASURES = ("L2", "Hminus12", "Hplus12", "WLambda", "Hminus32")
MAX_ELL = 8

# smallest tail exponent with a finite weighted norm, per measure
_TAIL_MIN = {"L2": 1.5, "Hminus12": 1.0, "Hplus12": 2.0, "Hminus32": 0.5, "WLambda": 1.0}


def measure_weight(measure: str, r):
    """Pointwise density of the radial inner product, including the ``r^2`` Jacobian."""
    r = np.asarray(r, dtype=float)
    if measure in ("L2", "WLambda"):
        return r * r
    if measure == "Hminus12":
        return r * r / np.sqrt(1.0 + r * r)
    if measure == "Hplus12":
        return r * r * np.sqrt(1.0 + r * r)
    if measure == "Hminus32":
        return r * r / (1.0 + r * r) ** 1.5
    raise DomainError(f"unknown measure {measure!r}")


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Composite Gauss rule on ``(0, r_max]`` tagged with a weighted inner product.

    Equality and hashing go through ``key`` so grids can index caches.
    """

    nodes: np.ndarray
    weights: np.ndarray
    measure: str
    r_min: float
    r_max: float
    n_panels: int
    nodes_per_panel: int
    origin_panel: bool

    @property
    def key(self):
        return (self.n_panels, self.nodes_per_panel, self.r_min, self.r_max, self.origin_panel)

    @property
    def grid_id(self) -> str:
        o = "o" if self.origin_panel else "x"
        return f"P{self.n_panels}x{self.nodes_per_panel}_{self.r_min:.3g}_{self.r_max:.3g}_{o}"

    def __eq__(self, other):
        return isinstance(other, RadialGrid) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __len__(self):
        return self.nodes.size

    def with_measure(self, measure: str) -> "RadialGrid":
        if measure not in MEASURES:
            raise DomainError(f"unknown measure {measure!r}")
        return replace(self, measure=measure)

    def density(self, measure: Optional[str] = None) -> np.ndarray:
        """``w_i * rho(r_i)``: the diagonal of the discrete inner product."""
        return self.weights * measure_weight(measure or self.measure, self.nodes)

    def integrate(self, values) -> float:
        """Plain ``int f dr`` over the grid (no measure)."""
        return np.dot(self.weights, values)


def build_grid(n_panels: int, nodes_per_panel: int, r_min: float, r_max: float,
               measure: str = "L2", origin_panel: bool = True) -> RadialGrid:
    """Geometric panels on ``[r_min, r_max]`` with Gauss-Legendre nodes.

    With ``origin_panel`` an extra panel ``[0, r_min]`` is prepended so the
    rule integrates over the whole of ``(0, r_max]``.
    """
    if not (0 < r_min < r_max) or not np.isfinite(r_max):
        raise DomainError(f"need 0 < r_min < r_max, got [{r_min}, {r_max}]")
    if n_panels < 1 or nodes_per_panel < 1:
        raise DomainError("n_panels and nodes_per_panel must be positive")
    if measure not in MEASURES:
        raise DomainError(f"unknown measure {measure!r}")
    nodes, weights = _panel_rule(n_panels, nodes_per_panel, float(r_min), float(r_max),
                                 bool(origin_panel))
    return RadialGrid(nodes, weights, measure, float(r_min), float(r_max),
                      int(n_panels), int(nodes_per_panel), bool(origin_panel))


@lru_cache(maxsize=64)
def _panel_rule(n_panels, npp, r_min, r_max, origin):
    x, w = np.polynomial.legendre.leggauss(npp)
    edges = np.geomspace(r_min, r_max, n_panels + 1)
    edges[0], edges[-1] = r_min, r_max
    if origin:
        edges = np.concatenate(([0.0], edges))
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (half * x + 0.5 * (hi + lo)).ravel()
    weights = (half * w).ravel()
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


DEFAULT_PANELS = 48
DEFAULT_NODES = 12
DEFAULT_RMIN = 1e-4
DEFAULT_RMAX = 1e4


def default_grid(measure: str = "L2", r_max: float = DEFAULT_RMAX) -> RadialGrid:
    """48 geometric panels x 12 nodes over eight decades, plus the origin panel."""
    return build_grid(DEFAULT_PANELS, DEFAULT_NODES, DEFAULT_RMIN, r_max, measure)


def scaled_grid(r_max: float, measure: str = "L2", nodes_per_panel: int = DEFAULT_NODES,
                panels_per_decade: float = 6.0, r_min: float = DEFAULT_RMIN) -> RadialGrid:
    """Grid with the default panel density, stretched to ``r_max``."""
    decades = math.log10(r_max / r_min)
    n = max(1, int(round(panels_per_decade * decades)))
    return build_grid(n, nodes_per_panel, r_min, r_max, measure)


# ---------------------------------------------------------------------------
# charges


@dataclass(frozen=True, eq=False)
class Charge:
    """Radial profile ``f`` of ``xi(p) = f(|p|) Y_{ell n}(p/|p|)`` sampled on a grid.

    ``tail = (exponent, coefficient)`` declares ``f(r) ~ coefficient * r**-exponent``
    beyond ``r_max``.  ``profile`` optionally evaluates ``f`` off the grid; without
    it, off-grid values come from a cubic spline in ``log r``.
    """

    ell: int
    n: int
    values: np.ndarray
    grid: RadialGrid
    tail: Optional[tuple] = None
    profile: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values)
        if not np.iscomplexobj(vals):
            vals = vals.astype(float)
        if self.ell < 0 or abs(self.n) > self.ell:
            raise DomainError(f"invalid sector (ell={self.ell}, n={self.n})")
        if vals.shape != self.grid.nodes.shape:
            raise DomainError("charge values are not aligned with the grid")
        if not np.all(np.isfinite(vals)):
            raise DomainError("charge values must be finite")
        if self.tail is not None:
            e, c = self.tail
            object.__setattr__(self, "tail", (float(e), complex(c) if np.iscomplexobj(c) else float(c)))
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, f: Callable, grid: RadialGrid, ell: int, n: int = 0,
                      tail: Optional[tuple] = None) -> "Charge":
        return cls(ell, n, np.asarray(f(grid.nodes)), grid, tail, f)

    def with_values(self, values, tail=None, profile=None) -> "Charge":
        return Charge(self.ell, self.n, values, self.grid, tail, profile)

    def scaled(self, c) -> "Charge":
        tail = None if self.tail is None else (self.tail[0], c * self.tail[1])
        prof = None if self.profile is None else (lambda r, f=self.profile: c * f(r))
        return Charge(self.ell, self.n, c * self.values, self.grid, tail, prof)

    def __add__(self, other: "Charge") -> "Charge":
        _check_same(self, other)
        prof = None
        if self.profile is not None and other.profile is not None:
            prof = lambda r, f=self.profile, g=other.profile: f(r) + g(r)
        tails = [t for t in (self.tail, other.tail) if t is not None]
        tail = None
        if len(tails) == 2 and tails[0][0] == tails[1][0]:
            tail = (tails[0][0], tails[0][1] + tails[1][1])
        elif tails:
            # the slower decay dominates
            tail = min(tails, key=lambda t: t[0])
        return Charge(self.ell, self.n, self.values + other.values, self.grid, tail, prof)

    def __sub__(self, other: "Charge") -> "Charge":
        return self + other.scaled(-1.0)

    def at(self, r) -> np.ndarray:
        """Evaluate the radial profile at arbitrary radii (zero beyond ``r_max`` unless tailed)."""
        r = np.asarray(r, dtype=float)
        if self.profile is not None:
            return np.asarray(self.profile(r))
        return _spline_eval(self, r)

    def norm_sq(self, measure: Optional[str] = None) -> float:
        """Weighted squared norm with the analytic tail; ``inf`` if the tail is not integrable."""
        measure = measure or self.grid.measure
        body = float(np.dot(self.grid.density(measure), np.abs(self.values) ** 2))
        return body + tail_norm_sq(self.tail, self.grid.r_max, measure)


def _check_same(a: Charge, b: Charge):
    if a.grid != b.grid:
        raise DomainError("charges live on different grids")
    if (a.ell, a.n) != (b.ell, b.n):
        raise DomainError("charges live in different angular sectors")


def _spline_eval(ch: Charge, r: np.ndarray) -> np.ndarray:
    x = np.log(ch.grid.nodes)
    vals = ch.values
    out = np.zeros(r.shape, dtype=vals.dtype)
    inside = (r > 0) & (r <= ch.grid.r_max)
    if np.any(inside):
        spl = CubicSpline(x, vals, bc_type="natural", extrapolate=True)
        out[inside] = spl(np.log(r[inside]))
        below = inside & (r < ch.grid.nodes[0])
        out[below] = vals[0]
    if ch.tail is not None:
        beyond = r > ch.grid.r_max
        e, c = ch.tail
        out[beyond] = c * r[beyond] ** (-e)
    return out


def tail_norm_sq(tail, r_max: float, measure: str) -> float:
    """``int_{r_max}^inf |c r^-e|^2 rho(r) dr`` using the large-r power of the measure."""
    if tail is None:
        return 0.0
    e, c = tail
    if c == 0:
        return 0.0
    # large-r density ~ r^power
    power = {"L2": 2.0, "WLambda": 2.0, "Hminus12": 1.0, "Hplus12": 3.0, "Hminus32": -1.0}[measure]
    k = power - 2.0 * e
    if k >= -1.0:
        return math.inf
    return abs(c) ** 2 * r_max ** (k + 1.0) / (-(k + 1.0))


def tail_is_integrable(tail, measure: str) -> bool:
    return tail is None or tail[0] > _TAIL_MIN[measure]


# ---------------------------------------------------------------------------
# Legendre functions


def legendre_P(ell: int, y):
    return eval_legendre(ell, y)


def _check_ell(ell):
    if not (isinstance(ell, (int, np.integer)) and 0 <= ell <= MAX_ELL):
        raise DomainError(f"ell must be an integer in [0, {MAX_ELL}], got {ell}")


def _q0(z):
    # 0.5 ln((z+1)/(z-1)) = 0.5 log1p(2/(z-1))
    return 0.5 * np.log1p(2.0 / (z - 1.0))


_UPWARD_LIMIT = 1.2


def _q_all(ell: int, z: np.ndarray) -> list:
    """``[Q_0(z), ..., Q_ell(z)]`` for ``z > 1`` (arrays)."""
    q0 = _q0(z)
    out = [q0]
    if ell == 0:
        return out
    qs = [np.empty_like(z) for _ in range(ell)]
    near = z < _UPWARD_LIMIT
    if np.any(near):
        zn = z[near]
        prev, cur = q0[near], zn * q0[near] - 1.0
        qs[0][near] = cur
        for k in range(1, ell):
            prev, cur = cur, ((2 * k + 1) * zn * cur - k * prev) / (k + 1)
            qs[k][near] = cur
    far = ~near
    if np.any(far):
        # ratios rho_k = Q_k/Q_{k-1} from the backward continued fraction; the
        # recessive solution is stable in this direction and cannot overflow
        zf = z[far]
        rho = np.zeros_like(zf)
        ratios = [None] * (ell + 1)
        for k in range(ell + 60, 0, -1):
            rho = k / ((2 * k + 1) * zf - (k + 1) * rho)
            if k <= ell:
                ratios[k] = rho
        cur = q0[far]
        for k in range(1, ell + 1):
            cur = cur * ratios[k]
            qs[k - 1][far] = cur
    return out + qs


def legendre_Q(ell: int, z):
    """Legendre function of the second kind ``Q_ell(z)`` for real ``z > 1``."""
    _check_ell(ell)
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 1.0)):
        raise DomainError("legendre_Q requires z > 1")
    zz = np.atleast_1d(z)
    val = _q_all(ell, zz)[ell]
    return val.reshape(z.shape) if z.ndim else float(val[0])


def legendre_Q_deriv(ell: int, z):
    """``dQ_ell/dz`` via ``(z^2-1) Q_ell' = ell (z Q_ell - Q_{ell-1})``."""
    _check_ell(ell)
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 1.0)):
        raise DomainError("legendre_Q_deriv requires z > 1")
    zz = np.atleast_1d(z)
    zm1 = (zz - 1.0) * (zz + 1.0)
    if ell == 0:
        val = -1.0 / zm1
    else:
        q = _q_all(ell, zz)
        val = ell * (zz * q[ell] - q[ell - 1]) / zm1
    return val.reshape(z.shape) if z.ndim else float(val[0])


@lru_cache(maxsize=None)
def legendre_moment(ell: int, k: int) -> float:
    """``int_{-1}^{1} y^k P_ell(y) dy`` (zero unless ``k >= ell`` with equal parity)."""
    if k < ell or (k - ell) % 2:
        return 0.0
    a, b = (k + ell) // 2, (k - ell) // 2
    return 2.0 ** (ell + 1) * math.factorial(k) * math.factorial(a) / (
        math.factorial(b) * math.factorial(k + ell + 1))

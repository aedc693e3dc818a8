"""Near-zero modes of ``T + alpha`` in the charge space ``H^{-1/2}``.

A zero mode decays like ``r^-(2-s)`` with ``s`` close to 1, so truncating at
``r_max`` alone leaves a residual of order ``r_max^-(1-s)``.  The solver can
therefore append one extra unknown: the coefficient ``c`` of an explicit tail
``c r^-(2-s)`` on ``(r_max, inf)``.  Its action is split as

    int_{r_max}^inf K_lam(p, q) q^-e dq
        = c0 p^(1-e) - int_0^{r_max} K_0(p, q) q^-e dq + int_{r_max}^inf (K_lam - K_0) q^-e dq

where the first term is the exact scale-invariant (``lam = 0``) transform of
the power law and the middle term reuses the grid rule, so quadrature errors
of the homogeneous part cancel.  Residual rows are collected on the grid, on
an exterior rule over ``(r_max, 10^6 r_max)``, and one analytic far-field row.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import DomainError, NumericError
from .kernels import KernelSpec, diag_T, kernel_T, y_integral
from .numerics import Charge, RadialGrid, build_grid, measure_weight
from .operators import assemble
from .params import cancellation_C, derive_params, graded_integral, r_integral, solve_s_of_m

IN_MEASURE = "Hminus12"
OUT_MEASURE = "Hminus32"
EXT_DECADES = 6
FAR_DECADES = 12


def sector_symbol(ell: int, s: float, m: float) -> float:
    """``pi sqrt(nu) + int_0^inf r^s int P_ell(y) / (r^2 + 1 + mu r y) dy dr``.

    ``2 pi`` times this is the multiplier of ``T`` at ``lambda = 0`` on
    ``r^-(2-s)``; for ``ell = 1`` it is the threshold function ``C(s, m)``.
    """
    if not 0.0 <= s < 1.0 + (ell >= 1):
        raise DomainError(f"s={s} outside the convergence strip for ell={ell}")
    if ell == 1:
        return cancellation_C(s, m)
    p = derive_params(m)
    g = lambda r: y_integral(ell, r * r + 1.0, p.mu * r, 1)
    # r -> 1/t folds (1, inf) onto (0, 1] with G(1/t) = t^2 G(t)
    total = graded_integral(lambda r: r**s * g(r)) + graded_integral(lambda t: t ** (-s) * g(t))
    return math.pi * math.sqrt(p.nu) + total


def _homogeneous_coeff(spec: KernelSpec, s: float) -> float:
    # int_0^inf K_0(p, q) q^-(2-s) dq = c0 p^(s-1)
    return 2.0 * math.pi * sector_symbol(spec.ell, s, spec.m) - 2.0 * math.pi**2 * math.sqrt(spec.nu)


@lru_cache(maxsize=16)
def _far_rule(r_max: float, npp: int) -> RadialGrid:
    return build_grid(6 * FAR_DECADES, npp, r_max, r_max * 10.0**FAR_DECADES, origin_panel=False)


@lru_cache(maxsize=16)
def _ext_rule(r_max: float, npp: int) -> RadialGrid:
    return build_grid(6 * EXT_DECADES, npp, r_max, r_max * 10.0**EXT_DECADES, origin_panel=False)


def tail_action(spec: KernelSpec, grid: RadialGrid, s: float, points) -> np.ndarray:
    """``int_{r_max}^inf K(p, q) q^-(2-s) dq`` at the radii ``points``."""
    p = np.asarray(points, dtype=float)
    e = 2.0 - s
    spec0 = spec.replace(lam=0.0)
    c0 = _homogeneous_coeff(spec, s)
    inner = (kernel_T(spec0, p[:, None], grid.nodes[None, :]) * grid.weights) @ grid.nodes ** (-e)
    out = c0 * p ** (1.0 - e) - inner
    if spec.lam > 0:
        far = _far_rule(grid.r_max, grid.nodes_per_panel)
        q = far.nodes
        dk = kernel_T(spec, p[:, None], q[None, :]) - kernel_T(spec0, p[:, None], q[None, :])
        out = out + (dk * far.weights) @ q ** (-e)
    return out


def _tail_norm_sq(r_max: float, npp: int, s: float, measure: str) -> float:
    e = 2.0 - s
    far = _far_rule(r_max, npp)
    body = float(np.dot(far.density(measure), far.nodes ** (-2.0 * e)))
    # beyond the far rule the density is r^(power) to double precision
    power = {"Hminus12": 1.0, "L2": 2.0, "Hminus32": -1.0}[measure]
    k = power - 2.0 * e + 1.0
    top = far.r_max
    return body + (top**k / -k if k < 0 else math.inf)


@dataclass(frozen=True)
class WeightedSystem:
    matrix: np.ndarray        # rows: weighted residuals, cols: weighted unknowns
    col_scale: np.ndarray     # unknown = weighted unknown / col_scale
    tail_s: Optional[float]


def weighted_system(spec: KernelSpec, grid: RadialGrid, tail_s: Optional[float] = None) -> WeightedSystem:
    """``D_out^{1/2} M D_in^{-1/2}`` with ``D_in = H^{-1/2}`` and ``D_out = H^{-3/2}`` weights."""
    m_op = assemble(spec, grid, "TplusAlpha").matrix
    dout = np.sqrt(grid.density(OUT_MEASURE))
    din = np.sqrt(grid.density(IN_MEASURE))
    if tail_s is None:
        return WeightedSystem(dout[:, None] * m_op / din[None, :], din, None)
    if not 0.0 < tail_s < 1.0:
        raise DomainError(f"tail exponent parameter s={tail_s} must lie in (0, 1)")
    e = 2.0 - tail_s
    ext = _ext_rule(grid.r_max, grid.nodes_per_panel)
    p = ext.nodes
    col_in = tail_action(spec, grid, tail_s, grid.nodes)
    col_ext = diag_T(spec, p) * p ** (-e) + tail_action(spec, grid, tail_s, p)
    k_ext = kernel_T(spec, p[:, None], grid.nodes[None, :]) * grid.weights[None, :]
    top = np.hstack([m_op, col_in[:, None]])
    mid = np.hstack([k_ext, col_ext[:, None]])
    # far field: residual ~ 2 pi C_ell(s) c p^(1-e), its H^{-3/2} norm beyond ext.r_max
    c_far = 2.0 * math.pi * sector_symbol(spec.ell, tail_s, spec.m)
    far_norm = math.sqrt(ext.r_max ** (2.0 - 2.0 * e) / (2.0 * e - 2.0))
    last = np.zeros((1, grid.nodes.size + 1))
    last[0, -1] = c_far * far_norm
    d_out = np.concatenate([dout, np.sqrt(ext.density(OUT_MEASURE))])
    body = d_out[:, None] * np.vstack([top, mid])
    d_in = np.concatenate([din, [math.sqrt(_tail_norm_sq(grid.r_max, grid.nodes_per_panel,
                                                         tail_s, IN_MEASURE))]])
    return WeightedSystem(np.vstack([body, last]) / d_in[None, :], d_in, float(tail_s))


class SingularProbe(NamedTuple):
    sigma_min: float
    vector: Charge
    sigma_next: float
    tail_s: Optional[float]


def auto_tail(spec: KernelSpec) -> Optional[float]:
    """Zero-mode exponent ``s(m)`` for ``ell = 1`` inside its range, else ``None``."""
    if spec.ell != 1:
        return None
    try:
        return solve_s_of_m(spec.m)
    except DomainError:
        return None


def smallest_singular(spec: KernelSpec, grid: RadialGrid, tail="auto", n: int = 0) -> SingularProbe:
    """Smallest singular value of ``T + alpha`` from ``H^{-1/2}`` to ``H^{-3/2}``.

    ``tail`` is ``"auto"``, ``None``/``"none"`` (pure truncation) or an explicit
    ``s`` in (0, 1) for the appended tail ``r^-(2-s)``.
    """
    if tail == "auto":
        tail_s = auto_tail(spec)
    elif tail is None or tail == "none":
        tail_s = None
    else:
        tail_s = float(tail)
    sysw = weighted_system(spec, grid, tail_s)
    try:
        _, sv, vt = np.linalg.svd(sysw.matrix, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD failed: {exc}") from exc
    v = vt[-1] / sysw.col_scale
    v = v * np.sign(v[np.argmax(np.abs(v))])
    nvals = grid.nodes.size
    tail_decl = None if tail_s is None else (2.0 - tail_s, float(v[nvals]))
    vec = Charge(spec.ell, n, v[:nvals], grid.with_measure(IN_MEASURE), tail_decl)
    return SingularProbe(float(sv[-1]), vec, float(sv[-2]), tail_s)


# ---------------------------------------------------------------------------
# tails and Minlos functions


class TailFit(NamedTuple):
    exponent: float
    r2: float


def fit_tail(vector: Charge, fit_range: Optional[Sequence[float]] = None) -> TailFit:
    """Least-squares slope of ``log|f|`` against ``log r`` on ``fit_range``.

    Defaults to the top two decades ``[r_max/100, r_max]``.
    """
    g = vector.grid
    lo, hi = fit_range if fit_range is not None else (g.r_max / 100.0, g.r_max)
    if not (0 < lo < hi) or hi / lo < 100.0 * (1 - 1e-12):
        raise DomainError("fit range must span at least two decades")
    sel = (g.nodes >= lo) & (g.nodes <= hi)
    if np.count_nonzero(sel) < 10:
        raise DomainError("fit range holds fewer than 10 grid nodes")
    f = np.abs(vector.values[sel])
    if np.any(f == 0):
        raise DomainError("vector vanishes on the fit range")
    x, y = np.log(g.nodes[sel]), np.log(f)
    (slope, icpt) = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return TailFit(float(slope), float(r2))


def minlos_kernel_function(n: int, s: float, grid: RadialGrid) -> Charge:
    """Radial profile ``1_{r >= 1} r^-(2-s)`` in sector ``(1, n)`` with its tail declared."""
    if n not in (-1, 0, 1):
        raise DomainError("n must be -1, 0 or 1")
    if not 0.0 < s < 1.0:
        raise DomainError(f"s must lie in (0, 1), got {s}")
    if s >= 0.5 and grid.measure != "Hminus12":
        raise DomainError("s >= 1/2 leaves L^2; use an Hminus12 grid")
    e = 2.0 - s
    prof = lambda r: np.where(np.asarray(r) >= 1.0, np.asarray(r, dtype=float) ** (-e), 0.0)
    return Charge.from_function(prof, grid, 1, n, tail=(e, 1.0))


def apply_with_tail(spec: KernelSpec, charge: Charge, points) -> np.ndarray:
    """``((T + alpha) f)(p)`` for a tailed charge, Nystrom on the grid plus the exact tail.

    Works for ``lambda = 0`` as well (no assembly involved).
    """
    if charge.ell != spec.ell:
        raise DomainError("charge sector does not match the kernel sector")
    p = np.asarray(points, dtype=float)
    g = charge.grid
    out = diag_T(spec, p) * charge.at(p)
    out = out + (kernel_T(spec, p[:, None], g.nodes[None, :]) * g.weights) @ charge.values
    if charge.tail is not None:
        e, c = charge.tail
        out = out + c * tail_action(spec, g, 2.0 - e, p)
    return out


def cancellation_coefficient(s: float, m: float, K: float, p: float) -> float:
    """``pi sqrt(nu) 1_{p >= K} + int_{K/p}^inf r^s G1(r) dr`` (cutoff version of ``C``)."""
    if not 0.0 < s < 1.0:
        raise DomainError(f"s must lie in (0, 1), got {s}")
    if not p > 0 or K < 0:
        raise DomainError("need p > 0 and K >= 0")
    prm = derive_params(m)
    head = math.pi * math.sqrt(prm.nu) if p >= K else 0.0
    return head + r_integral(s, prm.mu, lower=K / p)


# ---------------------------------------------------------------------------
# mass scans


@dataclass(frozen=True)
class ScanRecord:
    m: float
    ell: int
    sigma_min: float
    tail_exponent_fit: Optional[float]
    s_of_m: Optional[float]
    grid_id: str
    r_max: float
    sigma_next: float = float("nan")
    fit_quality: Optional[float] = None

    def as_dict(self) -> dict:
        return asdict(self)


def scan_mass(ell: int, m_values: Sequence[float], template: KernelSpec, grid: RadialGrid,
              tail="auto") -> list:
    """One :class:`ScanRecord` per mass, in input order."""
    out = []
    for m in m_values:
        spec = template.replace(m=float(m), ell=int(ell))
        probe = smallest_singular(spec, grid, tail)
        s_m = probe.tail_s if probe.tail_s is not None else (auto_tail(spec) if ell == 1 else None)
        try:
            fit = fit_tail(probe.vector)
            expo, quality = fit.exponent, fit.r2
        except DomainError:
            expo, quality = None, None
        gid = grid.grid_id + ("" if probe.tail_s is None else f"+tail{2.0 - probe.tail_s:.6f}")
        out.append(ScanRecord(float(m), int(ell), probe.sigma_min, expo, s_m, gid, grid.r_max,
                              probe.sigma_next, quality))
    return out


def default_mass_sweep(n: int = 21, m_to: float = 0.2) -> np.ndarray:
    """``n`` log-spaced masses in ``(m*, m_to]``, starting just above the Efimov threshold."""
    from .params import solve_m_star
    lo = solve_m_star().value * 1.02
    return np.geomspace(lo, m_to, n)

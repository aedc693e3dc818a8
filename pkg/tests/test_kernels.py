import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import action_dblquad, kernel_oracle
from tms21.errors import DomainError
from tms21.kernels import (
    KernelSpec, ball_integrals, diag_T, diag_W, kernel_T, kernel_W, y_integral,
)
from tms21.numerics import Charge, build_grid


def spec(ell, lam, m, alpha=0.0):
    return KernelSpec.from_mass(m, lam=lam, alpha=alpha, ell=ell)


# ---------------------------------------------------------------------------
# closed values


def test_kernel_T_unit_values():
    assert kernel_T(spec(1, 0.0, 1.0), 1.0, 1.0) == pytest.approx(-4 * math.pi * (math.log(3) - 1), rel=1e-14)
    assert kernel_T(spec(0, 0.0, 1.0), 1.0, 1.0) == pytest.approx(2 * math.pi * math.log(3), rel=1e-14)


def test_kernel_W_unit_values():
    assert kernel_W(spec(0, 0.0, 1.0), 1.0, 1.0) == pytest.approx(-2 * 2 * math.pi * 2 / 3, rel=1e-14)
    assert kernel_W(spec(1, 0.0, 1.0), 1.0, 1.0) == pytest.approx(
        kernel_oracle(1, 0.0, 1.0, 1.0, 1.0, 2), rel=1e-9)


def test_odd_sector_vanishes_at_small_radius():
    for k in (kernel_T, kernel_W):
        vals = [abs(k(spec(1, 1.0, 1.0), 1.0, rp)) for rp in (1e-2, 1e-4, 1e-6)]
        assert vals[2] < 1e-15 and vals[0] > vals[1] > vals[2]


def test_diag_values():
    s = KernelSpec(0, 1.0, 1.0, 0.75)
    assert diag_T(s, 0.0) == pytest.approx(2 * math.pi**2)
    assert diag_W(s, 0.0) == pytest.approx(2 * math.pi**2)
    s5 = KernelSpec(0, 1.0, 1.0, 0.75, alpha=-5.0)
    assert diag_T(s5, 2.0) == pytest.approx(2 * math.pi**2 * 2 - 5)


def test_spec_validation():
    with pytest.raises(DomainError):
        KernelSpec(1, 1.0, 1.0, 0.5)
    with pytest.raises(DomainError):
        KernelSpec(-1, 1.0, 1.0, 0.75)
    with pytest.raises(DomainError):
        KernelSpec(1, -1.0, 1.0, 0.75)
    with pytest.raises(DomainError):
        kernel_T(spec(1, 1.0, 1.0), 0.0, 1.0)
    assert spec(1, 1.0, 0.3).replace(m=2.0).m == pytest.approx(2.0)


# ---------------------------------------------------------------------------
# oracle matrix


def oracle_matrix_errors(n=10, seed=7):
    """Worst relative kernel error over ell 0..3, lambda {0, 1}, m {0.09, 1} on n x n radii."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for ell in range(4):
        for lam in (0.0, 1.0):
            for m in (0.09, 1.0):
                s = spec(ell, lam, m)
                r = 10 ** rng.uniform(-3, 3, n)
                rp = 10 ** rng.uniform(-3, 3, n)
                for a in r:
                    for b in rp:
                        for power, k in ((1, kernel_T), (2, kernel_W)):
                            ref = kernel_oracle(ell, lam, s.mu, a, b, power)
                            if ref == 0:
                                continue
                            worst = max(worst, abs(k(s, a, b) / ref - 1))
    return worst


def test_kernels_match_oracle_matrix():
    assert oracle_matrix_errors() < 1e-8


@given(st.integers(0, 3), st.sampled_from([0.0, 0.5, 1.0]), st.floats(0.08, 5.0),
       st.floats(-4, 4), st.floats(-4, 4))
def test_kernels_match_oracle_property(ell, lam, m, lr, lrp):
    r, rp = 10.0**lr, 10.0**lrp
    if lam == 0 and abs(lr - lrp) < 1e-6:
        return
    s = spec(ell, lam, m)
    for power, k in ((1, kernel_T), (2, kernel_W)):
        ref = kernel_oracle(ell, lam, s.mu, r, rp, power)
        assert k(s, r, rp) == pytest.approx(ref, rel=1e-8, abs=1e-300)


@pytest.mark.parametrize("ell,lam", [(0, 1.0), (1, 1.0), (1, 0.3), (2, 1.0)])
def test_grid_action_matches_dblquad(ell, lam):
    # the defining double integral applied to a smooth profile
    s = spec(ell, lam, 1.0)
    f = lambda x: x * np.exp(-x * x)
    g = build_grid(20, 16, 1e-4, 60.0)
    for r in (0.5, 2.0):
        grid_val = float(np.dot(kernel_T(s, r, g.nodes) * g.weights, f(g.nodes)))
        assert grid_val == pytest.approx(action_dblquad(ell, lam, s.mu, r, f), rel=1e-8)


@given(st.integers(0, 3), st.floats(0.0, 2.0), st.floats(0.08, 5.0), st.floats(-3, 3), st.floats(-3, 3))
def test_weighted_symmetry(ell, lam, m, lr, lrp):
    r, rp = 10.0**lr, 10.0**lrp
    if lam == 0 and abs(lr - lrp) < 1e-9:
        return
    s = spec(ell, lam, m)
    for k in (kernel_T, kernel_W):
        lhs, rhs = r * r * k(s, r, rp), rp * rp * k(s, rp, r)
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs), 1e-300)


@given(st.floats(0.0, 2.0), st.floats(0.08, 5.0), st.floats(-3, 3), st.floats(-3, 3))
def test_sign_pattern(lam, m, lr, lrp):
    r, rp = 10.0**lr, 10.0**lrp
    if lam == 0 and abs(lr - lrp) < 1e-9:
        return
    assert kernel_T(spec(1, lam, m), r, rp) <= 0
    assert kernel_T(spec(0, lam, m), r, rp) >= 0


def test_series_switch_is_continuous():
    a = 1.0
    for ell in range(4):
        for power in (1, 2):
            lo = y_integral(ell, a, 0.999999e-3, power)
            hi = y_integral(ell, a, 1.000001e-3, power)
            assert lo == pytest.approx(hi, rel=1e-5)


# ---------------------------------------------------------------------------
# ball integrals


def test_ball_free_slope():
    s = spec(1, 1.0, 1.0)
    f = [ball_integrals(s, 1.0, R)[0] for R in (100.0, 200.0, 400.0)]
    slope = (f[2] - f[1]) / 200.0
    assert slope == pytest.approx(4 * math.pi, rel=1e-3)
    assert (f[1] - f[0]) / 100.0 == pytest.approx(4 * math.pi, rel=2e-3)


def test_ball_free_monte_carlo():
    s = spec(0, 1.0, 1.0)
    R = 10.0
    free, _ = ball_integrals(s, 1.0, R)
    rng = np.random.default_rng(11)
    n, total, total_sq = 10**7, 0.0, 0.0
    for _ in range(10):
        u = rng.standard_normal((n // 10, 3))
        u *= (R * rng.uniform(size=n // 10) ** (1 / 3) / np.linalg.norm(u, axis=1))[:, None]
        d = 1.0 + np.einsum("ij,ij->i", u, u) + s.mu * u[:, 2] + s.lam
        v = 1.0 / d
        total += v.sum()
        total_sq += np.dot(v, v)
    mean = total / n
    vol = 4 * math.pi * R**3 / 3
    assert free == pytest.approx(vol * mean, rel=5e-3)
    stderr = vol * math.sqrt((total_sq / n - mean**2) / n)
    assert abs(free - vol * mean) < 4 * stderr


def test_ball_squared_converges():
    s = spec(1, 1.0, 1.0)
    Rs = (1e2, 1e3, 1e4)
    v = [ball_integrals(s, 1.0, R, squared=True)[0] for R in Rs]
    # the cut-off remainder is int_R^inf 4 pi q^2 q^-4 dq = 4 pi / R to leading order
    lim = [x + 4 * math.pi / R for x, R in zip(v, Rs)]
    assert abs(lim[2] - lim[1]) < 1e-6 and abs(lim[1] - lim[0]) < 1e-3


def test_ball_charged_matches_kernel_sum():
    s = spec(1, 1.0, 1.0)
    g = build_grid(30, 12, 1e-4, 100.0)
    ch = Charge.from_function(lambda r: r * np.exp(-r * r), g, 1)
    _, charged = ball_integrals(s, 1.5, 100.0, ch)
    ref = float(np.dot(kernel_T(s, 1.5, g.nodes) * g.weights, ch.values))
    assert charged == pytest.approx(ref, rel=1e-9)


def test_ball_domain():
    s = spec(1, 1.0, 1.0)
    g = build_grid(10, 8, 1e-3, 10.0)
    ch = Charge.from_function(lambda r: np.exp(-r), g, 1)
    with pytest.raises(DomainError):
        ball_integrals(s, 1.0, 20.0, ch)
    with pytest.raises(DomainError):
        ball_integrals(s, 0.0, 2.0)

import math
import warnings

import numpy as np
import pytest

from tms21.errors import DomainError
from tms21.kernels import KernelSpec
from tms21.numerics import Charge, build_grid, default_grid, scaled_grid
from tms21.operators import (
    NonPositiveBottomWarning, assemble, bottom, bottom_spectrum, form_phi, operator_norm,
    positivity_margin, w_inner,
)
from tms21.params import efimov_lambda

MASSES, LAMBDAS, ELLS = (0.08, 0.2, 1.0), (0.5, 1.0, 10.0), (0, 1, 2, 3)


def spec(ell=1, lam=1.0, m=1.0, alpha=0.0):
    return KernelSpec.from_mass(m, lam=lam, alpha=alpha, ell=ell)


@pytest.mark.parametrize("ell", ELLS)
@pytest.mark.parametrize("kind", ["TplusAlpha", "W"])
def test_conjugated_symmetric(grid_l2, ell, kind):
    op = assemble(spec(ell, m=0.2), grid_l2, kind)
    c = op.conjugated()
    assert np.max(np.abs(c - c.T)) <= 1e-10 * np.max(np.abs(c))


@pytest.mark.parametrize("m", MASSES)
@pytest.mark.parametrize("ell", ELLS)
def test_W_positive_definite(grid_small, m, ell):
    c = assemble(spec(ell, m=m), grid_small, "W").conjugated()
    assert np.linalg.eigvalsh(0.5 * (c + c.T))[0] > 0


def test_assemble_rejects_zero_lambda(grid_small):
    with pytest.raises(DomainError):
        assemble(spec(1, lam=0.0), grid_small, "W")
    with pytest.raises(DomainError):
        assemble(spec(1), grid_small, "T")


def test_smallest_rayleigh_quotient_bound(grid_l2):
    s = spec(1)
    t = assemble(s, grid_l2, "TplusAlpha").pairing_matrix()
    q = np.linalg.eigvalsh(np.diag(grid_l2.density("L2") ** -0.5) @ t @ np.diag(grid_l2.density("L2") ** -0.5))
    assert q[0] >= 2 * math.pi**2 * (1 - efimov_lambda(1.0)) * math.sqrt(s.lam) > 0


def test_refinement_stable(grid_l2):
    s = spec(1)
    a = bottom_spectrum(s, grid_l2, 5)
    b = bottom_spectrum(s, build_grid(96, 12, 1e-4, 1e4), 5)
    np.testing.assert_allclose(a, b, rtol=1e-4)


def test_bottom_positive_and_stable(grid_l2):
    s = spec(1)
    b1 = bottom(s, grid_l2)
    b2 = bottom(s, build_grid(96, 12, 1e-4, 1e4))
    assert b1 > 0 and abs(b1 - b2) < 1e-3 * b1
    # the charge-space bottom sits at the continuum edge 2 lambda
    assert b1 == pytest.approx(2 * s.lam, rel=1e-6)


def test_bottom_flags_nonpositive(grid_small):
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        val = bottom(spec(1, lam=0.01, alpha=-10.0), grid_small)
    assert val <= 0
    assert any(issubclass(w.category, NonPositiveBottomWarning) for w in rec)


def test_higher_ell_bottom_logged(grid_small):
    # centrifugal ordering is recorded, not asserted
    b1, b2 = bottom(spec(1), grid_small), bottom(spec(2), grid_small)
    assert np.isfinite(b1) and np.isfinite(b2)


def test_positivity_margin_matrix(grid_l2):
    worst = min(positivity_margin(spec(ell, lam, m), grid_l2)
                for m in MASSES for lam in LAMBDAS for ell in ELLS)
    assert worst >= -1e-6


def test_positivity_margin_near_threshold(grid_l2):
    assert 1 - efimov_lambda(0.075) < 0.03
    assert positivity_margin(spec(1, m=0.075), grid_l2) >= -1e-6


def test_form_phi(grid_l2):
    s = spec(1)
    op = assemble(s, grid_l2, "TplusAlpha")
    xi = Charge.from_function(lambda r: r * np.exp(-r * r), grid_l2, 1)
    r = grid_l2.nodes
    bound = 2 * math.pi**2 * (1 - efimov_lambda(1.0)) * np.dot(
        grid_l2.density("L2") * np.sqrt(s.nu * r * r + s.lam), xi.values**2)
    val = form_phi(op, xi)
    assert val >= bound
    assert form_phi(op, xi.scaled(3.0)) == pytest.approx(9 * val, rel=1e-13)
    assert form_phi(op, xi.scaled(0.0)) == 0.0


def test_w_inner_hermitian_positive(grid_l2):
    w = assemble(spec(1), grid_l2, "W")
    a = Charge.from_function(lambda r: (1 + 1j * r) * r * np.exp(-r * r), grid_l2, 1)
    b = Charge.from_function(lambda r: r / (1 + r**4), grid_l2, 1)
    assert w_inner(w, a, a).real > 0 and abs(w_inner(w, a, a).imag) < 1e-14
    assert w_inner(w, a, b) == pytest.approx(np.conj(w_inner(w, b, a)), rel=1e-12)


def test_sector_mismatch(grid_l2, grid_small):
    decay = lambda r: np.exp(-r)
    op = assemble(spec(1), grid_l2, "W")
    off = Charge.from_function(decay, grid_small, 1)
    with pytest.raises(DomainError, match="grid"):
        w_inner(op, off, off)
    with pytest.raises(DomainError, match="sector"):
        form_phi(assemble(spec(1), grid_l2, "TplusAlpha"), Charge.from_function(decay, grid_l2, 0))


def test_mapping_bound_smoke():
    # ell = 1: the H^{-1/2} -> H^{-3/2} norm is refinement stable
    s1 = spec(1)
    n1 = operator_norm(assemble(s1, default_grid(), "TplusAlpha"), "Hminus12", "Hminus32")
    n2 = operator_norm(assemble(s1, build_grid(96, 12, 1e-4, 1e4), "TplusAlpha"), "Hminus12", "Hminus32")
    assert abs(n1 / n2 - 1) < 0.1

    # ell = 0: the ratio on 1_{r>=2} / (r ln r) keeps growing with the cutoff
    def ratio(ell, r_max):
        g = scaled_grid(r_max, "L2", 10)
        f = np.where(g.nodes >= 2, 1 / (g.nodes * np.log(np.maximum(g.nodes, 2))), 0.0)
        tf = assemble(spec(ell), g, "TplusAlpha").apply(f)
        return math.sqrt(np.dot(g.density("Hminus32"), tf**2) / np.dot(g.density("Hminus12"), f**2))

    r0 = [ratio(0, x) for x in (1e2, 1e3, 1e4)]
    r1 = [ratio(1, x) for x in (1e2, 1e3, 1e4)]
    assert r0[0] < r0[1] < r0[2] and r0[2] > 1.3 * r0[0]
    assert max(r1) < 1.1 * min(r1)

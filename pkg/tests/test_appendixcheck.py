import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from tms21.appendixcheck import (
    col_integrals, col_limit, refined, row_integrals, row_limit, schur_bounds, schur_kernel,
)
from tms21.errors import DomainError
from tms21.numerics import default_grid


@pytest.fixture(scope="module")
def reports():
    g = default_grid()
    return {ell: schur_bounds(ell, g) for ell in (1, 2, 3)}


def test_limits_closed_form():
    assert row_limit(1) == pytest.approx(3 * math.pi * math.sqrt(2) / 8, rel=1e-14)
    for ell in (1, 2, 3):
        row = integrate.quad(lambda t: t ** (ell + 1.5) / (1 + t * t) ** (ell + 1), 0, np.inf,
                             epsabs=0, epsrel=1e-12)[0]
        col = integrate.quad(lambda t: t ** (ell - 0.5) / (1 + t * t) ** (ell + 1), 0, np.inf,
                             epsabs=0, epsrel=1e-12)[0]
        assert row_limit(ell) == pytest.approx(row, rel=1e-10)
        assert col_limit(ell) == pytest.approx(col, rel=1e-10)


@pytest.mark.parametrize("ell", [1, 2, 3])
def test_integrals_at_unit_radius_match_quad(ell):
    g = default_grid()
    f_row = lambda rp: schur_kernel(ell, 1.0, rp)
    f_col = lambda r: schur_kernel(ell, r, 1.0)
    ref_row = sum(integrate.quad(f_row, a, b, epsabs=0, epsrel=1e-13, limit=200)[0]
                  for a, b in ((0, 1), (1, 100), (100, np.inf)))
    ref_col = sum(integrate.quad(f_col, a, b, epsabs=0, epsrel=1e-13, limit=200)[0]
                  for a, b in ((0, 1), (1, 100), (100, np.inf)))
    assert row_integrals(ell, g, [1.0])[0] == pytest.approx(ref_row, rel=1e-8)
    assert col_integrals(ell, g, [1.0])[0] == pytest.approx(ref_col, rel=1e-8)


@pytest.mark.parametrize("ell", [1, 2, 3])
def test_sups_finite_and_refinement_stable(reports, ell):
    rep = reports[ell]
    assert math.isfinite(rep.sup_row) and math.isfinite(rep.sup_col)
    assert rep.refinement_delta < 1e-2


@pytest.mark.parametrize("ell", [1, 2, 3])
def test_integrals_rise_toward_large_radius_limit(reports, ell):
    g = default_grid()
    row, col = row_integrals(ell, g), col_integrals(ell, g)
    assert np.all(np.diff(row) > -1e-12) and np.all(np.diff(col) > -1e-12)
    assert row[-1] <= row_limit(ell) and col[-1] <= col_limit(ell)
    # the supremum is the r -> inf limit, not an interior node
    rep = reports[ell]
    assert not rep.interior_sup
    assert rep.sup_row == row_limit(ell) and rep.sup_col == col_limit(ell)
    assert rep.grid_max_row == pytest.approx(row_limit(ell), rel=1e-6)


def test_higher_ell_smaller(reports):
    assert reports[2].sup_row <= reports[1].sup_row
    assert reports[2].sup_col <= reports[1].sup_col
    assert reports[3].sup_row <= reports[2].sup_row


@given(st.integers(1, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_kernel_positive_and_decreasing_in_ell_near_unit_scale(ell, lr, lrp):
    r, rp = 10.0**lr, 10.0**lrp
    k = schur_kernel(ell, r, rp)
    assert k > 0
    assert schur_kernel(ell + 1, r, rp) <= k


def test_refined_grid():
    g = default_grid()
    h = refined(g)
    assert h.n_panels == 2 * g.n_panels and h.nodes_per_panel == g.nodes_per_panel + 4
    assert (h.r_min, h.r_max) == (g.r_min, g.r_max)


def test_report_dict(reports):
    d = reports[1].as_dict()
    assert d["ell"] == 1 and d["grid_id"] == default_grid().grid_id


def test_schur_domain():
    with pytest.raises(DomainError):
        schur_bounds(0, default_grid())

import numpy as np
import pytest

from bgforms.exterior import codifferential, d_array, exterior_derivative
from bgforms.fields import FormField, TorusGrid, random_lowfreq_form
from bgforms.series import FormPair
from bgforms.solver import (Geometry, IndicialData, NumericalGuardError, extract_absolute, indicial_solve,
                            operator_Gk, operator_Lk, operator_Qk)

G4 = TorusGrid(4, (8, 8, 8, 8))
FLAT4 = Geometry.flat(G4)


@pytest.mark.parametrize("n,k,ell", [(4, 0, 1), (4, 0, 2), (4, 1, 1), (6, 0, 3), (6, 1, 1), (6, 2, 1)])
def test_indicial_roots(n, k, ell):
    idx = IndicialData(n, k, ell)
    for r in idx.tangential_roots:
        assert abs(idx.D_t(r)) < 1e-12
    for r in idx.normal_roots:
        assert abs(idx.D_n(r)) < 1e-9
    assert idx.shift == n // 2 - k - ell


def test_ell_out_of_range():
    with pytest.raises(ValueError):
        IndicialData(4, 1, 2)
    with pytest.raises(ValueError):
        IndicialData(4, 0, 0)


def test_indicial_solve_inverts_block():
    idx = IndicialData(6, 2, 1)
    g = TorusGrid(6, (8,) * 6)
    rt = random_lowfreq_form(g, 2, 1, 1)
    rn = random_lowfreq_form(g, 1, 1, 2)
    j = 1
    c = indicial_solve(j, FormPair(rt, rn), idx)
    assert np.allclose(idx.D_n(j) * c.n_part.components, -rn.components, atol=1e-12)
    lhs = idx.D_t(j) * c.t_part.components - 2 * d_array(c.n_part.components, 6, 1)
    assert np.allclose(lhs, -rt.components, atol=1e-11)


def test_indicial_root_guard():
    idx = IndicialData(4, 0, 1)
    r = FormPair(random_lowfreq_form(G4, 0, 1, 0), None)
    with pytest.raises(NumericalGuardError):
        indicial_solve(2, r, idx)


def test_flat_L01_on_eigenfunction():
    y1, y2 = G4.coordinate(0), G4.coordinate(1)
    f = FormField(G4, 0, np.broadcast_to(np.sin(y1 + 2 * y2), G4.sizes)[None])
    out = operator_Lk(f, FLAT4, ell=1)
    assert np.max(np.abs(out.components - 2.5 * f.components)) <= 1e-10


def test_critical_L1_flat_is_half_delta_d():
    w = random_lowfreq_form(G4, 1, 2, 4)
    want = codifferential(exterior_derivative(w), FLAT4.metric) * 0.5
    got = operator_Lk(w, FLAT4)
    assert np.max(np.abs(got.components - want.components)) <= 1e-8 * want.max_abs()


def test_top_G_is_codifferential():
    w = random_lowfreq_form(G4, 2, 2, 5)
    np.testing.assert_array_equal(operator_Gk(w, FLAT4).components,
                                  -codifferential(w, FLAT4.metric).components)


def test_Q_rejects_non_closed_input():
    with pytest.raises(ValueError):
        operator_Qk(random_lowfreq_form(G4, 1, 2, 6), FLAT4)


def test_extraction_deterministic():
    w = random_lowfreq_form(G4, 1, 2, 8)
    a = extract_absolute(w, FLAT4)
    b = extract_absolute(w, FLAT4)
    for name in ("Lk_ell", "Bk", "Ck", "Dk", "Gk"):
        assert a[name].components.tobytes() == b[name].components.tobytes()


def test_C_vanishes_on_flat_torus():
    w = random_lowfreq_form(G4, 1, 2, 9)
    assert extract_absolute(w, FLAT4)["Ck"].max_abs() <= 1e-10 * w.max_abs()

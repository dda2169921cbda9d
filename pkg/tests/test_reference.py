from fractions import Fraction

import numpy as np
import pytest

from bgforms.curvature import compute_curvature
from bgforms.exterior import Metric, codifferential, exterior_derivative
from bgforms.fields import TorusGrid, random_lowfreq_form
from bgforms.reference import ConstantTable, c_k, c_k_ell, principal_constant, ref_dim4, ref_generic


@pytest.mark.parametrize("n", [4, 6, 8, 10])
def test_critical_normalization_coincides(n):
    for k in range(n // 2):
        assert c_k_ell(n, k, n // 2 - k) == c_k(n, k)


def test_n4_k1_value():
    assert c_k_ell(4, 1, 1) == 16 and c_k(4, 1) == 16
    assert isinstance(c_k(4, 1), Fraction)


@pytest.mark.parametrize("n", [4, 6])
def test_lell_principal_part_reduces_to_critical(n):
    for k in range(n // 2):
        q = n // 2 - k
        a, b = principal_constant("Lell", n, k, q)
        assert a == principal_constant("L", n, k)
        assert b == 0


def test_half_delta_d_constant():
    for n in (4, 6, 8):
        assert principal_constant("L", n, n // 2 - 1) == Fraction(1, 2)


def test_constant_table_rows():
    rows = list(ConstantTable(6).rows())
    assert len(rows) == 3 + 2 + 1
    assert all((r["c_k"] is None) == (r["ell"] != 3 - r["k"]) for r in rows)


def test_dim4_L1_flat_is_half_delta_d():
    g = TorusGrid(4, (8, 8, 8, 8))
    curv = compute_curvature(Metric.flat(g))
    w = random_lowfreq_form(g, 1, 2, 0)
    want = codifferential(exterior_derivative(w), curv.metric) * 0.5
    got = ref_dim4("L1", w, curv)
    assert np.max(np.abs(got.components - want.components)) <= 1e-12 * want.max_abs()


def test_unknown_names_rejected():
    g = TorusGrid(4, (8, 8, 8, 8))
    curv = compute_curvature(Metric.flat(g))
    with pytest.raises(ValueError):
        ref_dim4("X9", random_lowfreq_form(g, 1, 1, 0), curv)
    with pytest.raises(ValueError):
        principal_constant("Z", 4, 0)


def test_Q0_reference_is_linear_on_constants():
    from bgforms.curvature import TrigExpression, conformal_metric
    from bgforms.fields import FormField
    g = TorusGrid(4, (16, 8, 8, 8))
    phi = TrigExpression.from_list([{"amplitude": 0.1, "mode": [1, 0, 0, 0]}])
    curv = compute_curvature(conformal_metric(phi.sample(g)))
    one = FormField(g, 0, np.ones((1, 1, 1, 1, 1)))
    a = ref_dim4("Q0", one, curv)
    b = ref_dim4("Q0", one * 2.5, curv)
    assert np.allclose(b.components, 2.5 * a.components, rtol=0, atol=1e-15)
    with pytest.raises(ValueError):
        ref_dim4("Q0", random_lowfreq_form(g, 0, 1, 0), curv)

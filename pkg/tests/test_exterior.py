import numpy as np
import pytest
import sympy as sp
from hypothesis import assume, given, settings, strategies as st

from bgforms.curvature import TrigExpression, conformal_metric
from bgforms.exterior import (Metric, codifferential, exterior_derivative, form_laplacian, hodge_star,
                              interior_product, inverse_hodge_star, j_operator, wedge)
from bgforms.fields import FormField, TensorField, TorusGrid, quadrature_inner, random_lowfreq_form

G4 = TorusGrid(4, (8, 8, 8, 8))
PHI = TrigExpression.from_list([{"amplitude": 0.1, "mode": [1, 0, 0, 0]},
                                {"amplitude": 0.05, "mode": [0, 1, 0, 0], "phase": "cos"}])
CONF = conformal_metric(PHI.sample(G4))


def _sheared_metric(grid):
    """A non-conformal smooth metric, to exercise off-diagonal minors."""
    y1 = grid.coordinate(0)
    n = grid.n
    h = np.broadcast_to(np.eye(n).reshape((n, n) + (1,) * n), (n, n) + y1.shape).copy()
    h[0, 1] = h[1, 0] = 0.2 * np.cos(y1)
    h[2, 2] = 1.0 + 0.1 * np.sin(y1)
    return Metric.from_tensor(TensorField(grid, 2, h, symmetric=True))


METRICS = {"flat": Metric.flat(G4), "conformal": CONF, "sheared": _sheared_metric(G4)}


def _rel(a, b):
    return np.max(np.abs(a.components - b.components)) / max(a.max_abs(), b.max_abs(), 1.0)


@pytest.mark.parametrize("k", range(3))
def test_dd_zero(k):
    w = random_lowfreq_form(G4, k, 2, k)
    assert exterior_derivative(exterior_derivative(w)).max_abs() <= 1e-10 * w.max_abs()


@pytest.mark.parametrize("name", list(METRICS))
@pytest.mark.parametrize("k", [2, 3, 4])
def test_delta_delta_zero(name, k):
    w = random_lowfreq_form(G4, k, 2, 10 + k)
    m = METRICS[name]
    ddw = codifferential(codifferential(w, m), m)
    assert ddw.max_abs() <= 1e-8 * codifferential(w, m).max_abs()


@pytest.mark.parametrize("name", list(METRICS))
@pytest.mark.parametrize("k", range(4))
def test_adjointness(name, k):
    m = METRICS[name]
    a = random_lowfreq_form(G4, k, 2, 20 + k)
    b = random_lowfreq_form(G4, k + 1, 2, 30 + k)
    da, db = exterior_derivative(a), codifferential(b, m)
    lhs, rhs = quadrature_inner(da, b, m), quadrature_inner(a, db, m)
    scale = np.sqrt(quadrature_inner(da, da, m) * quadrature_inner(b, b, m))
    assert abs(lhs - rhs) <= 1e-8 * scale


@pytest.mark.parametrize("name", list(METRICS))
@pytest.mark.parametrize("k", range(5))
def test_star_star(name, k):
    m = METRICS[name]
    w = random_lowfreq_form(G4, k, 2, 40 + k)
    ss = hodge_star(hodge_star(w, m), m)
    assert _rel(ss, w * float((-1) ** (k * (4 - k)))) <= 1e-12
    assert _rel(inverse_hodge_star(hodge_star(w, m), m), w) <= 1e-12


def test_star_pairing_gives_inner_product():
    m = CONF
    a = random_lowfreq_form(G4, 2, 2, 1)
    b = random_lowfreq_form(G4, 2, 2, 2)
    top = wedge(a, hodge_star(b, m))
    integral = float(np.sum(np.broadcast_to(top.components[0], G4.sizes)) * G4.cell_volume)
    assert abs(integral - quadrature_inner(a, b, m)) <= 1e-10 * abs(integral)


def test_flat_laplacian_eigenform():
    y1, y2 = G4.coordinate(0), G4.coordinate(1)
    w = FormField.from_dict(G4, 1, {(2,): np.sin(2 * y1) * np.cos(y2)})
    lap = form_laplacian(w, Metric.flat(G4))
    assert _rel(lap, w * 5.0) <= 1e-12


@given(p=st.integers(0, 2), q=st.integers(0, 2), seed=st.integers(0, 1000))
@settings(max_examples=15, deadline=None)
def test_leibniz(p, q, seed):
    assume(p + q <= 3)
    a = random_lowfreq_form(G4, p, 1, seed)
    b = random_lowfreq_form(G4, q, 1, seed + 1)
    lhs = exterior_derivative(wedge(a, b))
    rhs = wedge(exterior_derivative(a), b) + wedge(a, exterior_derivative(b)) * float((-1) ** p)
    assert _rel(lhs, rhs) <= 1e-10


def test_cartan_formula_constant_field():
    v = np.zeros((4, 1, 1, 1, 1))
    v[0], v[2] = 1.0, -0.5
    w = random_lowfreq_form(G4, 2, 2, 5)
    lie = exterior_derivative(interior_product(v, w)) + interior_product(v, exterior_derivative(w))
    from bgforms.fields import partial_array
    want = FormField(G4, 2, partial_array(w.components, 0, 4) - 0.5 * partial_array(w.components, 2, 4))
    assert _rel(lie, want) <= 1e-10


def test_j_identity_counts_degree():
    eye = TensorField(G4, 2, np.eye(4).reshape(4, 4, 1, 1, 1, 1), symmetric=True)
    w = random_lowfreq_form(G4, 3, 1, 0)
    assert _rel(j_operator(eye, 3, Metric.flat(G4)).apply(w), w * 3.0) <= 1e-14


def test_codifferential_matches_symbolic_divergence():
    """delta of a 1-form on (T^2, e^{2 phi} delta) equals -e^{-2 phi} div(w)."""
    y1, y2 = sp.symbols("y1 y2")
    phi = sp.Rational(1, 5) * sp.sin(y1) + sp.Rational(1, 10) * sp.cos(y2)
    w1, w2 = sp.sin(y2) * sp.cos(y1), sp.cos(2 * y1)
    expr = -sp.exp(-2 * phi) * (sp.diff(w1, y1) + sp.diff(w2, y2))
    f = sp.lambdify((y1, y2), expr, "numpy")
    g = TorusGrid(2, (32, 32))
    a, b = g.coordinate(0), g.coordinate(1)
    ph = TrigExpression.from_list([{"amplitude": 0.2, "mode": [1, 0]}, {"amplitude": 0.1, "mode": [0, 1], "phase": "cos"}])
    w = FormField(g, 1, np.stack(np.broadcast_arrays(np.sin(b) * np.cos(a), np.cos(2 * a) + 0 * b)))
    got = codifferential(w, conformal_metric(ph.sample(g))).components[0]
    want = np.broadcast_to(f(a, b), g.sizes)
    assert np.max(np.abs(got - want)) <= 1e-10

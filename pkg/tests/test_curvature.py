import numpy as np
import pytest
import sympy as sp

from bgforms.curvature import TrigExpression, compute_curvature, conformal_metric, fd_ricci_check, fg_metric_series
from bgforms.exterior import Metric
from bgforms.fields import TorusGrid, partial_array

PHI4 = TrigExpression.from_list([{"amplitude": 0.1, "mode": [1, 0, 0, 0]},
                                 {"amplitude": 0.05, "mode": [0, 1, 0, 0], "phase": "cos"}])
G4 = TorusGrid(4, (32, 32, 8, 8))


@pytest.fixture(scope="module")
def curv4():
    return compute_curvature(conformal_metric(PHI4.sample(G4)))


def test_flat_curvature_vanishes():
    c = compute_curvature(Metric.flat(TorusGrid(4, (8, 8, 8, 8))))
    for name in ("riemann", "ricci", "schouten", "cotton", "weyl", "bach"):
        assert np.all(getattr(c, name).components == 0), name
    assert np.all(c.scal.values == 0)


def test_scalar_curvature_closed_form(curv4):
    """Scal(e^{2 phi} delta) = -e^{-2 phi} (2(n-1) lap phi + (n-1)(n-2) |grad phi|^2)."""
    ys = sp.symbols("y1:5")
    phi = sp.Rational(1, 10) * sp.sin(ys[0]) + sp.Rational(1, 20) * sp.cos(ys[1])
    n = 4
    lap = sum(sp.diff(phi, y, 2) for y in ys)
    grad2 = sum(sp.diff(phi, y) ** 2 for y in ys)
    expr = -sp.exp(-2 * phi) * (2 * (n - 1) * lap + (n - 1) * (n - 2) * grad2)
    f = sp.lambdify(ys, expr, "numpy")
    want = np.broadcast_to(f(*[G4.coordinate(a) for a in range(4)]), G4.sizes)
    got = np.broadcast_to(curv4.scal.values, G4.sizes)
    assert np.max(np.abs(got - want)) <= 1e-10


def test_conformally_flat_has_no_weyl_cotton_bach(curv4):
    scale = np.max(np.abs(curv4.riemann.components))
    for name in ("weyl", "cotton", "bach"):
        assert np.max(np.abs(getattr(curv4, name).components)) <= 1e-9 * scale, name


def test_ricci_matches_finite_differences(curv4):
    idx = [(0, 0, 0, 0), (5, 11, 3, 2), (17, 30, 7, 1)]
    pts = np.array([[G4.coordinate(a).ravel()[i[a]] for a in range(4)] for i in idx])
    fd, _ = fd_ricci_check(PHI4, 4, pts)
    ric = curv4.ricci.full()
    spec = np.stack([ric[(slice(None), slice(None)) + i] for i in idx])
    assert np.max(np.abs(fd - spec)) <= 1e-6 * np.max(np.abs(spec))


def test_contracted_bianchi(curv4):
    """nabla^a Ric_ab = d Scal / 2."""
    n = 4
    ric = curv4.ricci.full()
    hinv = curv4.metric.h_inv.full()
    g = np.broadcast_to(curv4.christoffel, (n, n, n) + G4.sizes)
    dric = np.stack([partial_array(ric, e, n) for e in range(n)])
    nab = dric - np.einsum("eab...,ec...->abc...", g, ric) - np.einsum("eac...,be...->abc...", g, ric)
    div = np.einsum("ab...,abc...->c...", hinv, nab)
    ds = np.stack([partial_array(np.broadcast_to(curv4.scal.values, G4.sizes), e, n) for e in range(n)])
    assert np.max(np.abs(div - 0.5 * ds)) <= 1e-9 * np.max(np.abs(ds))


def test_fg_series_conformally_flat_closed_form(curv4):
    """For conformally flat h0 the exact expansion is h0 (1 - x^2 P/2)^2."""
    ms = fg_metric_series(curv4)
    P = curv4.schouten
    want = curv4.square(P).components / 4.0
    assert np.max(np.abs(ms.coeffs[4].components - want)) <= 1e-14 * np.max(np.abs(want))
    assert np.array_equal(ms.coeffs[2].components, -P.components)


def test_fg_series_dim6_has_vanishing_h3_when_conformally_flat():
    g = TorusGrid(6, (16, 8, 8, 8, 8, 8))
    phi = TrigExpression.from_list([{"amplitude": 0.1, "mode": [1, 0, 0, 0, 0, 0]}])
    c = compute_curvature(conformal_metric(phi.sample(g)))
    ms = fg_metric_series(c)
    assert ms.order == 6
    assert np.max(np.abs(ms.coeffs[6].components)) <= 1e-10


def test_trig_expression_rejects_bad_phase():
    with pytest.raises(ValueError):
        TrigExpression.from_list([{"amplitude": 1.0, "mode": [1, 0], "phase": "tan"}])

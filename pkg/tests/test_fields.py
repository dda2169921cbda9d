import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bgforms.fields import (FormField, ScalarField, TensorField, TorusGrid, lowfreq_spectrum, multi_indices,
                            partial_array, quadrature_inner, random_lowfreq_form, read_fbin, spectral_partial,
                            synthesize, write_fbin)


def test_grid_rejects_bad_sizes():
    with pytest.raises(ValueError):
        TorusGrid(4, (8, 8, 8, 6))
    with pytest.raises(ValueError):
        TorusGrid(3, (8, 8, 8))
    with pytest.raises(ValueError):
        TorusGrid(4, (8, 8, 8))


def test_multi_index_order():
    assert multi_indices(4, 2) == ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


@given(m=st.integers(0, 3), order=st.integers(1, 4), axis=st.integers(0, 1))
@settings(max_examples=30, deadline=None)
def test_spectral_derivative_exact_on_trig(m, order, axis):
    g = TorusGrid(2, (8, 16))
    y = g.coordinate(axis)
    f = np.broadcast_to(np.sin(m * y + 0.3), g.sizes)
    got = partial_array(f, axis, 2, order)
    want = m**order * np.sin(m * y + 0.3 + order * np.pi / 2)
    assert np.max(np.abs(got - want)) <= 1e-11 * max(1, m**order)


def test_compact_axis_derivative_is_zero():
    g = TorusGrid(2, (8, 8))
    f = ScalarField(g, np.sin(g.coordinate(0)))
    assert f.values.shape == (8, 1)
    assert np.all(spectral_partial(f, 1).values == 0)
    np.testing.assert_allclose(spectral_partial(f, 0).values, np.cos(g.coordinate(0)), atol=1e-13)


def test_nonfinite_input_rejected():
    g = TorusGrid(2, (8, 8))
    with pytest.raises(ValueError):
        ScalarField(g, np.full((8, 8), np.nan))


def test_random_form_deterministic_and_band_limited():
    g = TorusGrid(4, (8, 8, 8, 8))
    a = random_lowfreq_form(g, 2, 2, seed=7)
    b = random_lowfreq_form(g, 2, 2, seed=7)
    assert np.array_equal(a.components, b.components)
    spec = np.fft.fftn(a.components, axes=range(1, 5))
    m = np.fft.fftfreq(8, 1 / 8)
    mask = np.ones((8,) * 4, bool)
    for ax in range(4):
        sh = [1] * 4
        sh[ax] = 8
        mask &= (np.abs(m) <= 2).reshape(sh)
    assert np.max(np.abs(spec[:, ~mask])) < 1e-9 * np.max(np.abs(spec))


def test_random_form_mode_bound_enforced():
    with pytest.raises(ValueError):
        random_lowfreq_form(TorusGrid(4, (8, 8, 8, 8)), 1, 3, 0)


def test_synthesize_derivative_matches_spectral():
    g = TorusGrid(4, (8, 8, 8, 8))
    spec = lowfreq_spectrum(g, 1, 2, 3)
    w = synthesize(spec)
    dw = synthesize(spec, derivative=(2, 1))
    np.testing.assert_allclose(partial_array(w.components, 2, 4), dw.components, atol=1e-11)


def test_quadrature_exact_for_trig_products():
    g = TorusGrid(2, (8, 8))
    y1, y2 = g.coordinate(0), g.coordinate(1)
    a = FormField(g, 0, (np.sin(y1) * np.cos(2 * y2))[None])
    assert abs(quadrature_inner(a, a) - np.pi**2) < 1e-12


@given(kind=st.sampled_from(["scalar", "tensor", "form"]), seed=st.integers(0, 2**16))
@settings(max_examples=20, deadline=None)
def test_fbin_round_trip_bit_exact(kind, seed):
    g = TorusGrid(2, (4, 8))
    rng = np.random.default_rng(seed)
    if kind == "scalar":
        f = ScalarField(g, rng.standard_normal(g.sizes))
    elif kind == "tensor":
        f = TensorField(g, 2, rng.standard_normal((2, 2) + g.sizes))
    else:
        f = FormField(g, 1, rng.standard_normal((2,) + g.sizes))
    buf = io.BytesIO()
    write_fbin(f, buf)
    buf.seek(0)
    back = read_fbin(buf)
    assert type(back) is type(f)
    arr = f.values if kind == "scalar" else f.components
    barr = back.values if kind == "scalar" else back.components
    assert arr.tobytes() == barr.tobytes()


def test_fbin_rejects_foreign_header():
    with pytest.raises(ValueError):
        read_fbin(io.BytesIO(b'{"format": "X"}\n'))


def test_relaxed_bound_allows_mode_below_nyquist():
    g = TorusGrid(4, (8, 8, 8, 8))
    w = random_lowfreq_form(g, 1, 3, 0, strict=False)
    assert w.components.shape == (4, 8, 8, 8, 8)
    with pytest.raises(ValueError):
        random_lowfreq_form(g, 1, 4, 0, strict=False)

"""Closed-form operators in dimensions 4 and 6, general low-order formulas and normalization constants.

Every formula is written with the positive Hodge Laplacian of :mod:`bgforms.exterior`,
``j(H) = J(h^{-1} H)`` and ``tr`` taken with respect to ``h``.  Scalars inside ``j``
stand for the scalar times ``h`` (so ``j(Scal h) = k Scal`` on k-forms).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial, prod

import numpy as np

from .curvature import CurvatureData, _contract
from .exterior import codifferential, exterior_derivative, form_laplacian, j_operator
from .fields import FormField, ScalarField, TensorField, partial_array

__all__ = [
    "c_k_ell",
    "c_k",
    "ConstantTable",
    "principal_constant",
    "a_sequence",
    "b_sequence",
    "ref_dim4",
    "ref_dim6",
    "ref_generic",
    "DIM6_PREFACTORS",
]


# ---------------------------------------------------------------------------
# constants


def c_k_ell(n: int, k: int, ell: int) -> Fraction:
    """c_k^ell = (-4)^ell (ell-1)! (ell+1)! (k - n/2 - ell), exact."""
    return Fraction((-4) ** ell * factorial(ell - 1) * factorial(ell + 1)) * (Fraction(k) - Fraction(n, 2) - ell)


def c_k(n: int, k: int) -> Fraction:
    """c_k = (-1)^(q-1) 2^(2q+1) (q!)^2 (q+1) with q = n/2 - k."""
    q = n // 2 - k
    return Fraction((-1) ** (q - 1) * 2 ** (2 * q + 1) * factorial(q) ** 2 * (q + 1))


def a_sequence(n: int, k: int, m: int) -> Fraction:
    """Flat-metric coefficient a_m: a_{2i} multiplies (delta d)^i, a_{2i+1} multiplies (delta d)^i delta."""
    i, odd = divmod(m, 2)
    if odd:
        den = 2**i * factorial(i) * prod(2 * k + 2 * j - n for j in range(0, i + 1))
        return Fraction((-1) ** (k + 1), den)
    den = 2**i * factorial(i) * prod(2 * k + 2 * j - n for j in range(1, i + 1))
    return Fraction(1, den)


def b_sequence(n: int, k: int, m: int) -> Fraction:
    """Flat-metric coefficient b_{2i} of (d delta)^i."""
    i = m // 2
    den = 2**i * factorial(i) * prod(2 * k + 2 * j - n for j in range(0, i))
    return Fraction(1, den)


def principal_constant(name: str, n: int, k: int, ell: int | None = None) -> Fraction | tuple[Fraction, Fraction]:
    """Flat-metric constants.

    ``L``: coefficient of (delta d)^q in L_k; ``G``: of (delta d)^q delta in G_k;
    ``Q``: of Delta^q in Q_k (q = n/2 - k); ``Lell``: the pair of coefficients of
    ((delta d)^ell, (d delta)^ell) in L_k^ell.
    """
    q = n // 2 - k
    if name == "L":
        return Fraction((-1) ** (q + 1) * (n - 2 * k), 2 ** (2 * q) * factorial(q) ** 2)
    if name == "G":
        return Fraction((-1) ** (n // 2 + 1), 2 ** (2 * q) * factorial(q) ** 2)
    if name == "Q":
        return Fraction((-1) ** (q + 1) * (n - 2 * k), 2 ** (2 * q) * factorial(q) ** 2)
    if name == "Lell":
        c = Fraction((-1) ** (ell + 1) * ell, 2 ** (2 * ell - 1) * factorial(ell) ** 2)
        return c, c * Fraction(n - 2 * k - 2 * ell, n - 2 * k + 2 * ell)
    raise ValueError(f"unknown principal part {name!r}")


@dataclass(frozen=True)
class ConstantTable:
    """Normalization and principal-part constants for one dimension."""

    n: int

    def c(self, k: int, ell: int | None = None) -> Fraction:
        return c_k(self.n, k) if ell is None else c_k_ell(self.n, k, ell)

    def rows(self):
        n = self.n
        for k in range(n // 2):
            for ell in range(1, n // 2 - k + 1):
                yield {"n": n, "k": k, "ell": ell, "c_k_ell": c_k_ell(n, k, ell),
                       "c_k": c_k(n, k) if ell == n // 2 - k else None}


# ---------------------------------------------------------------------------
# operator building blocks


class _Ops:
    def __init__(self, curv: CurvatureData):
        self.curv = curv
        self.m = curv.metric
        self.h = curv.metric.h

    def d(self, w):
        return exterior_derivative(w)

    def de(self, w):
        return codifferential(w, self.m)

    def dd(self, w):
        """d delta, zero on functions."""
        return w * 0.0 if w.degree == 0 else self.d(self.de(w))

    def lap(self, w):
        return form_laplacian(w, self.m)

    def j(self, T: TensorField, w: FormField) -> FormField:
        return j_operator(T, w.degree, self.m).apply(w)

    def tens(self, *terms) -> TensorField:
        """Sum of (coefficient, tensor-or-scalar) terms; scalars are multiplied by h."""
        out = None
        for c, t in terms:
            if isinstance(t, ScalarField):
                t = self.h * (t * c)
            else:
                t = t * c
            out = t if out is None else out + t
        return out

    def scal_times(self, c, w):
        return w * (self.curv.scal * c)


def _check_dim(curv: CurvatureData, w: FormField, n: int):
    if curv.n != n or w.grid.n != n:
        raise ValueError(f"formula is for dimension {n}")


def _scalar_form(grid, values) -> FormField:
    return FormField(grid, 0, np.asarray(values)[None])


def _constant_value(w: FormField) -> float:
    """Q_0 acts on closed 0-forms, i.e. constants."""
    v = w.components
    if w.degree != 0 or np.ptp(v) > 1e-12 * max(1.0, float(np.max(np.abs(v)))):
        raise ValueError("Q0 is defined on constant functions only")
    return float(v.flat[0])


# ---------------------------------------------------------------------------
# dimension 4


def ref_dim4(name: str, w: FormField, curv: CurvatureData) -> FormField:
    """L1, G1, Q1, L0, Q0, G0 on a four-manifold (Q0 ignores ``w`` beyond its grid)."""
    _check_dim(curv, w, 4)
    o = _Ops(curv)
    ric, scal = curv.ricci, curv.scal

    def yam(u):  # Delta - 2 j(Ric) + 2/3 Scal
        return o.lap(u) - o.j(ric, u) * 2.0 + o.scal_times(2.0 / 3.0, u)

    if name == "L1":
        return o.de(o.d(w)) * 0.5
    if name == "G1":
        return o.de(yam(w)) * -0.25
    if name == "Q1":
        return yam(w) * 0.5
    if name == "L0":
        return o.de(yam(o.d(w))) * (-1.0 / 16.0)
    if name == "G0":
        return FormField.zeros(w.grid, max(w.degree - 1, 0))
    if name == "Q0":
        lap_s = o.lap(scal.as_form()).components[0]
        ric2 = curv.pairing(ric, ric).values
        return _scalar_form(w.grid, -_constant_value(w) * (lap_s - 3.0 * ric2 + scal.values**2) / 24.0)
    raise ValueError(f"unknown dimension-4 operator {name!r}")


# ---------------------------------------------------------------------------
# dimension 6

# Overall prefactors of the fourth-order displays (Q1, G1, L0).  "literal" is the
# displayed value; "consistent" is the value forced by the flat principal parts
# and by the factorizations L0 = -delta Q1 d/24, G1 = -delta Q1/4.
DIM6_PREFACTORS = {
    "literal": {"Q1": -1.0 / 4.0, "G1": 1.0 / 16.0, "L0": 1.0 / 96.0},
    "consistent": {"Q1": -1.0 / 16.0, "G1": 1.0 / 64.0, "L0": 1.0 / 384.0},
}


def _hessian(curv: CurvatureData, f: np.ndarray) -> TensorField:
    n = curv.n
    grad = np.stack([partial_array(f, a, n) for a in range(n)])
    hess = np.stack([np.stack([partial_array(grad[b], a, n) for b in range(n)]) for a in range(n)])
    hess = hess - _contract("cab...,c...->ab...", curv.christoffel, grad)
    return TensorField(curv.grid, 2, hess, symmetric=True)


def _fourth_order_bracket(o: _Ops, w: FormField, kind: str) -> FormField:
    """Bracket of the dimension-6 Q1 / G1 / L0 displays."""
    curv = o.curv
    ric, scal, bach = curv.ricci, curv.scal, curv.bach
    T1 = o.tens((1.0, ric), (-0.3, scal))
    T2 = o.tens((2.0, ric), (-0.6, scal))
    T3 = o.tens((2.0, bach), (-1.0, curv.trace(bach)), (0.75, curv.square(ric)),
                (-3.2, ric * scal), (4.49, scal * scal))
    if kind == "Q1":
        # Delta^2 - d delta j(T1)/2 - j(T2) Delta - d Scal delta/20 + j(T3)
        return (o.lap(o.lap(w)) - o.d(o.de(o.j(T1, w))) * 0.5 - o.j(T2, o.lap(w))
                - o.d(o.scal_times(1.0, o.de(w))) * 0.05 + o.j(T3, w))
    if kind == "G1":
        return (o.de(o.lap(o.lap(w))) - o.de(o.d(o.de(o.j(T1, w)))) * 0.5 - o.de(o.j(T2, o.lap(w)))
                - o.de(o.d(o.scal_times(1.0, o.de(w)))) * 0.05 + o.de(o.j(T3, w)))
    if kind == "L0":
        dw = o.d(w)
        return (o.de(o.d(o.de(o.d(o.de(dw))))) - o.de(o.d(o.de(o.j(T1, dw)))) * 0.5
                - o.de(o.j(T2, o.d(o.de(dw)))) - o.de(o.d(o.scal_times(1.0, o.de(dw)))) * 0.05
                + o.de(o.j(T3, dw)))
    raise ValueError(kind)


def ref_dim6(name: str, w: FormField, curv: CurvatureData, prefactors: str = "literal") -> FormField:
    """L2, G2, Q2, L1, G1, Q1, L0, G0, Q0 on a six-manifold.

    ``prefactors`` selects the overall constants of G1, Q1 and L0 (see
    :data:`DIM6_PREFACTORS`); the brackets are the same in both variants.
    """
    _check_dim(curv, w, 6)
    o = _Ops(curv)
    ric, scal = curv.ricci, curv.scal

    def yam(u):  # Delta - j(Ric) + 2/5 Scal
        return o.lap(u) - o.j(ric, u) + o.scal_times(0.4, u)

    if name == "L2":
        return o.de(o.d(w)) * 0.5
    if name == "G2":
        return o.de(yam(w)) * 0.25
    if name == "Q2":
        return yam(w) * 0.5
    if name == "L1":
        return o.de(yam(o.d(w))) * (-1.0 / 16.0)
    if name in ("Q1", "G1", "L0"):
        return _fourth_order_bracket(o, w, name) * DIM6_PREFACTORS[prefactors][name]
    if name == "G0":
        return FormField.zeros(w.grid, max(w.degree - 1, 0))
    if name == "Q0":
        S = scal.values
        lap = lambda f: o.lap(_scalar_form(w.grid, f)).components[0]
        P, B = curv.schouten, curv.bach
        Pm = curv.raised_schouten()
        trB = curv.trace(B).values
        P2 = curv.pairing(P, P).values
        P3 = _contract("ab...,bc...,ca...->...", Pm, Pm, Pm)
        hess = _hessian(curv, S)
        val = (lap(lap(S)) + S * lap(S) + 2.0 * curv.pairing(ric, hess).values - 20.0 * lap(trB)
               - 40.0 * lap(P2) + 0.08 * S**3 - 12.0 * S * trB - 80.0 * P3
               - 80.0 * curv.pairing(P, B).values) / 640.0
        return _scalar_form(w.grid, _constant_value(w) * val)
    raise ValueError(f"unknown dimension-6 operator {name!r}")


# ---------------------------------------------------------------------------
# general n


def _power(op, w, times):
    for _ in range(times):
        w = op(w)
    return w


def ref_generic(name: str, w: FormField, curv: CurvatureData, n: int, k: int, ell: int | None = None,
                variant: str = "literal") -> FormField:
    """General-dimension closed forms.

    Names: ``G_top`` (G_{n/2-1}), ``L_sub`` (L_{n/2-2}), ``Q_top`` (Q_{n/2-1}),
    ``L_ell1`` and ``L_ell2`` (L_k^1, L_k^2), and the flat principal parts
    ``principal_L``, ``principal_G``, ``principal_Q``, ``principal_Lell``.

    ``variant="consistent"`` changes two coefficients of the L_k^1, L_k^2
    displays: the Scal weight of L_k^1 becomes (n+2k-2)(n-2k-2)/(8(n-1)(n-2))
    and the ``j(P) Delta`` term of L_k^2 becomes ``j#(P) Delta``.  Both
    variants agree whenever the changed terms vanish (k = 0 for L^1; n - 2k = 4 for L^2).
    """
    if variant not in ("literal", "consistent"):
        raise ValueError(f"unknown variant {variant!r}")
    if curv.n != n or w.grid.n != n:
        raise ValueError("dimension mismatch")
    if w.degree != k:
        raise ValueError(f"expected a {k}-form")
    o = _Ops(curv)
    ric, scal = curv.ricci, curv.scal
    q = n // 2 - k
    if name == "G_top":
        if k != n // 2 - 1:
            raise ValueError("G_top needs k = n/2 - 1")
        inner = o.j(ric, w) * (1.0 / (n - 2)) - o.scal_times(1.0 / (2 * (n - 1)), w)
        return o.de(o.d(o.de(w))) * ((-1) ** (n // 2 + 1) / 4.0) + o.de(inner) * float((-1) ** (n // 2))
    if name == "L_sub":
        if k != n // 2 - 2:
            raise ValueError("L_sub needs k = n/2 - 2")
        dw = o.d(w)
        inner = (o.d(o.de(dw)) * (1.0 / 16.0) - o.j(ric, dw) * (1.0 / (4 * (n - 2)))
                 + o.scal_times(1.0 / (8 * (n - 1)), dw))
        return -o.de(inner)
    if name == "Q_top":
        if k != n // 2 - 1:
            raise ValueError("Q_top needs k = n/2 - 1")
        return o.lap(w) * 0.5 - o.j(ric, w) * (2.0 / (n - 2)) + o.scal_times(1.0 / (n - 1), w)
    if name == "L_ell1":
        if not (k < n / 2 and q >= 1):
            raise ValueError("L_ell1 needs k < n/2")
        return (o.de(o.d(w)) * 0.5 + o.dd(w) * ((n - 2 * k - 2) / (2 * (n - 2 * k + 2)))
                + o.scal_times((n + (2 * k if variant == "consistent" else k) - 2) * (n - 2 * k - 2)
                               / (8 * (n - 1) * (n - 2)), w)
                - o.j(ric, w) * ((n - 2 * k - 2) / (2 * (n - 2))))
    if name == "L_ell2":
        if q < 2:
            raise ValueError("L_ell2 needs n/2 - k >= 2")
        return _l_ell2(o, w, n, k, sharp_left=variant == "consistent")
    if name.startswith("principal_"):
        return _principal(name[len("principal_"):], o, w, n, k, ell)
    raise ValueError(f"unknown operator {name!r}")


def _jsharp(o: _Ops, H: TensorField, w: FormField) -> FormField:
    return o.j(H, w) * 2.0 - w * o.curv.trace(H)


def _l_ell2(o: _Ops, w: FormField, n: int, k: int, sharp_left: bool = False) -> FormField:
    """L_k^2 with the (n-2k-4) prefactor distributed so that n - 2k = 4 is regular."""
    curv = o.curv
    P = curv.schouten
    m = n - 2 * k - 4
    H2 = curv.square(P)
    if n != 4:
        H2 = H2 + curv.bach * (1.0 / (n - 4))
    js = lambda u: _jsharp(o, P, u)
    dl = lambda u: o.de(o.d(u))
    inner = dl(dl(w)) - o.de(js(o.d(w))) * 2.0
    if k > 0:
        inner = inner + o.dd(o.dd(w)) * (m / (n - 2 * k + 4)) + o.d(js(o.de(w))) * (2.0 * m / (n - 2 * k + 4))
    inner = (inner
             - ((js if sharp_left else (lambda u: o.j(P, u)))(o.lap(w)) + o.lap(js(w))) * (m / 2.0)
             + _jsharp(o, H2, w) * m + js(js(w)) * (m * (n - 2 * k) / 4.0))
    return inner * (-1.0 / 16.0)


def _principal(kind: str, o: _Ops, w: FormField, n: int, k: int, ell):
    q = n // 2 - k
    dl = lambda u: o.de(o.d(u))
    if kind == "L":
        return _power(dl, w, q) * float(principal_constant("L", n, k))
    if kind == "G":
        return _power(dl, o.de(w), q) * float(principal_constant("G", n, k))
    if kind == "Q":
        return _power(o.lap, w, q) * float(principal_constant("Q", n, k))
    if kind == "Lell":
        c1, c2 = principal_constant("Lell", n, k, ell)
        out = _power(dl, w, ell) * float(c1)
        if c2:
            out = out + _power(o.dd, w, ell) * float(c2)
        return out
    raise ValueError(f"unknown principal part {kind!r}")

"""Truncated series in the collar variable x and the collar operators d, delta_g, Delta.

A collar k-form is split as ``w = t + n ^ dx/x`` with ``t`` a k-form and ``n`` a
(k-1)-form on the boundary.  For the metric ``g = (dx^2 + h_x)/x^2`` one has

    d w      = (d t,  (-1)^k x d_x t + d n)
    delta_g w = (x^2 delta_x t + (-1)^k *_x^{-1} (2k-n-2 + x d_x) *_x n,  x^2 delta_x n)

where ``*_x`` and ``delta_x`` belong to ``h_x`` on the boundary.  Everything below
is assembled from these two block formulas; the Laplacian is ``d delta + delta d``.

Series coefficients are raw component arrays (``None`` meaning zero).  The
``shift`` of a :class:`LogSeriesForm` multiplies the whole series by ``x^shift``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exterior import _complement_signs, d_array, matvec
from .fields import FormField, TensorField, TorusGrid, multi_indices

__all__ = [
    "MetricSeries",
    "StarSeries",
    "FormPair",
    "LogSeriesForm",
    "star_series",
    "apply_d",
    "apply_delta",
    "apply_laplacian",
    "SeriesOverflow",
]

MAX_LOG = 2


class SeriesOverflow(RuntimeError):
    """Raised when a series operation would exceed the supported log grading."""


# ---------------------------------------------------------------------------
# scalar power series in t = x^2; a series is a list of arrays or None


def _add(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _ser_mul(a: list, b: list, T: int) -> list:
    out = [None] * (T + 1)
    for i, ai in enumerate(a[: T + 1]):
        if ai is None:
            continue
        for j, bj in enumerate(b[: T + 1 - i]):
            if bj is None:
                continue
            out[i + j] = _add(out[i + j], ai * bj)
    return out


def _ser_sqrt(a: list, T: int) -> list:
    s0 = np.sqrt(a[0])
    out = [s0] + [None] * T
    for i in range(1, T + 1):
        acc = a[i] if i < len(a) else None
        for j in range(1, i):
            if out[j] is not None and out[i - j] is not None:
                acc = _add(acc, -out[j] * out[i - j])
        out[i] = None if acc is None else acc / (2 * s0)
    return out


def _is_zero(arr) -> bool:
    return arr is None or not np.any(arr)


@dataclass(frozen=True, eq=False)
class MetricSeries:
    """Even expansion h_x = sum_j x^j coeffs[j] (j even) truncated at ``order``."""

    grid: TorusGrid
    coeffs: dict
    order: int

    def __post_init__(self):
        for j in self.coeffs:
            if j % 2 or j < 0 or j > self.order:
                raise ValueError(f"metric series coefficients must be even powers <= order, got {j}")
        if 0 not in self.coeffs:
            raise ValueError("leading coefficient h_0 missing")

    @property
    def T(self) -> int:
        return self.order // 2

    def entry_series(self, a: int, b: int) -> list:
        out = []
        for i in range(self.T + 1):
            c = self.coeffs.get(2 * i)
            v = None if c is None else c.components[a, b]
            out.append(None if _is_zero(v) else v)
        return out

    def inverse(self, order: int | None = None) -> dict:
        """Series of h_x^{-1}: ``{(a, b): [coeff of x^0, x^2, ...]}`` up to ``order``."""
        T = (self.order if order is None else order) // 2
        n = self.grid.n
        h0 = self.coeffs[0].components
        moved = np.moveaxis(h0, (0, 1), (-2, -1))
        G0 = np.moveaxis(np.linalg.inv(moved), (-2, -1), (0, 1))
        G = [G0]
        for i in range(1, T + 1):
            acc = None
            for a in range(1, i + 1):
                c = self.coeffs.get(2 * a)
                if c is None or _is_zero(c.components):
                    continue
                term = _mat(c.components, G[i - a])
                acc = _add(acc, term)
            G.append(None if acc is None else -_mat(G0, acc))
        return {(a, b): [None if (g is None or _is_zero(g[a, b])) else g[a, b] for g in G]
                for a in range(n) for b in range(n)}

    def as_tensor_series(self) -> dict:
        return dict(self.coeffs)


def _mat(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    shape = np.broadcast_shapes(a.shape[2:], b.shape[2:])
    out = np.zeros((n, n) + shape)
    for i in range(n):
        for j in range(n):
            if not np.any(a[i, j]):
                continue
            for l in range(n):
                out[i, l] += a[i, j] * b[j, l]
    return out


class _MinorCache:
    """Minors det(A[R, C]) of a matrix of scalar series, by first-row Laplace expansion."""

    def __init__(self, entries: dict, T: int):
        self.entries = entries
        self.T = T
        self.memo: dict = {}

    def __call__(self, R: tuple, C: tuple) -> list:
        key = (R, C)
        if key in self.memo:
            return self.memo[key]
        T = self.T
        if len(R) == 1:
            res = self.entries[(R[0], C[0])]
        else:
            res = [None] * (T + 1)
            r0 = R[0]
            for p, c in enumerate(C):
                e = self.entries[(r0, c)]
                if all(x is None for x in e):
                    continue
                sub = self(R[1:], C[:p] + C[p + 1:])
                if all(x is None for x in sub):
                    continue
                prod = _ser_mul(e, sub, T)
                for i in range(T + 1):
                    if prod[i] is not None:
                        res[i] = _add(res[i], prod[i] if p % 2 == 0 else -prod[i])
        self.memo[key] = res
        return res


@dataclass(eq=False)
class StarSeries:
    """Taylor coefficients of the Hodge star of h_x on every degree.

    ``coeff(m)[i]`` is the ``(C(n, n-m), C(n, m), *grid)`` matrix multiplying x^(2i)
    in the star on m-forms; ``inverse(m)`` is the series of the inverse star that
    maps (n-m)-forms back to m-forms.
    """

    metric_series: MetricSeries
    order: int
    _stars: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.order > self.metric_series.order:
            raise ValueError("star series order exceeds metric truncation")
        ms = self.metric_series
        T = self.order // 2
        n = ms.grid.n
        self._ginv = _MinorCache(ms.inverse(self.order), T)
        hser = {(a, b): ms.entry_series(a, b)[: T + 1] for a in range(n) for b in range(n)}
        det = _MinorCache(hser, T)(tuple(range(n)), tuple(range(n)))
        self._sqrt_det = _ser_sqrt(det, T)

    @property
    def grid(self) -> TorusGrid:
        return self.metric_series.grid

    @property
    def T(self) -> int:
        return self.order // 2

    def coeff(self, m: int) -> list:
        if m in self._stars:
            return self._stars[m]
        n = self.grid.n
        T = self.T
        rows = multi_indices(n, n - m)
        cols = multi_indices(n, m)
        comp = _complement_signs(n, m)
        gshape = None
        entries = {}
        for r, (ic, s) in enumerate(comp):
            I = multi_indices(n, m)[ic]
            for cidx, M in enumerate(cols):
                minor = self._ginv(I, M) if m > 0 else [np.ones((1,) * n)] + [None] * T
                ser = _ser_mul(self._sqrt_det, minor, T)
                for i in range(T + 1):
                    if ser[i] is not None and np.any(ser[i]):
                        entries[(r, cidx, i)] = s * ser[i]
        out = []
        for i in range(T + 1):
            items = {(r, c): v for (r, c, ii), v in entries.items() if ii == i}
            if not items:
                out.append(None)
                continue
            shape = np.broadcast_shapes(*(v.shape for v in items.values()), (1,) * n)
            mat = np.zeros((len(rows), len(cols)) + shape)
            for (r, c), v in items.items():
                mat[r, c] = v
            out.append(mat)
        self._stars[m] = out
        return out

    def inverse(self, m: int) -> list:
        """Series of the inverse star (n-m)-forms -> m-forms: (-1)^{m(n-m)} * on (n-m)-forms."""
        n = self.grid.n
        sign = (-1) ** (m * (n - m))
        return [None if c is None else sign * c for c in self.coeff(n - m)]

    def x_coefficient(self, m: int, j: int):
        """Coefficient of x^j (zero for odd j)."""
        if j % 2 or j // 2 > self.T:
            return None
        return self.coeff(m)[j // 2]

    def x_inverse_coefficient(self, m: int, j: int):
        if j % 2 or j // 2 > self.T:
            return None
        return self.inverse(m)[j // 2]


def star_series(ms: MetricSeries, k: int | None = None, order: int | None = None) -> StarSeries:
    """Star series of h_x; degrees are computed lazily, ``k`` is precomputed if given."""
    order = ms.order if order is None else order
    if order > ms.order:
        raise ValueError("requested order exceeds metric truncation")
    S = StarSeries(ms, order)
    if k is not None:
        S.coeff(k)
        S.coeff(ms.grid.n - k)
    return S


# ---------------------------------------------------------------------------
# collar forms


@dataclass(frozen=True, eq=False)
class FormPair:
    t_part: FormField
    n_part: FormField | None

    def __post_init__(self):
        if self.n_part is not None:
            if self.n_part.grid != self.t_part.grid:
                raise ValueError("pair components must share a grid")
            if self.n_part.degree != self.t_part.degree - 1:
                raise ValueError("normal part must have degree one less than the tangential part")


@dataclass(eq=False)
class LogSeriesForm:
    """x^shift * sum_{j,l} x^j log(x)^l (t_{jl} + n_{jl} ^ dx/x), truncated at j <= order."""

    grid: TorusGrid
    degree: int
    order: int
    shift: float = 0.0
    terms: dict = field(default_factory=dict)  # (j, l) -> [t array | None, n array | None]

    def _shape(self, deg):
        return (self.grid.ncomp(deg),) if 0 <= deg <= self.grid.n else (0,)

    def add(self, j: int, l: int, t=None, nrm=None) -> None:
        if j > self.order:
            return
        if l > MAX_LOG:
            raise SeriesOverflow(f"log power {l} exceeds the supported cap {MAX_LOG}")
        if j + self.shift < -1e-12:
            raise ValueError("negative total power")
        if t is None and nrm is None:
            return
        slot = self.terms.setdefault((j, l), [None, None])
        if t is not None and t.shape[0]:
            slot[0] = _add(slot[0], t)
        if nrm is not None and nrm.shape[0]:
            slot[1] = _add(slot[1], nrm)

    def get(self, j: int, l: int = 0):
        return self.terms.get((j, l), [None, None])

    def tangential(self, j: int, l: int = 0) -> FormField:
        t = self.get(j, l)[0]
        return FormField.zeros(self.grid, self.degree) if t is None else FormField(self.grid, self.degree, t)

    def normal(self, j: int, l: int = 0) -> FormField:
        if self.degree == 0:
            raise ValueError("0-forms have no normal part")
        v = self.get(j, l)[1]
        return FormField.zeros(self.grid, self.degree - 1) if v is None else FormField(self.grid, self.degree - 1, v)

    def pair(self, j: int, l: int = 0) -> FormPair:
        return FormPair(self.tangential(j, l), self.normal(j, l) if self.degree > 0 else None)

    def copy(self) -> "LogSeriesForm":
        return LogSeriesForm(self.grid, self.degree, self.order, self.shift,
                             {key: list(v) for key, v in self.terms.items()})

    def truncated(self, order: int) -> "LogSeriesForm":
        out = LogSeriesForm(self.grid, self.degree, order, self.shift)
        for (j, l), (t, nr) in self.terms.items():
            if j <= order:
                out.terms[(j, l)] = [t, nr]
        return out

    def keys(self):
        return sorted(self.terms)

    def max_abs(self, j: int, l: int = 0) -> float:
        t, nr = self.get(j, l)
        vals = [0.0]
        for a in (t, nr):
            if a is not None and a.size:
                vals.append(float(np.max(np.abs(a))))
        return max(vals)

    def __add__(self, other: "LogSeriesForm") -> "LogSeriesForm":
        if other.degree != self.degree or abs(other.shift - self.shift) > 1e-12:
            raise ValueError("incompatible series")
        out = self.copy()
        out.order = min(self.order, other.order)
        for (j, l), (t, nr) in other.terms.items():
            out.add(j, l, t, nr)
        return out.truncated(out.order)

    def scaled(self, c: float) -> "LogSeriesForm":
        out = LogSeriesForm(self.grid, self.degree, self.order, self.shift)
        for key, (t, nr) in self.terms.items():
            out.terms[key] = [None if t is None else c * t, None if nr is None else c * nr]
        return out


def _d(arr, n, k):
    if arr is None or k >= n:
        return None
    return d_array(arr, n, k)


def apply_d(w: LogSeriesForm) -> LogSeriesForm:
    """d on the collar: (d t, (-1)^k x d_x t + d n)."""
    n, k = w.grid.n, w.degree
    out = LogSeriesForm(w.grid, k + 1, w.order, w.shift)
    sgn = (-1) ** k
    for (j, l), (t, nr) in w.terms.items():
        p = w.shift + j
        dt = _d(t, n, k)
        nn = None
        if t is not None and p != 0:
            nn = sgn * p * t
        if nr is not None:
            nn = _add(nn, d_array(nr, n, k - 1))
        out.add(j, l, dt, nn)
        if t is not None and l > 0:
            out.add(j, l - 1, None, sgn * l * t)
    return out


def _series_delta(coeffs: dict, m: int, S: StarSeries, n: int, order: int, shift_x2: bool) -> dict:
    """delta_x applied to a series {(j,l): m-form array}; returns {(j,l): (m-1)-form array}.

    With ``shift_x2`` the result is multiplied by x^2.
    """
    out: dict = {}
    if m == 0:
        return out
    off = 2 if shift_x2 else 0
    sgn = (-1) ** m
    star = S.coeff(m)
    inv = S.inverse(m - 1)  # (n-m+1)-forms -> (m-1)-forms
    for (j, l), arr in coeffs.items():
        if arr is None:
            continue
        for a, sa in enumerate(star):
            if sa is None or j + 2 * a + off > order:
                continue
            ds = d_array(matvec(sa, arr), n, n - m)
            for b, ib in enumerate(inv):
                jj = j + 2 * a + 2 * b + off
                if ib is None or jj > order:
                    continue
                term = matvec(ib, ds)
                key = (jj, l)
                out[key] = _add(out.get(key), sgn * term)
    return out


def apply_delta(w: LogSeriesForm, S: StarSeries) -> LogSeriesForm:
    """delta_g on the collar, from the block formula in the module docstring."""
    n, k = w.grid.n, w.degree
    out = LogSeriesForm(w.grid, k - 1 if k > 0 else 0, w.order, w.shift)
    if k == 0:
        return out
    tcoef = {key: v[0] for key, v in w.terms.items() if v[0] is not None}
    ncoef = {key: v[1] for key, v in w.terms.items() if v[1] is not None}
    for key, arr in _series_delta(tcoef, k, S, n, w.order, True).items():
        out.add(key[0], key[1], arr, None)
    if k >= 2:
        for key, arr in _series_delta(ncoef, k - 1, S, n, w.order, True).items():
            out.add(key[0], key[1], None, arr)
    # (-1)^k *^{-1} (s + x d_x) * applied to the normal part
    s = 2 * k - n - 2
    star = S.coeff(k - 1)
    inv = S.inverse(k - 1)
    sgn = (-1) ** k
    starred: dict = {}
    for (j, l), arr in ncoef.items():
        for a, sa in enumerate(star):
            jj = j + 2 * a
            if sa is None or jj > w.order:
                continue
            starred[(jj, l)] = _add(starred.get((jj, l)), matvec(sa, arr))
    euler: dict = {}
    for (j, l), arr in starred.items():
        c = s + w.shift + j
        if c != 0:
            euler[(j, l)] = _add(euler.get((j, l)), c * arr)
        if l > 0:
            euler[(j, l - 1)] = _add(euler.get((j, l - 1)), l * arr)
    for (j, l), arr in euler.items():
        for b, ib in enumerate(inv):
            jj = j + 2 * b
            if ib is None or jj > w.order:
                continue
            out.add(jj, l, sgn * matvec(ib, arr), None)
    return out


def apply_laplacian(w: LogSeriesForm, S: StarSeries, lam: float = 0.0) -> LogSeriesForm:
    """(d delta_g + delta_g d - lam) w as a truncated series."""
    n, k = w.grid.n, w.degree
    out = LogSeriesForm(w.grid, k, w.order, w.shift)
    if k > 0:
        a = apply_d(apply_delta(w, S))
        for (j, l), (t, nr) in a.terms.items():
            out.add(j, l, t, nr)
    if k < n:
        b = apply_delta(apply_d(w), S)
        for (j, l), (t, nr) in b.terms.items():
            out.add(j, l, t, nr)
    if lam:
        for (j, l), (t, nr) in w.terms.items():
            out.add(j, l, None if t is None else -lam * t, None if nr is None else -lam * nr)
    return out

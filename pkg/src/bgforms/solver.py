"""Order-by-order formal solutions of (Delta - lam) w = 0 on the collar and operator extraction.

Coefficients are fixed from the indicial family of the model operator: at total
power y = shift + j the Laplacian acts on ``x^y (t + n ^ dx/x)`` as

    t  ->  (-y^2 + (n-2k) y - lam) t + 2 (-1)^(k+1) d n
    n  ->  (-y^2 + (n-2k+2) y - lam) n

plus terms of strictly higher order, so each coefficient is obtained by a
triangular solve (normal part first).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .curvature import CurvatureData, TrigExpression, compute_curvature, conformal_metric, fg_metric_series
from .exterior import Metric, codifferential, d_array, exterior_derivative
from .fields import FormField, TensorField, TorusGrid
from .series import (
    FormPair,
    LogSeriesForm,
    MetricSeries,
    StarSeries,
    apply_d,
    apply_delta,
    apply_laplacian,
    star_series,
)

__all__ = [
    "IndicialData",
    "BGExtraction",
    "Geometry",
    "NumericalGuardError",
    "indicial_solve",
    "solve_absolute_series",
    "extract_Lk_ell",
    "extract_Bk_Ck_Dk",
    "operator_Lk",
    "operator_Gk",
    "solve_relative_series",
    "operator_Qk",
    "extract_absolute",
    "extract_relative",
]

SERIES_TOL = 1e-8
ROOT_TIE_TOL = 1e-10


class NumericalGuardError(RuntimeError):
    """A residual or root guard was tripped."""


@dataclass(frozen=True)
class IndicialData:
    n: int
    k: int
    ell: int

    def __post_init__(self):
        n, k, ell = self.n, self.k, self.ell
        if n % 2:
            raise ValueError("n must be even")
        if not 0 <= k <= n:
            raise ValueError("degree out of range")
        if k < n / 2 and not 1 <= ell <= n // 2 - k:
            raise ValueError(f"ell must lie in [1, n/2-k] = [1, {n // 2 - k}], got {ell}")

    @classmethod
    def critical(cls, n: int, k: int) -> "IndicialData":
        return cls(n, k, n // 2 - k)

    @property
    def q(self) -> int:
        return self.n // 2 - self.k

    @property
    def lam(self) -> float:
        return float(self.q**2 - self.ell**2)

    @property
    def shift(self) -> int:
        return self.q - self.ell

    @property
    def is_critical(self) -> bool:
        return self.shift == 0

    def D_t(self, j: float) -> float:
        y = self.shift + j
        return -y * y + (self.n - 2 * self.k) * y - self.lam

    def D_n(self, j: float) -> float:
        y = self.shift + j
        return -y * y + (self.n - 2 * self.k + 2) * y - self.lam

    @property
    def tangential_roots(self) -> tuple[float, float]:
        return (0.0, 2.0 * self.ell)

    @property
    def normal_roots(self) -> tuple[float, float]:
        """Roots of D_n relative to the shift: y = q + 1 +- sqrt(ell^2 + n + 1 - 2k)."""
        r = sqrt(self.ell**2 + self.n + 1 - 2 * self.k)
        return (self.q + 1 - r - self.shift, self.q + 1 + r - self.shift)


def _rel(a, scale: float) -> float:
    if a is None or not a.size:
        return 0.0
    return float(np.max(np.abs(a))) / max(scale, 1e-300)


def indicial_solve(j: int, r: FormPair, idx: IndicialData, scale: float = 1.0,
                   solve_tangential: bool = True, solve_normal: bool = True) -> FormPair:
    """Coefficient c with P_j c = -r, normal part first.

    A residual component that sits on an indicial root must be zero (relative size
    below 1e-10 of ``scale``), otherwise a log term would be needed and
    :class:`NumericalGuardError` is raised.
    """
    grid, k, n = r.t_part.grid, idx.k, idx.n
    rt = r.t_part.components
    rn = None if r.n_part is None else r.n_part.components
    cn = None
    if rn is not None and solve_normal:
        Dn = idx.D_n(j)
        if abs(Dn) < 1e-12:
            if _rel(rn, scale) > ROOT_TIE_TOL:
                raise NumericalGuardError(f"normal residual on indicial root at order {j}")
            cn = np.zeros_like(rn)
        else:
            cn = -rn / Dn
    ct = None
    if solve_tangential:
        rhs = rt.copy()
        if cn is not None and k >= 1 and k - 1 < n:
            rhs = rhs + 2 * (-1) ** (k + 1) * d_array(cn, n, k - 1)
        Dt = idx.D_t(j)
        if abs(Dt) < 1e-12:
            if _rel(rhs, scale) > ROOT_TIE_TOL:
                raise NumericalGuardError(f"tangential residual on indicial root at order {j}")
            ct = np.zeros_like(rhs)
        else:
            ct = -rhs / Dt
    t_field = FormField(grid, k, ct if ct is not None else np.zeros((grid.ncomp(k),) + (1,) * n))
    n_field = None
    if k >= 1:
        n_field = FormField(grid, k - 1, cn if cn is not None else np.zeros((grid.ncomp(k - 1),) + (1,) * n))
    return FormPair(t_field, n_field)


# ---------------------------------------------------------------------------
# geometry bundle


@dataclass(eq=False)
class Geometry:
    """Boundary metric with its curvature, collar metric series and star series."""

    metric: Metric
    curvature: CurvatureData
    metric_series: MetricSeries
    stars: StarSeries
    descriptor: str = "custom"

    @property
    def grid(self) -> TorusGrid:
        return self.metric.grid

    @property
    def n(self) -> int:
        return self.metric.grid.n

    @classmethod
    def from_metric(cls, metric: Metric, descriptor: str = "custom",
                    h3_tracefree: TensorField | None = None) -> "Geometry":
        curv = compute_curvature(metric)
        ms = fg_metric_series(curv, h3_tracefree=h3_tracefree)
        return cls(metric, curv, ms, star_series(ms), descriptor)

    @classmethod
    def flat(cls, grid: TorusGrid) -> "Geometry":
        return cls.from_metric(Metric.flat(grid), "flat")

    @classmethod
    def conformal(cls, grid: TorusGrid, phi: TrigExpression, h3_tracefree=None) -> "Geometry":
        desc = "conformal:" + ";".join(f"{t.amplitude}*{t.phase}{list(t.mode)}" for t in phi.terms)
        return cls.from_metric(conformal_metric(phi.sample(grid)), desc, h3_tracefree)

    def with_h3_tracefree(self, h3_tracefree: TensorField) -> "Geometry":
        ms = fg_metric_series(self.curvature, h3_tracefree=h3_tracefree)
        return Geometry(self.metric, self.curvature, ms, star_series(ms), self.descriptor + "+h3tf")


# ---------------------------------------------------------------------------
# absolute problem


@dataclass(eq=False)
class BGExtraction:
    """Extracted operator outputs for one input form."""

    input: FormField
    series: LogSeriesForm
    idx: IndicialData
    fields: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> FormField:
        return self.fields[name]


def _scale(w: FormField) -> float:
    return max(w.max_abs(), 1e-300)


def _check_degree(w: FormField, k: int):
    if w.degree != k:
        raise ValueError(f"expected a {k}-form, got degree {w.degree}")


def _residual_at(series: LogSeriesForm, S: StarSeries, lam: float, j: int) -> FormPair:
    out = apply_laplacian(series.truncated(j), S, lam)
    return out.pair(j, 0)


def solve_absolute_series(w0: FormField, idx: IndicialData, S: StarSeries,
                          v_t: FormField | None = None, order: int | None = None) -> LogSeriesForm:
    """Even series x^shift (sum t_j x^j + sum n_j x^j ^ dx/x) with t_0 = w0.

    Tangential coefficients are fixed for j < 2 ell and normal ones for 2 <= j <= 2 ell,
    so that (Delta - lam) w = O_t(x^(shift+2ell)) + O_n(x^(shift+2ell+2)).  In the
    critical case ``v_t`` optionally sets the formally undetermined tangential
    coefficient at j = n - 2k.
    """
    n, k, ell = idx.n, idx.k, idx.ell
    if not k < n / 2:
        raise ValueError("absolute series requires k < n/2")
    _check_degree(w0, k)
    top = 2 * ell
    order = top + 2 if order is None else order
    ser = LogSeriesForm(w0.grid, k, order, float(idx.shift))
    ser.add(0, 0, w0.components.copy(), None)
    scale = _scale(w0)
    for j in range(2, top + 1, 2):
        r = _residual_at(ser, S, idx.lam, j)
        c = indicial_solve(j, r, idx, scale, solve_tangential=(j < top), solve_normal=k >= 1)
        if j < top:
            ser.add(j, 0, c.t_part.components, None)
        if k >= 1:
            ser.add(j, 0, None, c.n_part.components)
    if v_t is not None:
        if not idx.is_critical:
            raise ValueError("undetermined coefficient only exists in the critical case")
        ser.add(top, 0, v_t.components, None)
    return ser


def extract_Lk_ell(ser: LogSeriesForm, idx: IndicialData, S: StarSeries, guard: bool = True,
                   residual: LogSeriesForm | None = None) -> FormField:
    """(1/2ell) times the tangential coefficient of (Delta - lam) w at relative order 2 ell."""
    top = 2 * idx.ell
    R = apply_laplacian(ser.truncated(top), S, idx.lam) if residual is None else residual
    if guard:
        scale = ser.max_abs(0, 0)
        for (j, l) in R.keys():
            if j < top and R.max_abs(j, l) > SERIES_TOL * max(scale, 1.0) * _deriv_scale(idx, j):
                raise NumericalGuardError(f"residual at order {j} is {R.max_abs(j, l):.3e}")
    return R.tangential(top) / (2.0 * idx.ell)


def _deriv_scale(idx: IndicialData, j: int) -> float:
    # residual at order j involves up to j+2 derivatives of mode-<=3 data
    return float(4 ** (j + 2))


def extract_Bk_Ck_Dk(ser: LogSeriesForm, idx: IndicialData, S: StarSeries):
    """(B_k, C_k, D_k) from the critical series; D_k is only meaningful for closed input."""
    if not idx.is_critical:
        raise ValueError("B_k, C_k, D_k require the critical series")
    n, k = idx.n, idx.k
    top = n - 2 * k
    ext = ser.truncated(top + 2)
    R = apply_laplacian(ext, S, 0.0)
    B = R.normal(top + 2) * float((-1) ** (k - 1))
    dl = apply_delta(ext, S)
    C = dl.tangential(top + 2)
    dw = apply_d(ser.truncated(top))
    D = dw.normal(top) * float((-1) ** k)
    return B, C, D


def extract_absolute(w0: FormField, geom: Geometry, ell: int | None = None,
                     v_t: FormField | None = None) -> BGExtraction:
    """Solve the absolute series and extract every operator it defines."""
    n, k = geom.n, w0.degree
    idx = IndicialData(n, k, n // 2 - k if ell is None else ell)
    S = geom.stars
    top = 2 * idx.ell
    need = top + 2
    if need > S.order + 0 and idx.is_critical and k >= 1:
        raise ValueError(f"extraction needs the collar metric to order {need}, have {S.order}")
    ser = solve_absolute_series(w0, idx, S, v_t=v_t, order=need)
    ext = BGExtraction(w0, ser, idx)
    R = apply_laplacian(ser.truncated(need if (idx.is_critical and k >= 1) else top), S, idx.lam)
    ext.residuals["laplacian"] = R
    ext.fields["Lk_ell"] = extract_Lk_ell(ser, idx, S, residual=R)
    ext.fields["Lk_log_coeff"] = ext.fields["Lk_ell"]
    if idx.is_critical and k >= 1:
        B, C, D = extract_Bk_Ck_Dk(ser, idx, S)
        ext.fields.update(Bk=B, Ck=C, Dk=D)
        ext.fields["Gk"] = (B - C * 2.0) * (float((-1) ** (k + 1)) / (n - 2 * k))
    return ext


def operator_Lk(w0: FormField, geom: Geometry, ell: int | None = None) -> FormField:
    return extract_absolute(w0, geom, ell)["Lk_ell"]


def operator_Gk(w0: FormField, geom: Geometry, v_t: FormField | None = None) -> FormField:
    """G_k w0 = (-1)^(k+1) (B_k - 2 C_k)/(n - 2k); for k = n/2, (-1)^(n/2+1) delta w0."""
    n, k = geom.n, w0.degree
    if k == n // 2:
        return codifferential(w0, geom.metric) * float((-1) ** (n // 2 + 1))
    if not 0 < k < n / 2:
        raise ValueError("G_k requires 0 < k <= n/2")
    return extract_absolute(w0, geom, v_t=v_t)["Gk"]


# ---------------------------------------------------------------------------
# relative problem


def _closed_guard(w0: FormField) -> None:
    if w0.degree >= w0.grid.n:
        return
    dw = exterior_derivative(w0)
    if dw.max_abs() > 1e-9 * max(1.0, w0.max_abs()):
        raise ValueError(f"input form is not closed (|d w| = {dw.max_abs():.2e})")


def solve_relative_series(w0: FormField, S: StarSeries, v_t: FormField | None = None,
                          order: int | None = None) -> LogSeriesForm:
    """Even series w' = w0 ^ dx/x + sum_{j>=2} x^j (t_j + n_j ^ dx/x) of degree p+1 for closed w0.

    Coefficients are fixed for 2 <= j <= n - 2p - 2 (the tangential one at
    j = n - 2p - 2 sits on a root and is left at zero, or set to ``v_t``), so that
    Delta w' = O(x^(n-2p)).
    """
    grid = w0.grid
    n, p = grid.n, w0.degree
    if p > n // 2 - 1:
        raise ValueError("relative series requires p <= n/2 - 1")
    _closed_guard(w0)
    k = p + 1
    idx = IndicialData(n, k, max(n // 2 - k, 1)) if k < n / 2 else _TopIndicial(n, k)
    top = n - 2 * k
    order = top + 2 if order is None else order
    ser = LogSeriesForm(grid, k, order, 0.0)
    ser.add(0, 0, None, w0.components.copy())
    scale = _scale(w0)
    for j in range(2, top + 1, 2):
        r = _residual_at(ser, S, 0.0, j)
        on_root = j == top
        c = indicial_solve(j, r, idx, scale, solve_tangential=not on_root)
        if on_root:
            # the tangential residual left after the normal solve is (2 ell) times the log coefficient
            rt = r.t_part.components + 2 * (-1) ** (k + 1) * d_array(c.n_part.components, n, k - 1)
            log_coeff = _rel(rt, scale)
            if log_coeff > SERIES_TOL * _deriv_scale(idx, j):
                raise NumericalGuardError(f"tangential log coefficient does not vanish ({log_coeff:.3e})")
        else:
            ser.add(j, 0, c.t_part.components, None)
        ser.add(j, 0, None, c.n_part.components)
    if v_t is not None:
        ser.add(top, 0, v_t.components, None)
    return ser


@dataclass(frozen=True)
class _TopIndicial:
    """Indicial factors for k = n/2 (no shift, lam = 0)."""

    n: int
    k: int
    shift: int = 0
    lam: float = 0.0

    def D_t(self, j):
        return -j * j + (self.n - 2 * self.k) * j

    def D_n(self, j):
        return -j * j + (self.n - 2 * self.k + 2) * j


def extract_relative(w0: FormField, geom: Geometry, v_t: FormField | None = None) -> BGExtraction:
    """B'_p, D'_p and Q_p for a closed p-form."""
    n, p = geom.n, w0.degree
    k = p + 1
    top = n - 2 * k
    S = geom.stars
    if top + 2 > S.order:
        raise ValueError(f"extraction needs the collar metric to order {top + 2}, have {S.order}")
    ser = solve_relative_series(w0, S, v_t=v_t, order=top + 2)
    idx = IndicialData(n, k, n // 2 - k) if k < n / 2 else None
    ext = BGExtraction(w0, ser, idx)
    R = apply_laplacian(ser, S, 0.0)
    ext.residuals["laplacian"] = R
    scale = _scale(w0)
    for (j, l) in R.keys():
        if j < top + 2 and R.max_abs(j, l) > SERIES_TOL * max(scale, 1.0) * 4.0 ** (j + 2):
            raise NumericalGuardError(f"relative residual at order {j} is {R.max_abs(j, l):.3e}")
    Bp = R.normal(top + 2) * float((-1) ** p)
    dw = apply_d(ser.truncated(top))
    Dp = dw.normal(top) * float((-1) ** (p + 1))
    ext.fields.update(Bpk=Bp, Dpk=Dp)
    if p < n // 2 - 1:
        corr = codifferential(Dp, geom.metric) * (1.0 / (n / 2 - p - 1))
        Q = (Bp - corr) * (float((-1) ** p) / (n - 2 * p))
    else:
        # p = n/2 - 1: D'_p = d w0 vanishes on closed input and the correction drops out
        if Dp.max_abs() > 1e-9 * max(1.0, w0.max_abs()):
            raise NumericalGuardError("D'_p does not vanish at p = n/2 - 1")
        Q = Bp * (float((-1) ** p) / (n - 2 * p))
    ext.fields["Qk"] = Q
    return ext


def operator_Qk(w0: FormField, geom: Geometry, v_t: FormField | None = None) -> FormField:
    """Q_p on closed p-forms, p <= n/2 - 1."""
    return extract_relative(w0, geom, v_t=v_t)["Qk"]

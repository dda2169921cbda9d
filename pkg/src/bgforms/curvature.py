"""Curvature of a boundary metric and the even expansion of the collar metric.

Conventions: R^a_{bcd} = d_c G^a_{db} - d_d G^a_{cb} + G^a_{ce} G^e_{db} - G^a_{de} G^e_{cb},
Ric_{bd} = R^a_{bad} (positive on round spheres), P = (Ric - Scal h / (2(n-1))) / (n-2),
C_{abc} = nabla_a P_{bc} - nabla_b P_{ac}, W = R - P (Kulkarni-Nomizu) h,
B_{ab} = nabla^c C_{cab} + P^{cd} W_{cadb}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exterior import Metric
from .fields import ScalarField, TensorField, TorusGrid, partial_array

__all__ = [
    "CurvatureData",
    "TrigTerm",
    "TrigExpression",
    "compute_curvature",
    "conformal_metric",
    "fg_metric_series",
    "fd_ricci_check",
]


def _contract(spec: str, *ops):
    return np.einsum(spec, *ops, optimize=True)


@dataclass(frozen=True, eq=False)
class CurvatureData:
    metric: Metric
    christoffel: np.ndarray  # G[a, b, c] = Gamma^a_{bc}
    riemann: TensorField
    ricci: TensorField
    scal: ScalarField
    schouten: TensorField
    cotton: TensorField
    weyl: TensorField
    bach: TensorField

    @property
    def grid(self) -> TorusGrid:
        return self.metric.grid

    @property
    def n(self) -> int:
        return self.metric.grid.n

    def raised_schouten(self) -> np.ndarray:
        """P^a_b = h^{ac} P_{cb}."""
        return _contract("ac...,cb...->ab...", self.metric.h_inv.components, self.schouten.components)

    def square(self, T: TensorField) -> TensorField:
        """T_{ac} h^{cd} T_{db}."""
        hinv = self.metric.h_inv.components
        return TensorField(self.grid, 2, _contract("ac...,cd...,db...->ab...", T.components, hinv, T.components),
                           symmetric=True)

    def trace(self, T: TensorField) -> ScalarField:
        return ScalarField(self.grid, _contract("ab...,ab...->...", self.metric.h_inv.components, T.components))

    def pairing(self, S: TensorField, T: TensorField) -> ScalarField:
        """S_{ab} T_{cd} h^{ac} h^{bd}."""
        hinv = self.metric.h_inv.components
        return ScalarField(self.grid, _contract("ab...,cd...,ac...,bd...->...", S.components, T.components, hinv, hinv))


def compute_curvature(metric: Metric) -> CurvatureData:
    grid = metric.grid
    n = grid.n
    h = metric.h.components
    hinv = metric.h_inv.components
    # dh[e, a, b] = d_e h_ab
    dh = np.stack([partial_array(h, e, n) for e in range(n)])
    # Gamma^a_{bc} = 1/2 h^{ad} (d_b h_dc + d_c h_db - d_d h_bc)
    lower = 0.5 * (np.einsum("bdc...->dbc...", dh) + np.einsum("cdb...->dbc...", dh) - dh)
    gamma = _contract("ad...,dbc...->abc...", hinv, lower)
    dgamma = np.stack([partial_array(gamma, e, n) for e in range(n)])  # dgamma[e,a,b,c]
    # R^a_{bcd}
    r_up = (np.einsum("cadb...->abcd...", dgamma) - np.einsum("dacb...->abcd...", dgamma)
            + _contract("ace...,edb...->abcd...", gamma, gamma)
            - _contract("ade...,ecb...->abcd...", gamma, gamma))
    riem = _contract("ae...,ebcd...->abcd...", h, r_up)
    ric = np.einsum("abad...->bd...", r_up)
    ric = 0.5 * (ric + np.swapaxes(ric, 0, 1))
    scal = _contract("ab...,ab...->...", hinv, ric)
    if n > 2:
        P = (ric - scal * h / (2 * (n - 1))) / (n - 2)
    else:
        P = np.zeros_like(ric)
    # nabla_a P_bc
    dP = np.stack([partial_array(P, e, n) for e in range(n)])
    nabP = dP - _contract("eab...,ec...->abc...", gamma, P) - _contract("eac...,be...->abc...", gamma, P)
    cotton = nabP - np.swapaxes(nabP, 0, 1)
    kn = (_contract("ac...,bd...->abcd...", P, h) + _contract("bd...,ac...->abcd...", P, h)
          - _contract("ad...,bc...->abcd...", P, h) - _contract("bc...,ad...->abcd...", P, h))
    weyl = riem - kn
    # nabla_d C_cab
    dC = np.stack([partial_array(cotton, e, n) for e in range(n)])
    nabC = (dC - _contract("edc...,eab...->dcab...", gamma, cotton)
            - _contract("eda...,ceb...->dcab...", gamma, cotton)
            - _contract("edb...,cae...->dcab...", gamma, cotton))
    divC = _contract("dc...,dcab...->ab...", hinv, nabC)
    Pup = _contract("ca...,db...,ab...->cd...", hinv, hinv, P)
    bach = divC + _contract("cd...,cadb...->ab...", Pup, weyl)
    bach = 0.5 * (bach + np.swapaxes(bach, 0, 1))

    def T(arr, r, sym=False):
        shape = arr.shape[:r] + np.broadcast_shapes(arr.shape[r:], (1,) * n)
        return TensorField(grid, r, arr.reshape(shape), symmetric=sym)

    return CurvatureData(
        metric=metric,
        christoffel=gamma,
        riemann=T(riem, 4),
        ricci=T(ric, 2, True),
        scal=ScalarField(grid, scal),
        schouten=T(P, 2, True),
        cotton=T(cotton, 3),
        weyl=T(weyl, 4),
        bach=T(bach, 2, True),
    )


@dataclass(frozen=True)
class TrigTerm:
    amplitude: float
    mode: tuple[int, ...]
    phase: str = "sin"  # sin | cos

    def __post_init__(self):
        if self.phase not in ("sin", "cos"):
            raise ValueError(f"phase must be 'sin' or 'cos', got {self.phase!r}")
        object.__setattr__(self, "mode", tuple(int(m) for m in self.mode))


@dataclass(frozen=True)
class TrigExpression:
    """phi(y) = sum amplitude * sin|cos(mode . y); band-limited by construction."""

    terms: tuple[TrigTerm, ...] = field(default_factory=tuple)

    @classmethod
    def from_list(cls, items) -> "TrigExpression":
        return cls(tuple(TrigTerm(float(t["amplitude"]), tuple(t["mode"]), t.get("phase", "sin")) for t in items))

    def max_mode(self) -> int:
        return max((max(abs(m) for m in t.mode) for t in self.terms), default=0)

    def depends_on(self, n: int) -> list[bool]:
        dep = [False] * n
        for t in self.terms:
            for a, m in enumerate(t.mode):
                if m:
                    dep[a] = True
        return dep

    def evaluate_points(self, y: np.ndarray) -> np.ndarray:
        """Evaluate at points ``y`` of shape (..., n)."""
        out = np.zeros(y.shape[:-1])
        for t in self.terms:
            arg = y @ np.asarray(t.mode, float)
            out += t.amplitude * (np.sin(arg) if t.phase == "sin" else np.cos(arg))
        return out

    def sample(self, grid: TorusGrid) -> ScalarField:
        """Sample on the grid in compact storage (length-1 axes where phi is constant)."""
        dep = self.depends_on(grid.n)
        shape = [s if d else 1 for s, d in zip(grid.sizes, dep)]
        out = np.zeros(shape)
        for t in self.terms:
            arg = sum(m * grid.coordinate(a) for a, m in enumerate(t.mode) if m)
            if isinstance(arg, int):
                arg = np.zeros([1] * grid.n)
            out = out + t.amplitude * (np.sin(arg) if t.phase == "sin" else np.cos(arg))
        return ScalarField(grid, np.broadcast_to(out, shape).copy())

    def gradient_points(self, y: np.ndarray) -> np.ndarray:
        out = np.zeros(y.shape)
        for t in self.terms:
            m = np.asarray(t.mode, float)
            arg = y @ m
            c = t.amplitude * (np.cos(arg) if t.phase == "sin" else -np.sin(arg))
            out += c[..., None] * m
        return out


def conformal_metric(phi: ScalarField) -> Metric:
    """The metric e^{2 phi} delta with exact inverse and volume density."""
    grid = phi.grid
    n = grid.n
    e2 = np.exp(2 * phi.values)
    eye = np.eye(n).reshape((n, n) + (1,) * n)
    h = TensorField(grid, 2, eye * e2, symmetric=True)
    hinv = TensorField(grid, 2, eye / e2, symmetric=True)
    return Metric(h, hinv, ScalarField(grid, np.exp(n * phi.values)))


def fg_metric_series(curv: CurvatureData, h3_tracefree: TensorField | None = None):
    """Even collar expansion h_x = h0 - x^2 P + x^4 h2/8 - x^6 h3/48.

    h2 = -2B/(n-4) + 2P^2 and h3 = (tr h3 / n) h0 with tr h3 = -8 tr(PB)/(n-4); for
    n = 4 the Bach terms are dropped.  ``h3_tracefree`` adds an optional trace-free
    part to h3 (used only by perturbation tests).
    """
    from .series import MetricSeries

    n = curv.n
    if n not in (4, 6):
        raise ValueError(f"collar expansion implemented for n in (4, 6), got {n}")
    grid = curv.grid
    h0 = curv.metric.h
    P = curv.schouten
    P2 = curv.square(P)
    coeffs = {0: h0, 2: P * -1.0}
    if n == 4:
        h2 = P2 * 2.0
        coeffs[4] = h2 * (1.0 / 8.0)
        return MetricSeries(grid, coeffs, order=4)
    B = curv.bach
    h2 = B * (-2.0 / (n - 4)) + P2 * 2.0
    coeffs[4] = h2 * (1.0 / 8.0)
    trPB = curv.pairing(P, B)  # P_ab B_cd h^ac h^bd = tr(h^-1 P h^-1 B)
    tr_h3 = trPB * (-8.0 / (n - 4))
    h3 = h0 * (tr_h3 * (1.0 / n))
    if h3_tracefree is not None:
        h3 = h3 + h3_tracefree
    coeffs[6] = h3 * (-1.0 / 48.0)
    return MetricSeries(grid, coeffs, order=6)


def fd_ricci_check(phi: TrigExpression, n: int, points: np.ndarray, step: float = 1e-2) -> tuple[np.ndarray, np.ndarray]:
    """Ricci tensor of e^{2 phi} delta at ``points`` (shape (m, n)) by nested 5-point finite differences.

    Returns (ricci, christoffel) evaluated only from pointwise samples of phi, as an
    independent oracle for :func:`compute_curvature`.
    """
    w = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12 * step)
    offsets = np.array([-2, -1, 0, 1, 2]) * step
    eye = np.eye(n)

    def metric_at(y):
        return np.exp(2 * phi.evaluate_points(y))[..., None, None] * eye

    def dmetric(y):  # [..., e, a, b]
        out = np.zeros(y.shape[:-1] + (n, n, n))
        for e in range(n):
            for wi, o in zip(w, offsets):
                if wi == 0:
                    continue
                yy = y.copy()
                yy[..., e] += o
                out[..., e, :, :] += wi * metric_at(yy)
        return out

    def gamma_at(y):  # [..., a, b, c]
        dh = dmetric(y)
        hinv = np.linalg.inv(metric_at(y))
        lower = 0.5 * (np.einsum("...bdc->...dbc", dh) + np.einsum("...cdb->...dbc", dh) - dh)
        return np.einsum("...ad,...dbc->...abc", hinv, lower)

    g = gamma_at(points)
    dg = np.zeros(points.shape[:-1] + (n, n, n, n))  # [..., e, a, b, c]
    for e in range(n):
        for wi, o in zip(w, offsets):
            if wi == 0:
                continue
            yy = points.copy()
            yy[..., e] += o
            dg[..., e, :, :, :] += wi * gamma_at(yy)
    r_up = (np.einsum("...cadb->...abcd", dg) - np.einsum("...dacb->...abcd", dg)
            + np.einsum("...ace,...edb->...abcd", g, g) - np.einsum("...ade,...ecb->...abcd", g, g))
    ric = np.einsum("...abad->...bd", r_up)
    return ric, g

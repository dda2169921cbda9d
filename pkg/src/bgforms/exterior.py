"""Metric-dependent exterior calculus on the torus.

Orientation is dy_1 ^ ... ^ dy_n.  The Hodge star of a metric ``h`` acts on a
k-form through the pointwise matrix

    (*w)_J = sqrt(det h) * eps(J^c, J) * sum_M det(h^{-1}[J^c, M]) w_M,

where ``J^c`` is the increasing complement of ``J`` and the sum runs over
increasing multi-indices.  The codifferential is ``(-1)^k *^{-1} d *`` which is
the formal L2 adjoint of ``d``, so ``dd* + d*d`` is the non-negative Hodge
Laplacian.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fields import (
    FormField,
    ScalarField,
    TensorField,
    TorusGrid,
    multi_index_position,
    multi_indices,
    partial_array,
)

__all__ = [
    "Metric",
    "EndomorphismField",
    "exterior_derivative",
    "wedge",
    "interior_product",
    "hodge_star",
    "inverse_hodge_star",
    "codifferential",
    "form_laplacian",
    "j_operator",
    "a_operator",
    "star_matrix",
    "compound_minors",
    "perm_sign",
    "raise_form",
    "d_array",
    "matvec",
]


def perm_sign(seq) -> int:
    """Sign of the permutation sorting ``seq`` (0 if it has repeats)."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


# ---------------------------------------------------------------------------
# pointwise linear algebra with zero skipping


def matvec(mat, vec: np.ndarray) -> np.ndarray:
    """Apply a pointwise matrix to a stack of component arrays.

    ``mat`` is either an :class:`EndomorphismField` or a dense ``(out, in, *grid)``
    array; entries that are identically zero are skipped.
    """
    if isinstance(mat, EndomorphismField):
        nz, arr = mat.nonzero, mat.matrix
    else:
        arr = mat
        nz = _nonzero_pattern(arr)
    out_dim = arr.shape[0]
    shape = np.broadcast_shapes(arr.shape[2:], vec.shape[1:])
    out = np.zeros((out_dim,) + shape)
    for (i, j) in nz:
        out[i] += arr[i, j] * vec[j]
    return out


def _nonzero_pattern(arr: np.ndarray) -> list[tuple[int, int]]:
    flat = arr.reshape(arr.shape[0], arr.shape[1], -1)
    mask = np.any(flat != 0, axis=2)
    return [tuple(ij) for ij in np.argwhere(mask)]


@dataclass(frozen=True, eq=False)
class EndomorphismField:
    """Pointwise linear map from k_in-forms to k_out-forms, stored as ``(C_out, C_in, *grid)``."""

    grid: TorusGrid
    k_in: int
    k_out: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        g = self.grid
        if m.shape[:2] != (g.ncomp(self.k_out), g.ncomp(self.k_in)):
            raise ValueError("matrix shape does not match degrees")
        g.check_array(m, 2)
        if not np.all(np.isfinite(m)):
            raise ValueError("non-finite endomorphism entries")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "nonzero", _nonzero_pattern(m))

    @property
    def degree(self) -> int:
        return self.k_in

    @classmethod
    def identity(cls, grid: TorusGrid, k: int, scale=1.0) -> "EndomorphismField":
        c = grid.ncomp(k)
        s = np.asarray(scale, float)
        if s.ndim == 0:
            s = s.reshape((1,) * grid.n)
        m = np.zeros((c, c) + s.shape)
        for i in range(c):
            m[i, i] = s
        return cls(grid, k, k, m)

    @classmethod
    def zero(cls, grid: TorusGrid, k_in: int, k_out: int | None = None) -> "EndomorphismField":
        k_out = k_in if k_out is None else k_out
        return cls(grid, k_in, k_out, np.zeros((grid.ncomp(k_out), grid.ncomp(k_in)) + (1,) * grid.n))

    def apply(self, w: FormField) -> FormField:
        if w.degree != self.k_in:
            raise ValueError("degree mismatch")
        return FormField(self.grid, self.k_out, matvec(self, w.components))

    def __call__(self, w: FormField) -> FormField:
        return self.apply(w)

    def compose(self, other: "EndomorphismField") -> "EndomorphismField":
        """``self o other``."""
        if other.k_out != self.k_in:
            raise ValueError("degree mismatch in composition")
        return EndomorphismField(self.grid, other.k_in, self.k_out, matmat(self.matrix, other.matrix))

    def __matmul__(self, other):
        return self.compose(other)

    def __add__(self, other: "EndomorphismField"):
        return EndomorphismField(self.grid, self.k_in, self.k_out, self.matrix + other.matrix)

    def __sub__(self, other: "EndomorphismField"):
        return EndomorphismField(self.grid, self.k_in, self.k_out, self.matrix - other.matrix)

    def __mul__(self, s):
        v = s.values if isinstance(s, ScalarField) else s
        return EndomorphismField(self.grid, self.k_in, self.k_out, self.matrix * v)

    __rmul__ = __mul__

    def __neg__(self):
        return EndomorphismField(self.grid, self.k_in, self.k_out, -self.matrix)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.matrix))) if self.matrix.size else 0.0


def matmat(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise product of ``(p, q, *g)`` and ``(q, r, *g)`` matrix fields, skipping zero entries."""
    if a is None or b is None:
        return None
    shape = np.broadcast_shapes(a.shape[2:], b.shape[2:])
    out = np.zeros((a.shape[0], b.shape[1]) + shape)
    nza = _nonzero_pattern(a)
    nzb = {}
    for (j, l) in _nonzero_pattern(b):
        nzb.setdefault(j, []).append(l)
    for (i, j) in nza:
        for l in nzb.get(j, ()):
            out[i, l] += a[i, j] * b[j, l]
    return out


# ---------------------------------------------------------------------------
# metric


@dataclass(frozen=True, eq=False)
class Metric:
    h: TensorField
    h_inv: TensorField
    sqrt_det: ScalarField

    @property
    def grid(self) -> TorusGrid:
        return self.h.grid

    @classmethod
    def from_tensor(cls, h: TensorField) -> "Metric":
        n = h.grid.n
        if h.rank != 2:
            raise ValueError("metric must be a rank-2 tensor")
        comps = 0.5 * (h.components + np.swapaxes(h.components, 0, 1))
        moved = np.moveaxis(comps, (0, 1), (-2, -1))
        det = np.linalg.det(moved)
        if np.any(det <= 0) or not np.all(np.isfinite(det)):
            raise ValueError("metric is singular or not positive definite")
        inv = np.moveaxis(np.linalg.inv(moved), (-2, -1), (0, 1))
        # positive definiteness via Cholesky
        try:
            np.linalg.cholesky(moved)
        except np.linalg.LinAlgError as exc:
            raise ValueError("metric is not positive definite") from exc
        grid = h.grid
        return cls(TensorField(grid, 2, comps, symmetric=True),
                   TensorField(grid, 2, inv, symmetric=True),
                   ScalarField(grid, np.sqrt(det)))

    @classmethod
    def flat(cls, grid: TorusGrid) -> "Metric":
        eye = np.eye(grid.n).reshape((grid.n, grid.n) + (1,) * grid.n)
        return cls.from_tensor(TensorField(grid, 2, eye, symmetric=True))

    def is_flat(self) -> bool:
        n = self.grid.n
        eye = np.eye(n).reshape((n, n) + (1,) * n)
        return bool(np.all(self.h.components == eye))


# ---------------------------------------------------------------------------
# index tables


@lru_cache(maxsize=None)
def _d_table(n: int, k: int):
    """For each (input component, axis): (output component, sign)."""
    pos = multi_index_position(n, k + 1)
    table = []
    for ci, I in enumerate(multi_indices(n, k)):
        for a in range(n):
            if a in I:
                continue
            J = tuple(sorted(I + (a,)))
            sign = (-1) ** J.index(a)
            table.append((ci, a, pos[J], sign))
    return table


def d_array(comps: np.ndarray, n: int, k: int) -> np.ndarray:
    """Exterior derivative on raw component arrays (``(C(n,k), *grid)``)."""
    if k >= n:
        raise ValueError("d of an n-form is not defined here")
    out = np.zeros((len(multi_indices(n, k + 1)),) + comps.shape[1:])
    for ci, a, co, sign in _d_table(n, k):
        if comps.shape[comps.ndim - n + a] == 1:
            continue
        der = partial_array(comps[ci], a, n)
        if sign > 0:
            out[co] += der
        else:
            out[co] -= der
    return out


@lru_cache(maxsize=None)
def _complement_signs(n: int, k: int):
    """For each output (n-k)-index J: (index of complement I in k-indices, eps(I, J))."""
    pos_k = multi_index_position(n, k)
    res = []
    for J in multi_indices(n, n - k):
        I = tuple(a for a in range(n) if a not in J)
        res.append((pos_k[I], perm_sign(I + J)))
    return res


def compound_minors(hinv: np.ndarray, n: int, k: int) -> np.ndarray:
    """Matrix of k x k minors ``det(A[I, M])`` of a pointwise ``(n, n, *g)`` field."""
    idx = multi_indices(n, k)
    c = len(idx)
    if k == 0:
        return np.ones((1, 1) + (1,) * n)
    moved = np.moveaxis(hinv, (0, 1), (-2, -1))
    gshape = moved.shape[:-2]
    out = np.zeros((c, c) + gshape)
    for a, I in enumerate(idx):
        for b, M in enumerate(idx):
            sub = moved[..., list(I), :][..., list(M)]
            out[a, b] = np.linalg.det(sub) if k > 1 else sub[..., 0, 0]
    return out


def star_matrix(metric: Metric, k: int) -> EndomorphismField:
    """Pointwise matrix of the Hodge star on k-forms."""
    n = metric.grid.n
    minors = compound_minors(metric.h_inv.components, n, k)
    comp = _complement_signs(n, k)
    out = np.zeros((len(comp), minors.shape[1]) + minors.shape[2:])
    for j, (ic, s) in enumerate(comp):
        out[j] = s * minors[ic]
    out = out * metric.sqrt_det.values
    return EndomorphismField(metric.grid, k, n - k, out)


def raise_form(w: FormField, metric: Metric) -> FormField:
    """Components with all indices raised by ``h^{-1}`` (increasing multi-indices)."""
    n = metric.grid.n
    minors = compound_minors(metric.h_inv.components, n, w.degree)
    return FormField(w.grid, w.degree, matvec(minors, w.components))


# ---------------------------------------------------------------------------
# operators


def exterior_derivative(w: FormField) -> FormField:
    if w.degree >= w.grid.n:
        raise ValueError("exterior derivative of a top-degree form")
    return FormField(w.grid, w.degree + 1, d_array(w.components, w.grid.n, w.degree))


def hodge_star(w: FormField, metric: Metric) -> FormField:
    return star_matrix(metric, w.degree).apply(w)


def inverse_hodge_star(w: FormField, metric: Metric) -> FormField:
    """Inverse of the star that maps (n-j)-forms back to j-forms."""
    n = w.grid.n
    j = n - w.degree
    return hodge_star(w, metric) * float((-1) ** (j * (n - j)))


def codifferential(w: FormField, metric: Metric) -> FormField:
    k = w.degree
    if k == 0:
        raise ValueError("codifferential of a 0-form")
    if metric.is_flat():
        return _flat_codifferential(w)
    s = hodge_star(w, metric)
    return inverse_hodge_star(exterior_derivative(s), metric) * float((-1) ** k)


@lru_cache(maxsize=None)
def _delta_table(n: int, k: int):
    """Flat codifferential: (delta w)_I = -sum_a d_a w_{aI} with sorting sign."""
    pos = multi_index_position(n, k)
    table = []
    for co, I in enumerate(multi_indices(n, k - 1)):
        for a in range(n):
            if a in I:
                continue
            J = tuple(sorted((a,) + I))
            table.append((pos[J], a, co, -((-1) ** J.index(a))))
    return table


def _flat_codifferential(w: FormField) -> FormField:
    n, k = w.grid.n, w.degree
    comps = w.components
    out = np.zeros((w.grid.ncomp(k - 1),) + comps.shape[1:])
    for ci, a, co, sign in _delta_table(n, k):
        if comps.shape[comps.ndim - n + a] == 1:
            continue
        out[co] += sign * partial_array(comps[ci], a, n)
    return FormField(w.grid, k - 1, out)


def form_laplacian(w: FormField, metric: Metric) -> FormField:
    n, k = w.grid.n, w.degree
    out = FormField.zeros(w.grid, k)
    if k > 0:
        out = out + exterior_derivative(codifferential(w, metric))
    if k < n:
        out = out + codifferential(exterior_derivative(w), metric)
    return out


def wedge(a: FormField, b: FormField) -> FormField:
    n = a.grid.n
    p, q = a.degree, b.degree
    if p + q > n:
        raise ValueError("wedge degree exceeds dimension")
    pos = multi_index_position(n, p + q)
    shape = np.broadcast_shapes(a.components.shape[1:], b.components.shape[1:])
    out = np.zeros((a.grid.ncomp(p + q),) + shape)
    for i, I in enumerate(multi_indices(n, p)):
        for j, J in enumerate(multi_indices(n, q)):
            s = perm_sign(I + J)
            if s == 0:
                continue
            out[pos[tuple(sorted(I + J))]] += s * a.components[i] * b.components[j]
    return FormField(a.grid, p + q, out)


def interior_product(v: np.ndarray, w: FormField) -> FormField:
    """Contraction of a vector field ``v`` (shape ``(n, *grid)``) into the first slot of ``w``."""
    n, k = w.grid.n, w.degree
    if k == 0:
        raise ValueError("interior product of a 0-form")
    pos = multi_index_position(n, k - 1)
    shape = np.broadcast_shapes(v.shape[1:], w.components.shape[1:])
    out = np.zeros((w.grid.ncomp(k - 1),) + shape)
    for i, I in enumerate(multi_indices(n, k)):
        for p, a in enumerate(I):
            rest = I[:p] + I[p + 1:]
            out[pos[rest]] += ((-1) ** p) * v[a] * w.components[i]
    return FormField(w.grid, k - 1, out)


@lru_cache(maxsize=None)
def _j_table(n: int, k: int):
    """Entries (row I, col I', a, b, sign) of J(K): (J w)_I += sign K^a_b w_{I'}."""
    pos = multi_index_position(n, k)
    table = []
    for r, I in enumerate(multi_indices(n, k)):
        for p, b in enumerate(I):
            for a in range(n):
                new = I[:p] + (a,) + I[p + 1:]
                s = perm_sign(new)
                if s == 0:
                    continue
                table.append((r, pos[tuple(sorted(new))], a, b, s))
    return table


def j_endomorphism(K: np.ndarray, n: int, k: int) -> np.ndarray:
    """Matrix of the derivation extension of a (1,1) field ``K[a, b] = K^a_b`` to k-forms."""
    c = len(multi_indices(n, k))
    gshape = K.shape[2:]
    out = np.zeros((c, c) + gshape)
    for r, col, a, b, s in _j_table(n, k):
        out[r, col] += s * K[a, b]
    return out


def mixed_from_covariant(H: TensorField, metric: Metric | None) -> np.ndarray:
    """``K^a_b = h^{ac} H_{cb}``."""
    if metric is None:
        return H.components
    hinv = metric.h_inv.components
    n = H.grid.n
    shape = np.broadcast_shapes(hinv.shape[2:], H.components.shape[2:])
    out = np.zeros((n, n) + shape)
    for a in range(n):
        for c in range(n):
            if not np.any(hinv[a, c]):
                continue
            for b in range(n):
                out[a, b] += hinv[a, c] * H.components[c, b]
    return out


def j_operator(H, k: int, metric: Metric | None = None) -> EndomorphismField:
    """J(h^{-1} H) on k-forms.

    ``H`` is a :class:`TensorField` of rank 2 (lowered; raised with ``metric``) or
    a raw ``(n, n, *grid)`` array already of type (1,1) when ``metric`` is None.
    """
    if isinstance(H, TensorField):
        if H.rank != 2:
            raise ValueError("J requires a rank-2 tensor")
        grid = H.grid
        K = mixed_from_covariant(H, metric)
    else:
        K = np.asarray(H, float)
        if metric is None:
            raise ValueError("raw (1,1) arrays need a grid; pass a TensorField instead")
        grid = metric.grid
    return EndomorphismField(grid, k, k, j_endomorphism(K, grid.n, k))


def a_operator(curv, k: int) -> EndomorphismField:
    """A = J(h^{-1} P0) - tr(h^{-1} P0)/2 with P0 = 2 * Schouten."""
    metric = curv.metric
    P0 = curv.schouten * 2.0
    K = mixed_from_covariant(P0, metric)
    tr = sum(K[a, a] for a in range(metric.grid.n))
    J = j_endomorphism(K, metric.grid.n, k)
    A = EndomorphismField(metric.grid, k, k, J)
    return A - EndomorphismField.identity(metric.grid, k, 0.5 * np.asarray(tr))

"""Fields on the flat torus [0, 2*pi)^n with spectral differentiation.

Every field stores its samples in an array whose trailing ``n`` axes are the
grid axes.  A grid axis may have length 1 in storage, meaning the field is
constant along that axis; such arrays broadcast against full-size ones and
their derivative along that axis is zero.  This keeps metric and curvature
fields that depend on few coordinates small.

Forms of degree k carry ``C(n, k)`` components ordered by strictly increasing
multi-indices in lexicographic order (see :func:`multi_indices`).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import BinaryIO

import numpy as np
import scipy.fft as sfft

__all__ = [
    "TorusGrid",
    "ScalarField",
    "TensorField",
    "FormField",
    "multi_indices",
    "spectral_partial",
    "partial_array",
    "quadrature_inner",
    "random_lowfreq_form",
    "lowfreq_spectrum",
    "synthesize",
    "write_fbin",
    "read_fbin",
]


@lru_cache(maxsize=None)
def multi_indices(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    """Strictly increasing k-tuples of axis indices in lexicographic order."""
    return tuple(itertools.combinations(range(n), k))


@lru_cache(maxsize=None)
def multi_index_position(n: int, k: int) -> dict[tuple[int, ...], int]:
    return {I: p for p, I in enumerate(multi_indices(n, k))}


@dataclass(frozen=True)
class TorusGrid:
    n: int
    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if self.n < 2 or self.n % 2:
            raise ValueError(f"dimension must be even and >= 2, got {self.n}")
        if len(sizes) != self.n:
            raise ValueError("one size per axis required")
        for s in sizes:
            if s < 4 or s & (s - 1):
                raise ValueError(f"axis sizes must be powers of two >= 4, got {s}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.sizes

    @property
    def npoints(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def cell_volume(self) -> float:
        return float(np.prod([2 * np.pi / s for s in self.sizes]))

    def coordinate(self, axis: int) -> np.ndarray:
        """y_axis sampled on the grid, shaped to broadcast (length 1 elsewhere)."""
        shape = [1] * self.n
        shape[axis] = self.sizes[axis]
        return (2 * np.pi * np.arange(self.sizes[axis]) / self.sizes[axis]).reshape(shape)

    def coordinates(self) -> list[np.ndarray]:
        return [self.coordinate(a) for a in range(self.n)]

    def ncomp(self, k: int) -> int:
        return comb(self.n, k)

    def check_array(self, values: np.ndarray, lead: int) -> None:
        tail = values.shape[lead:]
        if len(tail) != self.n:
            raise ValueError(f"expected {self.n} grid axes, got shape {values.shape}")
        for s, g in zip(tail, self.sizes):
            if s not in (1, g):
                raise ValueError(f"grid axis of length {s} incompatible with {g}")


@lru_cache(maxsize=None)
def _wavenumbers(size: int, order: int) -> np.ndarray:
    m = np.arange(size // 2 + 1, dtype=float)
    factor = (1j * m) ** order
    if order % 2 == 1:
        factor[-1] = 0.0  # Nyquist mode has no odd derivative
    return factor


def partial_array(values: np.ndarray, axis: int, n: int, order: int = 1) -> np.ndarray:
    """Spectral derivative along grid axis ``axis`` of an array whose last n axes are the grid.

    Real FFTs are used, so the result is real by construction.
    """
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    if not 0 <= axis < n:
        raise IndexError(f"axis {axis} out of range for n={n}")
    ax = values.ndim - n + axis
    size = values.shape[ax]
    if size == 1:
        return np.zeros_like(values)
    spec = sfft.rfft(values, axis=ax)
    shape = [1] * values.ndim
    shape[ax] = spec.shape[ax]
    spec *= _wavenumbers(size, order).reshape(shape)
    return sfft.irfft(spec, n=size, axis=ax)


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        self.grid.check_array(v, 0)
        if not np.all(np.isfinite(v)):
            raise ValueError("scalar field has non-finite entries")
        object.__setattr__(self, "values", v)

    def full(self) -> np.ndarray:
        return np.broadcast_to(self.values, self.grid.sizes).copy()

    def as_form(self) -> "FormField":
        return FormField(self.grid, 0, self.values[None])

    def __add__(self, other):
        o = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values + o)

    def __sub__(self, other):
        o = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values - o)

    def __mul__(self, other):
        o = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values * o)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class TensorField:
    """Covariant rank-r tensor; ``components[a1, ..., ar]`` is a grid array."""

    grid: TorusGrid
    rank: int
    components: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        c = np.asarray(self.components, dtype=float)
        n = self.grid.n
        if c.shape[: self.rank] != (n,) * self.rank:
            raise ValueError("tensor index axes must all have length n")
        self.grid.check_array(c, self.rank)
        if self.symmetric:
            if self.rank != 2:
                raise ValueError("symmetric tag only supported for rank 2")
            c = 0.5 * (c + np.swapaxes(c, 0, 1))
        object.__setattr__(self, "components", c)

    def full(self) -> np.ndarray:
        return np.broadcast_to(self.components, self.components.shape[: self.rank] + self.grid.sizes).copy()

    def __add__(self, other: "TensorField"):
        return TensorField(self.grid, self.rank, self.components + other.components,
                           self.symmetric and other.symmetric)

    def __sub__(self, other: "TensorField"):
        return TensorField(self.grid, self.rank, self.components - other.components,
                           self.symmetric and other.symmetric)

    def __mul__(self, s):
        v = s.values if isinstance(s, ScalarField) else s
        return TensorField(self.grid, self.rank, self.components * v, self.symmetric)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class FormField:
    grid: TorusGrid
    degree: int
    components: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.components, dtype=float)
        if not 0 <= self.degree <= self.grid.n:
            raise ValueError(f"degree {self.degree} out of range")
        if c.shape[0] != self.grid.ncomp(self.degree):
            raise ValueError(f"expected {self.grid.ncomp(self.degree)} components, got {c.shape[0]}")
        self.grid.check_array(c, 1)
        object.__setattr__(self, "components", c)

    @classmethod
    def zeros(cls, grid: TorusGrid, degree: int) -> "FormField":
        return cls(grid, degree, np.zeros((grid.ncomp(degree),) + (1,) * grid.n))

    @classmethod
    def from_dict(cls, grid: TorusGrid, degree: int, comps: dict) -> "FormField":
        """Build from ``{(i1,...,ik): array}`` with 0-based increasing indices."""
        pos = multi_index_position(grid.n, degree)
        arrays = {pos[tuple(I)]: np.broadcast_to(np.asarray(v, float), grid.sizes) for I, v in comps.items()}
        out = np.zeros((grid.ncomp(degree),) + grid.sizes)
        for p, v in arrays.items():
            out[p] = v
        return cls(grid, degree, out)

    def full(self) -> np.ndarray:
        return np.broadcast_to(self.components, self.components.shape[:1] + self.grid.sizes).copy()

    def component(self, I) -> np.ndarray:
        return self.components[multi_index_position(self.grid.n, self.degree)[tuple(I)]]

    def _check(self, other: "FormField"):
        if other.grid != self.grid or other.degree != self.degree:
            raise ValueError("forms must share grid and degree")

    def __add__(self, other: "FormField"):
        self._check(other)
        return FormField(self.grid, self.degree, self.components + other.components)

    def __sub__(self, other: "FormField"):
        self._check(other)
        return FormField(self.grid, self.degree, self.components - other.components)

    def __mul__(self, s):
        v = s.values if isinstance(s, ScalarField) else s
        return FormField(self.grid, self.degree, self.components * v)

    __rmul__ = __mul__

    def __neg__(self):
        return FormField(self.grid, self.degree, -self.components)

    def __truediv__(self, s: float):
        return FormField(self.grid, self.degree, self.components / s)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.components))) if self.components.size else 0.0

    def l2(self) -> float:
        """Flat L2 norm (unit metric) by equal-weight quadrature."""
        full = self.full()
        return float(np.sqrt(np.sum(full * full) * self.grid.cell_volume))


def spectral_partial(f: ScalarField, axis: int, order: int = 1) -> ScalarField:
    """``order``-th partial derivative of a scalar field along ``axis``."""
    if not np.all(np.isfinite(f.values)):
        raise ValueError("non-finite input")
    return ScalarField(f.grid, partial_array(f.values, axis, f.grid.n, order))


def quadrature_inner(a: FormField, b: FormField, metric=None) -> float:
    """L2 pairing of two k-forms: sum of <a, b>_h sqrt(det h) over the grid times the cell volume.

    ``metric`` is an :class:`bgforms.exterior.Metric` or ``None`` for the flat metric.
    """
    if a.degree != b.degree or a.grid != b.grid:
        raise ValueError("degree or grid mismatch")
    grid = a.grid
    if metric is None:
        integrand = np.sum(a.components * b.components, axis=0)
    else:
        from .exterior import raise_form

        if np.any(metric.sqrt_det.values <= 0):
            raise ValueError("singular metric")
        raised = raise_form(b, metric)
        integrand = np.sum(a.components * raised.components, axis=0) * metric.sqrt_det.values
    integrand = np.broadcast_to(integrand, grid.sizes)
    return float(np.sum(integrand) * grid.cell_volume)


@dataclass(frozen=True)
class LowFreqSpectrum:
    """Fourier coefficients of a random trigonometric form, one complex cube per component."""

    grid: TorusGrid
    degree: int
    max_mode: int
    coeffs: np.ndarray = field(repr=False)  # (ncomp, 2M+1, ..., 2M+1)


def lowfreq_spectrum(grid: TorusGrid, k: int, max_mode: int, seed: int, strict: bool = True) -> LowFreqSpectrum:
    """Random coefficients for modes |m_i| <= max_mode.

    ``strict`` keeps max_mode <= min(sizes)/4 so that products of two such fields stay
    alias-free; without it the bound is max_mode < min(sizes)/2, which is enough for
    linear constant-coefficient operators.
    """
    bound = min(grid.sizes) // 4 if strict else min(grid.sizes) // 2 - 1
    if max_mode < 0 or max_mode > bound:
        raise ValueError(f"max_mode must lie in [0, {bound}], got {max_mode}")
    rng = np.random.default_rng(seed)
    side = 2 * max_mode + 1
    shape = (grid.ncomp(k),) + (side,) * grid.n
    coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    # mild decay keeps high derivatives well scaled
    m = np.arange(-max_mode, max_mode + 1)
    r2 = sum(np.meshgrid(*([m**2] * grid.n), indexing="ij"))
    coeffs *= np.exp(-0.25 * r2)[None]
    return LowFreqSpectrum(grid, k, max_mode, coeffs)


def synthesize(spec: LowFreqSpectrum, derivative: tuple[int, int] | None = None) -> FormField:
    """Evaluate the spectrum on the grid, optionally differentiated exactly in Fourier space."""
    grid, M = spec.grid, spec.max_mode
    coeffs = spec.coeffs
    if derivative is not None:
        axis, order = derivative
        m = np.arange(-M, M + 1)
        shape = [1] * (grid.n + 1)
        shape[axis + 1] = m.size
        coeffs = coeffs * ((1j * m) ** order).reshape(shape)
    out = np.empty((coeffs.shape[0],) + grid.sizes)
    full = np.zeros(grid.sizes, dtype=complex)
    idx = tuple(np.r_[-M : M + 1] % s for s in grid.sizes)
    mesh = np.ix_(*idx)
    for c in range(coeffs.shape[0]):
        full[...] = 0
        full[mesh] = coeffs[c]
        out[c] = np.real(sfft.ifftn(full, norm="forward"))
    return FormField(grid, spec.degree, out)


def random_lowfreq_form(grid: TorusGrid, k: int, max_mode: int, seed: int, strict: bool = True) -> FormField:
    """Deterministic pseudo-random trigonometric polynomial k-form with |m_i| <= max_mode."""
    return synthesize(lowfreq_spectrum(grid, k, max_mode, seed, strict))


# FBIN1 I/O


def _kind_of(f) -> tuple[str, int, np.ndarray]:
    if isinstance(f, ScalarField):
        return "scalar", 0, f.full()[None]
    if isinstance(f, TensorField):
        full = f.full()
        return "tensor", f.rank, full.reshape((-1,) + f.grid.sizes)
    if isinstance(f, FormField):
        return "form", f.degree, f.full()
    raise TypeError(f"cannot serialise {type(f).__name__}")


def write_fbin(f, target: str | BinaryIO) -> None:
    kind, rd, data = _kind_of(f)
    header = {"format": "FBIN1", "n": f.grid.n, "sizes": list(f.grid.sizes), "kind": kind,
              "rank_or_degree": rd, "order": "lex"}
    payload = json.dumps(header).encode("utf-8") + b"\n" + data.astype("<f8").tobytes(order="C")
    if isinstance(target, str):
        with open(target, "wb") as fh:
            fh.write(payload)
    else:
        target.write(payload)


def read_fbin(source: str | BinaryIO):
    if isinstance(source, str):
        with open(source, "rb") as fh:
            raw = fh.read()
    else:
        raw = source.read()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl].decode("utf-8"))
    if header.get("format") != "FBIN1":
        raise ValueError("not an FBIN1 file")
    grid = TorusGrid(header["n"], tuple(header["sizes"]))
    data = np.frombuffer(raw[nl + 1 :], dtype="<f8").astype(float)
    kind, rd = header["kind"], header["rank_or_degree"]
    if kind == "scalar":
        return ScalarField(grid, data.reshape(grid.sizes))
    if kind == "tensor":
        return TensorField(grid, rd, data.reshape((grid.n,) * rd + grid.sizes))
    if kind == "form":
        return FormField(grid, rd, data.reshape((grid.ncomp(rd),) + grid.sizes))
    raise ValueError(f"unknown kind {kind!r}")

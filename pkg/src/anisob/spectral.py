"""Spectral fields on a periodic torus and the Fourier-side operators over them.

Scalar fields live on a uniform ``n1 x n2`` grid covering ``[0, l1) x [0, l2)``
and are stored as full complex coefficient arrays in the ``norm="forward"``
FFT convention: the entry at index ``(a, b)`` multiplies
``exp(i*(k1*x1 + k2*x2))`` with ``k_i = 2*pi*m_i/l_i`` and ``m_i`` the signed
integer mode in FFT ordering.  With that convention Parseval reads
``int |f|^2 dx = l1*l2 * sum |fhat|^2``.

Everything here is either a diagonal Fourier multiplier or a pointwise
physical-space product followed by a transform.  Operators never mutate
their inputs; fields are value objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * math.pi


class GridMismatchError(ValueError):
    """Raised when an operation mixes fields from different grids."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid: ``n1 x n2`` points on ``[0, l1) x [0, l2)``.

    Mode counts must be even and at least 16.  Radial constructions
    (sharp spectral truncation, dyadic annuli) are expressed in integer-mode
    units; for the default ``2*pi`` periods these coincide with physical
    wavenumbers.
    """

    n1: int
    n2: int
    l1: float = TWO_PI
    l2: float = TWO_PI

    def __post_init__(self):
        for n in (self.n1, self.n2):
            if n < 16 or n % 2 != 0:
                raise ValueError(f"grid size must be even and >= 16, got {n}")
        if self.l1 <= 0 or self.l2 <= 0:
            raise ValueError("domain periods must be positive")

    # -- mode and wavenumber tables (broadcast shapes (n1,1) and (1,n2)) --

    @cached_property
    def modes1(self) -> np.ndarray:
        return np.fft.fftfreq(self.n1, d=1.0 / self.n1).reshape(-1, 1)

    @cached_property
    def modes2(self) -> np.ndarray:
        return np.fft.fftfreq(self.n2, d=1.0 / self.n2).reshape(1, -1)

    @cached_property
    def k1(self) -> np.ndarray:
        return (TWO_PI / self.l1) * self.modes1

    @cached_property
    def k2(self) -> np.ndarray:
        return (TWO_PI / self.l2) * self.modes2

    @cached_property
    def ksq(self) -> np.ndarray:
        return self.k1**2 + self.k2**2

    @cached_property
    def abs_modes(self) -> np.ndarray:
        return np.sqrt(self.modes1**2 + self.modes2**2)

    @cached_property
    def nyquist1(self) -> np.ndarray:
        return self.modes1 == -(self.n1 // 2)

    @cached_property
    def nyquist2(self) -> np.ndarray:
        return self.modes2 == -(self.n2 // 2)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep ``|m_i| <= n_i/3`` per axis."""
        return (np.abs(self.modes1) <= self.n1 / 3.0) & (
            np.abs(self.modes2) <= self.n2 / 3.0
        )

    @property
    def dealias_radius(self) -> float:
        return min(self.n1, self.n2) / 3.0

    @property
    def cell_area(self) -> float:
        return self.l1 * self.l2 / (self.n1 * self.n2)

    @property
    def area(self) -> float:
        return self.l1 * self.l2

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        x1 = np.arange(self.n1) * (self.l1 / self.n1)
        x2 = np.arange(self.n2) * (self.l2 / self.n2)
        return np.meshgrid(x1, x2, indexing="ij")


def hermitian_symmetrize(coeffs: np.ndarray) -> np.ndarray:
    """Project onto the Hermitian part: coefficients of a real field."""
    n1, n2 = coeffs.shape
    i1 = (-np.arange(n1)) % n1
    i2 = (-np.arange(n2)) % n2
    return 0.5 * (coeffs + np.conj(coeffs[np.ix_(i1, i2)]))


@dataclass
class SpectralField:
    """One scalar field stored as Fourier coefficients on its grid."""

    grid: Grid
    coeffs: np.ndarray

    @classmethod
    def from_values(cls, grid: Grid, values: np.ndarray) -> "SpectralField":
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n1, grid.n2):
            raise ValueError("value array does not match grid shape")
        return cls(grid, np.fft.fft2(values, norm="forward"))

    @classmethod
    def zero(cls, grid: Grid) -> "SpectralField":
        return cls(grid, np.zeros((grid.n1, grid.n2), dtype=complex))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "SpectralField":
        f = cls.zero(grid)
        f.coeffs[0, 0] = c
        return f

    def values(self) -> np.ndarray:
        """Physical-space values, real part (fields represent real functions)."""
        return np.fft.ifft2(self.coeffs, norm="forward").real

    def values_complex(self) -> np.ndarray:
        return np.fft.ifft2(self.coeffs, norm="forward")

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def symmetrized(self) -> "SpectralField":
        return SpectralField(self.grid, hermitian_symmetrize(self.coeffs))

    # value semantics: arithmetic returns new fields
    def __add__(self, other: "SpectralField") -> "SpectralField":
        _require_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _require_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass
class VectorField:
    """Pair of scalar fields on a shared grid, optionally marked solenoidal."""

    u1: SpectralField
    u2: SpectralField
    divergence_free: bool = False

    def __post_init__(self):
        _require_same_grid(self.u1, self.u2)

    @property
    def grid(self) -> Grid:
        return self.u1.grid

    @classmethod
    def zero(cls, grid: Grid) -> "VectorField":
        return cls(SpectralField.zero(grid), SpectralField.zero(grid), True)

    @classmethod
    def from_values(cls, grid: Grid, v1: np.ndarray, v2: np.ndarray) -> "VectorField":
        return cls(SpectralField.from_values(grid, v1), SpectralField.from_values(grid, v2))

    def copy(self) -> "VectorField":
        return VectorField(self.u1.copy(), self.u2.copy(), self.divergence_free)

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, scalar: float) -> "VectorField":
        return VectorField(self.u1 * scalar, self.u2 * scalar, self.divergence_free)

    __rmul__ = __mul__


def _require_same_grid(f, g) -> None:
    if f.grid != g.grid:
        raise GridMismatchError("fields live on different grids")


# ---------------------------------------------------------------------------
# Diagonal multiplier operators
# ---------------------------------------------------------------------------


def derivative(f: SpectralField, axis: int, order: int = 1) -> SpectralField:
    """Partial derivative along ``axis`` (1 or 2) of the given order.

    Odd orders zero the unpaired Nyquist modes of the differentiated axis so
    real fields stay real.
    """
    if axis not in (1, 2):
        raise ValueError("axis must be 1 or 2")
    if order < 1:
        raise ValueError("order must be >= 1")
    g = f.grid
    k = g.k1 if axis == 1 else g.k2
    mult = (1j * k) ** order
    if order % 2 == 1:
        mult = np.where(g.nyquist1 if axis == 1 else g.nyquist2, 0.0, mult)
    return SpectralField(g, f.coeffs * mult)


def fractional_d(f: SpectralField, axis: int, sigma: float) -> SpectralField:
    """Multiplier ``|k_axis|^sigma``; ``sigma = 0`` is the identity."""
    if axis not in (1, 2):
        raise ValueError("axis must be 1 or 2")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    g = f.grid
    k = g.k1 if axis == 1 else g.k2
    return SpectralField(g, f.coeffs * np.abs(k) ** sigma)


def fractional_d1(f: SpectralField, sigma: float) -> SpectralField:
    return fractional_d(f, 1, sigma)


def fractional_d2(f: SpectralField, sigma: float) -> SpectralField:
    return fractional_d(f, 2, sigma)


def riesz_r1(f: SpectralField) -> SpectralField:
    """First-axis Riesz multiplier ``sign(k1)``.

    Chosen so that ``derivative(riesz_r1(f), 1) == i * fractional_d1(f, 1)``
    holds exactly in Fourier space.  Modes constant along x1 (including the
    mean) are annihilated; the multiplier has magnitude at most one, so the
    L2 norm never grows.  Note the output of a real field is purely
    imaginary in physical space (the multiplier is odd and real).
    """
    g = f.grid
    return SpectralField(g, f.coeffs * np.sign(g.modes1))


def leray_project(v: VectorField) -> VectorField:
    """L2-orthogonal projection onto divergence-free fields.

    The zero mode (mean velocity) is untouched; every other mode loses its
    component parallel to k.
    """
    g = v.grid
    ksq = g.ksq.copy()
    ksq[0, 0] = 1.0  # zero mode passes through untouched
    div = (g.k1 * v.u1.coeffs + g.k2 * v.u2.coeffs) / ksq
    c1 = v.u1.coeffs - g.k1 * div
    c2 = v.u2.coeffs - g.k2 * div
    return VectorField(SpectralField(g, c1), SpectralField(g, c2), divergence_free=True)


def sharp_truncate(f: SpectralField, radius: float) -> SpectralField:
    """Zero every coefficient with ``|m| > radius`` (sharp radial indicator).

    The radius is in integer-mode units; see :class:`Grid`.
    """
    if radius <= 0:
        raise ValueError("truncation radius must be positive")
    g = f.grid
    return SpectralField(g, np.where(g.abs_modes <= radius, f.coeffs, 0.0))


def inv_one_minus_d2sq(f: SpectralField) -> SpectralField:
    """Inverse of ``1 - d^2/dx2^2``: divide each coefficient by ``1 + k2^2``."""
    g = f.grid
    return SpectralField(g, f.coeffs / (1.0 + g.k2**2))


def divergence(v: VectorField) -> SpectralField:
    return derivative(v.u1, 1) + derivative(v.u2, 2)


def gradient(f: SpectralField) -> VectorField:
    return VectorField(derivative(f, 1), derivative(f, 2))


def vorticity(u: VectorField) -> SpectralField:
    """Scalar curl ``d1 u2 - d2 u1``."""
    return derivative(u.u2, 1) - derivative(u.u1, 2)


def biot_savart(omega: SpectralField) -> VectorField:
    """Mean-free divergence-free velocity with the given vorticity.

    Requires a mean-free vorticity; the reconstructed velocity has zero mean
    (gauge choice on the torus).
    """
    g = omega.grid
    scale = max(l2_norm(omega), 1.0)
    if abs(omega.coeffs[0, 0]) > 1e-12 * scale:
        raise ValueError("biot_savart requires a mean-free vorticity")
    ksq = g.ksq.copy()
    ksq[0, 0] = 1.0
    psi = omega.coeffs / ksq  # = -streamfunction coefficients
    c1 = 1j * g.k2 * psi
    c2 = -1j * g.k1 * psi
    nyq = g.nyquist1 | g.nyquist2
    c1[nyq] = 0.0
    c2[nyq] = 0.0
    c1[0, 0] = 0.0
    c2[0, 0] = 0.0
    return VectorField(SpectralField(g, c1), SpectralField(g, c2), divergence_free=True)


# ---------------------------------------------------------------------------
# Products and norms
# ---------------------------------------------------------------------------


def nonlinear_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pointwise product computed in physical space with 2/3-rule dealiasing.

    Exact (up to roundoff) on the retained band whenever both inputs are
    band-limited to the dealias region.  Hermitian symmetry is restored on
    the result.
    """
    _require_same_grid(f, g)
    grid = f.grid
    prod = f.values() * g.values()
    coeffs = np.fft.fft2(prod, norm="forward")
    coeffs *= grid.dealias_mask
    return SpectralField(grid, hermitian_symmetrize(coeffs))


def lp_norm(f: SpectralField, p: float) -> float:
    """Equal-weight quadrature of ``|f|^p`` over the torus; ``p = inf`` is a grid max."""
    if p != math.inf and p < 1:
        raise ValueError("p must be >= 1 or inf")
    vals = np.abs(f.values_complex())
    if p == math.inf:
        return float(vals.max())
    vmax = vals.max()
    if vmax == 0.0:
        return 0.0
    # factor out the max to keep vals**p in range for large p
    s = np.sum((vals / vmax) ** p) * f.grid.cell_area
    return float(vmax * s ** (1.0 / p))


def l2_norm(f: SpectralField) -> float:
    """L2 norm evaluated via Parseval (equals ``lp_norm(f, 2)`` to roundoff)."""
    return float(math.sqrt(f.grid.area * np.sum(np.abs(f.coeffs) ** 2)))


def inner_l2(f: SpectralField, g: SpectralField) -> float:
    """Real L2 inner product via Parseval."""
    _require_same_grid(f, g)
    return float(f.grid.area * np.sum(np.conj(f.coeffs) * g.coeffs).real)


def h_norm(f: SpectralField, s: float) -> float:
    """Standard Sobolev norm with multiplier ``(1 + |k|^2)^(s/2)``."""
    g = f.grid
    w = (1.0 + g.ksq) ** s
    return float(math.sqrt(g.area * np.sum(w * np.abs(f.coeffs) ** 2)))


def vector_l2_norm(v: VectorField) -> float:
    return float(math.sqrt(l2_norm(v.u1) ** 2 + l2_norm(v.u2) ** 2))


def vector_linf_norm(v: VectorField) -> float:
    """Grid max of the pointwise vector magnitude."""
    speed = np.hypot(v.u1.values(), v.u2.values())
    return float(speed.max())


def grad_linf_norm(v: VectorField) -> float:
    """Max over the four entries of ``grad v`` of their grid sup."""
    out = 0.0
    for comp in (v.u1, v.u2):
        for axis in (1, 2):
            out = max(out, lp_norm(derivative(comp, axis), math.inf))
    return out

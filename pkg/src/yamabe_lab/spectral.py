"""Periodic spectral calculus on a circle of radius L.

Fields are sampled at N equispaced arclength nodes s_j = 2 pi L j / N.
Differentiation is done through the real FFT; integration is the periodic
trapezoidal rule times the area of the unit (n-1)-sphere, which is exact on
trigonometric polynomials of degree below N.

The Laplacian keeps the Nyquist mode (symbol -(N/2L)^2) so that
-Delta is positive on every nonconstant grid function; the first
derivative zeroes it, as usual for odd-order spectral operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=True)
class Grid:
    N: int
    L: float
    sphere_volume: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 8 or self.N % 2:
            raise ValueError(f"N must be an even integer >= 8, got {self.N}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    @cached_property
    def nodes(self) -> np.ndarray:
        """Arclength coordinates of the collocation nodes."""
        return 2.0 * math.pi * self.L * np.arange(self.N) / self.N

    @cached_property
    def theta(self) -> np.ndarray:
        """Angular coordinates s / L of the nodes."""
        return 2.0 * math.pi * np.arange(self.N) / self.N

    @cached_property
    def weight(self) -> float:
        return 2.0 * math.pi * self.L / self.N * self.sphere_volume

    @property
    def volume(self) -> float:
        return 2.0 * math.pi * self.L * self.sphere_volume

    @cached_property
    def modes(self) -> np.ndarray:
        return np.arange(self.N // 2 + 1)

    @cached_property
    def _deriv_symbol(self) -> np.ndarray:
        sym = 1j * self.modes / self.L
        sym[-1] = 0.0
        return sym

    @cached_property
    def _lap_symbol(self) -> np.ndarray:
        return -((self.modes / self.L) ** 2)

    @cached_property
    def laplacian_matrix(self) -> np.ndarray:
        """Dense circulant matrix of the spectral Laplacian (symmetric)."""
        m = apply_laplacian(np.eye(self.N), self)
        return 0.5 * (m + m.T)

    def compatible(self, other: "Grid") -> bool:
        return (
            self.N == other.N
            and math.isclose(self.L, other.L, rel_tol=1e-14)
            and math.isclose(self.sphere_volume, other.sphere_volume, rel_tol=1e-14)
        )


def apply_derivative(values: np.ndarray, grid: Grid) -> np.ndarray:
    c = sfft.rfft(values, axis=0)
    sym = grid._deriv_symbol.reshape((-1,) + (1,) * (c.ndim - 1))
    return sfft.irfft(c * sym, n=grid.N, axis=0)


def apply_laplacian(values: np.ndarray, grid: Grid) -> np.ndarray:
    c = sfft.rfft(values, axis=0)
    sym = grid._lap_symbol.reshape((-1,) + (1,) * (c.ndim - 1))
    return sfft.irfft(c * sym, n=grid.N, axis=0)


def apply_rotation(values: np.ndarray, grid: Grid, alpha: float) -> np.ndarray:
    """Values of f(theta - alpha): rotate a field by angle alpha."""
    c = sfft.rfft(values, axis=0)
    phase = np.exp(-1j * grid.modes * alpha)
    # the Nyquist mode cannot carry a phase on the grid; keep its real part
    phase[-1] = np.cos(grid.N // 2 * alpha)
    return sfft.irfft(c * phase.reshape((-1,) + (1,) * (c.ndim - 1)), n=grid.N, axis=0)


@dataclass(frozen=True, eq=False)
class Field:
    """A circle-dependent real function sampled at the grid nodes."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} nodal values, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "Field":
        return cls(grid, np.full(grid.N, float(c)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "Field":
        """Sample fn(theta) at the nodes, theta = arclength / L."""
        return cls(grid, fn(grid.theta))

    @classmethod
    def from_coefficients(cls, grid: Grid, coeffs: np.ndarray) -> "Field":
        return cls(grid, coefficients_to_values(np.asarray(coeffs, dtype=float), grid.N))

    @cached_property
    def coefficients(self) -> np.ndarray:
        """Real trigonometric coefficients [a0, a1, b1, ..., a_{N/2-1}, b_{N/2-1}, a_{N/2}].

        The field is a0 + sum_k (a_k cos k theta + b_k sin k theta) + a_{N/2} cos(N theta / 2).
        """
        return values_to_coefficients(self.values)

    def rotate(self, alpha: float) -> "Field":
        return Field(self.grid, apply_rotation(self.values, self.grid, alpha))

    def _other(self, other):
        if isinstance(other, Field):
            if not self.grid.compatible(other.grid):
                raise GridMismatch("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return Field(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.values / self._other(other))

    def __neg__(self):
        return Field(self.grid, -self.values)

    def __pow__(self, p):
        return Field(self.grid, self.values**p)

    def __len__(self):
        return self.grid.N

    def __repr__(self):
        return f"Field(N={self.grid.N}, L={self.grid.L:g}, min={self.values.min():.6g}, max={self.values.max():.6g})"


def values_to_coefficients(values: np.ndarray) -> np.ndarray:
    N = values.shape[0]
    c = sfft.rfft(values) / N
    out = np.empty(N)
    out[0] = c[0].real
    out[1:-1:2] = 2.0 * c[1:-1].real
    out[2:-1:2] = -2.0 * c[1:-1].imag
    out[-1] = c[-1].real
    return out


def coefficients_to_values(coeffs: np.ndarray, N: int) -> np.ndarray:
    if coeffs.shape != (N,):
        raise ValueError(f"expected {N} coefficients, got {coeffs.shape}")
    c = np.zeros(N // 2 + 1, dtype=complex)
    c[0] = coeffs[0]
    c[1:-1] = 0.5 * (coeffs[1:-1:2] - 1j * coeffs[2:-1:2])
    c[-1] = coeffs[-1]
    return sfft.irfft(c * N, n=N)


def derivative(f: Field) -> Field:
    """Derivative with respect to arclength."""
    return Field(f.grid, apply_derivative(f.values, f.grid))


def laplacian(f: Field) -> Field:
    return Field(f.grid, apply_laplacian(f.values, f.grid))


def integrate(f: Field) -> float:
    """Integral over S^1(L) x S^{n-1} of a circle-dependent function."""
    return float(f.grid.weight * np.sum(f.values))


def _check_same_grid(f: Field, h: Field) -> None:
    if not f.grid.compatible(h.grid):
        raise GridMismatch("fields live on different grids")


def inner_products(f: Field, h: Field) -> tuple[float, float]:
    """Return the L^2 and W^{1,2} inner products of f and h.

    The W^{1,2} product is int (f' h' + f h) with unit weights; the gradient
    term is evaluated as int f (-Delta h), which agrees with int f' h' up to
    the Nyquist mode and keeps it consistent with the energy.
    """
    _check_same_grid(f, h)
    w = f.grid.weight
    l2 = w * float(np.dot(f.values, h.values))
    grad = -w * float(np.dot(f.values, apply_laplacian(h.values, h.grid)))
    return l2, l2 + grad


def l2_norm(f: Field) -> float:
    return math.sqrt(max(inner_products(f, f)[0], 0.0))


def w12_norm(f: Field) -> float:
    return math.sqrt(max(inner_products(f, f)[1], 0.0))


def resample(f: Field, N: int) -> Field:
    """Trigonometric interpolation of f onto a grid with N nodes."""
    grid = Grid(N=N, L=f.grid.L, sphere_volume=f.grid.sphere_volume)
    M = f.grid.N
    c = sfft.rfft(f.values) / M
    out = np.zeros(N // 2 + 1, dtype=complex)
    k = min(M, N) // 2
    out[:k] = c[:k]
    # split or fold the Nyquist coefficient so the result stays real
    if N > M:
        out[k] = 0.5 * c[k].real
    else:
        out[k] = c[k].real if N == M else 2.0 * c[k].real
    return Field(grid, sfft.irfft(out * N, n=N))

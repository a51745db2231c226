"""Background geometry of the product S^1(L) x S^{n-1}(1).

Conformal factors are restricted to functions of the circle arclength, so
the Laplacian of the product metric reduces to the second derivative along
the circle and every integral over the sphere factor contributes the
constant area of the unit (n-1)-sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import Field, Grid, laplacian


class DomainError(ValueError):
    """Raised when an input lies outside the domain of a geometric operation."""


def unit_sphere_volume(k: int) -> float:
    """Volume of the unit k-sphere, 2 pi^{(k+1)/2} / Gamma((k+1)/2)."""
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


@dataclass(frozen=True)
class Manifold:
    n: int
    L: float
    R_g: float = field(init=False)
    c_n: float = field(init=False)
    p_star: float = field(init=False)
    sphere_volume: float = field(init=False)
    vol_g: float = field(init=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise DomainError(f"dimension n must be an integer >= 3, got {self.n}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise DomainError(f"circle length L must be positive, got {self.L}")
        n = int(self.n)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "L", float(self.L))
        # S^{n-1}(1) has scalar curvature k(k-1) with k = n-1; the flat circle adds nothing
        object.__setattr__(self, "R_g", float((n - 1) * (n - 2)))
        object.__setattr__(self, "c_n", 4.0 * (n - 1) / (n - 2))
        object.__setattr__(self, "p_star", 2.0 * n / (n - 2))
        omega = unit_sphere_volume(n - 1)
        object.__setattr__(self, "sphere_volume", omega)
        object.__setattr__(self, "vol_g", 2.0 * math.pi * self.L * omega)

    @property
    def critical_length(self) -> float:
        """Circle length at which the first circle mode becomes a zero mode of the constant."""
        return critical_length(self.n)

    def grid(self, N: int = 256) -> Grid:
        return Grid(N=N, L=self.L, sphere_volume=self.sphere_volume)

    def constant(self, grid: Grid | None = None) -> Field:
        """The constant element of the unit-volume constraint set."""
        grid = grid if grid is not None else self.grid()
        self.check_grid(grid)
        return Field.constant(grid, self.vol_g ** (-1.0 / self.p_star))

    def check_grid(self, grid: Grid) -> None:
        if not math.isclose(grid.L, self.L, rel_tol=1e-14) or not math.isclose(
            grid.sphere_volume, self.sphere_volume, rel_tol=1e-14
        ):
            raise DomainError("field grid does not belong to this manifold")

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "L": self.L,
            "R_g": self.R_g,
            "c_n": self.c_n,
            "p_star": self.p_star,
            "vol_g": self.vol_g,
            "critical_length": self.critical_length,
        }


def critical_length(n: int) -> float:
    # c_n (k/L)^2 = (2* - 2) R_g with k = 1 gives 1/L^2 = n - 2
    return 1.0 / math.sqrt(n - 2)


def make_product_manifold(n: int, L: float) -> tuple[Manifold, float]:
    """Build S^1(L) x S^{n-1}(1) and return it with the critical length L*."""
    man = Manifold(n, L)
    return man, man.critical_length


def check_positive(u: Field | np.ndarray, what: str = "conformal factor") -> None:
    values = u.values if isinstance(u, Field) else np.asarray(u)
    bad = np.flatnonzero(~(values > 0))
    if bad.size:
        j = int(bad[0])
        raise DomainError(
            f"{what} must be positive at every node; node {j} has value {values[j]!r}"
        )


def conformal_scalar_curvature(man: Manifold, u: Field) -> Field:
    """Scalar curvature of u^{4/(n-2)} g: u^{1-2*} (-c_n u'' + R_g u)."""
    man.check_grid(u.grid)
    check_positive(u)
    lu = -man.c_n * laplacian(u).values + man.R_g * u.values
    return Field(u.grid, u.values ** (1.0 - man.p_star) * lu)


def conformal_laplacian(man: Manifold, f: Field, sigma: Field | None = None) -> Field:
    """Apply -c_n Delta + R for the metric e^{2 sigma} g.

    Computed from the standard curvature and Laplacian formulas for a
    conformally rescaled metric (not from the covariance law), so it can be
    used to check that law independently.
    """
    man.check_grid(f.grid)
    if sigma is None:
        return Field(f.grid, -man.c_n * laplacian(f).values + man.R_g * f.values)
    n = man.n
    from .spectral import derivative

    ds = derivative(sigma).values
    df = derivative(f).values
    lap_s = laplacian(sigma).values
    lap_f = laplacian(f).values
    e2 = np.exp(-2.0 * sigma.values)
    lap_hat = e2 * (lap_f + (n - 2) * ds * df)
    r_hat = e2 * (man.R_g - 2.0 * (n - 1) * lap_s - (n - 2) * (n - 1) * ds * ds)
    return Field(f.grid, -man.c_n * lap_hat + r_hat * f.values)

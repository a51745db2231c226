"""Yamabe energy on the unit-volume constraint set and the associated norms.

Nonlinear powers u^{2*-1}, u^{2*-2} are evaluated pointwise at the nodes, so
the discrete energy is an exact function of the nodal values and all of the
derivatives below are exact derivatives of that discrete energy.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .manifold import DomainError, Manifold, check_positive
from .spectral import (
    Field,
    Grid,
    apply_derivative,
    apply_laplacian,
    apply_rotation,
    inner_products,
    values_to_coefficients,
)

# ----------------------------------------------------------------------------
# array-level kernels shared with the hessian, reduction and solver modules


def conformal_operator(man: Manifold, values: np.ndarray, grid: Grid) -> np.ndarray:
    """(-c_n Delta + R_g) applied to nodal values."""
    return -man.c_n * apply_laplacian(values, grid) + man.R_g * values


def energy_parts(man: Manifold, values: np.ndarray, grid: Grid) -> tuple[float, float, np.ndarray]:
    """Return (numerator E, volume integral V, A u) for nodal values u."""
    au = conformal_operator(man, values, grid)
    E = grid.weight * float(np.dot(values, au))
    V = grid.weight * float(np.sum(values**man.p_star))
    return E, V, au


def quotient(man: Manifold, values: np.ndarray, grid: Grid) -> float:
    E, V, _ = energy_parts(man, values, grid)
    return E / V ** (2.0 / man.p_star)


def residual_values(man: Manifold, values: np.ndarray, grid: Grid) -> tuple[np.ndarray, float]:
    """Euler-Lagrange residual A u - Q(u) u^{2*-1} and Q(u)."""
    E, V, au = energy_parts(man, values, grid)
    Q = E / V ** (2.0 / man.p_star)
    return au - Q * values ** (man.p_star - 1.0), Q


def orthogonal_tangent(z: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """L^2-orthogonal projection of phi onto the hyperplane orthogonal to z."""
    return phi - (np.dot(z, phi) / np.dot(z, z)) * z


# ----------------------------------------------------------------------------
# public operations on fields


def _check(man: Manifold, u: Field) -> None:
    man.check_grid(u.grid)
    check_positive(u)


def volume_integral(man: Manifold, u: Field) -> float:
    """int u^{2*} dvol_g."""
    man.check_grid(u.grid)
    return u.grid.weight * float(np.sum(np.abs(u.values) ** man.p_star))


def critical_norm(man: Manifold, u: Field) -> float:
    """||u||_{L^{2*}}."""
    return volume_integral(man, u) ** (1.0 / man.p_star)


def yamabe_energy(man: Manifold, u: Field) -> float:
    """Yamabe quotient (int c_n |u'|^2 + R_g u^2) / ||u||_{2*}^2."""
    _check(man, u)
    return quotient(man, u.values, u.grid)


def multiplier(man: Manifold, u: Field) -> float:
    """Euler-Lagrange multiplier lambda = Q(u) ||u||_{2*}^{2-2*}."""
    _check(man, u)
    return yamabe_energy(man, u) * critical_norm(man, u) ** (2.0 - man.p_star)


def normalize_volume(man: Manifold, u: Field) -> Field:
    _check(man, u)
    return Field(u.grid, u.values / critical_norm(man, u))


def tangent_project(man: Manifold, v: Field, phi: Field) -> Field:
    """phi - (int v^{2*-1} phi) v, the projection onto T_v B along v."""
    man.check_grid(v.grid)
    z = v.values ** (man.p_star - 1.0)
    coef = v.grid.weight * float(np.dot(z, phi.values))
    return Field(v.grid, phi.values - coef * v.values)


def orthogonal_tangent_project(man: Manifold, v: Field, phi: Field) -> Field:
    """L^2-orthogonal projection of phi onto T_v B = {int v^{2*-1} phi = 0}."""
    man.check_grid(v.grid)
    z = v.values ** (man.p_star - 1.0)
    return Field(v.grid, orthogonal_tangent(z, phi.values))


def el_residual(man: Manifold, u: Field) -> Field:
    """-c_n Delta u + R_g u - Q(u) u^{2*-1}."""
    _check(man, u)
    r, _ = residual_values(man, u.values, u.grid)
    return Field(u.grid, r)


def gradient(man: Manifold, u: Field) -> Field:
    """L^2 Riesz representative of the first variation of Q on B at u.

    The result lies in T_u B and satisfies <gradient, phi>_{L^2} = dQ(u)[phi]
    for every tangent phi.
    """
    _check(man, u)
    r, _ = residual_values(man, u.values, u.grid)
    z = u.values ** (man.p_star - 1.0)
    return Field(u.grid, 2.0 * orthogonal_tangent(z, r))


@dataclass
class EnergyReport:
    q: float
    lam: float
    deficit: float
    el_residual_sup: float

    def to_json(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


def energy_report(man: Manifold, u: Field, Y_ref: float) -> EnergyReport:
    Q = yamabe_energy(man, u)
    lam = Q * critical_norm(man, u) ** (2.0 - man.p_star)
    # the residual uses the multiplier, so it is meaningful off B as well
    r = conformal_operator(man, u.values, u.grid) - lam * u.values ** (man.p_star - 1.0)
    return EnergyReport(q=Q, lam=lam, deficit=Q - Y_ref, el_residual_sup=float(np.max(np.abs(r))))


# ----------------------------------------------------------------------------
# conformally invariant distances


def _representative_weights(man: Manifold, psi: Field | None):
    """Volume density and gradient weight of psi^{4/(n-2)} g relative to g."""
    if psi is None:
        return 1.0, 1.0
    check_positive(psi, "representative factor")
    return psi.values**man.p_star, psi.values ** (-4.0 / (man.n - 2))


def conformal_distance(man: Manifold, u: Field, v: Field, representative: Field | None = None) -> float:
    """||g_u - g_v|| = (int |u - v|^{2*})^{1/2*}.

    With a representative g_hat = psi^{4/(n-2)} g the metrics are described by
    the factors u/psi and v/psi and the integral is taken against dvol_{g_hat}.
    """
    man.check_grid(u.grid)
    dens, _ = _representative_weights(man, representative)
    diff = u.values - v.values
    if representative is not None:
        diff = diff / representative.values
    total = u.grid.weight * float(np.sum(np.abs(diff) ** man.p_star * dens))
    return total ** (1.0 / man.p_star)


def conformal_distance_star(
    man: Manifold,
    u: Field,
    v: Field,
    Y: float,
    representative: Field | None = None,
    check_tol: float = 1e-8,
) -> float:
    """||g_u - g_v||_* = (int c_n |grad(u - v)|^2 + Y (u - v)^2)^{1/2}.

    Gradients, lengths and volume are those of the representative metric.
    The form is only representative independent when the representative is
    a unit-volume Yamabe metric with scalar curvature Y; a mismatch is logged.
    """
    if Y < 0:
        raise DomainError(f"||.||_* is defined only for Y >= 0, got {Y}")
    man.check_grid(u.grid)
    dens, gw = _representative_weights(man, representative)
    diff = u.values - v.values
    if representative is not None:
        diff = diff / representative.values
        _warn_if_not_yamabe(man, representative, Y, check_tol)
    d = apply_derivative(diff, u.grid)
    form = u.grid.weight * float(np.sum((man.c_n * gw * d * d + Y * diff * diff) * dens))
    scale = u.grid.weight * float(np.sum((man.c_n * gw * d * d + abs(Y) * diff * diff) * dens))
    if form < -1e-12 * max(scale, 1.0):
        raise DomainError(f"quadratic form is not positive: {form!r}")
    return math.sqrt(max(form, 0.0))


def _warn_if_not_yamabe(man: Manifold, psi: Field, Y: float, tol: float) -> None:
    import logging

    from .manifold import conformal_scalar_curvature

    R = conformal_scalar_curvature(man, psi).values
    vol = volume_integral(man, psi)
    if np.max(np.abs(R - Y)) > tol * max(1.0, abs(Y)) or abs(vol - 1.0) > tol:
        logging.getLogger(__name__).warning(
            "representative is not a unit-volume Yamabe metric (|R - Y| = %.3g, vol = %.12g)",
            float(np.max(np.abs(R - Y))),
            vol,
        )


# ----------------------------------------------------------------------------
# distance to a finite set of minimizers, reduced by the circle action


def _w12_sq(values: np.ndarray, grid: Grid) -> float:
    return grid.weight * float(np.dot(values, values - apply_laplacian(values, grid)))


def align_rotation(u: Field, v: Field, mode_tol: float = 1e-10) -> tuple[float, float]:
    """Rotation angle alpha minimizing ||u - R_alpha v||_{W^{1,2}}.

    Phases of the first nonzero mode of v give candidate angles which are
    then refined by a bounded one-dimensional search.  Returns (alpha, squared distance).
    """
    grid = v.grid

    def dist2(alpha: float) -> float:
        return _w12_sq(u.values - apply_rotation(v.values, grid, alpha), grid)

    cv = values_to_coefficients(v.values)
    cu = values_to_coefficients(u.values)
    amp = np.hypot(cv[1:-1:2], cv[2:-1:2])
    scale = max(abs(cv[0]), float(np.max(np.abs(cv))), 1e-300)
    nz = np.flatnonzero(amp > mode_tol * scale)
    if nz.size == 0:
        return 0.0, dist2(0.0)
    k0 = int(nz[0]) + 1
    # coefficient of cos k0 theta + i sin k0 theta as a complex number
    zv = complex(cv[2 * k0 - 1], -cv[2 * k0])
    zu = complex(cu[2 * k0 - 1], -cu[2 * k0])
    base = (np.angle(zv) - np.angle(zu)) / k0 if abs(zu) > 0 else 0.0
    best_alpha, best = 0.0, dist2(0.0)
    half = math.pi / k0
    for j in range(k0):
        a0 = base + 2.0 * math.pi * j / k0
        d0 = dist2(a0)
        if d0 < best:
            best_alpha, best = a0, d0
        res = minimize_scalar(dist2, bounds=(a0 - half / 2, a0 + half / 2), method="bounded",
                              options={"xatol": 1e-12})
        if res.fun < best:
            best_alpha, best = float(res.x), float(res.fun)
    return float(np.mod(best_alpha, 2 * math.pi)), best


def distance_to_set(u: Field, mins: Sequence[Field]) -> float:
    """min over minimizers and circle rotations of ||u - v||_{W^{1,2}} / ||u||_{W^{1,2}}."""
    if len(mins) == 0:
        raise ValueError("minimizer set is empty")
    best = math.inf
    for v in mins:
        if not u.grid.compatible(v.grid):
            raise ValueError("fields live on different grids")
        _, d2 = align_rotation(u, v)
        best = min(best, d2)
    norm2 = _w12_sq(u.values, u.grid)
    return math.sqrt(max(best, 0.0) / norm2)


def w12_distance(u: Field, v: Field) -> float:
    return math.sqrt(max(inner_products(u - v, u - v)[1], 0.0))

"""Deficit-versus-distance experiments around minimizers.

Samples pair the energy deficit Q(u) - Y_ref with the orbit-reduced
W^{1,2} distance to the verified minimizers.  Power laws are fitted in
log-log coordinates.  The minimizer set used for distances is the solver's
verified list rather than the true (unknown) set of minimizers.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

import numpy as np
from scipy import stats
from scipy.optimize import minimize as _sp_minimize

from .energy import distance_to_set, energy_parts, energy_report, quotient
from .manifold import DomainError, Manifold
from .polynomial import Polynomial
from .reduction import LyapunovSchmidt, ReducedModel, ReductionError
from .spectral import Field, coefficients_to_values, inner_products, w12_norm

log = logging.getLogger(__name__)

Direction = Union[Field, Callable[[float], Field]]


class StabilityError(RuntimeError):
    pass


@dataclass
class Sample:
    label: str
    radius: float
    distance: float
    deficit: float
    q: float


@dataclass
class StabilityFit:
    samples: list[Sample]
    gamma_hat: float
    c_hat: float
    r2: float
    window: tuple[float, float]
    slope: float
    used: int
    noise_floor: float

    def to_json(self) -> dict:
        return {
            "gamma_hat": self.gamma_hat,
            "slope": self.slope,
            "c_hat": self.c_hat,
            "r2": self.r2,
            "window": list(self.window),
            "used_samples": self.used,
            "total_samples": len(self.samples),
            "noise_floor": self.noise_floor,
        }


def _fields(minimizers) -> list[Field]:
    return [m.u if hasattr(m, "u") else m for m in minimizers]


def random_tangent_directions(man: Manifold, v: Field, count: int, seed: int = 0, max_mode: int = 16,
                              exclude: np.ndarray | None = None) -> list[Field]:
    """Smooth random directions in T_v B with unit W^{1,2} norm.

    Fourier coefficients decay like (1 + k)^-2 up to `max_mode`.  Columns of
    `exclude` (L^2-orthonormal nodal vectors) are projected out first.
    """
    grid = v.grid
    rng = np.random.default_rng(seed)
    z = v.values ** (man.p_star - 1.0)
    k = np.concatenate([[0], np.repeat(np.arange(1, grid.N // 2), 2), [grid.N // 2]])
    decay = np.where(k <= max_mode, (1.0 + k) ** -2.0, 0.0)
    out = []
    for _ in range(count):
        phi = coefficients_to_values(rng.standard_normal(grid.N) * decay, grid.N)
        if exclude is not None and exclude.size:
            phi = phi - exclude @ (grid.weight * (exclude.T @ phi))
        phi = phi - (np.dot(z, phi) / np.dot(z, z)) * z
        f = Field(grid, phi)
        out.append(f / w12_norm(f))
    return out


def sample_deficit_distance(
    man: Manifold,
    minimizers: Sequence,
    directions: Sequence[Direction] | dict[str, Direction],
    radii: Iterable[float],
    Y_ref: float | None = None,
    verify_tol: float = 1e-8,
) -> list[Sample]:
    """Evaluate (distance, deficit) along each direction at each radius.

    A Field direction phi gives u = v + t phi renormalized to unit volume,
    with v the first minimizer; a callable direction maps t to u directly.
    """
    mins = _fields(minimizers)
    if not mins:
        raise StabilityError("minimizer list is empty")
    qs = [quotient(man, m.values, m.grid) for m in mins]
    if Y_ref is None:
        Y_ref = min(qs)
    for m in mins:
        rep = energy_report(man, m, Y_ref)
        if rep.el_residual_sup >= verify_tol:
            raise StabilityError(f"minimizer is not verified: residual {rep.el_residual_sup:.3e}")
    if isinstance(directions, dict):
        labelled = list(directions.items())
    else:
        labelled = [(f"dir{i}", d) for i, d in enumerate(directions)]
    v = mins[0]
    out = []
    for label, d in labelled:
        for t in radii:
            try:
                if isinstance(d, Field):
                    u = v + float(t) * d
                    if not np.all(u.values > 0):
                        raise DomainError("perturbed factor is not positive")
                    vol = u.grid.weight * float(np.sum(u.values**man.p_star))
                    u = u / vol ** (1.0 / man.p_star)
                else:
                    u = d(float(t))
            except (DomainError, ReductionError) as exc:
                log.warning("skipping %s at radius %g: %s", label, t, exc)
                continue
            q = quotient(man, u.values, u.grid)
            out.append(Sample(label, float(t), distance_to_set(u, mins), q - Y_ref, q))
    return out


def fit_exponent(samples: Sequence[Sample], window: tuple[float, float] = (1e-3, 5e-2),
                 noise_floor: float | None = None, min_samples: int = 8) -> StabilityFit:
    """Least-squares slope of log(deficit) against log(distance).

    Only samples with radius inside `window`, distance in (0, 1] and deficit
    above ten times the float noise of Q are used.
    """
    if noise_floor is None:
        qmax = max((abs(s.q) for s in samples), default=1.0)
        noise_floor = 64.0 * np.finfo(float).eps * max(qmax, 1.0)
    lo, hi = window
    use = [
        s for s in samples
        if lo * (1 - 1e-12) <= s.radius <= hi * (1 + 1e-12)
        and 0.0 < s.distance <= 1.0
        and s.deficit > 10.0 * noise_floor
    ]
    if len(use) < min_samples:
        raise StabilityError(f"only {len(use)} usable samples in window {window}; need {min_samples}")
    x = np.log([s.distance for s in use])
    y = np.log([s.deficit for s in use])
    reg = stats.linregress(x, y)
    return StabilityFit(
        samples=list(samples),
        gamma_hat=float(reg.slope - 2.0),
        c_hat=float(math.exp(reg.intercept)),
        r2=float(reg.rvalue**2),
        window=(float(lo), float(hi)),
        slope=float(reg.slope),
        used=len(use),
        noise_floor=float(noise_floor),
    )


def samples_csv(samples: Sequence[Sample]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "radius", "distance", "deficit"])
    for s in samples:
        w.writerow([s.label, f"{s.radius:.17g}", f"{s.distance:.17g}", f"{s.deficit:.17g}"])
    return buf.getvalue()


# ----------------------------------------------------------------------------
# the superquadratic family along the kernel


SUPERQUADRATIC_GAMMAS = (0.5, 1.0, 1.5, 1.9)


@dataclass
class FamilyMember:
    t: float
    u: Field
    distance: float
    deficit: float
    ratios: dict[float, float]


def superquadratic_family(man: Manifold, v: Field, model: ReducedModel, t_values: Iterable[float],
                          gammas: Sequence[float] = SUPERQUADRATIC_GAMMAS) -> list[FamilyMember]:
    """u_t = v + t e + F(t e) along the maximizer e of the leading form of q.

    Records ||u_t - v||_{W^{1,2}}, the deficit relative to Q(v) and the ratios
    deficit / distance^(2 + gamma).
    """
    if model.dim == 0 or model.reduction is None:
        raise StabilityError("the base is nondegenerate; there is no kernel family")
    if not model.ASp_holds or model.ASp_maximizer is None:
        raise StabilityError("the leading form of q has no positive maximum on the sphere")
    ls = model.reduction
    e = np.asarray(model.ASp_maximizer, dtype=float)
    q0 = quotient(man, v.values, v.grid)
    out = []
    guess = None
    for t in sorted(float(t) for t in t_values):
        lift = ls.solve(t * e, guess=guess)
        guess = ls._last
        dist = w12_norm(lift.point - v)
        deficit = lift.q - q0
        ratios = {g: (deficit / dist ** (2.0 + g) if dist > 0 else math.nan) for g in gammas}
        out.append(FamilyMember(t, lift.point, dist, deficit, ratios))
    return out


def kernel_lift_direction(ls: LyapunovSchmidt, e: np.ndarray) -> Callable[[float], Field]:
    """t -> lifted point over x = t e, for use as a sampling direction."""
    e = np.asarray(e, dtype=float) / np.linalg.norm(e)
    return lambda t: ls.solve(t * e).point


# ----------------------------------------------------------------------------
# splitting the deficit into normal and reduced parts


@dataclass
class Decomposition:
    total: float
    term_I: float
    term_II: float
    normal_w12_sq: float
    bound: float

    @property
    def mismatch(self) -> float:
        return abs(self.term_I + self.term_II - self.total)


def _first_variation(man: Manifold, w: np.ndarray, h: np.ndarray, grid) -> float:
    """dQ(w)[h] for the scale-invariant quotient, w not necessarily on B."""
    E, V, aw = energy_parts(man, w, grid)
    a = 2.0 / man.p_star
    dE = 2.0 * grid.weight * float(np.dot(aw, h))
    dV = man.p_star * grid.weight * float(np.dot(w ** (man.p_star - 1.0), h))
    return dE / V**a - a * E * dV / V ** (a + 1.0)


def decompose_deficit(ls: LyapunovSchmidt, u: Field, nodes: int = 16) -> Decomposition:
    """Split Q(u) - Q(v) through the lift u_bar of pi_K(u - v).

    term_I = Q(u) - Q(u_bar) is computed as the line integral of dQ from
    u_bar to u (Gauss-Legendre), term_II = q(x) - q(0) from the reduction,
    and the total directly, so the three are obtained independently.  The
    bound is half the smallest nonzero eigenvalue of (1/2) d^2 Q in the
    W^{1,2} metric times ||u - u_bar||^2_{W^{1,2}}.
    """
    man, grid = ls.man, ls.grid
    total = quotient(man, u.values, grid) - quotient(man, ls.v.values, grid)
    x = ls.coordinates(u)
    lift = ls.solve(x)
    h = u.values - lift.point.values
    s, wts = np.polynomial.legendre.leggauss(nodes)
    s, wts = 0.5 * (s + 1.0), 0.5 * wts
    term_I = float(sum(wi * _first_variation(man, lift.point.values + si * h, h, grid) for si, wi in zip(s, wts)))
    term_II = lift.q - ls.q0
    perp = u - lift.point
    nsq = inner_products(perp, perp)[1]
    bound = 0.5 * ls.spectrum.lambda1_w12 * nsq
    return Decomposition(total, term_I, term_II, nsq, bound)


# ----------------------------------------------------------------------------
# brute-force distance inequality for a polynomial


@dataclass
class LojasiewiczResult:
    exponent: float
    c_star: float
    gamma_star: float
    critical_points: np.ndarray
    grid_points: int

    def to_json(self) -> dict:
        return {
            "exponent": self.exponent,
            "gamma_star": self.gamma_star,
            "c_star": self.c_star,
            "critical_points": self.critical_points.tolist(),
            "grid_points": self.grid_points,
        }


def _ball_grid(dim: int, radius: float, density: int) -> np.ndarray:
    axis = np.linspace(-radius, radius, density)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    X = np.column_stack([m.ravel() for m in mesh])
    return X[np.linalg.norm(X, axis=1) <= radius * (1 + 1e-12)]


def lojasiewicz_check(poly: Polynomial, radius: float = 0.1, grid_density: int = 101, crit_tol: float = 1e-6,
                      bins: int = 24) -> LojasiewiczResult:
    """Measure the distance inequality |q - q(0)| >= c dist(x, crit)^e on a grid.

    Approximate critical points are grid minima of |grad q| below
    crit_tol * max |grad q|, refined by local minimization; the origin is
    always included.  The exponent is the log-log slope of the lower envelope
    of |q - q(0)| binned by distance, and c is the smallest ratio at that
    exponent over the whole grid.
    """
    X = _ball_grid(poly.dim, radius, grid_density)
    G = np.linalg.norm(poly.gradient(X), axis=1)
    gmax = float(G.max())
    crit = [np.zeros(poly.dim)]
    if gmax > 0:
        h = 2 * radius / (grid_density - 1)
        for i in np.flatnonzero(G < crit_tol * gmax):
            near = np.linalg.norm(X - X[i], axis=1) <= 1.5 * h
            if G[i] > G[near].min():
                continue
            res = _sp_minimize(lambda y: float(np.sum(poly.gradient(y) ** 2)), X[i], method="BFGS",
                               options={"gtol": 1e-14})
            y = res.x
            if np.linalg.norm(poly.gradient(y)) <= crit_tol * gmax and np.linalg.norm(y) <= radius:
                if min(np.linalg.norm(y - c) for c in crit) > h:
                    crit.append(y)
    C = np.array(crit)
    if C.size == 0:
        raise StabilityError("no critical points found")
    dist = np.min(np.linalg.norm(X[:, None, :] - C[None, :, :], axis=2), axis=1)
    lhs = np.abs(poly(X) - poly(np.zeros(poly.dim)))
    keep = dist > 0
    dist, lhs = dist[keep], lhs[keep]
    edges = np.geomspace(dist.min(), dist.max() * (1 + 1e-12), bins + 1)
    idx = np.clip(np.searchsorted(edges, dist, side="right") - 1, 0, bins - 1)
    bx, by = [], []
    for b in range(bins):
        sel = idx == b
        if np.any(sel) and lhs[sel].min() > 0:
            j = np.flatnonzero(sel)[np.argmin(lhs[sel])]
            bx.append(dist[j])
            by.append(lhs[j])
    if len(bx) < 3:
        raise StabilityError("too few distance bins with a positive left-hand side")
    slope = float(np.polyfit(np.log(bx), np.log(by), 1)[0])
    c_star = float(np.min(lhs / dist**slope))
    return LojasiewiczResult(slope, c_star, slope - 2.0, C, int(X.shape[0]))


def fit_summary(fit: StabilityFit, extra: dict | None = None) -> dict:
    out = fit.to_json()
    if extra:
        out.update(extra)
    return out


__all__ = [
    "Sample",
    "StabilityFit",
    "StabilityError",
    "FamilyMember",
    "Decomposition",
    "LojasiewiczResult",
    "random_tangent_directions",
    "sample_deficit_distance",
    "fit_exponent",
    "samples_csv",
    "superquadratic_family",
    "kernel_lift_direction",
    "decompose_deficit",
    "lojasiewicz_check",
    "SUPERQUADRATIC_GAMMAS",
]

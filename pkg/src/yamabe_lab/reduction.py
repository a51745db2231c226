"""Lyapunov-Schmidt reduction of Q near a critical point v on B.

With K the kernel of the constrained Hessian at v (K lies in T_v B) and
K^perp its L^2-orthogonal complement, the graph map F : K -> K^perp solves

    v + phi + F(phi) in B,
    pi_{K^perp} Gamma(v + phi + F(phi)) = 0.

Gamma(w) is the first variation of Q on T_w B represented inside T_v B:
2 (r - gamma z_w) with r the Euler-Lagrange residual at w, z_w = w^{2*-1}
and gamma chosen so that Gamma(w) is orthogonal to z_v.  Adding multiples of
z_w does not change the functional on T_w B, so Gamma(w) pairs with tangent
vectors at w exactly like the gradient does.  At w = v it is the gradient.

F is found by Newton's method on the K^perp coordinates with the exact
Jacobian.  The residual is evaluated in extended precision: spectral second
derivatives amplify double rounding by (N/2L)^2, which would otherwise put a
floor near 1e-10 under the residual at N = 256.  At a solution Gamma lies in K, and since the lift's derivative is
tangent to B and differs from e_i by an element of K^perp, the chain rule
gives d/dx_i q = <Gamma(lift), e_i> without error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla
from scipy.optimize import minimize, minimize_scalar

from .energy import quotient
from .hessian import Spectrum, hessian_spectrum
from .manifold import Manifold
from .polynomial import Polynomial, monomial_exponents, monomial_matrix, to_symmetric_tensor
from .spectral import Field


class ReductionError(RuntimeError):
    pass


@dataclass
class NewtonOptions:
    tol: float = 5e-11
    max_iter: int = 20


@dataclass
class Lift:
    x: np.ndarray
    F: Field
    point: Field
    q: float
    dq: float  # q(x) - q(0), differenced in extended precision
    residual: float
    volume_error: float
    iterations: int


class LyapunovSchmidt:
    """Graph map and reduced energy around a critical point `v`."""

    def __init__(
        self,
        man: Manifold,
        v: Field,
        spectrum: Spectrum | None = None,
        kernel_tol: float = 1e-7,
        radius: float = 0.1,
        newton: NewtonOptions | None = None,
    ):
        man.check_grid(v.grid)
        self.man = man
        self.v = v
        self.grid = v.grid
        self.spectrum = spectrum if spectrum is not None else hessian_spectrum(man, v, kernel_tol)
        self.radius = radius
        self.newton = newton if newton is not None else NewtonOptions()
        self.zv = v.values ** (man.p_star - 1.0)
        self.set_kernel(self.spectrum.kernel_matrix.copy())
        N = self.grid.N
        A = -man.c_n * self.grid.laplacian_matrix
        A[np.diag_indices(N)] += man.R_g
        self._A = A
        self.q0 = quotient(man, v.values, self.grid)
        self._q0_ld = self._residual_ld(v.values)[2]

    def set_kernel(self, K: np.ndarray) -> None:
        """Use the L^2-orthonormal columns of K as the kernel basis."""
        w = self.grid.weight
        self.K = K
        self.dim = K.shape[1]
        # L^2-orthonormal bases of K^perp and of K^perp inside T_v B
        self.Kperp = sla.null_space((K * math.sqrt(w)).T) / math.sqrt(w)
        self.Kperp_T = sla.null_space(np.vstack([K.T, self.zv[None, :]])) / math.sqrt(w)

    @property
    def kernel_basis(self) -> list[Field]:
        return [Field(self.grid, self.K[:, i]) for i in range(self.dim)]

    def embed(self, x) -> np.ndarray:
        """Nodal values of phi = sum x_i e_i."""
        return self.K @ np.asarray(x, dtype=float).reshape(self.dim)

    def coordinates(self, u: Field) -> np.ndarray:
        """Kernel coordinates of pi_K(u - v)."""
        return self.grid.weight * (self.K.T @ (u.values - self.v.values))

    # -- the nonlinear system --------------------------------------------------

    def _residual_ld(self, u: np.ndarray):
        """E, V, Q, A u, z and s = r - gamma z computed in long double."""
        man, grid = self.man, self.grid
        ld = np.longdouble
        U = u.astype(ld)
        c = sfft.rfft(U)
        k = np.arange(grid.N // 2 + 1, dtype=ld) / ld(grid.L)
        lap = sfft.irfft(c * (-(k**2)), n=grid.N)
        au = -ld(man.c_n) * lap + ld(man.R_g) * U
        w = ld(grid.weight)
        E = w * np.dot(U, au)
        V = w * np.sum(U ** ld(man.p_star))
        Q = E / V ** (ld(2) / ld(man.p_star))
        z = U ** ld(man.p_star - 1.0)
        r = au - Q * z
        zv = self.zv.astype(ld)
        s = r - (np.dot(zv, r) / np.dot(zv, z)) * z
        return float(E), float(V), Q, au.astype(float), z.astype(float), r, s

    def _system(self, u: np.ndarray, with_jacobian: bool):
        man, w = self.man, self.grid.weight
        p = man.p_star
        E, V, Q, au, z, r_ld, s_ld = self._residual_ld(u)
        Q = float(Q)
        a = 2.0 / p
        F1 = (np.longdouble(w) * (self.Kperp_T.T.astype(np.longdouble) @ s_ld)).astype(float)
        F2 = V - 1.0
        s = s_ld.astype(float)
        zvz = float(np.dot(self.zv, z))
        gamma = float(np.dot(self.zv, r_ld.astype(float))) / zvz
        if not with_jacobian:
            return F1, F2, s, None
        dz = (p - 1.0) * u ** (p - 2.0)
        gQ = 2.0 * w * (au / V**a - Q * z / V)
        Jr = self._A - np.outer(z, gQ)
        Jr[np.diag_indices_from(Jr)] -= Q * dz
        row = (self.zv @ Jr - gamma * self.zv * dz) / zvz
        Js = Jr - np.outer(z, row)
        Js[np.diag_indices_from(Js)] -= gamma * dz
        J1 = w * (self.Kperp_T.T @ Js @ self.Kperp)
        J2 = p * w * (z @ self.Kperp)
        return F1, F2, s, np.vstack([J1, J2[None, :]])

    def solve(self, x, guess: np.ndarray | None = None) -> Lift:
        """Compute F(phi) for phi = sum x_i e_i and the lifted point v + phi + F(phi)."""
        x = np.asarray(x, dtype=float).reshape(self.dim)
        if np.linalg.norm(x) > self.radius * (1 + 1e-12):
            raise ReductionError(
                f"|x| = {np.linalg.norm(x):.3g} exceeds the trust radius {self.radius:.3g}"
            )
        base = self.v.values + self.embed(x)
        c = np.zeros(self.Kperp.shape[1]) if guess is None else np.array(guess, dtype=float)
        tol, max_iter = self.newton.tol, self.newton.max_iter
        history = []
        it = 0
        while True:
            u = base + self.Kperp @ c
            if not np.all(u > 0):
                raise ReductionError(f"lifted point lost positivity at |x| = {np.linalg.norm(x):.3g}")
            F1, F2, s, J = self._system(u, with_jacobian=True)
            res = 2.0 * float(np.linalg.norm(F1))
            history.append(max(res, abs(F2)))
            if res < tol and abs(F2) < tol:
                break
            if it >= max_iter or _stalled(history):
                raise ReductionError(
                    f"Newton for the graph map did not converge (residual history "
                    f"{', '.join(f'{h:.2e}' for h in history[-4:])}); try a smaller |x|"
                )
            try:
                delta = np.linalg.solve(J, -np.concatenate([F1, [F2]]))
            except np.linalg.LinAlgError as exc:
                raise ReductionError(f"singular Newton system for the graph map: {exc}") from exc
            c = c + delta
            it += 1
        self._last = c
        q_ld = self._residual_ld(u)[2]
        point = Field(self.grid, u)
        return Lift(
            x=x,
            F=Field(self.grid, u - base),
            point=point,
            q=float(q_ld),
            dq=float(q_ld - self._q0_ld),
            residual=res,
            volume_error=abs(F2),
            iterations=it,
        )

    def graph_map(self, x) -> Field:
        return self.solve(x).F

    def reduced_energy(self, x) -> float:
        """q(x) = Q(v + phi + F(phi))."""
        return self.solve(x).q

    def reduced_deficit(self, x) -> float:
        """q(x) - q(0) without the cancellation error of subtracting two doubles."""
        return self.solve(x).dq

    def projected_gradient(self, x) -> np.ndarray:
        """<Gamma(lift), e_i>_{L^2}: the K-part of the B-gradient at the lift, equal to grad q(x)."""
        lift = self.solve(x)
        u = lift.point.values
        F1, F2, s, _ = self._system(u, with_jacobian=False)
        return 2.0 * self.grid.weight * (self.K.T @ s)

    def lift_of(self, u: Field) -> Lift:
        """Lyapunov-Schmidt projection v + pi_K(u - v) + F(pi_K(u - v))."""
        return self.solve(self.coordinates(u))


def _stalled(history: list[float], window: int = 4) -> bool:
    if len(history) <= window:
        return False
    recent = history[-window:]
    return all(b >= a for a, b in zip(recent, recent[1:]))


def solve_graph_map(man: Manifold, v: Field, kernel_basis: Sequence[Field] | None, x, newton_opts=None,
                    radius: float = 0.1) -> Field:
    ls = _build(man, v, kernel_basis, radius, newton_opts)
    return ls.graph_map(x)


def reduced_energy(ls: LyapunovSchmidt, x) -> float:
    return ls.reduced_energy(x)


def _build(man, v, kernel_basis, radius, newton_opts) -> LyapunovSchmidt:
    ls = LyapunovSchmidt(man, v, radius=radius, newton=newton_opts)
    if kernel_basis is not None:
        K = np.column_stack([f.values for f in kernel_basis]) if len(kernel_basis) else np.zeros((v.grid.N, 0))
        ls.set_kernel(K)
    return ls


# ----------------------------------------------------------------------------
# Taylor model of q


@dataclass
class ReducedModel:
    dim: int
    q0: float
    degrees: list[int] = field(default_factory=list)
    polynomial: Polynomial | None = None
    norms: dict[int, float] = field(default_factory=dict)
    noise: dict[int, float] = field(default_factory=dict)
    thresholds: dict[int, float] = field(default_factory=dict)
    p: int | None = None
    p_interval: tuple[int, int] | None = None
    ASp_holds: bool | None = None
    ASp_maximizer: np.ndarray | None = None
    ASp_maximum: float | None = None
    fit_rms: float = 0.0
    fit_max: float = 0.0
    condition_number: float = 0.0
    radii: list[float] = field(default_factory=list)
    samples: int = 0
    reduction: LyapunovSchmidt | None = field(default=None, repr=False)

    @property
    def nondegenerate(self) -> bool:
        return self.dim == 0

    def to_json(self) -> dict:
        out = {
            "kernel_dim": self.dim,
            "nondegenerate": self.nondegenerate,
            "q0": self.q0,
            "p": self.p,
            "p_interval": list(self.p_interval) if self.p_interval else None,
            "ASp_holds": self.ASp_holds,
            "ASp_maximizer": None if self.ASp_maximizer is None else [float(t) for t in self.ASp_maximizer],
            "ASp_maximum": self.ASp_maximum,
            "fit_rms": self.fit_rms,
            "fit_max": self.fit_max,
            "condition_number": self.condition_number,
            "radii": self.radii,
            "samples": self.samples,
            "coefficients": {},
        }
        if self.polynomial is not None:
            for j in self.degrees:
                exps, coeffs = self.polynomial.terms[j]
                T = self.polynomial.tensor(j)
                out["coefficients"][str(j)] = {
                    "norm": self.norms[j],
                    "noise": self.noise[j],
                    "threshold": self.thresholds[j],
                    "monomials": [list(e) for e in exps],
                    "monomial_coefficients": [float(c) for c in coeffs],
                    "tensor_shape": list(T.shape),
                    "tensor": [float(t) for t in T.ravel()],
                }
        return out


def _directions(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        ang = (np.arange(count) + 0.5) * 2 * math.pi / count
        return np.column_stack([np.cos(ang), np.sin(ang)])
    X = rng.standard_normal((count, dim))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def taylor_of_q(
    ls: LyapunovSchmidt,
    radii: Sequence[float] | None = None,
    j_max: int = 6,
    fit_tol: float = 1e-7,
    n_directions: int | None = None,
    seed: int = 0,
    max_condition: float = 1e10,
) -> ReducedModel:
    """Fit the homogeneous parts q_2, ..., q_{j_max} of q - q(0) by least squares.

    Samples lie on concentric spheres in kernel coordinates; the radial
    scaling separates degrees that coincide on a single sphere.
    """
    if ls.dim == 0:
        return ReducedModel(dim=0, q0=ls.q0)
    if radii is None:
        radii = [ls.radius * f for f in (0.25, 0.5, 0.75, 1.0)]
    radii = sorted(float(r) for r in radii)
    degrees = list(range(2, j_max + 1))
    exps = {j: monomial_exponents(ls.dim, j) for j in degrees}
    ncoef = sum(len(e) for e in exps.values())
    if n_directions is None:
        n_directions = max(8, math.ceil(3 * ncoef / len(radii)))
    rng = np.random.default_rng(seed)
    dirs = _directions(ls.dim, n_directions, rng)
    if len(radii) * len(dirs) < 3 * ncoef:
        # l = 1 has only two directions per sphere; densify radially
        lo, hi = radii[0], radii[-1]
        per = math.ceil(3 * ncoef / len(dirs))
        radii = list(np.geomspace(lo, hi, max(per, len(radii))))
    X, y = [], []
    for d in dirs:
        guess = None
        for r in radii:
            lift = ls.solve(r * d, guess=guess)
            guess = ls._last
            X.append(r * d)
            y.append(lift.dq)
    X = np.array(X)
    y = np.array(y)
    rho = radii[-1]
    cols, slices, start = [], {}, 0
    for j in degrees:
        cols.append(monomial_matrix(X / rho, exps[j]))
        slices[j] = slice(start, start + len(exps[j]))
        start += len(exps[j])
    D = np.hstack(cols)
    cond = float(np.linalg.cond(D))
    if not np.isfinite(cond) or cond > max_condition:
        raise ReductionError(f"Taylor fit is ill-conditioned (cond = {cond:.3g}); choose different radii")
    sol, *_ = np.linalg.lstsq(D, y, rcond=None)
    resid = y - D @ sol
    m, k = D.shape
    dof = max(m - k, 1)
    sigma2 = float(resid @ resid) / dof
    cov_diag = np.diag(np.linalg.pinv(D.T @ D)) * sigma2
    poly = Polynomial(ls.dim, ls.q0, {})
    norms, noise, thresholds = {}, {}, {}
    eps_q = 64 * np.finfo(np.longdouble).eps * abs(ls.q0)
    for j in degrees:
        sl = slices[j]
        coeffs = sol[sl] / rho**j
        poly.terms[j] = (exps[j], coeffs)
        norms[j] = poly.norm(j)
        std = np.sqrt(np.maximum(cov_diag[sl], 0.0)) / rho**j
        stat = float(np.linalg.norm(to_symmetric_tensor(ls.dim, j, exps[j], std)))
        rounding = eps_q / radii[0] ** j * math.sqrt(len(exps[j]))
        noise[j] = max(stat, rounding)
        thresholds[j] = max(fit_tol, 10.0 * noise[j])
    model = ReducedModel(
        dim=ls.dim,
        q0=ls.q0,
        degrees=degrees,
        polynomial=poly,
        norms=norms,
        noise=noise,
        thresholds=thresholds,
        fit_rms=float(np.sqrt(np.mean(resid**2))),
        fit_max=float(np.max(np.abs(resid))),
        condition_number=cond,
        radii=[float(r) for r in radii],
        samples=m,
        reduction=ls,
    )
    significant = [j for j in degrees if norms[j] > thresholds[j]]
    if significant:
        model.p = significant[0]
        if norms[model.p] < 10.0 * thresholds[model.p] and len(significant) > 1:
            model.p_interval = (model.p, significant[1])
    holds, xmax, qmax = check_ASp(model)
    model.ASp_holds, model.ASp_maximizer, model.ASp_maximum = holds, xmax, qmax
    return model


def check_ASp(model: ReducedModel, samples_per_dim: int = 2000, seed: int = 0):
    """Does q_p attain a positive maximum on the unit sphere of K?

    Returns (verdict, maximizer, maximum).  With an order interval both ends
    are tested and the verdict holds only if it holds for each.
    """
    if model.p is None or model.polynomial is None:
        return False, None, None
    orders = [model.p] if model.p_interval is None else list(model.p_interval)
    verdicts, best = [], None
    for p in orders:
        qp = model.polynomial.homogeneous(p)
        x, val = _sphere_max(qp, model.dim, samples_per_dim, seed)
        verdicts.append(val > model.thresholds[p])
        if best is None:
            best = (x, val)
    return bool(all(verdicts)), best[0], float(best[1])


def _sphere_max(qp: Polynomial, dim: int, samples_per_dim: int, seed: int):
    if dim == 1:
        pts = np.array([[1.0], [-1.0]])
        vals = qp(pts)
        i = int(np.argmax(vals))
        return pts[i], float(vals[i])
    if dim == 2:
        ang = np.linspace(0, 2 * math.pi, 3600, endpoint=False)
        vals = qp(np.column_stack([np.cos(ang), np.sin(ang)]))
        i = int(np.argmax(vals))
        h = ang[1] - ang[0]
        res = minimize_scalar(lambda t: -qp(np.array([math.cos(t), math.sin(t)])),
                              bounds=(ang[i] - h, ang[i] + h), method="bounded")
        t = float(res.x) if -res.fun >= vals[i] else float(ang[i])
        x = np.array([math.cos(t), math.sin(t)])
        return x, float(qp(x))
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((samples_per_dim * dim, dim))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    vals = qp(X)
    x0 = X[int(np.argmax(vals))]
    res = minimize(lambda y: -qp(y / np.linalg.norm(y)), x0, method="BFGS")
    x = res.x / np.linalg.norm(res.x)
    if qp(x) < vals.max():
        x = x0
    return x, float(qp(x))


def classify_integrability(model: ReducedModel, tol: float | None = None) -> str:
    """'nondegenerate', 'integrable' or 'nonintegrable' from the fitted coefficients."""
    if model.dim == 0:
        return "nondegenerate"
    for j in model.degrees:
        limit = model.thresholds[j] if tol is None else tol
        if model.norms[j] >= limit:
            return "nonintegrable"
    return "integrable"


def reduce(man: Manifold, v: Field, kernel_tol: float = 1e-7, radius: float = 0.1, j_max: int = 6,
           fit_tol: float = 1e-7, radii=None, newton: NewtonOptions | None = None) -> ReducedModel:
    """Spectrum, graph map and Taylor model at v in one call."""
    ls = LyapunovSchmidt(man, v, kernel_tol=kernel_tol, radius=radius, newton=newton)
    return taylor_of_q(ls, radii=radii, j_max=j_max, fit_tol=fit_tol)

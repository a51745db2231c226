"""Minimizers and critical points of Q on B, and the constant branch in L.

Descent runs along the Sobolev gradient: the L^2 gradient is smoothed by
(-c_n Delta + R_g)^{-1} before projection, which makes the step size
independent of the grid resolution.  Iterates are renormalized to unit
volume after every step.  A dense Newton solve in the tangent space then
polishes the result to the rounding floor.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.fft as sfft
from scipy.optimize import brentq

from .energy import orthogonal_tangent, quotient, residual_values
from .hessian import HessianError, Spectrum, hessian_spectrum, operator_matrix
from .manifold import DomainError, Manifold, check_positive
from .spectral import Field, Grid, apply_derivative

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Numerical failure: no convergence, lost positivity or a singular system."""


@dataclass
class SolverOptions:
    tol: float = 1e-10  # accepted sup-norm of the Euler-Lagrange residual
    grad_tol: float = 1e-6  # L^2 gradient norm at which descent hands over to Newton
    max_iter: int = 5000
    armijo: float = 1e-4
    max_halvings: int = 60
    newton_tol: float = 1e-12
    newton_max_iter: int = 12
    kernel_tol: float = 1e-7
    polish: bool = True


@dataclass
class CriticalPoint:
    u: Field
    q: float
    el_residual_sup: float
    negative_count: int
    kernel_dim: int
    branch: str
    volume: float = 1.0
    iterations: int = 0
    newton_steps: int = 0
    history: list[float] = field(default_factory=list, repr=False)
    spectrum: Spectrum | None = field(default=None, repr=False)

    def to_json(self, include_values: bool = False) -> dict:
        out = {
            "q": self.q,
            "el_residual_sup": self.el_residual_sup,
            "negative_count": self.negative_count,
            "kernel_dim": self.kernel_dim,
            "branch": self.branch,
            "volume": self.volume,
            "iterations": self.iterations,
            "newton_steps": self.newton_steps,
            "min": float(self.u.values.min()),
            "max": float(self.u.values.max()),
        }
        if include_values:
            out["values"] = [float(x) for x in self.u.values]
        return out


def _volume(man: Manifold, u: np.ndarray, grid: Grid) -> float:
    return grid.weight * float(np.sum(u**man.p_star))


def _normalize(man: Manifold, u: np.ndarray, grid: Grid) -> np.ndarray:
    return u / _volume(man, u, grid) ** (1.0 / man.p_star)


def _precondition(man: Manifold, g: np.ndarray, grid: Grid) -> np.ndarray:
    c = sfft.rfft(g)
    sym = man.c_n * (grid.modes / grid.L) ** 2 + man.R_g
    return sfft.irfft(c / sym, n=grid.N)


def _branch_tag(u: np.ndarray, tol: float = 1e-6) -> str:
    spread = float(u.max() - u.min())
    return "constant" if spread <= tol * float(np.abs(u).mean()) else "nonconstant"


def verify(man: Manifold, u: Field, opts: SolverOptions | None = None, *, iterations: int = 0,
           newton_steps: int = 0, history=None) -> CriticalPoint:
    """Check that u is a critical point on B and attach its Morse data."""
    opts = opts or SolverOptions()
    check_positive(u)
    vol = _volume(man, u.values, u.grid)
    if abs(vol - 1.0) > 1e-12:
        raise SolverError(f"candidate is off the constraint set: volume {vol!r}")
    r, Q = residual_values(man, u.values, u.grid)
    sup = float(np.max(np.abs(r)))
    if not sup < opts.tol:
        raise SolverError(f"Euler-Lagrange residual {sup:.3e} exceeds tolerance {opts.tol:.1e}")
    spec = hessian_spectrum(man, u, opts.kernel_tol)
    cp = CriticalPoint(
        u=u,
        q=Q,
        el_residual_sup=sup,
        negative_count=spec.negative_count,
        kernel_dim=spec.kernel_dim,
        branch=_branch_tag(u.values),
        volume=vol,
        iterations=iterations,
        newton_steps=newton_steps,
        history=list(history or []),
        spectrum=spec,
    )
    return cp


def minimize(man: Manifold, u0: Field, opts: SolverOptions | None = None) -> CriticalPoint:
    """Preconditioned projected gradient descent with Armijo backtracking, then Newton."""
    opts = opts or SolverOptions()
    man.check_grid(u0.grid)
    check_positive(u0, "initial guess")
    grid = u0.grid
    u = _normalize(man, np.array(u0.values, dtype=float), grid)
    w = grid.weight
    r, Q = residual_values(man, u, grid)
    history = [Q]
    step = 1.0
    for it in range(1, opts.max_iter + 1):
        z = u ** (man.p_star - 1.0)
        G = 2.0 * orthogonal_tangent(z, r)
        gnorm = math.sqrt(w * float(np.dot(G, G)))
        if gnorm < opts.grad_tol:
            break
        d = -orthogonal_tangent(z, _precondition(man, G, grid))
        slope = w * float(np.dot(G, d))
        if not slope < 0:
            raise SolverError(f"preconditioned direction is not a descent direction (slope {slope:.3e})")
        step = min(2.0 * step, 4.0)
        for _ in range(opts.max_halvings):
            trial = u + step * d
            if np.all(trial > 0):
                trial = _normalize(man, trial, grid)
                r_new, Q_new = residual_values(man, trial, grid)
                if Q_new <= Q + opts.armijo * step * slope:
                    break
            step *= 0.5
        else:
            raise SolverError(
                f"line search failed after {opts.max_halvings} halvings at iteration {it} "
                f"(Q = {Q:.15g}, |grad| = {gnorm:.3e})"
            )
        u, r, Q = trial, r_new, Q_new
        history.append(Q)
    else:
        raise SolverError(
            f"descent did not converge in {opts.max_iter} iterations (|grad| = {gnorm:.3e}, Q = {Q:.15g})"
        )
    uf = Field(grid, u)
    if opts.polish:
        return newton_critical_point(man, uf, opts, _iterations=it, _history=history)
    return verify(man, uf, opts, iterations=it, history=history)


def _newton_basis(man: Manifold, u: np.ndarray, grid: Grid, pin_tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis of T_u B, with the rotation generator u' removed when nonzero."""
    z = u ** (man.p_star - 1.0)
    rows = [z / np.linalg.norm(z)]
    du = apply_derivative(u, grid)
    if np.linalg.norm(du) > pin_tol * np.linalg.norm(u):
        rows.append(du / np.linalg.norm(du))
    return sla.null_space(np.vstack(rows))


def newton_critical_point(man: Manifold, u0: Field, opts: SolverOptions | None = None, *,
                          _iterations: int = 0, _history=None) -> CriticalPoint:
    """Newton on the constrained Euler-Lagrange equation, lambda = Q(u).

    The circle acts on nonconstant solutions, so their linearization always
    has u' in its kernel; that direction is pinned (the phase is fixed).  Any
    further kernel makes the solve singular and is reported as an error.
    """
    opts = opts or SolverOptions()
    man.check_grid(u0.grid)
    check_positive(u0, "initial guess")
    grid = u0.grid
    u = _normalize(man, np.array(u0.values, dtype=float), grid)
    r, _ = residual_values(man, u, grid)
    sup = float(np.max(np.abs(r)))
    history = [sup]
    steps = 0
    while True:
        # the linearization is checked even at an exact root, so a degenerate
        # start is reported rather than silently accepted
        T = _newton_basis(man, u, grid)
        H = T.T @ operator_matrix(man, u, grid) @ T
        H = 0.5 * (H + H.T)
        evals, evecs = np.linalg.eigh(H)
        scale = float(np.max(np.abs(evals)))
        small = np.abs(evals) < opts.kernel_tol * scale
        if np.any(small):
            raise SolverError(
                f"singular linearization: {int(small.sum())} kernel direction(s) beyond the circle "
                "symmetry; use the reduction module at this point"
            )
        if sup < opts.newton_tol or steps >= opts.newton_max_iter:
            break
        a = evecs @ ((evecs.T @ (T.T @ r)) / evals)
        trial = u - T @ a
        if not np.all(trial > 0):
            raise SolverError("Newton step left the positive cone")
        trial = _normalize(man, trial, grid)
        r_new, _ = residual_values(man, trial, grid)
        sup_new = float(np.max(np.abs(r_new)))
        steps += 1
        if not np.isfinite(sup_new):
            raise SolverError("Newton iteration produced non-finite values")
        if sup_new >= sup:
            # no further progress: the residual sits at its rounding floor
            if sup_new > 10.0 * sup:
                raise SolverError(f"Newton diverged (residual {sup:.3e} -> {sup_new:.3e})")
            if sup_new > sup:
                break
        u, r, sup = trial, r_new, sup_new
        history.append(sup)
    if not sup < opts.tol:
        raise SolverError(
            f"Newton did not reach tolerance {opts.tol:.1e}; residual history "
            + ", ".join(f"{h:.2e}" for h in history)
        )
    return verify(man, Field(grid, u), opts, iterations=_iterations, newton_steps=steps,
                  history=_history if _history is not None else [])


def seed_field(man: Manifold, grid: Grid, amplitude: float = 0.1, phase: float = 0.0, mode: int = 1) -> Field:
    """Constant plus amplitude * cos(mode * (theta - phase)), on B."""
    c = man.constant(grid).values[0]
    vals = c * (1.0 + amplitude * np.cos(mode * (grid.theta - phase)))
    return Field(grid, _normalize(man, vals, grid))


@dataclass
class MinimizerSearch:
    points: list[CriticalPoint]
    minimizers: list[CriticalPoint]
    Y_ref: float
    starts: int
    failures: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "Y_ref": self.Y_ref,
            "starts": self.starts,
            "minimizer_count": len(self.minimizers),
            "critical_points": [p.to_json() for p in self.points],
            "failures": self.failures,
            "minimizer_set_note": "distances use the verified minimizers found here, not the true minimizer set",
        }


def find_minimizers(man: Manifold, grid: Grid, opts: SolverOptions | None = None, starts: int = 2,
                    seed: int = 0, amplitude: float = 0.1) -> MinimizerSearch:
    """Multi-start search: the constant plus `starts` randomly phased cos-seeds.

    Y_ref is the smallest Q among the critical points found; minimizers are
    the found points at that level, one per circle orbit.
    """
    from .energy import distance_to_set

    opts = opts or SolverOptions()
    rng = np.random.default_rng(seed)
    points, failures = [], []
    const = man.constant(grid)
    try:
        points.append(newton_critical_point(man, const, opts))
    except SolverError as exc:
        # a degenerate constant cannot be polished by Newton but is still critical
        try:
            points.append(verify(man, const, opts))
        except SolverError:
            failures.append(f"constant: {exc}")
    for _ in range(starts):
        u0 = seed_field(man, grid, amplitude, phase=float(rng.uniform(0, 2 * math.pi)))
        try:
            points.append(minimize(man, u0, opts))
        except (SolverError, DomainError, HessianError) as exc:
            failures.append(str(exc))
    if not points:
        raise SolverError("no critical point found: " + "; ".join(failures))
    Y_ref = min(p.q for p in points)
    level = 1e-10 * max(1.0, abs(Y_ref))
    minimizers: list[CriticalPoint] = []
    for p in sorted(points, key=lambda p: p.q):
        if p.q - Y_ref > level or p.negative_count:
            continue
        if minimizers and distance_to_set(p.u, [m.u for m in minimizers]) < 1e-6:
            continue
        minimizers.append(p)
    return MinimizerSearch(points, minimizers, Y_ref, starts + 1, failures)


# ----------------------------------------------------------------------------
# the constant branch in L


@dataclass
class BifurcationRow:
    L: float
    eigenvalues: list[float]
    q_constant: float
    q_nonconstant: float | None = None
    note: str = ""


@dataclass
class BifurcationDiagram:
    n: int
    N: int
    rows: list[BifurcationRow]
    crossing: float | None
    critical_length: float

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "N": self.N,
            "crossing_L": self.crossing,
            "critical_length": self.critical_length,
            "rows": [
                {
                    "L": r.L,
                    "eigenvalues": r.eigenvalues,
                    "q_constant": r.q_constant,
                    "q_nonconstant": r.q_nonconstant,
                    "note": r.note,
                }
                for r in self.rows
            ],
        }


def smallest_constant_eigenvalue(n: int, L: float, N: int = 256, count: int = 2) -> np.ndarray:
    man = Manifold(n, L)
    spec = hessian_spectrum(man, man.constant(man.grid(N)))
    return spec.eigenvalues[:count]


def continuation(n: int, L_values, N: int = 256, opts: SolverOptions | None = None,
                 branches: bool = True, seed: int = 0, refine: bool = True) -> BifurcationDiagram:
    """Sweep L, recording the constant-base spectrum and the best nonconstant branch.

    The first sign change of the smallest eigenvalue is refined by Brent's
    method on the numerically computed spectrum.
    """
    L_values = np.asarray(L_values, dtype=float)
    if L_values.ndim != 1 or L_values.size < 2 or not np.all(L_values > 0):
        raise DomainError("L values must be a positive one-dimensional sequence")
    if not np.all(np.diff(L_values) > 0):
        raise DomainError("L values must be strictly increasing")
    opts = opts or SolverOptions()
    rng = np.random.default_rng(seed)
    rows = []
    for L in L_values:
        man = Manifold(n, float(L))
        grid = man.grid(N)
        const = man.constant(grid)
        row = BifurcationRow(L=float(L), eigenvalues=[], q_constant=quotient(man, const.values, grid))
        try:
            row.eigenvalues = [float(x) for x in hessian_spectrum(man, const).eigenvalues[:2]]
        except HessianError as exc:
            row.note = f"spectrum failed: {exc}"
        if branches:
            u0 = seed_field(man, grid, 0.1, phase=float(rng.uniform(0, 2 * math.pi)))
            try:
                cp = minimize(man, u0, opts)
                row.q_nonconstant = cp.q if cp.branch == "nonconstant" else None
                row.note = row.note or f"descent ended on the {cp.branch} branch"
            except (SolverError, DomainError, HessianError) as exc:
                row.note = f"branch search failed: {exc}"
                log.warning("L = %g: %s", L, exc)
        rows.append(row)
    crossing = None
    lam = [r.eigenvalues[0] if r.eigenvalues else np.nan for r in rows]
    for i in range(len(rows) - 1):
        if lam[i] > 0 and lam[i + 1] <= 0:
            a, b = rows[i].L, rows[i + 1].L
            if refine and lam[i + 1] < 0:
                crossing = brentq(lambda L: smallest_constant_eigenvalue(n, L, N, 1)[0], a, b, xtol=1e-12)
            else:
                crossing = b if lam[i + 1] == 0 else a + (b - a) * lam[i] / (lam[i] - lam[i + 1])
            break
    return BifurcationDiagram(n=n, N=N, rows=rows, crossing=crossing, critical_length=1.0 / math.sqrt(n - 2))

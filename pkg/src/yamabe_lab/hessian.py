"""Constrained second variation of Q on B and its spectrum.

Everything here uses the half convention: the operator H_v is the L^2
representative of (1/2) d^2 Q on T_v B,

    H_v = P (-c_n Delta + R_g - (2*-1) Q(v) v^{2*-2}) P,

with P the L^2-orthogonal projection onto T_v B.  For tangent phi,
<H_v phi, phi> equals (1/2) d^2/dt^2 Q(v + t phi) at t = 0 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .energy import orthogonal_tangent, quotient
from .manifold import Manifold, check_positive
from .spectral import Field, Grid, apply_laplacian


class HessianError(RuntimeError):
    pass


def operator_matrix(man: Manifold, v: np.ndarray, grid: Grid) -> np.ndarray:
    """Dense matrix of -c_n Delta + R_g - (2*-1) Q(v) v^{2*-2} on nodal values."""
    Q = quotient(man, v, grid)
    M = -man.c_n * grid.laplacian_matrix
    M[np.diag_indices_from(M)] += man.R_g - (man.p_star - 1.0) * Q * v ** (man.p_star - 2.0)
    return M


def tangent_basis(man: Manifold, v: np.ndarray) -> np.ndarray:
    """Euclidean-orthonormal basis (N x N-1) of {phi : sum v^{2*-1} phi = 0}."""
    z = v ** (man.p_star - 1.0)
    return sla.null_space(z[None, :])


def hessian_apply(man: Manifold, v: Field, phi: Field) -> Field:
    man.check_grid(v.grid)
    check_positive(v)
    z = v.values ** (man.p_star - 1.0)
    Q = quotient(man, v.values, v.grid)
    p = orthogonal_tangent(z, phi.values)
    hp = (
        -man.c_n * apply_laplacian(p, v.grid)
        + (man.R_g - (man.p_star - 1.0) * Q * v.values ** (man.p_star - 2.0)) * p
    )
    return Field(v.grid, orthogonal_tangent(z, hp))


@dataclass
class Spectrum:
    base: Field
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, L^2-orthonormal nodal values
    kernel_indices: np.ndarray
    kernel_tol: float
    threshold: float
    residual: float
    lambda1_w12: float = field(default=float("nan"))

    @property
    def kernel_dim(self) -> int:
        return int(self.kernel_indices.size)

    @property
    def negative_count(self) -> int:
        return int(np.sum(self.eigenvalues < -self.threshold))

    @property
    def kernel_basis(self) -> list[Field]:
        return [Field(self.base.grid, self.eigenvectors[:, i]) for i in self.kernel_indices]

    @property
    def kernel_matrix(self) -> np.ndarray:
        return self.eigenvectors[:, self.kernel_indices]

    @property
    def lambda1(self) -> float:
        """Smallest eigenvalue above the kernel threshold."""
        pos = self.eigenvalues[self.eigenvalues > self.threshold]
        return float(pos[0]) if pos.size else float("nan")

    def eigenfield(self, i: int) -> Field:
        return Field(self.base.grid, self.eigenvectors[:, i])

    def to_json(self) -> dict:
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "kernel_dim": self.kernel_dim,
            "negative_count": self.negative_count,
            "kernel_tol": self.kernel_tol,
            "kernel_threshold": self.threshold,
            "lambda1": self.lambda1,
            "lambda1_w12": self.lambda1_w12,
            "eig_residual": self.residual,
        }


def hessian_spectrum(man: Manifold, v: Field, kernel_tol: float = 1e-7) -> Spectrum:
    """Full eigendecomposition of H_v restricted to T_v B.

    Eigenvalues are ascending; the kernel is |lambda| < kernel_tol * max|lambda|.
    Also records the smallest nonzero eigenvalue of (1/2) d^2 Q measured
    against the W^{1,2} norm on the complement of the kernel.
    """
    man.check_grid(v.grid)
    check_positive(v)
    grid = v.grid
    M = operator_matrix(man, v.values, grid)
    T = tangent_basis(man, v.values)
    Hm = T.T @ M @ T
    Hm = 0.5 * (Hm + Hm.T)
    try:
        evals, evecs = np.linalg.eigh(Hm)
    except np.linalg.LinAlgError as exc:
        raise HessianError(f"symmetric eigensolver failed: {exc}") from exc
    res = float(np.max(np.abs(Hm @ evecs - evecs * evals))) if evals.size else 0.0
    scale = float(np.max(np.abs(evals)))
    if not np.isfinite(res) or res > 1e-8 * max(scale, 1.0):
        raise HessianError(f"eigendecomposition residual too large: {res:.3e}")
    vecs = T @ evecs / np.sqrt(grid.weight)
    threshold = kernel_tol * scale
    kernel = np.flatnonzero(np.abs(evals) < threshold)
    spec = Spectrum(
        base=v,
        eigenvalues=evals,
        eigenvectors=vecs,
        kernel_indices=kernel,
        kernel_tol=kernel_tol,
        threshold=threshold,
        residual=res,
    )
    spec.lambda1_w12 = _w12_coercivity(M, T, evecs, kernel, grid)
    return spec


def _w12_coercivity(M, T, evecs, kernel, grid: Grid) -> float:
    keep = np.setdiff1d(np.arange(evecs.shape[1]), kernel)
    B = T @ evecs[:, keep]
    A = B.T @ M @ B
    W = B.T @ (B - apply_laplacian(B, grid))
    try:
        mu = sla.eigh(0.5 * (A + A.T), 0.5 * (W + W.T), eigvals_only=True)
    except (np.linalg.LinAlgError, ValueError):
        return float("nan")
    return float(mu[0])


def constant_base_eigenvalues(man: Manifold, N: int) -> np.ndarray:
    """Closed-form spectrum of H at the constant: c_n (k/L)^2 - (2*-2) R_g.

    Modes k = 1..N/2-1 are double (cos and sin); k = N/2 is single.
    """
    k = np.arange(1, N // 2 + 1)
    vals = man.c_n * (k / man.L) ** 2 + man.R_g - (man.p_star - 1.0) * man.R_g
    mult = np.full(k.size, 2)
    mult[-1] = 1
    return np.sort(np.repeat(vals, mult))

"""Polynomials on R^l stored by total degree as monomial coefficients."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np


def monomial_exponents(dim: int, degree: int) -> list[tuple[int, ...]]:
    """All exponent tuples of total degree `degree` in `dim` variables (graded lex)."""
    out = []
    for combo in itertools.combinations_with_replacement(range(dim), degree):
        e = [0] * dim
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    return sorted(set(out), reverse=True)


def monomial_matrix(X: np.ndarray, exps: list[tuple[int, ...]]) -> np.ndarray:
    X = np.atleast_2d(X)
    E = np.asarray(exps, dtype=int)
    return np.prod(X[:, None, :] ** E[None, :, :], axis=2)


def to_symmetric_tensor(dim: int, degree: int, exps, coeffs) -> np.ndarray:
    """Symmetric tensor T with T(x, ..., x) equal to the homogeneous polynomial."""
    T = np.zeros((dim,) * degree)
    lookup = {e: c for e, c in zip(exps, coeffs)}
    for idx in itertools.product(range(dim), repeat=degree):
        e = [0] * dim
        for i in idx:
            e[i] += 1
        e = tuple(e)
        mult = math.factorial(degree) // math.prod(math.factorial(k) for k in e)
        T[idx] = lookup.get(e, 0.0) / mult
    return T


@dataclass
class Polynomial:
    """q(x) = constant + sum over degrees of homogeneous parts."""

    dim: int
    constant: float = 0.0
    terms: dict[int, tuple[list[tuple[int, ...]], np.ndarray]] = field(default_factory=dict)

    @classmethod
    def radial(cls, dim: int, power: int, scale: float = 1.0, constant: float = 0.0) -> "Polynomial":
        """scale * |x|^power for even power."""
        if power % 2:
            raise ValueError("radial polynomials need an even power")
        exps = monomial_exponents(dim, power)
        m = power // 2
        coeffs = []
        for e in exps:
            if any(k % 2 for k in e):
                coeffs.append(0.0)
                continue
            half = [k // 2 for k in e]
            coeffs.append(scale * math.factorial(m) / math.prod(math.factorial(k) for k in half))
        return cls(dim, constant, {power: (exps, np.array(coeffs))})

    def homogeneous(self, degree: int) -> "Polynomial":
        return Polynomial(self.dim, 0.0, {degree: self.terms[degree]} if degree in self.terms else {})

    def __call__(self, X) -> np.ndarray | float:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X2 = np.atleast_2d(X)
        out = np.full(X2.shape[0], float(self.constant))
        for exps, coeffs in self.terms.values():
            out += monomial_matrix(X2, exps) @ coeffs
        return float(out[0]) if single else out

    def gradient(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X2 = np.atleast_2d(X)
        G = np.zeros_like(X2)
        for exps, coeffs in self.terms.values():
            E = np.asarray(exps, dtype=int)
            for i in range(self.dim):
                Ei = E.copy()
                fac = Ei[:, i].astype(float)
                Ei[:, i] = np.maximum(Ei[:, i] - 1, 0)
                G[:, i] += monomial_matrix(X2, [tuple(r) for r in Ei]) @ (coeffs * fac)
        return G[0] if single else G

    def tensor(self, degree: int) -> np.ndarray:
        exps, coeffs = self.terms[degree]
        return to_symmetric_tensor(self.dim, degree, exps, coeffs)

    def norm(self, degree: int) -> float:
        """Frobenius norm of the symmetric coefficient tensor (basis independent)."""
        if degree not in self.terms:
            return 0.0
        return float(np.linalg.norm(self.tensor(degree)))

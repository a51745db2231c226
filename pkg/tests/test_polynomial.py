import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yamabe_lab.polynomial import Polynomial, monomial_exponents, to_symmetric_tensor


def test_exponent_counts():
    assert len(monomial_exponents(2, 4)) == 5
    assert len(monomial_exponents(3, 2)) == 6
    assert all(sum(e) == 3 for e in monomial_exponents(3, 3))


@given(dim=st.integers(1, 3), power=st.sampled_from([2, 4, 6]), seed=st.integers(0, 2**16))
@settings(max_examples=30, deadline=None)
def test_radial_polynomial_values(dim, power, seed):
    p = Polynomial.radial(dim, power, scale=1.7, constant=0.5)
    X = np.random.default_rng(seed).standard_normal((10, dim))
    assert np.allclose(p(X), 0.5 + 1.7 * np.linalg.norm(X, axis=1) ** power)


@given(dim=st.integers(1, 3), deg=st.integers(2, 5), seed=st.integers(0, 2**16))
@settings(max_examples=30, deadline=None)
def test_tensor_contracts_to_polynomial(dim, deg, seed):
    rng = np.random.default_rng(seed)
    exps = monomial_exponents(dim, deg)
    coeffs = rng.standard_normal(len(exps))
    p = Polynomial(dim, 0.0, {deg: (exps, coeffs)})
    T = to_symmetric_tensor(dim, deg, exps, coeffs)
    x = rng.standard_normal(dim)
    val = T
    for _ in range(deg):
        val = val @ x
    assert float(val) == pytest.approx(p(x), rel=1e-10, abs=1e-12)
    # symmetric under index swaps
    if deg >= 2:
        assert np.allclose(T, np.swapaxes(T, 0, 1))


def test_gradient_matches_differences():
    rng = np.random.default_rng(0)
    exps = monomial_exponents(2, 3)
    p = Polynomial(2, 1.0, {3: (exps, rng.standard_normal(len(exps))), 2: (monomial_exponents(2, 2), np.ones(3))})
    x = np.array([0.3, -0.7])
    h = 1e-6
    fd = [(p(x + h * e) - p(x - h * e)) / (2 * h) for e in np.eye(2)]
    assert np.allclose(p.gradient(x), fd, atol=1e-8)


def test_norm_of_radial_quartic_is_basis_independent():
    p = Polynomial.radial(2, 4, scale=2.0)
    # |x|^4 = sum_{ij} x_i x_i x_j x_j, symmetrized Frobenius norm is sqrt(8/3) in two variables
    assert p.norm(4) == pytest.approx(2.0 * np.sqrt(8 / 3), rel=1e-12)
    assert p.norm(3) == 0.0

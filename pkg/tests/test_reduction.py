import math

import numpy as np
import pytest

from yamabe_lab.energy import quotient
from yamabe_lab.manifold import Manifold
from yamabe_lab.polynomial import Polynomial, monomial_exponents
from yamabe_lab.reduction import (
    LyapunovSchmidt,
    ReducedModel,
    ReductionError,
    check_ASp,
    classify_integrability,
    reduce,
    solve_graph_map,
    taylor_of_q,
)
from yamabe_lab.spectral import Field


def test_graph_map_vanishes_at_origin(reduction_L1):
    ls = reduction_L1
    lift = ls.solve([0.0, 0.0])
    assert np.max(np.abs(lift.F.values)) < 1e-12
    assert lift.q == pytest.approx(quotient(ls.man, ls.v.values, ls.grid), abs=1e-12)


def test_graph_map_derivative_vanishes_at_origin(reduction_L1):
    ls = reduction_L1
    h = 1e-4
    cols = []
    for e in np.eye(ls.dim):
        cols.append((ls.graph_map(h * e).values - ls.graph_map(-h * e).values) / (2 * h))
    D = math.sqrt(ls.grid.weight) * np.column_stack(cols)
    assert np.linalg.norm(D, 2) < 1e-6


def test_newton_converges_quickly(reduction_L1):
    ls = reduction_L1
    x = 0.05 * np.array([math.cos(0.4), math.sin(0.4)])
    lift = ls.solve(x)
    assert lift.residual < 1e-10
    assert lift.iterations <= 10
    assert lift.volume_error < 1e-10
    # F maps into the complement of the kernel
    assert np.max(np.abs(ls.grid.weight * ls.K.T @ lift.F.values)) < 1e-10


def test_lifted_points_stay_on_B(reduction_L1):
    ls = reduction_L1
    rng = np.random.default_rng(5)
    for _ in range(5):
        x = rng.uniform(-0.07, 0.07, 2)
        u = ls.solve(x).point
        assert ls.grid.weight * np.sum(u.values**6) == pytest.approx(1.0, abs=1e-10)


def test_reduced_gradient_identity(reduction_L1):
    ls = reduction_L1
    rng = np.random.default_rng(6)
    for _ in range(5):
        x = rng.uniform(-0.06, 0.06, 2)
        an = ls.projected_gradient(x)
        assert np.linalg.norm(fd_gradient(ls, x) - an) <= 1e-7 * np.linalg.norm(an)


def fd_gradient(ls, x, h=1e-3):
    """Fourth-order central differences of the extended-precision deficit."""
    q = ls.reduced_deficit
    out = []
    for e in np.eye(ls.dim):
        out.append((8 * (q(x + h * e) - q(x - h * e)) - (q(x + 2 * h * e) - q(x - 2 * h * e))) / (12 * h))
    return np.array(out)


def test_reduced_energy_is_rotation_invariant(reduction_L1):
    ls = reduction_L1
    x = np.array([0.04, 0.01])
    q = ls.reduced_energy(x)
    for a in (0.3, 1.1, 2.5):
        R = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
        assert abs(ls.reduced_energy(R @ x) - q) < 1e-10


def test_trust_radius_and_positivity(degenerate):
    man, v = degenerate
    ls = LyapunovSchmidt(man, v, radius=0.1)
    with pytest.raises(ReductionError, match="trust radius"):
        ls.solve([0.2, 0.0])
    wide = LyapunovSchmidt(man, v, radius=10.0)
    with pytest.raises(ReductionError, match="positivity"):
        wide.solve([5.0, 0.0])


def test_functional_interface(degenerate):
    man, v = degenerate
    F = solve_graph_map(man, v, None, [0.02, -0.01])
    assert isinstance(F, Field)
    assert np.max(np.abs(F.values)) < 1e-3


def test_critical_point_is_its_own_lift(reduction_L1):
    ls = reduction_L1
    lift = ls.lift_of(ls.v)
    assert np.max(np.abs(lift.point.values - ls.v.values)) < 1e-8


# ----------------------------------------------------------------------------
# Taylor model


def test_taylor_structure_at_degenerate_point(model_L1):
    m = model_L1
    assert m.dim == 2
    assert m.norms[2] < 1e-7 and m.norms[3] < 1e-7 and m.norms[5] < 1e-7
    assert m.norms[4] > 1e-3
    assert m.p == 4 and m.p_interval is None
    assert m.ASp_holds
    assert np.linalg.norm(m.ASp_maximizer) == pytest.approx(1.0)
    assert classify_integrability(m) == "nonintegrable"


def test_quartic_is_radial(model_L1):
    q4 = model_L1.polynomial.homogeneous(4)
    ang = np.linspace(0, 2 * math.pi, 13)
    vals = q4(np.column_stack([np.cos(ang), np.sin(ang)]))
    assert np.ptp(vals) < 1e-5 * np.max(vals)
    assert model_L1.ASp_maximum == pytest.approx(vals.mean(), rel=1e-5)


def test_ray_scaling_of_remainder(reduction_L1, model_L1):
    ls, m = reduction_L1, model_L1
    x = np.array([0.6, 0.8])
    q4 = m.polynomial.homogeneous(4)
    ts = np.array([0.02, 0.04, 0.08])
    rem = [abs(ls.reduced_energy(t * x) - ls.q0 - t**4 * q4(x)) for t in ts]
    slope = np.polyfit(np.log(ts), np.log(rem), 1)[0]
    assert slope > 4.8


def test_model_json(model_L1):
    d = model_L1.to_json()
    c4 = d["coefficients"]["4"]
    assert c4["tensor_shape"] == [2, 2, 2, 2]
    assert len(c4["tensor"]) == 16
    assert d["p"] == 4 and d["ASp_holds"] is True


def test_nondegenerate_point_has_no_expansion():
    man = Manifold(3, 0.8)
    model = reduce(man, man.constant(man.grid(64)))
    assert model.nondegenerate
    assert classify_integrability(model) == "nondegenerate"


def _synthetic(poly: Polynomial, degrees=(2, 3, 4)):
    m = ReducedModel(dim=poly.dim, q0=0.0, degrees=list(degrees), polynomial=poly)
    for j in degrees:
        if j not in poly.terms:
            poly.terms[j] = (monomial_exponents(poly.dim, j), np.zeros(len(monomial_exponents(poly.dim, j))))
        m.norms[j] = poly.norm(j)
        m.thresholds[j] = 1e-7
    sig = [j for j in degrees if m.norms[j] > 1e-7]
    m.p = sig[0] if sig else None
    return m


def test_ASp_on_synthetic_forms():
    pos = _synthetic(Polynomial.radial(2, 4, scale=1.0))
    holds, x, val = check_ASp(pos)
    assert holds and val == pytest.approx(1.0, rel=1e-6)
    neg = _synthetic(Polynomial.radial(2, 4, scale=-1.0))
    assert check_ASp(neg)[0] is False
    # indefinite quartic x1^4 - x2^4 has a positive maximum at e1
    exps = monomial_exponents(2, 4)
    coeffs = np.array([1.0 if e == (4, 0) else -1.0 if e == (0, 4) else 0.0 for e in exps])
    ind = _synthetic(Polynomial(2, 0.0, {4: (exps, coeffs)}))
    holds, x, val = check_ASp(ind)
    assert holds and abs(abs(x[0]) - 1) < 1e-6


def test_integrable_when_all_coefficients_vanish():
    flat = _synthetic(Polynomial(2, 0.0, {}))
    assert classify_integrability(flat) == "integrable"
    assert check_ASp(flat)[0] is False


def test_ill_conditioned_fit_is_reported(reduction_L1):
    with pytest.raises(ReductionError, match="ill-conditioned"):
        taylor_of_q(reduction_L1, radii=[0.05, 0.05 * (1 + 1e-9)], j_max=4, n_directions=8, max_condition=1e6)

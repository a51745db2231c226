"""Acceptance checks for the Yamabe lab.

Each check returns ``(passed, detail)``.  Under pytest every check becomes a
test and its result line is collected into the terminal summary.  Running
this file directly prints one PASS/FAIL line per check:

    python tests/test_acceptance.py
"""

from __future__ import annotations

import functools
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import ACCEPTANCE_LINES, on_B, quotient_ld, smooth_positive  # noqa: E402

from yamabe_lab.energy import (  # noqa: E402
    conformal_distance,
    conformal_distance_star,
    el_residual,
    gradient,
    orthogonal_tangent_project,
)
from yamabe_lab.hessian import constant_base_eigenvalues, hessian_apply, hessian_spectrum  # noqa: E402
from yamabe_lab.manifold import Manifold, conformal_laplacian  # noqa: E402
from yamabe_lab.polynomial import Polynomial  # noqa: E402
from yamabe_lab.reduction import LyapunovSchmidt, classify_integrability, taylor_of_q  # noqa: E402
from yamabe_lab.solver import continuation, minimize, seed_field  # noqa: E402
from yamabe_lab.spectral import Field, inner_products  # noqa: E402
from yamabe_lab.stability import (  # noqa: E402
    decompose_deficit,
    fit_exponent,
    lojasiewicz_check,
    random_tangent_directions,
    sample_deficit_distance,
    superquadratic_family,
)

N = 256


@functools.cache
def degenerate_reduction() -> LyapunovSchmidt:
    man = Manifold(3, 1.0)
    return LyapunovSchmidt(man, man.constant(man.grid(N)))


@functools.cache
def degenerate_model():
    return taylor_of_q(degenerate_reduction())


@functools.cache
def minimizer_L12():
    man = Manifold(3, 1.2)
    return man, minimize(man, seed_field(man, man.grid(N), 0.1, phase=0.3))


def _fd_ratio(man, u, phi, exact, order):
    errs = []
    for h in (1e-3, 1e-4):
        qp = quotient_ld(man, u.values + h * phi.values, man.L)
        qm = quotient_ld(man, u.values - h * phi.values, man.L)
        if order == 1:
            fd = (qp - qm) / (2 * h)
        else:
            fd = (qp - 2 * quotient_ld(man, u.values, man.L) + qm) / h**2
        errs.append(float(abs(fd - exact)))
    return errs[0] / errs[1]


# ----------------------------------------------------------------------------
# the nine checks


def check_kernel_onset():
    start = time.perf_counter()
    diag = continuation(3, np.linspace(0.8, 1.2, 41), N=N, branches=False)
    elapsed = time.perf_counter() - start
    ok = diag.crossing is not None and abs(diag.crossing - 1.0) <= 1e-3 and elapsed < 10.0
    return ok, f"crossing L={diag.crossing:.12f} (target 1 +- 1e-3), {elapsed:.2f}s (< 10s)"


def check_quadratic_stability():
    start = time.perf_counter()
    man = Manifold(3, 0.8)
    v = man.constant(man.grid(N))
    dirs = random_tangent_directions(man, v, 5, seed=0)
    samples = sample_deficit_distance(man, [v], dirs, np.geomspace(1e-3, 5e-2, 12))
    fit = fit_exponent(samples)
    elapsed = time.perf_counter() - start
    ok = abs(fit.slope - 2.0) <= 0.05 and fit.r2 > 0.99 and elapsed < 30.0
    return ok, f"slope={fit.slope:.4f} (2 +- 0.05), r2={fit.r2:.5f} (> 0.99), {elapsed:.2f}s (< 30s)"


def check_superquadratic_growth():
    start = time.perf_counter()
    ls = degenerate_reduction()
    fam = superquadratic_family(ls.man, ls.v, degenerate_model(), np.geomspace(0.005, 0.05, 10))
    elapsed = time.perf_counter() - start
    reg = stats.linregress(np.log([m.distance for m in fam]), np.log([m.deficit for m in fam]))
    ratio = np.array([m.ratios[1.5] for m in fam])  # ascending t
    monotone = bool(np.all(np.diff(ratio) > 0))
    drop = ratio[0] / ratio[-1]
    ok = reg.slope >= 3.5 and monotone and drop < 0.1 and elapsed < 120.0
    return ok, (f"slope={reg.slope:.4f} (>= 3.5), ratio monotone={monotone}, "
                f"ratio(t=0.005)/ratio(t=0.05)={drop:.4f} (< 0.1), {elapsed:.2f}s")


def check_reduction():
    ls = degenerate_reduction()
    f0 = float(np.max(np.abs(ls.solve(np.zeros(ls.dim)).F.values)))
    h = 1e-4
    cols = [(ls.graph_map(h * e).values - ls.graph_map(-h * e).values) / (2 * h) for e in np.eye(ls.dim)]
    dF0 = float(np.linalg.norm(math.sqrt(ls.grid.weight) * np.column_stack(cols), 2))
    rng = np.random.default_rng(2024)
    worst_res = worst_grad = 0.0
    for _ in range(20):
        x = rng.uniform(0, 0.06) * _unit(rng.standard_normal(ls.dim))
        worst_res = max(worst_res, ls.solve(x).residual)
        an = ls.projected_gradient(x)
        worst_grad = max(worst_grad, float(np.linalg.norm(_fd_gradient(ls, x) - an) / np.linalg.norm(an)))
    ok = f0 <= 1e-12 and dF0 < 1e-6 and worst_res < 1e-10 and worst_grad <= 1e-7
    return ok, (f"|F(0)|={f0:.1e} (<= 1e-12), |DF(0)|={dF0:.1e} (< 1e-6), "
                f"max lift residual={worst_res:.1e} (< 1e-10), max grad rel err={worst_grad:.1e} (<= 1e-7)")


def _unit(x):
    return x / np.linalg.norm(x)


def _fd_gradient(ls, x, h=1e-3):
    q = ls.reduced_deficit
    return np.array([(8 * (q(x + h * e) - q(x - h * e)) - (q(x + 2 * h * e) - q(x - 2 * h * e))) / (12 * h)
                     for e in np.eye(ls.dim)])


def check_taylor_structure():
    m = degenerate_model()
    verdict = classify_integrability(m)
    ok = m.norms[2] < 1e-6 and m.norms[3] < 1e-6 and m.norms[4] > 1e-3 and verdict == "nonintegrable"
    return ok, (f"|q2|={m.norms[2]:.1e}, |q3|={m.norms[3]:.1e} (< 1e-6), |q4|={m.norms[4]:.4f} (> 1e-3), "
                f"verdict={verdict}")


def check_lojasiewicz():
    e2 = lojasiewicz_check(Polynomial.radial(2, 2)).exponent
    e4 = lojasiewicz_check(Polynomial.radial(2, 4)).exponent
    g = lojasiewicz_check(degenerate_model().polynomial).gamma_star
    ok = abs(e2 - 2) <= 0.05 and abs(e4 - 4) <= 0.05 and abs(g - 2) <= 0.1
    return ok, f"|x|^2 -> {e2:.4f}, |x|^4 -> {e4:.4f} (+- 0.05), fitted quartic gamma*={g:.4f} (2 +- 0.1)"


def check_variational_oracles():
    man = Manifold(3, 1.2)
    grid = man.grid(N)
    rng = np.random.default_rng(77)
    g_ratios, h_ratios = [], []
    for _ in range(3):
        u = on_B(man, smooth_positive(grid, rng))
        phi = orthogonal_tangent_project(man, u, smooth_positive(grid, rng, amp=1.0) - 1.0)
        g_ratios.append(_fd_ratio(man, u, phi, inner_products(gradient(man, u), phi)[0], 1))
        h_ratios.append(_fd_ratio(man, u, phi, 2.0 * inner_products(hessian_apply(man, u, phi), phi)[0], 2))
    res = eig = 0.0
    for L in (0.8, 1.0, 1.2):
        m = Manifold(3, L)
        c = m.constant(m.grid(N))
        res = max(res, float(np.max(np.abs(el_residual(m, c).values))))
        spec = hessian_spectrum(m, c)
        closed = constant_base_eigenvalues(m, N)
        eig = max(eig, float(np.max(np.abs(spec.eigenvalues - closed) / np.maximum(np.abs(closed), 1.0))))
    # O(h^2): a tenfold smaller step shrinks the error about a hundredfold
    ok = all(30 < r < 300 for r in g_ratios + h_ratios) and res < 1e-12 and eig <= 1e-8
    return ok, (f"gradient FD ratios {[round(r, 1) for r in g_ratios]}, Hessian FD ratios "
                f"{[round(r, 1) for r in h_ratios]} (~100), constant EL residual={res:.1e} (< 1e-12), "
                f"eigenvalue rel err={eig:.1e} (<= 1e-8)")


def check_conformal_invariance():
    man, cp = minimizer_L12()
    psi, Y = cp.u, cp.q
    grid = psi.grid
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(5):
        u, v = smooth_positive(grid, rng), smooth_positive(grid, rng)
        base = conformal_distance(man, u, v)
        d = u - v
        l2, w12 = inner_products(d, d)
        ref_star = math.sqrt(man.c_n * (w12 - l2) + man.R_g * l2)
        for a in rng.uniform(0, 2 * math.pi, 3):
            rep = psi.rotate(a)
            worst = max(worst, abs(conformal_distance(man, u, v, rep) / base - 1))
            worst = max(worst, abs(conformal_distance_star(man, u, v, Y, rep) / ref_star - 1))
    law = 0.0
    for n, L in ((3, 1.0), (4, 0.7), (5, 1.6)):
        m = Manifold(n, L)
        g = m.grid(128)
        p = smooth_positive(g, rng)
        f = smooth_positive(g, rng, amp=1.0) - 0.5
        sigma = Field(g, 2.0 / (n - 2) * np.log(p.values))
        lhs = conformal_laplacian(m, f / p, sigma).values
        rhs = p.values ** (-(n + 2) / (n - 2)) * conformal_laplacian(m, f).values
        law = max(law, float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs))))
    ok = worst <= 1e-9 and law <= 1e-9
    return ok, f"norm rel spread={worst:.1e} (<= 1e-9), transformation law rel err={law:.1e} (<= 1e-9)"


def check_decomposition():
    ls = degenerate_reduction()
    v = ls.v
    spec = hessian_spectrum(ls.man, v)
    rng = np.random.default_rng(31)
    perps = random_tangent_directions(ls.man, v, 20, seed=32, exclude=ls.K)
    worst_rel, worst_margin = 0.0, math.inf
    for psi in perps:
        x = rng.uniform(0, 0.05) * _unit(rng.standard_normal(ls.dim))
        u = v + Field(ls.grid, ls.embed(x)) + rng.uniform(1e-3, 2e-2) * psi
        u = on_B(ls.man, u)
        d = decompose_deficit(ls, u)
        worst_rel = max(worst_rel, d.mismatch / abs(d.total))
        # the bound uses the W^{1,2} coercivity constant of the second variation
        worst_margin = min(worst_margin, d.term_I - d.bound)
    ok = worst_rel <= 1e-8 and worst_margin >= -1e-8
    return ok, (f"max |I + II - total|/|total|={worst_rel:.1e} (<= 1e-8), "
                f"min I - bound={worst_margin:.2e} (>= -1e-8), lambda1={spec.lambda1_w12:.4f}")


CHECKS = {
    1: ("kernel onset", check_kernel_onset),
    2: ("nondegenerate quadratic stability", check_quadratic_stability),
    3: ("superquadratic growth", check_superquadratic_growth),
    4: ("reduction correctness", check_reduction),
    5: ("Taylor and symmetry structure", check_taylor_structure),
    6: ("Lojasiewicz desk check", check_lojasiewicz),
    7: ("variational calculus oracles", check_variational_oracles),
    8: ("conformal invariance", check_conformal_invariance),
    9: ("decomposition identity", check_decomposition),
}


def _line(idx, name, ok, detail):
    return f"[{'PASS' if ok else 'FAIL'}] {idx}. {name}: {detail}"


@pytest.mark.parametrize("idx", sorted(CHECKS))
def test_acceptance(idx):
    name, fn = CHECKS[idx]
    ok, detail = fn()
    line = _line(idx, name, ok, detail)
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def main() -> int:
    failed = 0
    for idx in sorted(CHECKS):
        name, fn = CHECKS[idx]
        ok, detail = fn()
        failed += not ok
        print(_line(idx, name, ok, detail), flush=True)
    print(f"{len(CHECKS) - failed}/{len(CHECKS)} criteria pass")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())

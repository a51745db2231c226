"""Fit the deficit-vs-distance exponent at the constant for several lengths.

Away from the critical length the fit is quadratic (gamma = 0).  At the
critical length the kernel directions grow like distance^4, which the
per-direction fits expose.
"""

import argparse

import numpy as np

from yamabe_lab import Manifold
from yamabe_lab.reduction import LyapunovSchmidt, taylor_of_q
from yamabe_lab.stability import (
    fit_exponent,
    kernel_lift_direction,
    random_tangent_directions,
    sample_deficit_distance,
)


def scan(L: float, N: int, directions: int, seed: int) -> str:
    man = Manifold(3, L)
    v = man.constant(man.grid(N))
    radii = np.geomspace(1e-3, 5e-2, 12)
    critical = abs(L - 1.0) <= 1e-12
    if L > 1.0 and not critical:
        return f"L={L:.3f}: constant is not a minimizer (negative directions), skipped"
    ls = LyapunovSchmidt(man, v) if critical else None
    exclude = ls.K if ls is not None else None
    dirs = {f"normal{i}": d for i, d in enumerate(random_tangent_directions(man, v, directions, seed=seed,
                                                                           exclude=exclude))}
    if ls is not None:
        model = taylor_of_q(ls)
        dirs["kernel"] = kernel_lift_direction(ls, model.ASp_maximizer)
    samples = sample_deficit_distance(man, [v], dirs, radii)
    normal = fit_exponent([s for s in samples if s.label != "kernel"])
    line = f"L={L:.3f}: normal slope {normal.slope:.4f} (r2 {normal.r2:.4f})"
    if ls is not None:
        kern = fit_exponent([s for s in samples if s.label == "kernel"])
        line += f", kernel slope {kern.slope:.4f} (r2 {kern.r2:.4f})"
    return line


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=float, nargs="+", default=[0.7, 0.8, 0.9, 0.95, 1.0])
    ap.add_argument("--N", type=int, default=256)
    ap.add_argument("--directions", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for L in args.L:
        print(scan(L, args.N, args.directions, args.seed), flush=True)


if __name__ == "__main__":
    main()

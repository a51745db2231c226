"""Tabulate deficit/distance^(2+gamma) along the reduced family at L = 1."""

import argparse

import numpy as np
from scipy import stats

from yamabe_lab import Manifold
from yamabe_lab.reduction import LyapunovSchmidt, taylor_of_q
from yamabe_lab.stability import SUPERQUADRATIC_GAMMAS, superquadratic_family


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=256)
    ap.add_argument("--t-min", type=float, default=0.005)
    ap.add_argument("--t-max", type=float, default=0.05)
    ap.add_argument("--count", type=int, default=10)
    args = ap.parse_args()

    man = Manifold(3, 1.0)
    v = man.constant(man.grid(args.N))
    ls = LyapunovSchmidt(man, v)
    model = taylor_of_q(ls)
    fam = superquadratic_family(man, v, model, np.geomspace(args.t_min, args.t_max, args.count))

    cols = "".join(f"{'g=' + str(g):>13}" for g in SUPERQUADRATIC_GAMMAS)
    print(f"{'t':>9} {'distance':>12} {'deficit':>12}{cols}")
    for m in fam:
        ratios = "".join(f"{m.ratios[g]:13.5e}" for g in SUPERQUADRATIC_GAMMAS)
        print(f"{m.t:9.5f} {m.distance:12.5e} {m.deficit:12.5e}{ratios}")
    reg = stats.linregress(np.log([m.distance for m in fam]), np.log([m.deficit for m in fam]))
    print(f"log-log slope {reg.slope:.4f}, leading order p = {model.p}, "
          f"AS_p maximum {model.ASp_maximum:.5f}")
    for g in SUPERQUADRATIC_GAMMAS:
        print(f"gamma={g}: ratio at t_min / ratio at t_max = {fam[0].ratios[g] / fam[-1].ratios[g]:.4f}")


if __name__ == "__main__":
    main()

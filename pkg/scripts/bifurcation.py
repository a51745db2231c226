"""Sweep L, print the two lowest constant-base eigenvalues and branch energies."""

import argparse

import numpy as np

from yamabe_lab import continuation


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--L-min", type=float, default=0.8)
    ap.add_argument("--L-max", type=float, default=1.2)
    ap.add_argument("--steps", type=int, default=21)
    ap.add_argument("--N", type=int, default=128)
    ap.add_argument("--no-branches", action="store_true", help="skip the nonconstant branch search")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    diag = continuation(args.n, np.linspace(args.L_min, args.L_max, args.steps), N=args.N,
                        branches=not args.no_branches, seed=args.seed)
    print(f"{'L':>8} {'lambda_0':>12} {'lambda_1':>12} {'Q(const)':>12} {'Q(branch)':>12}  note")
    for r in diag.rows:
        q_nc = "" if r.q_nonconstant is None else f"{r.q_nonconstant:12.6f}"
        print(f"{r.L:8.4f} {r.eigenvalues[0]:12.5f} {r.eigenvalues[1]:12.5f} {r.q_constant:12.6f} "
              f"{q_nc:>12}  {r.note}")
    print(f"crossing at L = {diag.crossing:.10f} (predicted {diag.critical_length:.10f})")


if __name__ == "__main__":
    main()

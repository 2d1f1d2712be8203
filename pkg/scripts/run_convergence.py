"""Convergence study with a level table printed to stdout.

    python scripts/run_convergence.py --xhat 1.0 --paths 20000 --seed 7
"""

import argparse

from svie_support import get_coefficients, make_dyadic_sequence, run_convergence_study, support_setup
from svie_support.paths import GridPath


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--coefficients", default="bounded_separable")
    ap.add_argument("--xhat", type=float, default=1.0)
    ap.add_argument("--alpha", type=float, default=0.0)
    ap.add_argument("--base", type=int, default=8)
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--oversampling", type=int, default=4)
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--workers", type=int, default=1)
    a = ap.parse_args()

    c = get_coefficients(a.coefficients)
    pseq = make_dyadic_sequence(0.0, 1.0, a.levels, a.base, a.oversampling)
    xhat = GridPath.constant(pseq.grid, [a.xhat] * c.m)
    rep = run_convergence_study(support_setup(c), xhat, pseq, a.alpha, a.paths, a.seed, workers=a.workers)
    print(f"{'k':>5} {'mesh':>10} {'E max^2':>10} {'se':>10} {'hoelder^2':>10}")
    for lv in rep.levels:
        print(f"{lv.k:5d} {lv.mesh:10.5f} {lv.E_max_sq.mean:10.5f} {lv.E_max_sq.std_error:10.5f} "
              f"{lv.hoelder_sq.mean:10.5f}")
    if rep.rate:
        print(f"slope {rep.rate.slope:.3f}  band {rep.rate.band[0]:.3f}..{rep.rate.band[1]:.3f}")
    print(f"separated: {rep.strictly_decreasing_separated()}  censored: {rep.censored}")


if __name__ == "__main__":
    main()

"""Forward and reverse support diagnostic on a small driver lattice."""

import argparse

from svie_support import get_coefficients, make_dyadic_sequence, run_support_diagnostic
from svie_support.paths import GridPath
from svie_support.volterra_det import driver_lattice


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--coefficients", default="gbm")
    ap.add_argument("--eps", type=float, default=0.25)
    ap.add_argument("--alpha", type=float, default=0.0)
    ap.add_argument("--paths", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=9)
    ap.add_argument("--coarse-knots", type=int, default=2)
    ap.add_argument("--slopes", type=float, nargs="*", default=[-1.0, 0.0, 1.0, 2.0])
    a = ap.parse_args()

    c = get_coefficients(a.coefficients)
    pseq = make_dyadic_sequence(0.0, 1.0, 3, 8, 4)
    xhat = GridPath.constant(pseq.grid, [1.0] * c.m)
    drivers = driver_lattice(pseq.grid, a.coarse_knots, a.slopes, c.d)
    rep = run_support_diagnostic(c, xhat, pseq, a.alpha, a.eps, a.paths, drivers, a.seed)
    for row in rep.rows():
        print(f"k={row['k']:3d}  P(dist >= eps)={row['exceedance']:.4f} +- {row['exceedance_se']:.4f}  "
              f"E dist={row['distance']:.4f}")
    r = rep.reverse
    print(f"reverse: E min_h dist={r['min_distance']['mean']:.4f} over {len(drivers)} drivers, "
          f"quantiles {r['quantiles']}")


if __name__ == "__main__":
    main()

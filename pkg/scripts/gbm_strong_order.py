"""Strong RMS error of the Euler scheme for gbm against the closed form X_T = exp(W_T - T/2)."""

import argparse

import numpy as np

from svie_support import get_coefficients
from svie_support.paths import GridPath
from svie_support.timegrid import TimeGrid
from svie_support.volterra_sde import BrownianPath, sample_brownian, solve_svie


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=10_000)
    ap.add_argument("--finest", type=int, default=256)
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--seed", type=int, default=2)
    a = ap.parse_args()

    c = get_coefficients("gbm")
    fine = TimeGrid.uniform(0.0, 1.0, a.finest)
    W = sample_brownian(fine, 1, a.seed, a.paths)
    exact = np.exp(W.values[:, -1, 0] - 0.5)
    prev = None
    for j in reversed(range(a.levels)):
        N = a.finest >> j
        g = TimeGrid.uniform(0.0, 1.0, N)
        X = solve_svie(c, GridPath.constant(g, [1.0]), BrownianPath(g, W.values[:, :: a.finest // N]))
        rms = float(np.sqrt(np.mean((X.values[:, -1, 0] - exact) ** 2)))
        print(f"N={N:5d}  rms={rms:.5f}" + (f"  factor={prev / rms:.3f}" if prev else ""))
        prev = rms


if __name__ == "__main__":
    main()

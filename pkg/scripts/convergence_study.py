#!/usr/bin/env python3
"""Cross-solver convergence study: march the spectral and implicit-L1 routes
on the same random problems and print the sup-difference under time-grid
refinement.  The two discretisations share the spatial operator, so the gap
is a pure time-integration error and should shrink at first order or better."""

import math
import sys
from dataclasses import replace

import numpy as np

from fraccomp.evolve_linear import solve_linear_l1, solve_linear_spectral
from fraccomp.fracops import TimeGrid
from fraccomp.randomspec import random_linear_problem


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 77
    rng = np.random.default_rng(seed)
    print(f"{'alpha':>6} {'N':>6} {'sup diff':>12} {'rate':>6}")
    for alpha in (0.3, 0.5, 0.7):
        p = random_linear_problem(rng, alpha, n=64, N=64)
        prev = None
        for N in (64, 128, 256, 512, 1024):
            pj = replace(p, tgrid=TimeGrid.graded(1.0, N, 2.0 / alpha))
            d = float(np.max(np.abs(
                solve_linear_spectral(pj).values - solve_linear_l1(pj).values)))
            rate = f"{math.log2(prev / d):.2f}" if prev else "-"
            print(f"{alpha:6.2f} {N:6d} {d:12.3e} {rate:>6}")
            prev = d
    return 0


if __name__ == "__main__":
    sys.exit(main())

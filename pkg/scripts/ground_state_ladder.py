"""Density drift along a beta ladder for the harmonic trap, next to the eigen-expansion prediction.

The midpoint density at finite beta is contaminated by the second excited
level (the first one drops out by parity), so successive rungs differ by
roughly exp(-(E2 - E0) beta / 2).

    python scripts/ground_state_ladder.py --ladder 5 10 20 40
"""

import argparse

import numpy as np

from wickscft import ExternalPotential, FunctionalSpec, Grid1D, ScftConfig, eigendecompose, ground_state_limit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ladder", type=float, nargs="+", default=[5.0, 10.0, 20.0, 40.0])
    ap.add_argument("--n-points", type=int, default=256)
    ap.add_argument("--length", type=float, default=20.0)
    ap.add_argument("--ds", type=float, default=0.005)
    args = ap.parse_args()

    grid = Grid1D(args.n_points, args.length)
    spec = FunctionalSpec(ExternalPotential.harmonic(1.0))
    ladder = ground_state_limit(spec, 1.0, grid, ScftConfig(ds=args.ds), args.ladder)
    E = eigendecompose(spec.external.evaluate(grid), n_states=3).energies
    gap = E[2] - E[0]

    print(f"{'beta_a':>8} {'beta_b':>8} {'drift':>12} {'exp(-gap*b_a/2)':>16}")
    for (a, b), d in zip(zip(ladder.betas, ladder.betas[1:]), ladder.drifts):
        print(f"{a:8.2f} {b:8.2f} {d:12.3e} {np.exp(-gap * a / 2):16.3e}")
    print(f"converged: {ladder.converged}")


if __name__ == "__main__":
    main()

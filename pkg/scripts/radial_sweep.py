"""Optimal insulator radius and energy over a grid of (h, C0) for the unit disk."""
import argparse
import warnings

import numpy as np

from insulate.radial import optimize_radius


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--h", type=float, nargs="+", default=[0.5, 1.0, 2.0, 4.0, 8.0])
    ap.add_argument("--c0", type=float, nargs="+", default=[0.25, 0.5, 1.0, 2.0])
    ap.add_argument("--rho0", type=float, default=1.0)
    args = ap.parse_args()
    print(f"{'h':>6} {'C0':>6} {'R*':>14} {'F*':>14} {'F*/detached':>12}")
    for h in args.h:
        for c0 in args.c0:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                R, F, _ = optimize_radius(args.dim, h, c0, args.rho0)
            detached = h * (2 * np.pi * args.rho0 if args.dim == 2 else 4 * np.pi * args.rho0**2)
            print(f"{h:6g} {c0:6g} {R:14.10f} {F:14.10f} {F / detached:12.6f}")


if __name__ == "__main__":
    main()

"""Shape optimisation from a perturbed circle, compared with the radial optimum."""
import argparse

from insulate.model import ProblemConfig
from insulate.radial import optimize_radius
from insulate.shape_opt import (ShapeOptOptions, circle_with_mode, max_relative_radius_error,
                                optimize_shape)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=4.0)
    ap.add_argument("--c0", type=float, default=1.0)
    ap.add_argument("--mode", type=int, default=3)
    ap.add_argument("--amplitude", type=float, default=0.1)
    ap.add_argument("--n-s", type=int, default=32)
    args = ap.parse_args()
    cfg = ProblemConfig(robin_h=args.h, volume_cost=args.c0)
    R, F, _ = optimize_radius(2, args.h, args.c0, 1.0)
    opts = ShapeOptOptions(n_s=args.n_s, n_theta=2 * args.n_s)
    res = optimize_shape(cfg, circle_with_mode(1.8, args.mode, args.amplitude, modes=opts.modes),
                         opts)
    for i, (e, g) in enumerate(res.trace):
        print(f"{i:4d} F={e.total:.10f} |grad|={g:.3e}")
    print(res.message)
    print(f"energy {res.energy.total:.10f} vs oracle {F:.10f}; "
          f"radius error {max_relative_radius_error(res.shape, R):.2e}")


if __name__ == "__main__":
    main()

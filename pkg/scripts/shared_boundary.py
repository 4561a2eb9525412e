"""Unit disk plus a small satellite disk: look for a jump with positive traces on both sides."""
import argparse
import warnings

from insulate.model import Disk, ProblemConfig, Union2
from insulate.phase_field import GridSpec, PFParams, at_minimize, extract_sets


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=256,
                    help="cells per side; below 128 the extraction does not resolve the layer")
    ap.add_argument("--h", type=float, default=4.0)
    ap.add_argument("--gap", type=float, default=0.459, help="distance between the disks")
    ap.add_argument("--radius", type=float, default=0.05, help="radius of the satellite")
    args = ap.parse_args()
    omega = Union2(Disk(), Disk((1.0 + args.gap, 0.0), args.radius))
    cfg = ProblemConfig(robin_h=args.h, volume_cost=1.0, omega=omega)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = at_minimize(cfg, GridSpec(args.n, 2.2), PFParams())
    ext = extract_sets(res)
    print(f"positive components: {ext.n_positive}")
    print(f"two-sided jump length: {ext.two_sided.length:.4f}")
    print(f"sharp energy: {ext.energy.total:.6f}")


if __name__ == "__main__":
    main()

"""Hausdorff and W1 traces of X_{f+eps} -> X_f for several resolutions."""

import argparse

from cdspaces.cdcheck import mgh_harness
from cdspaces.profiles import profile_from_source


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--profile", default="ramp-smoothed")
    ap.add_argument("--k", type=float, default=0.2)
    ap.add_argument("--K", type=float, default=16.0)
    ap.add_argument("--nx", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--nu", type=int, default=4)
    ap.add_argument("--jmax", type=int, default=9, help="eps = 2^-4 .. 2^-jmax")
    ap.add_argument("--prefix", default="mgh")
    args = ap.parse_args()

    f = profile_from_source(args.profile, args.k)
    eps = [2.0 ** -j for j in range(4, args.jmax + 1)]
    for nx in args.nx:
        tr = mgh_harness(f, eps, args.k, args.K, nx=nx, nu=args.nu)
        tr.to_csv(f"{args.prefix}_nx{nx}.csv")
        print(f"nx={nx:4d} hausdorff_ok={tr.hausdorff_ok} decreasing={tr.w1_decreasing} "
              f"limit={tr.limit:.2e}")


if __name__ == "__main__":
    main()

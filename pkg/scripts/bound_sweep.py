"""Stability radius M and the largest witness distance it must dominate, sweeping a0.

For f = -a0 x^2 the radius blows up as a0 approaches 1/2.
"""
import argparse

import numpy as np

from rllab.density import certify_subdiff_density
from rllab.funcspec import DownsideCertificate, parse_func


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--a0", type=float, nargs="+", default=[0.0, 0.1, 0.2, 0.3, 0.4, 0.45, 0.49])
    ap.add_argument("--y", type=float, default=1.0)
    ap.add_argument("--ystar", type=float, default=1.0)
    a = ap.parse_args()
    print(f"{'a0':>6} {'M':>12} {'max|s-y|':>10} {'max|s*-y*|':>11} {'gap':>10} ok")
    for a0 in a.a0:
        f = parse_func(f"-{a0!r}*x1^2")
        c = certify_subdiff_density(f, "polynomial", DownsideCertificate(a0), ([a.y], [a.ystar]))
        dx = max(float(np.abs(w.pair.x - a.y).max()) for w in c.witnesses)
        ds = max(float(np.abs(w.pair.xstar - a.ystar).max()) for w in c.witnesses)
        print(f"{a0:>6.2f} {c.stable_bound:>12.4f} {dx:>10.4f} {ds:>11.4f} {c.final_gap:>10.2e} "
              f"{c.within_stable_bound()}")


if __name__ == "__main__":
    main()

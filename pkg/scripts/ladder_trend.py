"""Preimage norms and truncation residuals for the diagonal ladder as the size grows."""
import argparse
import math

from rllab.density import minty_dense


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 30, 100, 300, 1000, 3000])
    ap.add_argument("--keep", type=int, default=10, help="coordinates kept in the truncation")
    a = ap.parse_args()
    rows = minty_dense(a.sizes, [min(a.keep, n) for n in a.sizes])
    print(f"{'n':>6} {'||x||':>12} {'sqrt(n)':>12} {'residual':>10} {'trunc res^2':>14}")
    for r in rows:
        print(f"{r.n:>6} {r.preimage_norm:>12.6f} {math.sqrt(r.n):>12.6f} {r.residual:>10.1e} "
              f"{r.truncation_residual_sq:>14.6e}")


if __name__ == "__main__":
    main()

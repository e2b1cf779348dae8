"""Write the polar region of a sampled 1-D graph as CSV and report the in-count."""
import argparse
import sys

from rllab.geometry import NormedSpace
from rllab.operators import build_operator, graph_sample
from rllab.polar import polar_region


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--operator", default="cos", help="named operator, e.g. cos or identity")
    ap.add_argument("--samples", type=int, default=2001)
    ap.add_argument("--grid", type=int, default=400)
    ap.add_argument("--out", default="polar_region.csv")
    a = ap.parse_args()
    G = graph_sample(build_operator(a.operator, NormedSpace(1)), a.samples, box=(-10.0, 10.0))
    region = polar_region(G, ((-10.0, 10.0), (-2.0, 2.0)), a.grid)
    with open(a.out, "w") as fh:
        fh.write(region.to_csv())
    print(f"{a.operator}: {region.count}/{region.inside.size} cells in the polar, written to {a.out}",
          file=sys.stderr)


if __name__ == "__main__":
    main()

"""Density verdicts for f(x) = -lam x^2 on the real line across a sweep of lam.

Below 1/2 the constructive pipeline certifies with a fixed radius; at 1/2 the
target (0, 1) is refuted; above 1/2 the direct search finds zero-gap witnesses.
"""
import argparse
import csv
import sys

from rllab.density import RefutationReport, certify_density, certify_subdiff_density, pipeline_ok
from rllab.funcspec import DownsideCertificate, parse_func
from rllab.geometry import NormedSpace
from rllab.subdiff import subdiff_operator

LINE = NormedSpace(1)


def row(lam: float, y: float, ys: float) -> dict:
    f = parse_func(f"-{lam!r}*x1^2")
    out = {"lam": lam, "y": y, "ystar": ys}
    if lam < 0.5:
        c = certify_subdiff_density(f, "polynomial", DownsideCertificate(lam), ([y], [ys]))
        out.update(method="pipeline", verdict="certified" if pipeline_ok(c) else "failed",
                   final_gap=c.final_gap, radius=c.stable_bound)
    else:
        r = certify_density(subdiff_operator("polynomial", f, LINE), ([y], [ys]))
        if isinstance(r, RefutationReport):
            out.update(method="direct", verdict="refuted", final_gap=r.delta, radius=None)
        else:
            out.update(method="direct", verdict="certified", final_gap=r.final_gap, radius=None)
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lams", type=float, nargs="+", default=[0.0, 0.1, 0.25, 0.4, 0.5, 0.75, 1.0])
    ap.add_argument("--targets", default="0:1,1:1,-1:2,2:-1")
    a = ap.parse_args()
    targets = [tuple(map(float, t.split(":"))) for t in a.targets.split(",")]
    w = csv.DictWriter(sys.stdout, ["lam", "y", "ystar", "method", "verdict", "final_gap", "radius"],
                       lineterminator="\n")
    w.writeheader()
    for lam in a.lams:
        for y, ys in targets:
            w.writerow(row(lam, y, ys))


if __name__ == "__main__":
    main()

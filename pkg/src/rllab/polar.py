"""Monotone polars of sampled graphs, monotonicity and maximality audits.

A pair (x, x*) is in the polar of A when ``<s - x, s* - x*> >= 0`` for every
(s, s*) in A.  Everything here works on finite samples, so a polar computed
from samples contains the true polar.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .funcspec import parse_func
from .geometry import DualPair, NormedSpace, pairing, rl
from .operators import AnalyticOperator, OperatorGraph, SampledGraph, graph_sample
from .subdiff import subdiff_operator

CHUNK = 4096
REGION_TOL = 1e-12
MONOTONE_TOL = 1e-9


class NonMonotoneError(ValueError):
    def __init__(self, message: str, pair):
        super().__init__(message)
        self.pair = pair


@dataclass
class PolarQuery:
    point: DualPair
    inside: bool
    violator: tuple | None = None  # ((s, s*), pairing value), first strict violation
    worst: tuple | None = None  # most negative pairing

    @property
    def verdict(self) -> str:
        return "in" if self.inside else "out"

    def to_json(self) -> dict:
        def pv(v):
            return None if v is None else {"s": v[0][0].tolist(), "sstar": v[0][1].tolist(),
                                           "value": v[1]}
        return {"point": self.point.to_json(), "verdict": self.verdict,
                "violator": pv(self.violator), "worst": pv(self.worst)}


def _pair(point, space) -> DualPair:
    if isinstance(point, DualPair):
        return point
    x, xs = point
    return DualPair(space.check(x), space.check(xs, "dual vector"))


def polar_membership(A: SampledGraph, point, tol: float = 0.0) -> PolarQuery:
    """Exact check of ``<s - x, s* - x*> >= -tol`` over every sample."""
    if len(A) == 0:
        raise ValueError("empty sample")
    p = _pair(point, A.space)
    vals = np.atleast_1d(pairing(A.X - p.x, A.XS - p.xstar))
    bad = np.flatnonzero(vals < -tol)
    if len(bad) == 0:
        return PolarQuery(p, True)
    i, k = int(bad[0]), int(np.argmin(vals))
    return PolarQuery(p, False, ((A.X[i], A.XS[i]), float(vals[i])),
                      ((A.X[k], A.XS[k]), float(vals[k])))


def cell_centers(box, grid_n) -> tuple[np.ndarray, np.ndarray]:
    """Centres of a ``grid_n`` x ``grid_n`` (or ``(nx, nx*)``) cell grid on ``[x-range] x [x*-range]``."""
    (xlo, xhi), (slo, shi) = box
    nx, ns = (grid_n, grid_n) if np.isscalar(grid_n) else grid_n
    xs = xlo + (np.arange(nx) + 0.5) * (xhi - xlo) / nx
    ss = slo + (np.arange(ns) + 0.5) * (shi - slo) / ns
    return xs, ss


def _polar_mask_brute(sx, ss, P, PS, tol):
    out = np.empty(len(P), dtype=bool)
    for lo in range(0, len(P), CHUNK):
        p, ps = P[lo:lo + CHUNK, None], PS[lo:lo + CHUNK, None]
        out[lo:lo + CHUNK] = np.min((sx[None, :] - p) * (ss[None, :] - ps), axis=1) >= -tol
    return out


def _polar_mask(A: SampledGraph, P: np.ndarray, PS: np.ndarray, tol: float) -> np.ndarray:
    """Polar membership of many 1-D points ``(P[i], PS[i])`` at once.

    (x, x*) is in the polar iff every sample right of x has s* >= x* and every
    sample left of x has s* <= x*; sorted prefix maxima and suffix minima give
    the verdict.  Points within 1e-9 of either threshold, or within 1e-6 of a
    sample in x, are re-checked pair by pair so the tolerance is honoured exactly.
    """
    sx, ss = A.X[:, 0], A.XS[:, 0]
    order = np.argsort(sx, kind="stable")
    xs_sorted, s_sorted = sx[order], ss[order]
    pre_max = np.maximum.accumulate(s_sorted)
    suf_min = np.minimum.accumulate(s_sorted[::-1])[::-1]
    left = np.searchsorted(xs_sorted, P, side="left")  # samples with s < x
    right = np.searchsorted(xs_sorted, P, side="right")  # samples with s > x start here
    lmax = np.where(left > 0, pre_max[np.maximum(left - 1, 0)], -np.inf)
    rmin = np.where(right < len(sx), suf_min[np.minimum(right, len(sx) - 1)], np.inf)
    out = (lmax <= PS) & (rmin >= PS)
    close = (np.abs(lmax - PS) <= 1e-9) | (np.abs(rmin - PS) <= 1e-9)
    # a sample whose x nearly equals the query's makes the pairing tiny, so tol decides
    near = np.minimum(np.abs(xs_sorted[np.maximum(left - 1, 0)] - P),
                      np.abs(xs_sorted[np.minimum(right, len(sx) - 1)] - P))
    close |= (near > 0) & (near <= 1e-6)
    if np.any(close):
        out[close] = _polar_mask_brute(sx, ss, P[close], PS[close], tol)
    return out


@dataclass
class PolarRegion:
    box: tuple
    xs: np.ndarray
    xstars: np.ndarray
    inside: np.ndarray  # (len(xs), len(xstars)) boolean

    @property
    def count(self) -> int:
        return int(self.inside.sum())

    @property
    def cell_diagonal(self) -> float:
        hx = (self.box[0][1] - self.box[0][0]) / len(self.xs)
        hs = (self.box[1][1] - self.box[1][0]) / len(self.xstars)
        return float(np.hypot(hx, hs))

    def points(self) -> np.ndarray:
        i, k = np.nonzero(self.inside)
        return np.stack([self.xs[i], self.xstars[k]], axis=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "xstar", "in"])
        for i, x in enumerate(self.xs):
            for k, s in enumerate(self.xstars):
                w.writerow([repr(float(x)), repr(float(s)), int(self.inside[i, k])])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"box": [list(map(float, b)) for b in self.box], "grid": [len(self.xs), len(self.xstars)],
                "in_count": self.count, "cells": int(self.inside.size)}


def polar_region(A: SampledGraph, box=((-10.0, 10.0), (-2.0, 2.0)), grid_n=400,
                 tol: float = REGION_TOL) -> PolarRegion:
    """Polar verdict at every cell centre of a grid on ``R x R``."""
    if A.space.dim != 1:
        raise ValueError("region mode needs dimension one; use polar_membership pointwise")
    if len(A) == 0:
        raise ValueError("empty sample")
    box = (tuple(map(float, box[0])), tuple(map(float, box[1])))
    xs, ss = cell_centers(box, grid_n)
    X, S = np.meshgrid(xs, ss, indexing="ij")
    mask = _polar_mask(A, X.ravel(), S.ravel(), tol).reshape(X.shape)
    return PolarRegion(box, xs, ss, mask)


@dataclass
class MonotoneResult:
    monotone: bool
    pair: tuple | None = None  # ((s1, s1*), (s2, s2*))
    value: float | None = None

    def __bool__(self):
        return self.monotone

    def to_json(self) -> dict:
        pair = None if self.pair is None else [[a.tolist() for a in p] for p in self.pair]
        return {"monotone": self.monotone, "pair": pair, "value": self.value}


def is_monotone(A: SampledGraph, tol: float = 0.0) -> MonotoneResult:
    """Pairwise ``<s1 - s2, s1* - s2*> >= -tol``; reports the first violating pair."""
    X, XS = A.X, A.XS
    for lo in range(0, len(A), 256):
        dx = X[lo:lo + 256, None, :] - X[None, :, :]
        ds = XS[lo:lo + 256, None, :] - XS[None, :, :]
        v = np.sum(dx * ds, axis=-1)
        bad = np.argwhere(v < -tol)
        if len(bad):
            i, k = bad[0]
            i += lo
            return MonotoneResult(False, ((X[i], XS[i]), (X[k], XS[k])), float(v[i - lo, k]))
    return MonotoneResult(True)


def _graph_distance(A: OperatorGraph, G: SampledGraph, P: np.ndarray, PS: np.ndarray) -> np.ndarray:
    """Product-norm distance from each 1-D point to the graph.

    For analytic operators each sampled x contributes its whole image interval,
    so vertical segments (kinks) are measured exactly.
    """
    if isinstance(A, AnalyticOperator):
        xs = np.unique(G.X[:, 0])
        imgs = [A.image([x])[:, 0] for x in xs]
        lo = np.array([i.min() for i in imgs])
        hi = np.array([i.max() for i in imgs])
    else:
        xs, lo, hi = G.X[:, 0], G.XS[:, 0], G.XS[:, 0]
    out = np.empty(len(P))
    for a in range(0, len(P), CHUNK):
        p, ps = P[a:a + CHUNK, None], PS[a:a + CHUNK, None]
        dd = np.maximum(lo[None, :] - ps, 0.0) + np.maximum(ps - hi[None, :], 0.0)
        out[a:a + CHUNK] = np.min(np.hypot(xs[None, :] - p, dd), axis=1)
    return out


@dataclass
class MaximalityReport:
    box: tuple
    grid: int
    delta: float
    polar_count: int
    violations: list = field(default_factory=list)  # [(x, x*, distance)]

    @property
    def consistent_with_maximal(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"box": [list(map(float, b)) for b in self.box], "grid": self.grid, "delta": self.delta,
                "polar_count": self.polar_count, "violation_count": len(self.violations),
                "violations": [list(map(float, v)) for v in self.violations[:50]],
                "consistent_with_maximal": self.consistent_with_maximal}


def _sampled(A: OperatorGraph, box, budget: int, margin: float) -> SampledGraph:
    if isinstance(A, SampledGraph):
        return A
    (xlo, xhi), _ = box
    width = xhi - xlo
    return graph_sample(A, budget, box=(xlo - margin * width, xhi + margin * width))


def maximality_audit(A: OperatorGraph, box=((-2.0, 2.0), (-2.0, 2.0)), grid_n: int = 81,
                     delta: float | None = None, budget: int = 1601,
                     margin: float = 0.5) -> MaximalityReport:
    """Polar grid points farther than ``delta`` from the graph (evidence of non-maximality).

    Analytic operators are sampled on the x-range widened by ``margin`` on
    each side.  ``delta`` defaults to twice the cell diagonal.
    """
    if A.space.dim != 1:
        raise ValueError("maximality audit works in dimension one")
    G = _sampled(A, box, budget, margin)
    mono = is_monotone(G, MONOTONE_TOL)
    if not mono:
        raise NonMonotoneError(f"graph is not monotone: pairing {mono.value:.3g}", mono.pair)
    region = polar_region(G, box, grid_n)
    if delta is None:
        delta = 2.0 * region.cell_diagonal
    pts = region.points()
    d = _graph_distance(A, G, pts[:, 0], pts[:, 1]) if len(pts) else np.zeros(0)
    far = d > delta
    viol = [(float(p[0]), float(p[1]), float(dist)) for p, dist in zip(pts[far], d[far])]
    return MaximalityReport(region.box, grid_n, float(delta), len(pts), viol)


@dataclass
class ClosureReport:
    eps: float
    bound: float
    polar_count: int
    certified: int
    violations: list = field(default_factory=list)  # [(x, x*, distance, gap)]

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"eps": self.eps, "bound": self.bound, "polar_count": self.polar_count,
                "certified": self.certified, "violations": self.violations[:50],
                "passed": self.passed}


def closure_check(A: OperatorGraph, eps: float, box=((-2.0, 2.0), (-2.0, 2.0)), grid_n: int = 81,
                  budget: int = 1601, margin: float = 0.5) -> ClosureReport:
    """Polar points certified at level eps must lie near the graph.

    For each polar grid point (x, x*) the best sample (s, s*) by
    ``rl(s - x, s* - x*)`` is found; when that gap is below eps the point is
    certified and must be within ``sqrt(2 eps) + cell diagonal`` of a sample
    in the product norm.
    """
    if A.space.dim != 1:
        raise ValueError("closure check works in dimension one")
    G = _sampled(A, box, budget, margin)
    region = polar_region(G, box, grid_n)
    bound = float(np.sqrt(2.0 * eps) + region.cell_diagonal)
    pts = region.points()
    sx, ss = G.X[:, 0], G.XS[:, 0]
    certified, viol = 0, []
    for a in range(0, len(pts), CHUNK):
        p, ps = pts[a:a + CHUNK, 0:1], pts[a:a + CHUNK, 1:2]
        gaps = rl(G.space, (sx[None, :] - p)[..., None], (ss[None, :] - ps)[..., None])
        best = np.min(gaps, axis=1)
        dist = np.min(np.hypot(sx[None, :] - p, ss[None, :] - ps), axis=1)
        ok = best < eps
        certified += int(ok.sum())
        for q, qs, dd, g in zip(p[ok, 0], ps[ok, 0], dist[ok], best[ok]):
            if dd > bound:
                viol.append((float(q), float(qs), float(dd), float(g)))
    return ClosureReport(float(eps), bound, len(pts), certified, viol)


ROCKAFELLAR_CORPUS = ("abs(x1)", "0.5*x1^2", "max(x1, 0)", "abs(x1) + 0.5*x1^2")


def rockafellar_desk_check(engine: str = "piecewise", corpus=ROCKAFELLAR_CORPUS,
                           **audit_kw) -> dict:
    """Maximality audit of the subdifferential of each convex function in the corpus."""
    out = {}
    for text in corpus:
        f = parse_func(text, convex=True)
        out[text] = maximality_audit(subdiff_operator(engine, f, NormedSpace(1)), **audit_kw)
    return out

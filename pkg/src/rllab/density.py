"""r_L-density certificates and refutations, Minty range checks, hyperdense range.

A certificate lists, for each requested tolerance eps, a graph point (s, s*)
with ``rl(s - y, s* - y*) < eps``.  A refutation records the smallest gap
found over a box; it is grid evidence, not a proof.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr
from .funcspec import (DEFAULT_BOX, DownsideCertificate, ScalarFunc, near_minimizer_radius,
                       theorem3_bound, verify_downside)
from .geometry import DualPair, NormedSpace, dual_norm, duality_map, norm, rl
from .operators import (AnalyticOperator, OperatorGraph, SampledGraph, decompose_shifted,
                        diagonal_ladder, range_residual, shift_plus_J, solve_affine)
from .search import as_box, intersect, minimize_box
from .subdiff import find_kinks_1d, subdiff_at
from .varprinciples import RecoveryError, br_project_convex_j, ekeland_point

EPS_SCHEDULE = (1e-2, 1e-4, 1e-6)
SLACK_STEP = 1e-7
RECOVERY_TOL = 1e-8


@dataclass
class Witness:
    eps: float
    pair: DualPair
    gap: float

    def to_json(self) -> dict:
        return {"eps": self.eps, "s": self.pair.x.tolist(), "sstar": self.pair.xstar.tolist(),
                "gap": self.gap}


@dataclass
class DensityCertificate:
    target: DualPair
    witnesses: list
    stable_bound: float | None = None
    method: str = "search"
    details: dict = field(default_factory=dict)
    space: NormedSpace | None = None

    kind = "certificate"

    @property
    def final_gap(self) -> float:
        return self.witnesses[-1].gap

    @property
    def gaps_nonincreasing(self) -> bool:
        g = [w.gap for w in self.witnesses]
        return all(a >= b for a, b in zip(g, g[1:]))

    def within_stable_bound(self) -> bool:
        if self.stable_bound is None:
            return True
        space = self.space or NormedSpace(len(self.target.x))
        y, ys = self.target.x, self.target.xstar
        return all(norm(space, w.pair.x - y) <= self.stable_bound
                   and dual_norm(space, w.pair.xstar - ys) <= self.stable_bound
                   for w in self.witnesses)

    def to_json(self) -> dict:
        return {"kind": self.kind, "method": self.method, "target": self.target.to_json(),
                "witnesses": [w.to_json() for w in self.witnesses],
                "stable_bound": self.stable_bound, "details": self.details}


@dataclass
class RefutationReport:
    """Smallest gap over a box, minus interpolation slack.  Evidence over the box only."""

    target: DualPair
    box: tuple
    delta: float
    best_gap: float
    slack: float
    best_pair: DualPair
    failed_eps: float
    resolution: int

    kind = "refutation"
    note = "grid evidence over the stated box; not a proof"

    def to_json(self) -> dict:
        return {"kind": self.kind, "target": self.target.to_json(),
                "box": [list(map(float, self.box[0])), list(map(float, self.box[1]))],
                "delta": self.delta, "best_gap": self.best_gap, "slack": self.slack,
                "best_pair": self.best_pair.to_json(), "failed_eps": self.failed_eps,
                "resolution": self.resolution, "note": self.note}


def as_target(target, space: NormedSpace) -> DualPair:
    if isinstance(target, DualPair):
        y, ys = target.x, target.xstar
    else:
        y, ys = target
    return DualPair(space.check(y), space.check(ys, "dual vector"))


# -- best-witness search --------------------------------------------------------

def _best_member(space, img, xminus, ystar):
    """Member of ``img`` minimising ``rl(x - y, . - y*)``; hull-clipped in dimension one."""
    if space.dim == 1 and space.hilbert:
        ideal = ystar - space.w * xminus
        return np.clip(ideal, img.min(axis=0), img.max(axis=0))
    gaps = rl(space, np.broadcast_to(xminus, img.shape), img - ystar)
    return img[int(np.argmin(gaps))]


def gap_profile(A: AnalyticOperator, target: DualPair):
    """``x -> min over S(x) of rl(x - y, s* - y*)`` (vectorised) and the matching selector."""
    space = A.space
    y, ys = target.x, target.xstar

    def select(x):
        img = A.image(x)
        if len(img) == 0:
            return None
        return _best_member(space, img, x - y, ys)

    def phi(X):
        if A.vectorized is not None:
            vals = rl(space, X - y, A.image_many(X) - ys)
            if A.domain is not None:
                inside = np.all((X >= A.domain[0]) & (X <= A.domain[1]), axis=1)
                vals = np.where(inside, vals, np.inf)
            return vals
        out = np.empty(len(X))
        for i, x in enumerate(X):
            s = select(x)
            out[i] = np.inf if s is None else rl(space, x - y, s - ys)
        return out

    return phi, select


def witness_path(A: OperatorGraph, target: DualPair, box=None, budget: int = 2001):
    """Search for graph points close to the target in the r_L sense.

    Returns ``(path, slack, box)`` where ``path`` lists ``(s, s*, gap)`` with
    decreasing gaps, ending at the best point found, and ``slack`` bounds how
    much the gap could drop between checked points near the best one.
    """
    space = A.space
    b = as_box(box if box is not None else DEFAULT_BOX, space.dim)
    if isinstance(A, SampledGraph):
        if len(A) == 0:
            raise ValueError("empty graph")
        gaps = rl(space, A.X - target.x, A.XS - target.xstar)
        gaps = np.atleast_1d(gaps)
        # descending gaps, ties by index; keep each strict improvement
        order = np.lexsort((np.arange(len(gaps)), -gaps))
        path, best = [], np.inf
        for i in order:
            if gaps[i] < best:
                best = gaps[i]
                path.append((A.X[i].copy(), A.XS[i].copy(), float(gaps[i])))
        return path, 0.0, b
    if A.domain is not None:
        b = intersect(b, A.domain)
        if np.any(b[1] < b[0]):
            raise ValueError("operator domain does not meet the search box")
    phi, select = gap_profile(A, target)
    extra = list(A.special_points)
    if A.base is not None and isinstance(A.base, AnalyticOperator):
        extra += list(A.base.special_points)
    res = minimize_box(phi, b, grid_n=budget, extra_points=np.array(extra) if extra else None)
    path = []
    for x, v in res.trajectory:
        path.append((x.copy(), select(x), float(v)))
    x0, v0 = res.x, res.value
    scale = max(1.0, float(np.max(np.abs(np.concatenate(b)))))
    h = SLACK_STEP * scale
    nbrs = np.clip(np.concatenate([x0 + h * np.eye(space.dim), x0 - h * np.eye(space.dim)]), *b)
    nv = phi(nbrs)
    nv = nv[np.isfinite(nv)]
    slack = float(np.max(np.abs(nv - v0))) if len(nv) else 0.0
    return path, slack, b


def certify_density(A: OperatorGraph, target, eps_schedule=EPS_SCHEDULE, search_box=None,
                    budget: int = 2001):
    """Certificate if every eps in the schedule has a witness, refutation otherwise.

    The witness for eps is the first point along the search path whose gap
    is below eps, so gaps along the certificate never increase.
    """
    space = A.space
    target = as_target(target, space)
    path, slack, b = witness_path(A, target, search_box, budget)
    witnesses = []
    for eps in sorted(eps_schedule, reverse=True):
        hit = next((p for p in path if p[2] < eps), None)
        if hit is None:
            s, ss, best = path[-1]
            return RefutationReport(target, b, best - slack, best, slack, DualPair(s, ss),
                                    float(eps), budget)
        witnesses.append(Witness(float(eps), DualPair(hit[0], hit[1]), hit[2]))
    return DensityCertificate(target, witnesses, method="search",
                              details={"box": [b[0].tolist(), b[1].tolist()], "budget": budget},
                              space=space)


# -- the constructive pipeline for subdifferentials ----------------------------------

def _k_function(space: NormedSpace, y, ystar) -> object:
    """``j(. - y) - <., y*>`` as an expression."""
    weights = space.weights if space.kind == "w2" else None
    return expr.sub(expr.half_norm_sq(space.kind, weights, y), expr.linear_form(ystar))


def recover_subgradient(engine: str, f: ScalarFunc, s, y, ystar, space: NormedSpace):
    """``s*`` in the engine set at s and ``z*`` in J(s - y) minimising ``||s* + z* - y*||_*``."""
    S = subdiff_at(engine, f, s)
    face = duality_map(space, s - y)
    if face.single:
        z = face.vertices[0]
        ss = (np.clip(ystar - z, S.min(axis=0), S.max(axis=0)) if space.dim == 1
              else S[int(np.argmin(dual_norm(space, S + z - ystar)))])
        return ss, z, float(dual_norm(space, ss + z - ystar))
    best = None
    for ss in S:
        z = face.nearest(ystar - ss)
        err = float(dual_norm(space, ss + z - ystar))
        if best is None or err < best[2]:
            best = (ss, z, err)
    return best


def certify_subdiff_density(f: ScalarFunc, engine: str, cert: DownsideCertificate, target,
                            eps_schedule=EPS_SCHEDULE, space: NormedSpace | None = None,
                            box=None, grid_n: int = 2001) -> DensityCertificate:
    """Build witnesses the constructive way, with one norm bound M for all eps.

    Steps per target: k = j(. - y) - <., y*>, m = inf(f + k), M from the
    downside certificate; for each eps pick beta = eps / (4M) (so 2 M beta < eps),
    take a beta/2-minimiser u of f + k, run Ekeland with alpha = 1 and slope
    beta/2, then choose
    s* in the engine set at s with ``||s* + J(s - y) - y*|| <= beta``.
    """
    space = space or NormedSpace(f.dim)
    target = as_target(target, space)
    y, ys = target.x, target.xstar
    b = as_box(box if box is not None else DEFAULT_BOX, f.dim)
    if cert.worst_violation is None:
        cert = verify_downside(f, cert, b, space=space)
    if not cert.valid:
        raise ValueError(f"downside certificate fails: worst violation {cert.worst_violation:.6g}")

    F = ScalarFunc(expr.add(f.ast, _k_function(space, y, ys)), f.dim, f.claimed_convex,
                   f.claimed_lsc, f.domain_box)
    kinks = None
    if f.dim == 1:
        ks = find_kinks_1d(F, b)
        kinks = np.array(ks)[:, None] if ks else None

    # enlarge the box until it holds every point where f + k <= m + 1
    for _ in range(40):
        lo, hi = b if F.domain_box is None else intersect(b, F.domain_box)
        res = minimize_box(F.many, (lo, hi), grid_n=grid_n, extra_points=kinks)
        m = res.value
        radius = near_minimizer_radius(cert, y, ys, m, space)
        need = space.sup_halfwidth(radius)
        if np.all(b[0] <= -need) and np.all(b[1] >= need):
            break
        b = (np.minimum(b[0], -need * 1.01), np.maximum(b[1], need * 1.01))
    else:
        raise RuntimeError("search box did not stabilise around the near-minimisers")
    M = theorem3_bound(cert, y, ys, m, space)

    witnesses, runs = [], []
    for eps in sorted(eps_schedule, reverse=True):
        beta = min(1.0, eps / (4.0 * M))
        # Ekeland runs at beta/2 so grid error in s cannot push recovery past beta
        ek_beta = 0.5 * beta
        u = next(x for x, v in res.trajectory if v <= m + ek_beta)
        ek = ekeland_point(F, u, 1.0, ek_beta, b, grid_n, space)
        s = ek.s
        ss, z, err = recover_subgradient(engine, f, s, y, ys, space)
        if err > beta + RECOVERY_TOL:
            raise RecoveryError(f"no subgradient at s = {s.tolist()} within beta = {beta:.3g} "
                                f"(nearest {err:.3g})", err)
        gap = float(rl(space, s - y, ss - ys))
        runs.append({"eps": eps, "beta": beta, "u": u.tolist(), "recovery_error": err,
                     "primal_ok": bool(norm(space, s - y) <= M - 1.0),
                     "dual_ok": bool(dual_norm(space, ss - ys) <= M),
                     "gap_below_eps": bool(gap < eps), "ekeland": ek.to_json()})
        witnesses.append(Witness(float(eps), DualPair(s, ss), gap))
    return DensityCertificate(target, witnesses, stable_bound=M, method="subdiff_pipeline",
                              details={"m": m, "box": [b[0].tolist(), b[1].tolist()],
                                       "a0": cert.a0, "b0": cert.b0, "c0": cert.c0,
                                       "runs": runs}, space=space)


def pipeline_ok(c: DensityCertificate) -> bool:
    """All proof-chain checks recorded by ``certify_subdiff_density`` hold."""
    return all(r["primal_ok"] and r["dual_ok"] and r["gap_below_eps"] and r["ekeland"]["decrease_ok"]
               for r in c.details["runs"])


# -- Minty (Hilbert mode) -------------------------------------------------------

@dataclass
class MintyResult:
    success: bool
    s: np.ndarray
    sstar: np.ndarray
    residual: float
    rl_gap: float

    def to_json(self) -> dict:
        return {"success": self.success, "s": self.s.tolist(), "sstar": self.sstar.tolist(),
                "residual": self.residual, "rl_gap": self.rl_gap}


def minty_exact(S: OperatorGraph, ystar, box=None, grid_n: int = 2001,
                tol: float = 1e-9) -> MintyResult:
    """Solve ``s* + W s = y*`` with ``s*`` in S(s); success iff the residual is at most tol."""
    s, ss, r = range_residual(S, ystar, box, grid_n)
    space = S.space
    ys = space.check(ystar, "dual vector")
    gap = float(rl(space, s, ss - ys))
    return MintyResult(bool(r <= tol), s, ss, r, gap)


@dataclass
class LadderRow:
    n: int
    preimage_norm: float
    residual: float
    truncation: int | None = None
    truncation_residual_sq: float | None = None

    def to_json(self) -> dict:
        return dict(self.__dict__)


def ladder_target(n: int) -> np.ndarray:
    return 1.0 / np.arange(1, n + 1)


def truncation_residual_sq(n: int, k: int) -> float:
    """``||(S + Id) x - y*||^2`` on the n-truncation when x keeps only the first k ones."""
    L = diagonal_ladder(n)
    x = np.zeros(n)
    x[:k] = 1.0
    d = np.asarray(L.params["plus_identity_diag"])
    r = d * x - ladder_target(n)
    return math.fsum(r * r)


def minty_dense(ns=(10, 100, 1000), truncations=None) -> list:
    """Preimages of ``y* = (1/n)`` under ``S + Id`` for the diagonal ladder at each size.

    With ``truncations`` (one k per size, or None) also reports the squared
    residual when the preimage is cut to its first k coordinates.
    """
    rows = []
    truncations = truncations or [None] * len(ns)
    for n, k in zip(ns, truncations):
        L = diagonal_ladder(n)
        s, _, r = range_residual(L, ladder_target(n))
        row = LadderRow(n, float(norm(L.space, s)), r)
        if k is not None:
            row.truncation = k
            row.truncation_residual_sq = truncation_residual_sq(n, k)
        rows.append(row)
    return rows


# -- hyperdense range -----------------------------------------------------------

@dataclass
class HyperdenseResult:
    success: bool
    witnesses: list  # (eps, t, t*, distance)
    best_distance: float
    M_bound: float

    def to_json(self) -> dict:
        return {"success": self.success, "M_bound": self.M_bound, "best_distance": self.best_distance,
                "witnesses": [{"eps": e, "t": t.tolist(), "tstar": ts.tolist(), "distance": d}
                              for e, t, ts, d in self.witnesses]}


def hyperdense_check(T: OperatorGraph, ystar, M_bound: float, eps_schedule=EPS_SCHEDULE,
                     box=None, grid_n: int = 2001) -> HyperdenseResult:
    """Points t with ``||t|| <= M_bound`` and an image within each eps of y*."""
    space = T.space
    ys = space.check(ystar, "dual vector")
    path = []
    if isinstance(T, SampledGraph):
        ok = norm(space, T.X) <= M_bound
        if np.any(ok):
            X, XS = T.X[ok], T.XS[ok]
            d = np.atleast_1d(dual_norm(space, XS - ys))
            best = np.inf
            for i in np.lexsort((np.arange(len(d)), -d)):
                if d[i] < best:
                    best = d[i]
                    path.append((X[i], XS[i], float(d[i])))
    else:
        if T.matrix is not None:
            t = solve_affine(space, T.matrix, T.offset, ys)
            if norm(space, t) <= M_bound and T.in_domain(t):
                ts = T.matrix @ t + T.offset
                path.append((t, ts, float(dual_norm(space, ts - ys))))
        hw = space.sup_halfwidth(M_bound)
        b = as_box(box if box is not None else (-hw, hw), space.dim)
        b = intersect(b, (-np.full(space.dim, hw), np.full(space.dim, hw)))
        if T.domain is not None:
            b = intersect(b, T.domain)
        if not path or path[-1][2] > 0.0:
            if np.all(b[1] >= b[0]):
                def psi(X):
                    if T.vectorized is not None:
                        v = dual_norm(space, T.image_many(X) - ys)
                    else:
                        v = np.array([np.inf if T.nearest(x, ys) is None
                                      else dual_norm(space, T.nearest(x, ys) - ys) for x in X])
                    return np.where(norm(space, X) <= M_bound, v, np.inf)

                extra = np.array(T.special_points) if T.special_points else None
                res = minimize_box(psi, b, grid_n=grid_n, extra_points=extra)
                for x, v in res.trajectory:
                    if not path or v < path[-1][2]:
                        path.append((x.copy(), T.nearest(x, ys), float(v)))
    if not path:
        return HyperdenseResult(False, [], math.inf, M_bound)
    witnesses = []
    for eps in sorted(eps_schedule, reverse=True):
        hit = next((p for p in path if p[2] < eps), None)
        if hit is None:
            return HyperdenseResult(False, witnesses, path[-1][2], M_bound)
        witnesses.append((float(eps), hit[0], hit[1], hit[2]))
    return HyperdenseResult(True, witnesses, path[-1][2], M_bound)


def density_via_hyperdense(S: AnalyticOperator, y, ystar, eps: float, M: float | None = None,
                           box=None, grid_n: int = 2001, max_doublings: int = 30) -> DensityCertificate:
    """r_L witness for ``(y, y*)`` from the hyperdense range of ``S + J(. - y)``.

    ``beta = eps / (2 (2 (M + ||y||) + 1))``; a point s with ``||s|| <= M`` and
    ``t* in (S + J(. - y))(s)`` within beta of y* splits as ``t* = s* + z*``.
    Without ``M`` the bound is doubled from 1 until the check succeeds.
    """
    space = S.space
    target = as_target((y, ystar), space)
    y, ys = target.x, target.xstar
    T = shift_plus_J(S, y)
    ny = norm(space, y)
    Ms = [M] if M is not None else [2.0**i for i in range(max_doublings + 1)]
    hc = None
    for Mi in Ms:
        beta = 0.5 * eps / (2.0 * (Mi + ny) + 1.0)
        hc = hyperdense_check(T, ys, Mi, (beta,), box, grid_n)
        if hc.success:
            break
    if hc is None or not hc.success:
        raise RecoveryError(f"S + J(. - y) showed no hyperdense witness "
                            f"(best distance {hc.best_distance if hc else math.inf:.3g})",
                            hc.best_distance if hc else math.inf)
    _, s, tstar, dist = hc.witnesses[-1]
    ss, _ = decompose_shifted(T, s, tstar)
    gap = float(rl(space, s - y, ss - ys))
    bounds = {"M": Mi, "beta": beta, "dual_distance": dist,
              "primal_ok": bool(norm(space, s) <= Mi),
              "dual_ok": bool(dual_norm(space, ss) <= Mi + ny + dual_norm(space, ys) + 1.0),
              "gap_below_eps": bool(gap < eps)}
    return DensityCertificate(target, [Witness(float(eps), DualPair(s, ss), gap)],
                              method="hyperdense", details=bounds, space=space)


# -- approximate Minty via the graph difference ---------------------------------------

@dataclass
class DifferencePoint:
    point: DualPair
    distance: float
    witness: DualPair
    gap: float
    t: DualPair

    def to_json(self) -> dict:
        return {"point": self.point.to_json(), "distance": self.distance,
                "witness": self.witness.to_json(), "gap": self.gap, "t": self.t.to_json()}


def approx_minty_difference(A: OperatorGraph, target, eps: float, search_box=None,
                            budget: int = 2001) -> DifferencePoint:
    """A point ``(s - t, s* + t*)`` of ``A - gra(-J)`` within ``sqrt(2 eps)`` of the target.

    Needs a graph point with ``rl(s - y, s* - y*) <= eps``; the graph-of-J pair
    comes from ``br_project_convex_j(s - y, y* - s*, gap)``.
    """
    space = A.space
    target = as_target(target, space)
    path, _, _ = witness_path(A, target, search_box, budget)
    s, ss, gap = path[-1]
    if gap > eps:
        raise ValueError(f"best gap {gap:.6g} exceeds eps = {eps:.6g}; no certified witness")
    u, ustar = s - target.x, target.xstar - ss
    t, tstar = br_project_convex_j(space, u, ustar, gap)
    point = DualPair(s - t, ss + tstar)
    d = float(np.hypot(norm(space, point.x - target.x), dual_norm(space, point.xstar - target.xstar)))
    return DifferencePoint(point, d, DualPair(s, ss), gap, DualPair(t, tstar))
